#include "gaugebench/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <random>
#include <sstream>

#include "gaugebench/coulomb.hpp"

namespace gb {

using json = nlohmann::json;

namespace {

const char* kDefaults = R"({
  "domains": {
    "annulus": {"r0": 0.5, "r1": 1.0},
    "slab": {"dims": 2, "length": 6.283185307179586, "height": 1.0},
    "shell": {"r0": 0.5, "r1": 1.0, "length": 6.283185307179586}
  },
  "suites": {
    "boundary-identity": {
      "pairs": 5,
      "cases": [{"domain": "annulus", "grids": [32, 64, 128]},
                {"domain": "slab", "grids": [32, 64, 128]},
                {"domain": "shell", "grids": [16, 24, 32]}],
      "max_relative": 1e-3, "at_grid": 128, "min_order": 1.5, "floor": 1e-11
    },
    "general-identity": {
      "pairs": 5,
      "cases": [{"domain": "annulus", "grids": [32, 64, 128]},
                {"domain": "slab", "grids": [32, 64, 128]},
                {"domain": "shell", "grids": [16, 24, 32]}],
      "max_relative": 1e-3, "at_grid": 128, "min_order": 1.5, "floor": 1e-11
    },
    "obstruction": {
      "cases": [{"domain": "annulus", "grids": [64, 128]}],
      "max_normalized": 2e-2, "min_normalizer": 0.5, "at_grid": 128
    },
    "chart-inverse": {
      "cases": [{"domain": "annulus", "grids": [64, 128, 256]},
                {"domain": "slab", "grids": [64, 128, 256]}],
      "profiles": [{"face": 0, "center": 1.0, "half_width": 1.4, "variant": 0},
                   {"face": 1, "center": 3.5, "half_width": 1.4, "variant": 1},
                   {"face": 0, "center": 5.0, "half_width": 1.2, "variant": 2}],
      "max_relative": 1e-3, "at_grid": 128, "min_order": 1.5,
      "max_dbc": 1e-12, "codiff_floor": 1e-10, "min_codiff_order": 1.5
    },
    "interior-inverse": {
      "cases": [{"domain": "annulus", "grids": [64, 128, 256]},
                {"domain": "slab", "grids": [64, 128, 256]}],
      "pieces": 4,
      "targets": [{"component": 2, "center": 2.0, "half_width": 1.4, "normal_half_width": 0.2, "mode": 0},
                  {"component": 0, "center": 0.0, "half_width": 0.0, "normal_half_width": 0.2, "mode": 1}],
      "max_relative": 1e-3, "at_grid": 128, "min_order": 1.5,
      "max_dbc": 1e-12, "codiff_floor": 1e-10, "min_codiff_order": 1.5
    },
    "bracket-identity": {
      "cases": [{"domain": "annulus", "grids": [32, 64, 128]},
                {"domain": "slab", "grids": [32, 64, 128]}],
      "max_relative": 5e-3, "at_grid": 128, "min_order": 1.5, "kernel_tol": 1e-8, "floor": 1e-12
    },
    "generator": {
      "cases": [{"domain": "annulus", "data": "outer-constant", "grids": [32, 64, 128]},
                {"domain": "annulus", "data": "generic", "grids": [32, 64, 128]},
                {"domain": "slab", "data": "generic", "grids": [32, 64, 128]}],
      "pieces": 8, "max_relative": 5e-2, "at_grid": 128
    },
    "full-decompose": {
      "cases": [{"domain": "annulus", "grids": [64, 128]}],
      "targets": 3, "max_relative": 5e-2, "at_grid": 128,
      "bump_target": {"center": 2.0, "half_width": 1.4, "min_order": 1.0}
    },
    "mean-curvature": {
      "cases": [{"domain": "annulus", "grids": [32, 64, 128]},
                {"domain": "slab", "grids": [32, 64]},
                {"domain": "shell", "grids": [16, 24, 32]}],
      "max_abs_error": 1e-3, "at_grid": 128, "min_order": 1.5, "max_slab": 1e-12, "floor": 1e-11
    },
    "poincare": {
      "domain": "annulus",
      "spd_grid": 32, "spd_fields": 100,
      "mms_grids": [32, 64, 128], "min_order": 1.5,
      "cg_grid": 64, "cg_tolerance": 1e-10,
      "ritz_grids": [32, 64, 128], "ritz_spread": 0.05,
      "adjoint_grid": 64, "adjoint_tol": 1e-12,
      "expansion_grids": [32, 64, 128]
    },
    "gauge-action": {
      "domain": "annulus", "grid": 32,
      "identity_tol": 1e-12, "dbc_tol": 1e-10, "freeness_samples": 20
    },
    "holonomy": {
      "domain": "annulus", "grid": 24,
      "epsilons": [0.2, 0.1, 0.05, 0.025], "steps": 16,
      "ratio_min": 3.6, "ratio_max": 4.4, "min_cosine": 0.99, "constant_tol": 0.05
    },
    "algebra": {
      "samples": 1000, "jacobi_tol": 1e-14, "invariance_tol": 1e-14,
      "roundtrip_tol": 1e-12, "decompose_tol": 1e-14, "group_tol": 1e-12
    }
  }
})";

double now() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

json number(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

double from_number(const json& j) {
    if (j.is_number()) return j.get<double>();
    std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fmt_short(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

std::uint64_t mix(std::uint64_t base, std::uint64_t k) { return base * 1000003ULL + k; }

OneForm random_connection(const ChartPtr& c, std::uint64_t seed) {
    OneForm e = random_smooth_field(c, 1, seed, true);
    e *= 1.0 / e.max_abs();
    return e;
}

GreenOptions solver_options(const RunConfig& cfg) {
    GreenOptions o;
    o.tolerance = cfg.solver_tolerance;
    return o;
}

struct Case {
    std::string domain;
    std::vector<int> grids;
    json extra;
};

std::vector<Case> cases_of(const RunConfig& cfg, const json& s) {
    std::vector<Case> out;
    for (const auto& c : s.at("cases")) {
        Case k;
        k.domain = c.at("domain").get<std::string>();
        if (!cfg.domain.empty() && cfg.domain != k.domain) continue;
        k.grids = cfg.grids.empty() ? c.at("grids").get<std::vector<int>>() : cfg.grids;
        k.extra = c;
        out.push_back(std::move(k));
    }
    return out;
}

bool has_grid(const std::vector<int>& g, int N) { return std::find(g.begin(), g.end(), N) != g.end(); }

double at_grid(const std::vector<int>& g, const std::vector<double>& v, int N) {
    for (size_t i = 0; i < g.size(); ++i)
        if (g[i] == N) return v[i];
    return std::numeric_limits<double>::quiet_NaN();
}

double max_of(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    return m;
}

double min_of(const std::vector<double>& v) {
    double m = std::numeric_limits<double>::infinity();
    for (double x : v) m = std::min(m, x);
    return m;
}

// value check at the pinned grid (skipped when the grid list omits it) plus median order
void refinement_checks(SuiteRecord& rec, const Study& st, const json& s, const std::string& value_key,
                       const std::string& order_key = "min_order") {
    const int N = s.at("at_grid").get<int>();
    if (has_grid(st.sizes, N))
        rec.checks.push_back(make_check(st.label + " at " + std::to_string(N), at_grid(st.sizes, st.residuals, N), "<=",
                                        s.at(value_key).get<double>()));
    if (st.sizes.size() >= 2)
        rec.checks.push_back(make_check(st.label + " median order", st.median, ">=", s.at(order_key).get<double>()));
}

void decreasing_check(SuiteRecord& rec, const Study& st) {
    if (st.orders.empty()) return;
    rec.checks.push_back(make_check(st.label + " smallest order (decrease)", min_of(st.orders), ">", 0.0));
}

void maybe_dump(const RunConfig& cfg, const std::string& name, const Form& f) {
    if (!cfg.dump_fields) return;
    std::filesystem::path dir = std::filesystem::path(cfg.out_dir) / "fields";
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / (name + ".txt"));
    if (!os) throw Error(ErrorKind::IoError, "cannot write field dump " + name);
    dump_form(os, f, cfg.seed);
}

std::string tag(const std::string& domain, int N) { return domain + "_" + std::to_string(N); }

// ---------------------------------------------------------------------------

void suite_identity(const RunConfig& cfg, const json& s, SuiteRecord& rec, bool horizontal) {
    const int pairs = s.at("pairs").get<int>();
    for (const Case& k : cases_of(cfg, s)) {
        std::vector<double> res;
        for (int N : k.grids) {
            ChartPtr c = make_chart(cfg, k.domain, N);
            Connection A(random_connection(c, mix(cfg.seed, 11)));
            GreenSolve gs(A, solver_options(cfg));
            double worst = 0.0;
            int iterations = 0;
            for (int p = 0; p < pairs; ++p) {
                OneForm a = random_smooth_field(c, 1, mix(cfg.seed, 100 + 2 * p), true);
                OneForm b = random_smooth_field(c, 1, mix(cfg.seed, 101 + 2 * p), true);
                if (horizontal) {
                    a = horizontal_project(a, A, gs);
                    iterations += gs.last().iterations;
                    b = horizontal_project(b, A, gs);
                    iterations += gs.last().iterations;
                }
                worst = std::max(worst, boundary_identity_residual(a, b, A, !horizontal).relative);
                if (p == 0) {
                    maybe_dump(cfg, rec.suite + "_alpha_" + tag(k.domain, N), a);
                    maybe_dump(cfg, rec.suite + "_beta_" + tag(k.domain, N), b);
                }
            }
            res.push_back(worst);
            rec.rows.push_back({{"domain", k.domain},
                                {"grid", N},
                                {"relative_residual", number(worst)},
                                {"solver", horizontal ? gs.last().method : "none"},
                                {"solver_iterations", iterations}});
        }
        Study st = convergence_study(k.domain, k.grids, res, s.at("floor").get<double>());
        refinement_checks(rec, st, s, "max_relative");
        rec.studies.push_back(st);
    }
}

void suite_obstruction(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    const int at = s.at("at_grid").get<int>();
    for (const Case& k : cases_of(cfg, s)) {
        for (int flat = 1; flat >= 0; --flat) {
            std::vector<double> res;
            const std::string label = k.domain + (flat ? " A=0" : " random A");
            for (int N : k.grids) {
                ChartPtr c = make_chart(cfg, k.domain, N);
                Connection A = flat ? Connection::flat(c) : Connection(random_connection(c, mix(cfg.seed, 11)));
                GreenSolve gs(A, solver_options(cfg));
                OneForm a = horizontal_project(random_smooth_field(c, 1, mix(cfg.seed, 100), true), A, gs);
                OneForm b = horizontal_project(random_smooth_field(c, 1, mix(cfg.seed, 101), true), A, gs);
                ObstructionResidual r = obstruction_residual(a, b, A, mix(cfg.seed, 77), gs);
                res.push_back(r.normalized);
                rec.rows.push_back({{"case", label},
                                    {"grid", N},
                                    {"normalized", number(r.normalized)},
                                    {"normalizer", number(r.normalizer)},
                                    {"t_curvature", number(r.t_curvature)},
                                    {"t_reference", number(r.t_reference)},
                                    {"solver", r.solve.method},
                                    {"solver_iterations", r.solve.iterations}});
                if (N == at) {
                    rec.checks.push_back(make_check(label + " normalized at " + std::to_string(N), r.normalized, "<=",
                                                    s.at("max_normalized").get<double>()));
                    rec.checks.push_back(make_check(label + " normalizer at " + std::to_string(N), r.normalizer, ">=",
                                                    s.at("min_normalizer").get<double>()));
                }
            }
            rec.studies.push_back(convergence_study(label, k.grids, res));
        }
    }
}

struct FormQuality {
    double codiff = 0.0;  // interior |d*w| / (|w| / h_min)
    double dbc = 0.0;     // tangential boundary values / |w|
};

void accumulate(FormQuality& q, const OneForm& w) {
    Connection flat = Connection::flat(w.chart);
    const double m = w.max_abs();
    if (m == 0.0) return;
    q.codiff = std::max(q.codiff, interior_max(codiff_A(w, flat)) / codiff_scale(w));
    q.dbc = std::max(q.dbc, check_dbc(w, 0.0).violation / m);
}

void quality_checks(SuiteRecord& rec, const json& s, const std::string& label, const std::vector<int>& grids,
                    const std::vector<double>& codiff, const std::vector<double>& dbc) {
    Study cs = convergence_study(label + " codifferential", grids, codiff, s.at("codiff_floor").get<double>());
    if (grids.size() >= 2)
        rec.checks.push_back(make_check(cs.label + " median order", cs.median, ">=", s.at("min_codiff_order").get<double>()));
    rec.studies.push_back(cs);
    rec.checks.push_back(make_check(label + " DBC violation (relative)", max_of(dbc), "<=", s.at("max_dbc").get<double>()));
}

void suite_chart_inverse(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    const Alg A = Alg::basis(0), B = Alg::basis(1);
    for (const Case& k : cases_of(cfg, s)) {
        int pi = 0;
        for (const auto& p : s.at("profiles")) {
            const int face = p.at("face").get<int>();
            const std::string label = k.domain + " profile " + std::to_string(pi++) + " face " + std::to_string(face);
            std::vector<double> res, codiff, dbc;
            double fngn = 0.0;
            bool support = true;
            for (int N : k.grids) {
                ChartPtr c = make_chart(cfg, k.domain, N);
                ScalarField psi = compatible_profile(c, face, p.at("center").get<double>(),
                                                     p.at("half_width").get<double>(), p.at("variant").get<int>());
                ChartInverse ci = boundary_chart_inverse(psi, A, B, face);
                Section r = bracket_dot(ci.alpha, ci.beta);
                r -= times(psi, gb::bracket(A, B));
                res.push_back(r.max_abs() / psi.max_abs());
                FormQuality q;
                accumulate(q, ci.alpha);
                accumulate(q, ci.beta);
                codiff.push_back(q.codiff);
                dbc.push_back(q.dbc);
                ScalarField Fn = flat_d_axis(ci.F, c->n - 1), Gn = flat_d_axis(ci.G, c->n - 1);
                fngn = std::max(fngn, ci.fn_gn / std::max(Fn.max_abs() * Gn.max_abs(), 1e-300));
                support = support && ci.f_support_ok;
                rec.rows.push_back({{"case", label},
                                    {"grid", N},
                                    {"relative_residual", number(res.back())},
                                    {"codifferential", number(q.codiff)},
                                    {"dbc", number(q.dbc)},
                                    {"compatibility_defect", number(ci.compatibility_defect)},
                                    {"fn_gn", number(ci.fn_gn)},
                                    {"f_support_ok", ci.f_support_ok}});
                maybe_dump(cfg, "chart-inverse_alpha_" + tag(k.domain, N), ci.alpha);
                maybe_dump(cfg, "chart-inverse_beta_" + tag(k.domain, N), ci.beta);
            }
            Study st = convergence_study(label, k.grids, res);
            refinement_checks(rec, st, s, "max_relative");
            rec.studies.push_back(st);
            quality_checks(rec, s, label, k.grids, codiff, dbc);
            rec.checks.push_back(make_check(label + " F_n G_n (relative)", fngn, "<=", 1e-12));
            rec.checks.push_back(make_check(label + " supp F inside window", support ? 1.0 : 0.0, ">=", 1.0));
        }
    }
}

Section interior_target(const ChartPtr& cp, const json& t) {
    const Chart& c = *cp;
    const int na = c.n - 1, Nr = c.N[na];
    const double T = (Nr - 1) * c.h[na], mid = c.lo[na] + 0.5 * T;
    const int comp = t.at("component").get<int>(), mode = t.at("mode").get<int>();
    const double center = t.at("center").get<double>(), hw = t.at("half_width").get<double>();
    const double nhw = t.at("normal_half_width").get<double>() * T;
    Section f = make_section(cp);
    for (int node = 0; node < c.nodes; ++node) {
        double v = bump::bump(c.coord(na, node % Nr), mid, nhw);
        for (int a = 0; a < na; ++a) {
            double x = c.coord(a, c.index_along(node, a));
            double P = c.N[a] * c.h[a];
            v *= mode == 0 ? bump::bump(std::remainder(x - center, P), 0.0, hw)
                           : 1.0 + 0.5 * std::cos(2.0 * 3.14159265358979323846 * (x - center) / P);
        }
        f.v[node][comp] = v;
    }
    return f;
}

void suite_interior_inverse(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    const int pieces = s.at("pieces").get<int>();
    for (const Case& k : cases_of(cfg, s)) {
        int ti = 0;
        for (const auto& t : s.at("targets")) {
            const std::string label = k.domain + " target " + std::to_string(ti++);
            std::vector<double> res, codiff, dbc;
            for (int N : k.grids) {
                ChartPtr c = make_chart(cfg, k.domain, N);
                Section f = interior_target(c, t);
                InteriorInverse ii = interior_inverse(f, pieces);
                res.push_back(ii.residual / f.max_abs());
                FormQuality q;
                for (const auto& p : ii.pairs) {
                    accumulate(q, p.alpha);
                    accumulate(q, p.beta);
                }
                codiff.push_back(q.codiff);
                dbc.push_back(q.dbc);
                rec.rows.push_back({{"case", label},
                                    {"grid", N},
                                    {"relative_residual", number(res.back())},
                                    {"pairs", ii.pairs.size()},
                                    {"cubes", ii.cubes},
                                    {"codifferential", number(q.codiff)},
                                    {"dbc", number(q.dbc)}});
            }
            Study st = convergence_study(label, k.grids, res);
            refinement_checks(rec, st, s, "max_relative");
            rec.studies.push_back(st);
            quality_checks(rec, s, label, k.grids, codiff, dbc);
        }
    }
}

void suite_bracket_identity(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    const double floor = s.at("floor").get<double>();
    for (const Case& k : cases_of(cfg, s)) {
        std::vector<double> inner, bound, inner_random;
        double kernel = 0.0;
        for (int N : k.grids) {
            ChartPtr c = make_chart(cfg, k.domain, N);
            Section g1 = kernel_section(c, mix(cfg.seed, 31)), g2 = kernel_section(c, mix(cfg.seed, 32));
            BracketIdentity r = bracket_identity_check(g1, g2);
            inner.push_back(r.interior / r.interior_scale);
            bound.push_back(r.boundary / r.boundary_scale);
            kernel = std::max(kernel, r.kernel_defect);
            Section q1 = random_smooth_field(c, 0, mix(cfg.seed, 33), true);
            Section q2 = random_smooth_field(c, 0, mix(cfg.seed, 34), true);
            BracketIdentity rr = bracket_identity_check(q1, q2);
            inner_random.push_back(rr.interior / rr.interior_scale);
            rec.rows.push_back({{"domain", k.domain},
                                {"grid", N},
                                {"interior_relative", number(inner.back())},
                                {"boundary_relative", number(bound.back())},
                                {"kernel_defect", number(r.kernel_defect)},
                                {"interior_relative_random", number(inner_random.back())}});
        }
        for (auto [name, v] : {std::pair{"interior", &inner}, std::pair{"boundary", &bound},
                               std::pair{"interior (random, no kernel condition)", &inner_random}}) {
            Study st = convergence_study(k.domain + " " + name, k.grids, *v, floor);
            refinement_checks(rec, st, s, "max_relative");
            rec.studies.push_back(st);
        }
        rec.checks.push_back(make_check(k.domain + " kernel precondition |T0 g| / (|Delta g| / h)", kernel, "<=",
                                        s.at("kernel_tol").get<double>()));
    }
}

void suite_generator(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    GeneratorOptions opt;
    opt.pieces = s.at("pieces").get<int>();
    for (const Case& k : cases_of(cfg, s)) {
        const std::string data = k.extra.at("data").get<std::string>();
        const std::string label = k.domain + " " + data;
        std::vector<double> res;
        double hopf = std::numeric_limits<double>::infinity();
        for (int N : k.grids) {
            ChartPtr c = make_chart(cfg, k.domain, N);
            BoundaryField F{c, std::vector<Alg>(c->boundary_count())};
            if (data == "outer-constant") {
                for (int b = 0; b < c->boundary_count(); ++b)
                    if (c->face_of(b) == 1) F.v[b] = Alg::basis(2);
            } else if (data == "generic") {
                F = boundary_operator_T(random_smooth_field(c, 0, mix(cfg.seed, 41), true), Connection::flat(c));
            } else {
                throw Error(ErrorKind::ConfigError, "unknown generator data '" + data + "'");
            }
            GeneratorResult g = generator_for_boundary_data(F, opt);
            res.push_back(g.residual);
            hopf = std::min(hopf, g.hopf_min);
            rec.rows.push_back({{"case", label},
                                {"grid", N},
                                {"relative_residual", number(g.residual)},
                                {"hopf_min", number(g.hopf_min)},
                                {"hopf_max", number(g.hopf_max)},
                                {"pairs", g.pairs.size()}});
        }
        Study st = convergence_study(label, k.grids, res);
        const int N = s.at("at_grid").get<int>();
        if (has_grid(k.grids, N))
            rec.checks.push_back(make_check(label + " at " + std::to_string(N), at_grid(k.grids, res, N), "<=",
                                            s.at("max_relative").get<double>()));
        decreasing_check(rec, st);
        rec.checks.push_back(make_check(label + " min d(G phi)(nu)", hopf, ">", 0.0));
        rec.studies.push_back(st);
    }
}

// sin(pi xi) bump(theta) e1 with xi the normalized normal coordinate
Section bump_target(const ChartPtr& cp, double center, double hw) {
    const Chart& c = *cp;
    const int na = c.n - 1, Nr = c.N[na];
    Section g = make_section(cp);
    for (int node = 0; node < c.nodes; ++node) {
        double v = std::sin(3.14159265358979323846 * (node % Nr) / (Nr - 1));
        for (int a = 0; a < na; ++a) {
            double x = c.coord(a, c.index_along(node, a)), P = c.N[a] * c.h[a];
            v *= bump::bump(std::remainder(x - center, P), 0.0, hw);
        }
        g.v[node][0] = v;
    }
    for (int q = 0; q < c.boundary_count(); ++q) g.v[c.boundary_node(q)] = Alg();
    return g;
}

void suite_full_decompose(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    const int targets = s.at("targets").get<int>();
    const json& bt = s.at("bump_target");
    for (const Case& k : cases_of(cfg, s)) {
        for (int t = 0; t <= targets; ++t) {
            const bool bump = t == targets;
            const std::string label = k.domain + (bump ? " bump target" : " target " + std::to_string(t));
            std::vector<double> res, bstage, kstage;
            for (int N : k.grids) {
                ChartPtr c = make_chart(cfg, k.domain, N);
                Section g = bump ? bump_target(c, bt.at("center").get<double>(), bt.at("half_width").get<double>())
                                 : random_smooth_field(c, 0, mix(cfg.seed, 51 + t), true);
                DecompositionCertificate cert = full_decompose(g);
                res.push_back(cert.residual);
                bstage.push_back(cert.boundary_stage);
                kstage.push_back(cert.kernel_stage);
                FormQuality q;
                for (const auto& p : cert.horizontal_pairs) {
                    accumulate(q, p.alpha);
                    accumulate(q, p.beta);
                }
                json row = {{"case", label},
                            {"grid", N},
                            {"relative_residual", number(cert.residual)},
                            {"boundary_residual", number(cert.boundary_residual)},
                            {"boundary_stage", number(cert.boundary_stage)},
                            {"kernel_stage", number(cert.kernel_stage)},
                            {"generator_residual", number(cert.generator_residual)},
                            {"compatibility_correction", number(cert.correction)},
                            {"hopf_min", number(cert.hopf_min)},
                            {"commutator_pairs", cert.commutator_pairs.size()},
                            {"horizontal_pairs", cert.horizontal_pairs.size()},
                            {"pair_codifferential", number(q.codiff)},
                            {"pair_dbc", number(q.dbc)},
                            {"chart", cert.chart}};
                if (!bump) row["seed"] = mix(cfg.seed, 51 + t);
                rec.rows.push_back(std::move(row));
                if (t == 0) maybe_dump(cfg, "full-decompose_target_" + tag(k.domain, N), g);
            }
            Study st = convergence_study(label, k.grids, res);
            const int N = s.at("at_grid").get<int>();
            if (has_grid(k.grids, N))
                rec.checks.push_back(make_check(label + " at " + std::to_string(N), at_grid(k.grids, res, N), "<=",
                                                s.at("max_relative").get<double>()));
            decreasing_check(rec, st);
            if (bump)
                rec.checks.push_back(make_check(label + " median order", st.median, ">=", bt.at("min_order").get<double>()));
            rec.studies.push_back(st);
            rec.studies.push_back(convergence_study(label + " boundary stage", k.grids, bstage));
            rec.studies.push_back(convergence_study(label + " kernel stage", k.grids, kstage));
        }
    }
}

// conformal log-polar chart of the annulus: r = exp(rho), g = exp(2 rho) I
ChartPtr log_polar_chart(const DomainSpec& annulus, int N) {
    DomainSpec s;
    s.kind = DomainKind::custom;
    s.dims = 2;
    s.lo = {0.0, std::log(annulus.r0), 0.0};
    s.hi = {2.0 * 3.14159265358979323846, std::log(annulus.r1), 1.0};
    s.periodic = {true, false, false};
    s.metric = [](const Point& p) {
        Eigen::Matrix3d g = Eigen::Matrix3d::Identity();
        g(0, 0) = g(1, 1) = std::exp(2.0 * p[1]);
        return g;
    };
    s.label = "log-polar annulus";
    return build_chart(s, {N});
}

void suite_mean_curvature(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    const double floor = s.at("floor").get<double>();
    for (const Case& k : cases_of(cfg, s)) {
        const DomainSpec spec = domain_spec(cfg, k.domain);
        std::vector<double> errA, errB, agree;
        for (int N : k.grids) {
            ChartPtr c = make_chart(cfg, k.domain, N);
            const int T = c->tangential_count();
            BoundaryScalar HB = mean_curvature_typeB(c);
            std::vector<double> exact(c->boundary_count(), 0.0);
            if (k.domain != "slab") {
                const double m = k.domain == "shell" ? 0.5 : 1.0;
                for (int b = 0; b < c->boundary_count(); ++b)
                    exact[b] = b < T ? m / spec.r0 : -m / spec.r1;
            }
            double eA = 0.0, eB = 0.0;
            const bool typeA = is_type_a(*c);
            BoundaryScalar HA = typeA ? mean_curvature_typeA(c) : HB;
            for (int b = 0; b < c->boundary_count(); ++b) {
                eA = std::max(eA, std::abs(HA.v[b] - exact[b]));
                eB = std::max(eB, std::abs(HB.v[b] - exact[b]));
            }
            errA.push_back(eA);
            errB.push_back(eB);
            json row = {{"domain", k.domain}, {"grid", N}, {"typeA_error", number(eA)}, {"typeB_error", number(eB)},
                        {"typeA_applies", typeA}};
            if (k.domain == "annulus") {
                // Type B on the conformal chart against Type A on the polar chart
                BoundaryScalar HL = mean_curvature_typeB(log_polar_chart(spec, N));
                double d = 0.0;
                for (int b = 0; b < c->boundary_count(); ++b) d = std::max(d, std::abs(HL.v[b] - HA.v[b]));
                agree.push_back(d);
                row["typeA_polar_vs_typeB_logpolar"] = number(d);
            }
            rec.rows.push_back(row);
        }
        const int at = s.at("at_grid").get<int>();
        if (k.domain == "slab") {
            rec.checks.push_back(make_check("slab |H| (Type A)", max_of(errA), "<=", s.at("max_slab").get<double>()));
            rec.checks.push_back(make_check("slab |H| (Type B)", max_of(errB), "<=", s.at("max_slab").get<double>()));
            continue;
        }
        for (auto [name, v] : {std::pair{"Type A", &errA}, std::pair{"Type B", &errB}}) {
            Study st = convergence_study(k.domain + " " + name + " vs exact", k.grids, *v, floor);
            const double thr = s.at("max_abs_error").get<double>();
            if (has_grid(k.grids, at))
                rec.checks.push_back(make_check(st.label + " at " + std::to_string(at), at_grid(k.grids, *v, at), "<=", thr));
            else
                rec.checks.push_back(make_check(st.label + " at finest grid", v->back(), "<=", thr));
            rec.studies.push_back(st);
        }
        if (!agree.empty()) {
            Study st = convergence_study(k.domain + " Type A / Type B agreement", k.grids, agree, floor);
            if (st.sizes.size() >= 2)
                rec.checks.push_back(make_check(st.label + " median order", st.median, ">=", s.at("min_order").get<double>()));
            rec.studies.push_back(st);
        }
    }
}

// u = sin(pi xi) cos(theta) on the annulus, xi = (r - r0) / (r1 - r0); returns Delta u (nonnegative Laplacian)
void annulus_manufactured(const ChartPtr& c, const DomainSpec& spec, Section& u, Section& f) {
    const double pi = 3.14159265358979323846, L = spec.r1 - spec.r0, k = pi / L;
    u = make_section(c);
    f = make_section(c);
    const int Nr = c->N[1];
    for (int node = 0; node < c->nodes; ++node) {
        double th = c->coord(0, node / Nr), r = c->coord(1, node % Nr), x = k * (r - spec.r0);
        double s = std::sin(x), co = std::cos(x);
        double ur = k * co, urr = -k * k * s;
        double val = s * std::cos(th);
        double lap = -(urr + ur / r) * std::cos(th) + s * std::cos(th) / (r * r);
        for (int q = 0; q < 3; ++q) {
            u.v[node][q] = (q + 1) * val;
            f.v[node][q] = (q + 1) * lap;
        }
    }
}

void suite_poincare(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    const std::string dom = cfg.domain.empty() ? s.at("domain").get<std::string>() : cfg.domain;
    const DomainSpec spec = domain_spec(cfg, dom);
    rec.inputs["domain"] = dom;
    // SPD and symmetry of the adjoint form on Dirichlet sections
    {
        const int N = s.at("spd_grid").get<int>(), count = s.at("spd_fields").get<int>();
        ChartPtr c = make_chart(cfg, dom, N);
        for (int flat = 1; flat >= 0; --flat) {
            Connection A = flat ? Connection::flat(c) : Connection(random_connection(c, mix(cfg.seed, 11)));
            double min_ratio = std::numeric_limits<double>::infinity(), sym = 0.0;
            Section prev;
            Section prevL;
            for (int i = 0; i < count; ++i) {
                Section f = random_smooth_field(c, 0, mix(cfg.seed, 1000 + i), true);
                Section L = laplacian_A(f, A, Codiff::adjoint);
                double q = l2_inner(f, L), n2 = l2_inner(f, f);
                min_ratio = std::min(min_ratio, q / n2);
                if (i > 0) {
                    double a = l2_inner(prev, L), b = l2_inner(prevL, f);
                    sym = std::max(sym, std::abs(a - b) / std::max(std::abs(a), 1e-300));
                }
                prev = f;
                prevL = L;
            }
            const std::string label = flat ? "A=0" : "random A";
            rec.checks.push_back(make_check(label + " min <f, Delta f> / <f, f>", min_ratio, ">", 0.0));
            rec.checks.push_back(make_check(label + " symmetry defect", sym, "<=", 1e-12));
            rec.rows.push_back({{"check", "spd"}, {"connection", label}, {"grid", N}, {"min_rayleigh", number(min_ratio)},
                                {"symmetry", number(sym)}});
        }
    }
    // manufactured solution, flat connection
    if (dom == "annulus") {
        auto grids = cfg.grids.empty() ? s.at("mms_grids").get<std::vector<int>>() : cfg.grids;
        std::vector<double> err;
        for (int N : grids) {
            ChartPtr c = make_chart(cfg, dom, N);
            Section u, f;
            annulus_manufactured(c, spec, u, f);
            GreenSolve gs(Connection::flat(c), solver_options(cfg));
            Section x = gs.solve(f);
            err.push_back((x - u).max_abs() / u.max_abs());
            rec.rows.push_back({{"check", "manufactured"}, {"grid", N}, {"relative_error", number(err.back())},
                                {"solver", gs.last().method}, {"iterations", gs.last().iterations}});
        }
        Study st = convergence_study("manufactured solution", grids, err, 1e-12);
        if (grids.size() >= 2)
            rec.checks.push_back(make_check(st.label + " median order", st.median, ">=", s.at("min_order").get<double>()));
        rec.studies.push_back(st);
    }
    // CG on the adjoint form
    {
        const int N = s.at("cg_grid").get<int>();
        ChartPtr c = make_chart(cfg, dom, N);
        Connection A(random_connection(c, mix(cfg.seed, 11)));
        GreenOptions o;
        o.method = GreenOptions::Method::cg;
        o.tolerance = s.at("cg_tolerance").get<double>();
        GreenSolve gs(A, o);
        Section f = random_smooth_field(c, 0, mix(cfg.seed, 5), true);
        Section g = laplacian_A(f, A, Codiff::adjoint);
        bool converged = true;
        double residual = 0.0, err = 0.0;
        int its = 0;
        try {
            Section x = gs.solve(g);
            residual = gs.last().residual;
            its = gs.last().iterations;
            err = (x - f).max_abs() / f.max_abs();
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoConvergence) throw;
            converged = false;
        }
        rec.checks.push_back(make_check("CG converged within the iteration cap", converged ? 1.0 : 0.0, ">=", 1.0));
        rec.checks.push_back(make_check("CG relative residual", residual, "<=", o.tolerance));
        rec.rows.push_back({{"check", "cg"}, {"grid", N}, {"iterations", its}, {"residual", number(residual)},
                            {"solution_error", number(err)}});
    }
    // smallest Ritz value of Delta_0
    {
        auto grids = s.at("ritz_grids").get<std::vector<int>>();
        std::vector<double> lam;
        for (int N : grids) {
            ChartPtr c = make_chart(cfg, dom, N);
            lam.push_back(smallest_ritz_value(Connection::flat(c), Codiff::adjoint, 40, mix(cfg.seed, 7)));
            rec.rows.push_back({{"check", "ritz"}, {"grid", N}, {"lambda_min", number(lam.back())}});
        }
        const double spread = (max_of(lam) - min_of(lam)) / min_of(lam);
        rec.checks.push_back(make_check("Ritz value spread across grids", spread, "<=", s.at("ritz_spread").get<double>()));
        rec.checks.push_back(make_check("smallest Ritz value", min_of(lam), ">", 0.0));
    }
    // adjointness of the adjoint form
    {
        const int N = s.at("adjoint_grid").get<int>();
        ChartPtr c = make_chart(cfg, dom, N);
        Connection A(random_connection(c, mix(cfg.seed, 11)));
        double worst = 0.0;
        for (int i = 0; i < 5; ++i) {
            Section f = random_smooth_field(c, 0, mix(cfg.seed, 200 + i), true);
            OneForm w = random_smooth_field(c, 1, mix(cfg.seed, 300 + i), false);
            double a = l2_inner(d_A(f, A), w), b = l2_inner(f, codiff_A(w, A, Codiff::adjoint));
            worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), 1e-300));
        }
        rec.checks.push_back(make_check("adjointness <d_A f, w> = <f, d_A* w>", worst, "<=", s.at("adjoint_tol").get<double>()));
    }
    // expansion against composition
    {
        auto grids = cfg.grids.empty() ? s.at("expansion_grids").get<std::vector<int>>() : cfg.grids;
        std::vector<double> diff;
        for (int N : grids) {
            ChartPtr c = make_chart(cfg, dom, N);
            Connection A(random_connection(c, mix(cfg.seed, 11)));
            Section f = random_smooth_field(c, 0, mix(cfg.seed, 5), true);
            Section L = laplacian_A(f, A);
            Section E = laplacian_expansion(f, A);
            diff.push_back(interior_max(E - L) / interior_max(L));
            rec.rows.push_back({{"check", "expansion"}, {"grid", N}, {"relative_difference", number(diff.back())}});
        }
        Study st = convergence_study("expansion vs composition", grids, diff, 1e-13);
        if (grids.size() >= 2)
            rec.checks.push_back(make_check(st.label + " median order", st.median, ">=", s.at("min_order").get<double>()));
        rec.studies.push_back(st);
    }
}

double connection_distance(const Connection& a, const Connection& b) { return (a.eta - b.eta).max_abs(); }

void suite_gauge_action(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    const std::string dom = cfg.domain.empty() ? s.at("domain").get<std::string>() : cfg.domain;
    const int N = s.at("grid").get<int>();
    const double tol = s.at("identity_tol").get<double>(), dbc_tol = s.at("dbc_tol").get<double>();
    ChartPtr c = make_chart(cfg, dom, N);
    rec.inputs = {{"domain", dom}, {"grid", N}};
    Connection A(random_connection(c, mix(cfg.seed, 11)));
    auto generator = [&](std::uint64_t seed, double scale) {
        Section f = random_smooth_field(c, 0, seed, true);
        f *= scale / f.max_abs();
        return GaugeTransformation::exponential(f);
    };
    GaugeTransformation g1 = generator(mix(cfg.seed, 61), 1.0), g2 = generator(mix(cfg.seed, 62), 0.7);
    const double scale = std::max(1.0, A.eta.max_abs());
    Connection Ae = gauge_act(A, GaugeTransformation::identity(c));
    Connection A12 = gauge_act(gauge_act(A, g1), g2);
    Connection Ac = gauge_act(A, g1 * g2);
    Connection Ainv = gauge_act(gauge_act(A, g1), g1.inverse());
    rec.checks.push_back(make_check("A . e = A", connection_distance(Ae, A) / scale, "<=", tol));
    rec.checks.push_back(make_check("(A . g1) . g2 = A . (g1 g2)", connection_distance(A12, Ac) / scale, "<=", tol));
    rec.checks.push_back(make_check("(A . g) . g^-1 = A", connection_distance(Ainv, A) / scale, "<=", tol));
    double dbc = 0.0, gdef = 0.0;
    for (const auto* X : {&A12, &Ac, &Ainv}) dbc = std::max(dbc, check_dbc(X->eta, 0.0).violation);
    for (const auto* g : {&g1, &g2}) gdef = std::max(gdef, g->boundary_defect());
    rec.checks.push_back(make_check("DBC of acted connections", dbc, "<=", dbc_tol));
    rec.checks.push_back(make_check("g = e on the boundary", gdef, "<=", dbc_tol));
    // freeness probe
    const int samples = s.at("freeness_samples").get<int>();
    double lt = smallest_ritz_value(A, Codiff::adjoint, 40, mix(cfg.seed, 7));
    double lf = smallest_ritz_value(Connection::flat(c), Codiff::adjoint, 40, mix(cfg.seed, 7));
    int holds = 0;
    double worst_ratio = 0.0;
    for (int i = 0; i < samples; ++i) {
        GaugeTransformation g = generator(mix(cfg.seed, 700 + i), 0.25 + 2.5 * i / std::max(1, samples - 1));
        FreenessReport r = freeness_check(A, g, lt, lf);
        holds += r.bound_holds ? 1 : 0;
        worst_ratio = std::max(worst_ratio, r.distance / (r.kappa * r.gradient));
        rec.rows.push_back({{"check", "freeness"}, {"sample", i}, {"distance", number(r.distance)},
                            {"gradient", number(r.gradient)}, {"kappa", number(r.kappa)}, {"holds", r.bound_holds}});
    }
    rec.inputs["lambda_twisted"] = number(lt);
    rec.inputs["lambda_flat"] = number(lf);
    rec.checks.push_back(make_check("freeness bound holds (samples)", holds, ">=", samples));
    rec.checks.push_back(make_check("worst |g - e| / (kappa |grad g|)", worst_ratio, "<=", 1.0));
}

void suite_holonomy(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    const std::string dom = cfg.domain.empty() ? s.at("domain").get<std::string>() : cfg.domain;
    const int N = s.at("grid").get<int>(), steps = s.at("steps").get<int>();
    ChartPtr c = make_chart(cfg, dom, N);
    rec.inputs = {{"domain", dom}, {"grid", N}, {"steps", steps}};
    Connection A(random_connection(c, mix(cfg.seed, 11)));
    GreenSolve gs(A, solver_options(cfg));
    OneForm a = horizontal_project(random_smooth_field(c, 1, mix(cfg.seed, 100), true), A, gs);
    OneForm b = horizontal_project(random_smooth_field(c, 1, mix(cfg.seed, 101), true), A, gs);
    auto eps = s.at("epsilons").get<std::vector<double>>();
    std::sort(eps.begin(), eps.end(), std::greater<double>());
    std::vector<double> defect, cosine, constant;
    for (double e : eps) {
        LoopDefect L = small_loop_holonomy(A, a, b, e, steps, solver_options(cfg));
        double cv = l2_inner(L.defect, L.curvature) / (l2_norm(L.defect) * l2_norm(L.curvature));
        double k = l2_inner(L.defect, L.curvature) / l2_inner(L.curvature, L.curvature) / (e * e);
        defect.push_back(l2_norm(L.defect));
        cosine.push_back(std::abs(cv));
        constant.push_back(k);
        rec.rows.push_back({{"epsilon", e}, {"defect", number(defect.back())}, {"defect_sup", number(L.defect_norm)},
                            {"signed_cosine", number(cv)}, {"constant", number(k)}, {"solves", L.solves}});
    }
    for (size_t i = 0; i + 1 < eps.size(); ++i) {
        double r = defect[i] / defect[i + 1];
        const std::string lbl = "defect(" + fmt_short(eps[i]) + ") / defect(" + fmt_short(eps[i + 1]) + ")";
        rec.checks.push_back(make_check(lbl, r, ">=", s.at("ratio_min").get<double>()));
        rec.checks.push_back(make_check(lbl, r, "<=", s.at("ratio_max").get<double>()));
    }
    for (size_t i = eps.size() >= 2 ? eps.size() - 2 : 0; i < eps.size(); ++i)
        rec.checks.push_back(make_check("|cos(defect, R)| at eps " + fmt_short(eps[i]), cosine[i], ">=",
                                        s.at("min_cosine").get<double>()));
    // defect / eps^2 = k R with one k for every eps
    if (eps.size() >= 2) {
        const size_t i = eps.size() - 2;
        double dev = std::abs(constant[i] - constant[i + 1]) / std::abs(constant[i + 1]);
        rec.checks.push_back(make_check("constant deviation eps " + fmt_short(eps[i]) + " vs " + fmt_short(eps[i + 1]),
                                        dev, "<=", s.at("constant_tol").get<double>()));
    }
}

void suite_algebra(const RunConfig& cfg, const json& s, SuiteRecord& rec) {
    const int n = s.at("samples").get<int>();
    std::mt19937_64 rng(mix(cfg.seed, 91));
    std::normal_distribution<double> Nd(0.0, 1.0);
    auto rnd = [&] { return Alg(Nd(rng), Nd(rng), Nd(rng)); };
    double jac = 0.0, inv = 0.0, ad = 0.0, rt = 0.0, dec = 0.0, unit = 0.0;
    for (int i = 0; i < n; ++i) {
        Alg x = rnd(), y = rnd(), z = rnd();
        double sc = x.norm() * y.norm() * z.norm();
        Alg j = bracket(x, bracket(y, z)) + bracket(y, bracket(z, x)) + bracket(z, bracket(x, y));
        jac = std::max(jac, j.max_abs() / sc);
        inv = std::max(inv, std::abs(trace_inner(bracket(x, y), z) + trace_inner(y, bracket(x, z))) / sc);
        GroupElement g = exp_map(rnd());
        double dx = trace_inner(g.adjoint(x), g.adjoint(y)) - trace_inner(x, y);
        Alg dbr = g.adjoint(bracket(x, y)) - bracket(g.adjoint(x), g.adjoint(y));
        ad = std::max({ad, std::abs(dx) / (x.norm() * y.norm()), dbr.max_abs() / (x.norm() * y.norm())});
        unit = std::max({unit, g.unitarity_defect(), g.det_defect()});
        // stay away from the cut locus |x| = pi sqrt 2
        Alg w = x;
        w *= 3.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng) / std::max(x.norm(), 1e-300);
        rt = std::max(rt, (log_map(exp_map(w)) - w).max_abs());
        Alg r = reconstruct(commutator_decompose(z)) - z;
        dec = std::max(dec, r.max_abs() / z.norm());
    }
    rec.inputs = {{"samples", n}};
    rec.checks.push_back(make_check("Jacobi identity (relative)", jac, "<=", s.at("jacobi_tol").get<double>()));
    rec.checks.push_back(make_check("ad-invariance of the trace form (relative)", inv, "<=", s.at("invariance_tol").get<double>()));
    rec.checks.push_back(make_check("Ad(g) preserves inner product and bracket", ad, "<=", s.at("group_tol").get<double>()));
    rec.checks.push_back(make_check("exp(x) unitary with det 1", unit, "<=", s.at("group_tol").get<double>()));
    rec.checks.push_back(make_check("log(exp(x)) = x for |x| <= 3", rt, "<=", s.at("roundtrip_tol").get<double>()));
    rec.checks.push_back(make_check("commutator_decompose reconstruction", dec, "<=", s.at("decompose_tol").get<double>()));
}

using SuiteFn = void (*)(const RunConfig&, const json&, SuiteRecord&);

struct SuiteEntry {
    const char* name;
    SuiteFn fn;
};

const std::vector<SuiteEntry>& registry() {
    static const std::vector<SuiteEntry> r = {
        {"boundary-identity", [](const RunConfig& c, const json& s, SuiteRecord& r) { suite_identity(c, s, r, true); }},
        {"general-identity", [](const RunConfig& c, const json& s, SuiteRecord& r) { suite_identity(c, s, r, false); }},
        {"obstruction", suite_obstruction},
        {"chart-inverse", suite_chart_inverse},
        {"interior-inverse", suite_interior_inverse},
        {"bracket-identity", suite_bracket_identity},
        {"generator", suite_generator},
        {"full-decompose", suite_full_decompose},
        {"mean-curvature", suite_mean_curvature},
        {"poincare", suite_poincare},
        {"gauge-action", suite_gauge_action},
        {"holonomy", suite_holonomy},
        {"algebra", suite_algebra},
    };
    return r;
}

}  // namespace

const json& default_settings() {
    static const json j = json::parse(kDefaults);
    return j;
}

RunConfig default_config() {
    RunConfig c;
    c.settings = default_settings();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::IoError, "cannot open config " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, path + ": " + e.what());
    }
    RunConfig c = default_config();
    try {
        if (j.contains("domain")) c.domain = j["domain"].get<std::string>();
        if (j.contains("grids")) c.grids = j["grids"].get<std::vector<int>>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("suites")) c.suites = j["suites"].get<std::vector<std::string>>();
        if (j.contains("jobs")) c.jobs = j["jobs"].get<int>();
        if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
        if (j.contains("format")) c.format = j["format"].get<std::string>();
        if (j.contains("dump_fields")) c.dump_fields = j["dump_fields"].get<bool>();
        if (j.contains("solver_tolerance")) c.solver_tolerance = j["solver_tolerance"].get<double>();
        if (j.contains("settings")) c.settings.merge_patch(j["settings"]);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, path + ": " + e.what());
    }
    validate(c);
    return c;
}

void validate(const RunConfig& c) {
    const auto& names = suite_names();
    for (const auto& s : c.suites.value_or(std::vector<std::string>{}))
        if (std::find(names.begin(), names.end(), s) == names.end())
            throw Error(ErrorKind::ConfigError, "unknown suite '" + s + "'");
    for (size_t i = 1; i < c.grids.size(); ++i)
        if (c.grids[i] <= c.grids[i - 1]) throw Error(ErrorKind::ConfigError, "grid sizes must be strictly increasing");
    if (c.grids.size() == 1) throw Error(ErrorKind::ConfigError, "convergence suites need at least two grid sizes");
    if (c.jobs < 1) throw Error(ErrorKind::ConfigError, "jobs must be positive");
    if (c.format != "json" && c.format != "csv" && c.format != "text")
        throw Error(ErrorKind::ConfigError, "format must be json, csv or text");
    if (!c.domain.empty() && c.domain != "annulus" && c.domain != "slab" && c.domain != "shell")
        throw Error(ErrorKind::ConfigError, "unknown domain '" + c.domain + "'");
    if (!(c.solver_tolerance > 0.0)) throw Error(ErrorKind::ConfigError, "solver tolerance must be positive");
    for (const auto& [name, s] : c.settings.at("suites").items()) {
        if (!s.contains("cases")) continue;
        for (const auto& k : s["cases"]) {
            auto g = k.at("grids").get<std::vector<int>>();
            if (g.size() < 2) throw Error(ErrorKind::ConfigError, name + ": at least two grid sizes per case");
            for (size_t i = 1; i < g.size(); ++i)
                if (g[i] <= g[i - 1]) throw Error(ErrorKind::ConfigError, name + ": grids must be strictly increasing");
        }
    }
}

DomainSpec domain_spec(const RunConfig& cfg, const std::string& name) {
    const json& d = cfg.settings.at("domains");
    if (!d.contains(name)) throw Error(ErrorKind::ConfigError, "no settings for domain '" + name + "'");
    const json& p = d.at(name);
    switch (parse_domain(name)) {
        case DomainKind::annulus: return DomainSpec::annulus(p.at("r0").get<double>(), p.at("r1").get<double>());
        case DomainKind::slab:
            return DomainSpec::slab(p.at("dims").get<int>(), p.at("length").get<double>(), p.at("height").get<double>());
        case DomainKind::shell:
            return DomainSpec::shell(p.at("r0").get<double>(), p.at("r1").get<double>(), p.at("length").get<double>());
        default: throw Error(ErrorKind::ConfigError, "domain '" + name + "' is not configurable");
    }
}

ChartPtr make_chart(const RunConfig& cfg, const std::string& domain, int grid) {
    return build_chart(domain_spec(cfg, domain), {grid});
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& e : registry()) v.push_back(e.name);
        return v;
    }();
    return names;
}

Study convergence_study(const std::string& label, const std::vector<int>& sizes, const std::vector<double>& residuals,
                        double floor) {
    if (sizes.size() != residuals.size()) throw Error(ErrorKind::ConfigError, "study sizes and residuals differ in length");
    if (sizes.size() < 2) throw Error(ErrorKind::ConfigError, "a convergence study needs at least two sizes");
    Study st;
    st.label = label;
    st.sizes = sizes;
    st.residuals = residuals;
    for (size_t i = 0; i + 1 < sizes.size(); ++i) {
        double a = residuals[i], b = residuals[i + 1];
        if (a <= floor && b <= floor) {
            st.orders.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        double o = std::log(std::max(a, floor) / std::max(b, std::max(floor, 1e-300))) /
                   std::log(double(sizes[i + 1]) / sizes[i]);
        st.orders.push_back(o);
    }
    std::vector<double> o = st.orders;
    std::sort(o.begin(), o.end());
    const size_t m = o.size();
    if (m % 2 == 1) {
        st.median = o[m / 2];
    } else {
        double lo = o[m / 2 - 1], hi = o[m / 2];
        st.median = std::isinf(lo) && std::isinf(hi) ? lo : (std::isinf(hi) ? lo : 0.5 * (lo + hi));
    }
    return st;
}

Check make_check(const std::string& name, double value, const std::string& relation, double threshold) {
    Check c{name, value, relation, threshold, false};
    if (relation == "<=") c.pass = value <= threshold;
    else if (relation == ">=") c.pass = value >= threshold;
    else if (relation == ">") c.pass = value > threshold;
    else throw Error(ErrorKind::ConfigError, "unknown relation " + relation);
    return c;
}

bool Report::all_pass() const {
    return std::all_of(suites.begin(), suites.end(), [](const SuiteRecord& s) { return s.pass; });
}

SuiteRecord run_one(const std::string& suite, const RunConfig& cfg) {
    SuiteRecord rec;
    rec.suite = suite;
    const auto& reg = registry();
    auto it = std::find_if(reg.begin(), reg.end(), [&](const SuiteEntry& e) { return suite == e.name; });
    if (it == reg.end()) throw Error(ErrorKind::ConfigError, "unknown suite '" + suite + "'");
    const json& s = cfg.settings.at("suites").at(suite);
    rec.inputs = {{"seed", cfg.seed}, {"settings", s}};
    if (!cfg.grids.empty()) rec.inputs["grids"] = cfg.grids;
    if (!cfg.domain.empty()) rec.inputs["domain"] = cfg.domain;
    const double t0 = now();
    try {
        json extra = json::object();
        std::swap(extra, rec.inputs);
        it->fn(cfg, s, rec);
        for (auto& [k, v] : extra.items())
            if (!rec.inputs.contains(k)) rec.inputs[k] = v;
    } catch (const std::exception& e) {
        rec.error = e.what();
    }
    rec.seconds = now() - t0;
    rec.pass = rec.error.empty() && !rec.checks.empty() &&
               std::all_of(rec.checks.begin(), rec.checks.end(), [](const Check& c) { return c.pass; });
    return rec;
}

Report run_suite(const RunConfig& cfg) {
    validate(cfg);
    std::vector<std::string> selected;
    for (const auto& name : suite_names())
        if (!cfg.suites || std::find(cfg.suites->begin(), cfg.suites->end(), name) != cfg.suites->end())
            selected.push_back(name);
    Report r;
    r.suites.resize(selected.size());
    if (cfg.jobs <= 1) {
        for (size_t i = 0; i < selected.size(); ++i) r.suites[i] = run_one(selected[i], cfg);
        return r;
    }
    // bounded pool; results stored by declared position
    std::vector<std::future<void>> running;
    size_t next = 0;
    while (next < selected.size() || !running.empty()) {
        while (next < selected.size() && static_cast<int>(running.size()) < cfg.jobs) {
            const size_t i = next++;
            running.push_back(std::async(std::launch::async, [&, i] { r.suites[i] = run_one(selected[i], cfg); }));
        }
        for (auto f = running.begin(); f != running.end();) {
            if (f->wait_for(std::chrono::milliseconds(20)) == std::future_status::ready) {
                f->get();
                f = running.erase(f);
            } else {
                ++f;
            }
        }
    }
    return r;
}

json to_json(const Report& r, bool timing) {
    json j = json::object();
    j["all_pass"] = r.all_pass();
    json arr = json::array();
    for (const auto& s : r.suites) {
        json js = {{"suite", s.suite}, {"pass", s.pass}, {"error", s.error}, {"inputs", s.inputs}, {"rows", s.rows}};
        if (timing) js["seconds"] = s.seconds;
        json studies = json::array();
        for (const auto& st : s.studies) {
            json o = json::array();
            for (double x : st.orders) o.push_back(number(x));
            json res = json::array();
            for (double x : st.residuals) res.push_back(number(x));
            studies.push_back({{"label", st.label}, {"sizes", st.sizes}, {"residuals", res}, {"orders", o},
                               {"median_order", number(st.median)}});
        }
        js["studies"] = studies;
        json checks = json::array();
        for (const auto& c : s.checks)
            checks.push_back({{"name", c.name}, {"value", number(c.value)}, {"relation", c.relation},
                              {"threshold", number(c.threshold)}, {"pass", c.pass}});
        js["checks"] = checks;
        arr.push_back(js);
    }
    j["suites"] = arr;
    return j;
}

Report report_from_json(const json& j) {
    Report r;
    for (const auto& js : j.at("suites")) {
        SuiteRecord s;
        s.suite = js.at("suite").get<std::string>();
        s.pass = js.at("pass").get<bool>();
        s.error = js.at("error").get<std::string>();
        s.inputs = js.at("inputs");
        s.rows = js.at("rows");
        if (js.contains("seconds")) s.seconds = js.at("seconds").get<double>();
        for (const auto& jst : js.at("studies")) {
            Study st;
            st.label = jst.at("label").get<std::string>();
            st.sizes = jst.at("sizes").get<std::vector<int>>();
            for (const auto& x : jst.at("residuals")) st.residuals.push_back(from_number(x));
            for (const auto& x : jst.at("orders")) st.orders.push_back(from_number(x));
            st.median = from_number(jst.at("median_order"));
            s.studies.push_back(st);
        }
        for (const auto& jc : js.at("checks"))
            s.checks.push_back(Check{jc.at("name").get<std::string>(), from_number(jc.at("value")),
                                     jc.at("relation").get<std::string>(), from_number(jc.at("threshold")),
                                     jc.at("pass").get<bool>()});
        r.suites.push_back(std::move(s));
    }
    return r;
}

std::string format_text(const Report& r) {
    std::ostringstream os;
    for (const auto& s : r.suites) {
        os << (s.pass ? "PASS " : "FAIL ") << s.suite << "  (" << fmt_short(s.seconds) << " s)\n";
        if (!s.error.empty()) os << "    error: " << s.error << "\n";
        for (const auto& c : s.checks)
            os << "    " << (c.pass ? "ok   " : "FAIL ") << c.name << ": " << fmt(c.value) << " " << c.relation << " "
               << fmt(c.threshold) << "\n";
        for (const auto& st : s.studies) {
            os << "    study " << st.label << ":";
            for (size_t i = 0; i < st.sizes.size(); ++i) os << " " << st.sizes[i] << "->" << fmt_short(st.residuals[i]);
            os << "  orders";
            for (double o : st.orders) os << " " << (std::isinf(o) ? std::string("exact") : fmt_short(o));
            os << "\n";
        }
    }
    return os.str();
}

std::string format_csv(const Report& r) {
    std::ostringstream os;
    os << "suite,check,value,relation,threshold,pass\n";
    auto quote = [](const std::string& s) {
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    };
    for (const auto& s : r.suites)
        for (const auto& c : s.checks)
            os << s.suite << "," << quote(c.name) << "," << fmt(c.value) << "," << c.relation << "," << fmt(c.threshold)
               << "," << (c.pass ? 1 : 0) << "\n";
    return os.str();
}

std::string format_studies_csv(const Report& r) {
    std::ostringstream os;
    os << "suite,study,size,residual,order_to_next\n";
    for (const auto& s : r.suites)
        for (const auto& st : s.studies)
            for (size_t i = 0; i < st.sizes.size(); ++i) {
                os << s.suite << ",\"" << st.label << "\"," << st.sizes[i] << "," << fmt(st.residuals[i]) << ",";
                if (i < st.orders.size()) os << fmt(st.orders[i]);
                os << "\n";
            }
    return os.str();
}

std::vector<std::string> emit_report(const Report& r, const std::string& format, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir + ": " + ec.message());
    std::vector<std::pair<std::string, std::string>> files;
    if (format == "json") files.emplace_back("report.json", to_json(r).dump(2) + "\n");
    else if (format == "csv") {
        files.emplace_back("report.csv", format_csv(r));
        files.emplace_back("studies.csv", format_studies_csv(r));
    } else if (format == "text") files.emplace_back("report.txt", format_text(r));
    else throw Error(ErrorKind::ConfigError, "format must be json, csv or text");
    std::vector<std::string> paths;
    for (const auto& [name, body] : files) {
        std::filesystem::path p = std::filesystem::path(out_dir) / name;
        std::ofstream os(p);
        if (!os || !(os << body)) throw Error(ErrorKind::IoError, "cannot write " + p.string());
        paths.push_back(p.string());
    }
    return paths;
}

}  // namespace gb
