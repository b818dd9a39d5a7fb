#include "gaugebench/coulomb.hpp"

#include <algorithm>
#include <cmath>

namespace gb {

double codiff_scale(const OneForm& w) {
    const Chart& c = *w.chart;
    double hmin = c.h[0];
    for (int i = 1; i < c.n; ++i) hmin = std::min(hmin, c.h[i]);
    return w.max_abs() / hmin;
}

namespace {

void require_horizontal(const OneForm& w, const Connection& A, double tol, const char* name) {
    double d = interior_max(codiff_A(w, A));
    double s = codiff_scale(w);
    if (d > tol * std::max(s, 1e-300) && d > 1e-300)
        throw Error(ErrorKind::NotHorizontal,
                    std::string(name) + " has interior codifferential " + std::to_string(d) + " (scale " + std::to_string(s) + ")");
}

}  // namespace

Section curvature_form(const OneForm& a, const OneForm& b, const Connection& A, GreenSolve& solve,
                       double horizontal_tol) {
    require_same_chart(a.chart, b.chart);
    require_horizontal(a, A, horizontal_tol, "alpha");
    require_horizontal(b, A, horizontal_tol, "beta");
    Section rhs = bracket_dot(a, b);
    Section R = green_A(rhs, A, solve);
    R *= -2.0;
    return R;
}

Section curvature_form(const OneForm& a, const OneForm& b, const Connection& A, double horizontal_tol) {
    GreenSolve s(A);
    return curvature_form(a, b, A, s, horizontal_tol);
}

IdentityResidual boundary_identity_residual(const OneForm& a, const OneForm& b, const Connection& A,
                                            bool include_corrections) {
    require_same_chart(a.chart, b.chart);
    const Chart& c = *a.chart;
    Section ab = bracket_dot(a, b);
    BoundaryField r = normal_component(d_A(ab, A));
    BoundaryField tr = trace_boundary(ab);
    BoundaryScalar H = is_type_a(c) ? mean_curvature_typeA(a.chart) : mean_curvature_typeB(a.chart);
    const double k = 2.0 * (c.n - 1);
    for (size_t q = 0; q < r.v.size(); ++q) r.v[q] += (k * H.v[q]) * tr.v[q];
    if (include_corrections) {
        BoundaryField da = trace_boundary(codiff_A(a, A)), db = trace_boundary(codiff_A(b, A));
        BoundaryField an = normal_component(a), bn = normal_component(b);
        for (size_t q = 0; q < r.v.size(); ++q)
            r.v[q] += gb::bracket(da.v[q], bn.v[q]) + gb::bracket(an.v[q], db.v[q]);
    }
    IdentityResidual out;
    out.residual = r.max_abs();
    out.bracket_norm = ab.max_abs();
    out.relative = out.bracket_norm > 0.0 ? out.residual / out.bracket_norm : out.residual;
    out.corrected = include_corrections;
    return out;
}

ObstructionResidual obstruction_residual(const OneForm& a, const OneForm& b, const Connection& A,
                                         std::uint64_t reference_seed, GreenSolve& solve) {
    ObstructionResidual out;
    Section R = curvature_form(a, b, A, solve);
    out.solve = solve.last();
    out.curvature_norm = R.max_abs();
    out.t_curvature = boundary_operator_T(R, A).max_abs();
    Section f = random_smooth_field(A.chart, 0, reference_seed, true);
    f *= out.curvature_norm / f.max_abs();
    out.t_reference = boundary_operator_T(f, A).max_abs();
    out.normalized = out.t_reference > 0.0 ? out.t_curvature / out.t_reference : out.t_curvature;
    out.normalizer = out.curvature_norm > 0.0 ? out.t_reference / out.curvature_norm : 0.0;
    return out;
}

GaugeTransformation GaugeTransformation::identity(const ChartPtr& c) {
    GaugeTransformation g;
    g.chart = c;
    g.g.assign(c->nodes, GroupElement::identity());
    g.xi = make_oneform(c);
    return g;
}

GaugeTransformation GaugeTransformation::exponential(const Section& f, double tol) {
    if (f.degree != 0) throw Error(ErrorKind::RankMismatch, "exponential expects a section");
    auto d = check_dbc(f, tol);
    if (!d.ok) throw Error(ErrorKind::DbcViolation, "gauge generator is nonzero on the boundary");
    const Chart& c = *f.chart;
    GaugeTransformation g;
    g.chart = f.chart;
    g.g.resize(c.nodes);
    for (int node = 0; node < c.nodes; ++node) g.g[node] = exp_map(f.v[node]);
    OneForm df = flat_d(f);
    g.xi = make_oneform(f.chart);
    for (int i = 0; i < c.n; ++i)
        for (int node = 0; node < c.nodes; ++node) g.xi.at(i, node) = dexp_left(f.v[node], df.at(i, node));
    return g;
}

GaugeTransformation GaugeTransformation::operator*(const GaugeTransformation& o) const {
    require_same_chart(chart, o.chart);
    GaugeTransformation r;
    r.chart = chart;
    r.g.resize(g.size());
    r.xi = make_oneform(chart);
    const Chart& c = *chart;
    for (int node = 0; node < c.nodes; ++node) {
        r.g[node] = g[node] * o.g[node];
        for (int i = 0; i < c.n; ++i)
            r.xi.at(i, node) = o.g[node].adjoint_inverse(xi.at(i, node)) + o.xi.at(i, node);
    }
    return r;
}

GaugeTransformation GaugeTransformation::inverse() const {
    GaugeTransformation r;
    r.chart = chart;
    r.g.resize(g.size());
    r.xi = make_oneform(chart);
    const Chart& c = *chart;
    for (int node = 0; node < c.nodes; ++node) {
        r.g[node] = g[node].inverse();
        for (int i = 0; i < c.n; ++i) r.xi.at(i, node) = -g[node].adjoint(xi.at(i, node));
    }
    return r;
}

double GaugeTransformation::boundary_defect() const {
    const Chart& c = *chart;
    double m = 0.0;
    for (int q = 0; q < c.boundary_count(); ++q) m = std::max(m, g[c.boundary_node(q)].distance_to_identity());
    return m;
}

Connection gauge_act(const Connection& A, const GaugeTransformation& g) {
    require_same_chart(A.chart, g.chart);
    const Chart& c = *A.chart;
    OneForm eta = make_oneform(A.chart);
    for (int i = 0; i < c.n; ++i)
        for (int node = 0; node < c.nodes; ++node)
            eta.at(i, node) = g.xi.at(i, node) + g.g[node].adjoint_inverse(A.component(i, node));
    return Connection(std::move(eta), true, 1e-10);
}

FreenessReport freeness_check(const Connection& A, const GaugeTransformation& g, double lambda_twisted,
                              double lambda_flat) {
    require_same_chart(A.chart, g.chart);
    const Chart& c = *A.chart;
    // g - e = s I + sum_k z_k e_k with complex s, z_k
    Section re = make_section(A.chart), im = make_section(A.chart);
    Section sc = make_section(A.chart);  // (Re s, Im s, 0)
    Mat2 E[3];
    for (int k = 0; k < 3; ++k) E[k] = to_matrix(Alg::basis(k));
    for (int node = 0; node < c.nodes; ++node) {
        Mat2 M = g.g[node].matrix() - Mat2::Identity();
        std::complex<double> s = M.trace() / 2.0;
        sc.v[node] = Alg(s.real(), s.imag(), 0.0);
        for (int k = 0; k < 3; ++k) {
            std::complex<double> z = (E[k].adjoint() * M).trace();
            re.v[node][k] = z.real();
            im.v[node][k] = z.imag();
        }
    }
    Connection flat = Connection::flat(A.chart);
    auto sq = [](double x) { return x * x; };
    FreenessReport r;
    r.distance = std::sqrt(2.0 * sq(l2_norm(sc)) + sq(l2_norm(re)) + sq(l2_norm(im)));
    r.gradient = std::sqrt(2.0 * sq(l2_norm(d_A(sc, flat))) + sq(l2_norm(d_A(re, A))) + sq(l2_norm(d_A(im, A))));
    r.lambda_twisted = lambda_twisted;
    r.lambda_flat = lambda_flat;
    r.kappa = 1.0 / std::sqrt(std::min(lambda_twisted, lambda_flat));
    r.bound_holds = r.distance <= r.kappa * r.gradient * (1.0 + 1e-9) + 1e-14;
    return r;
}

FreenessReport freeness_check(const Connection& A, const GaugeTransformation& g) {
    double lt = smallest_ritz_value(A, Codiff::adjoint);
    double lf = smallest_ritz_value(Connection::flat(A.chart), Codiff::adjoint);
    return freeness_check(A, g, lt, lf);
}

LoopDefect small_loop_holonomy(const Connection& A, const OneForm& a, const OneForm& b, double epsilon,
                               int steps, const GreenOptions& opt) {
    require_same_chart(a.chart, b.chart);
    require_same_chart(A.chart, a.chart);
    if (steps < 1) throw Error(ErrorKind::ConfigError, "holonomy needs at least one step per edge");
    LoopDefect out;
    out.epsilon = epsilon;
    out.steps = steps;
    {
        GreenSolve s(A, opt);
        out.curvature = curvature_form(a, b, A, s);
        ++out.solves;
    }
    auto project = [&](const OneForm& eta, const OneForm& v) {
        Connection C(eta, false);
        GreenSolve s(C, opt);
        ++out.solves;
        return horizontal_project(v, C, s);
    };
    const OneForm* dirs[4] = {&a, &b, &a, &b};
    const double sign[4] = {1.0, 1.0, -1.0, -1.0};
    const double h = epsilon / steps;
    OneForm eta = A.eta;
    for (int e = 0; e < 4; ++e) {
        OneForm v = sign[e] * OneForm(*dirs[e]);
        for (int s = 0; s < steps; ++s) {
            OneForm k1 = project(eta, v);
            OneForm mid = eta + (0.5 * h) * k1;
            OneForm k2 = project(mid, v);
            eta += h * k2;
        }
    }
    // eta_end = A . g: two vertical log-coordinate corrections
    Connection end(eta, false);
    GaugeTransformation g = GaugeTransformation::identity(A.chart);
    Connection cur = A;
    for (int it = 0; it < 2; ++it) {
        GreenSolve s(cur, opt);
        ++out.solves;
        Section gamma = s.solve(codiff_A(end.eta - cur.eta, cur));
        g = g * GaugeTransformation::exponential(gamma, 1e-12 * std::max(1.0, gamma.max_abs()));
        cur = gauge_act(A, g);
    }
    out.defect = make_section(A.chart);
    for (int node = 0; node < A.chart->nodes; ++node) out.defect.v[node] = log_map(g.g[node]);
    out.defect_norm = out.defect.max_abs();
    return out;
}

}  // namespace gb
