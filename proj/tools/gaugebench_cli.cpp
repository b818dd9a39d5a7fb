#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gaugebench/harness.hpp"

using namespace gb;
using nlohmann::json;

namespace {

struct Flags {
    std::string config;
    std::uint64_t seed = 0;
    std::vector<int> grids;
    std::string domain;
    int jobs = 0;
    std::string out;
    std::string format;
    bool dump_fields = false;
    std::vector<std::string> suites;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
    app->add_option("--seed", f.seed, "base seed");
    app->add_option("--grid", f.grids, "grid size(s), comma-separated or repeated")->delimiter(',');
    app->add_option("--domain", f.domain, "annulus | slab | shell")
        ->check(CLI::IsMember({"annulus", "slab", "shell"}));
    app->add_option("--jobs", f.jobs, "suites run concurrently")->check(CLI::PositiveNumber);
    app->add_option("--out", f.out, "output directory");
    app->add_option("--format", f.format, "json | csv | text")->check(CLI::IsMember({"json", "csv", "text"}));
    app->add_flag("--dump-fields", f.dump_fields, "write constructed fields under <out>/fields");
}

RunConfig resolve(const Flags& f, CLI::App* app) {
    RunConfig c = f.config.empty() ? default_config() : load_config(f.config);
    if (app->count("--seed")) c.seed = f.seed;
    if (app->count("--grid")) c.grids = f.grids;
    if (app->count("--domain")) c.domain = f.domain;
    if (app->count("--jobs")) c.jobs = f.jobs;
    if (app->count("--out")) c.out_dir = f.out;
    if (app->count("--format")) c.format = f.format;
    if (f.dump_fields) c.dump_fields = true;
    if (!f.suites.empty()) c.suites = f.suites;
    return c;
}

int single_grid(const RunConfig& c, int fallback) { return c.grids.empty() ? fallback : c.grids.back(); }

std::string single_domain(const RunConfig& c) { return c.domain.empty() ? "annulus" : c.domain; }

void write_json(const RunConfig& c, const std::string& name, const json& j) {
    std::filesystem::create_directories(c.out_dir);
    std::filesystem::path p = std::filesystem::path(c.out_dir) / name;
    std::ofstream os(p);
    if (!os || !(os << j.dump(2) << "\n")) throw Error(ErrorKind::IoError, "cannot write " + p.string());
    std::cout << "wrote " << p.string() << "\n";
}

void dump_field(const RunConfig& c, const std::string& name, const Form& f) {
    std::filesystem::path dir = std::filesystem::path(c.out_dir) / "fields";
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / (name + ".txt"));
    if (!os) throw Error(ErrorKind::IoError, "cannot write " + (dir / name).string());
    dump_form(os, f, c.seed);
}

int cmd_verify(RunConfig c, bool studies_only) {
    Report r = run_suite(c);
    if (studies_only) {
        for (const auto& s : r.suites)
            for (const auto& st : s.studies) {
                std::printf("%s | %s\n", s.suite.c_str(), st.label.c_str());
                for (size_t i = 0; i < st.sizes.size(); ++i) {
                    std::printf("  %6d  %.6e", st.sizes[i], st.residuals[i]);
                    if (i < st.orders.size()) std::printf("  order %.3f", st.orders[i]);
                    std::printf("\n");
                }
                std::printf("  median order %.3f\n", st.median);
            }
    } else {
        std::cout << format_text(r);
    }
    for (const auto& p : emit_report(r, c.format, c.out_dir)) std::cout << "wrote " << p << "\n";
    std::cout << (r.all_pass() ? "ALL PASS" : "FAILURES") << "\n";
    return r.all_pass() ? 0 : 1;
}

int cmd_construct(const RunConfig& c, const std::string& what, int face, double center, double half_width) {
    const std::string dom = single_domain(c);
    const int N = single_grid(c, 128);
    ChartPtr chart = make_chart(c, dom, N);
    json j = {{"construction", what}, {"domain", dom}, {"grid", N}, {"seed", c.seed}};
    bool ok = true;
    if (what == "chart-inverse") {
        ScalarField psi = compatible_profile(chart, face, center, half_width, 0);
        ChartInverse ci = boundary_chart_inverse(psi, Alg::basis(0), Alg::basis(1), face);
        Section r = bracket_dot(ci.alpha, ci.beta);
        r -= times(psi, bracket(Alg::basis(0), Alg::basis(1)));
        double rel = r.max_abs() / psi.max_abs();
        j["relative_residual"] = rel;
        j["compatibility_defect"] = ci.compatibility_defect;
        j["fn_gn"] = ci.fn_gn;
        j["f_support_ok"] = ci.f_support_ok;
        j["alpha_dbc"] = check_dbc(ci.alpha, 0.0).violation;
        j["beta_dbc"] = check_dbc(ci.beta, 0.0).violation;
        if (c.dump_fields) {
            dump_field(c, "alpha", ci.alpha);
            dump_field(c, "beta", ci.beta);
        }
    } else if (what == "generator") {
        BoundaryField F = boundary_operator_T(random_smooth_field(chart, 0, c.seed, true), Connection::flat(chart));
        GeneratorResult g = generator_for_boundary_data(F);
        j["relative_residual"] = g.residual;
        j["hopf_min"] = g.hopf_min;
        j["hopf_max"] = g.hopf_max;
        j["pairs"] = g.pairs.size();
        ok = g.hopf_min > 0.0;
        if (c.dump_fields) dump_field(c, "commutator_sum", g.sum);
    } else if (what == "decompose") {
        Section g = random_smooth_field(chart, 0, c.seed, true);
        DecompositionCertificate cert = full_decompose(g);
        j["relative_residual"] = cert.residual;
        j["boundary_residual"] = cert.boundary_residual;
        j["boundary_stage"] = cert.boundary_stage;
        j["kernel_stage"] = cert.kernel_stage;
        j["commutator_pairs"] = cert.commutator_pairs.size();
        j["horizontal_pairs"] = cert.horizontal_pairs.size();
        j["hopf_min"] = cert.hopf_min;
        if (c.dump_fields) dump_field(c, "target", g);
    } else {
        throw Error(ErrorKind::ConfigError, "unknown construction '" + what + "'");
    }
    std::cout << j.dump(2) << "\n";
    write_json(c, "construct_" + what + ".json", j);
    return ok ? 0 : 1;
}

int cmd_dump(const RunConfig& c, int degree) {
    const std::string dom = single_domain(c);
    const int N = single_grid(c, 32);
    ChartPtr chart = make_chart(c, dom, N);
    Form f = random_smooth_field(chart, degree, c.seed, true);
    std::string name = (degree == 0 ? "section_" : "oneform_") + dom + "_" + std::to_string(N);
    RunConfig cc = c;
    dump_field(cc, name, f);
    std::cout << "wrote " << (std::filesystem::path(c.out_dir) / "fields" / (name + ".txt")).string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gaugebench: discrete Coulomb-gauge checks on su(2) connections"};
    app.require_subcommand(1);

    Flags verify_f, study_f, construct_f, dump_f;
    CLI::App* verify = app.add_subcommand("verify", "run acceptance suites");
    add_common(verify, verify_f);
    verify->add_option("--suite", verify_f.suites, "suite name, repeatable (default: all)");

    CLI::App* study = app.add_subcommand("study", "print the convergence tables of suites");
    add_common(study, study_f);
    study->add_option("--suite", study_f.suites, "suite name, repeatable (default: all)");

    std::string what;
    int face = 0, degree = 0;
    double center = 2.0, half_width = 1.4;
    CLI::App* construct = app.add_subcommand("construct", "run one construction on a single grid");
    add_common(construct, construct_f);
    construct->add_option("what", what, "chart-inverse | generator | decompose")
        ->required()
        ->check(CLI::IsMember({"chart-inverse", "generator", "decompose"}));
    construct->add_option("--face", face, "anchored face (chart-inverse)")->check(CLI::Range(0, 1));
    construct->add_option("--center", center, "profile center (chart-inverse)");
    construct->add_option("--half-width", half_width, "profile half width (chart-inverse)");

    CLI::App* dump = app.add_subcommand("dump", "write a random smooth DBC field");
    add_common(dump, dump_f);
    dump->add_option("--degree", degree, "0 section, 1 one-form")->check(CLI::Range(0, 1));

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) return cmd_verify(resolve(verify_f, verify), false);
        if (study->parsed()) return cmd_verify(resolve(study_f, study), true);
        if (construct->parsed()) {
            RunConfig c = resolve(construct_f, construct);
            return cmd_construct(c, what, face, center, half_width);
        }
        if (dump->parsed()) return cmd_dump(resolve(dump_f, dump), degree);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
