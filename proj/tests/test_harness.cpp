#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"

#include "gaugebench/harness.hpp"

using namespace gb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("gaugebench_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string write(const fs::path& p, const std::string& body) {
    std::ofstream(p) << body;
    return p.string();
}

}  // namespace

TEST_CASE("convergence study orders") {
    std::vector<int> N{16, 32, 64};
    std::vector<double> r;
    for (int n : N) r.push_back(3.0 * std::pow(n, -2.0));
    Study s = convergence_study("p2", N, r);
    REQUIRE(s.orders.size() == 2);
    CHECK(s.orders[0] == doctest::Approx(2.0));
    CHECK(s.median == doctest::Approx(2.0));
    // non-doubling ladder
    Study t = convergence_study("p4", {24, 36}, {std::pow(24.0, -4.0), std::pow(36.0, -4.0)});
    CHECK(t.orders[0] == doctest::Approx(4.0));
    // residuals at the floor count as exact
    Study e = convergence_study("exact", {16, 32, 64}, {1e-15, 2e-15, 1e-15}, 1e-12);
    CHECK(std::isinf(e.median));
    CHECK(e.median > 0.0);
    CHECK_THROWS_AS(convergence_study("bad", {16}, {1.0}), Error);
    CHECK_THROWS_AS(convergence_study("bad", {16, 32}, {1.0}), Error);
}

TEST_CASE("checks compare with the stated relation") {
    CHECK(make_check("a", 1.0, "<=", 1.0).pass);
    CHECK_FALSE(make_check("a", 1.1, "<=", 1.0).pass);
    CHECK(make_check("a", 2.0, ">=", 2.0).pass);
    CHECK_FALSE(make_check("a", 0.0, ">", 0.0).pass);
    CHECK_FALSE(make_check("a", std::nan(""), "<=", 1.0).pass);
    CHECK_THROWS_AS(make_check("a", 0.0, "<", 1.0), Error);
}

TEST_CASE("configuration loading and validation") {
    fs::path dir = scratch("config");
    RunConfig d = default_config();
    CHECK(suite_names().size() == 13);
    CHECK(d.settings.at("suites").size() == 13);
    for (const auto& s : suite_names()) CHECK(d.settings.at("suites").contains(s));

    std::string p = write(dir / "a.json", R"({"seed": 9, "suites": ["algebra"],
        "settings": {"suites": {"holonomy": {"grid": 20}}}})");
    RunConfig c = load_config(p);
    CHECK(c.seed == 9);
    REQUIRE(c.suites.has_value());
    CHECK(*c.suites == std::vector<std::string>{"algebra"});
    CHECK_FALSE(default_config().suites.has_value());
    // merged, not replaced
    CHECK(c.settings["suites"]["holonomy"]["grid"] == 20);
    CHECK(c.settings["suites"]["holonomy"]["steps"] == 16);

    CHECK_THROWS_AS(load_config(write(dir / "b.json", R"({"suites": ["nope"]})")), Error);
    CHECK_THROWS_AS(load_config(write(dir / "c.json", R"({"grids": [64, 32]})")), Error);
    CHECK_THROWS_AS(load_config(write(dir / "d.json", R"({"format": "xml"})")), Error);
    CHECK_THROWS_AS(load_config(write(dir / "e.json", "{not json")), Error);
    CHECK_THROWS_AS(load_config((dir / "missing.json").string()), Error);

    // the shipped configuration equals the built-in defaults
    RunConfig shipped = load_config(std::string(GAUGEBENCH_SOURCE_DIR) + "/configs/default.json");
    CHECK(shipped.settings == default_settings());
}

TEST_CASE("domain specs come from the settings") {
    RunConfig c = default_config();
    c.settings["domains"]["annulus"]["r0"] = 0.25;
    ChartPtr ch = make_chart(c, "annulus", 16);
    CHECK(ch->lo[1] == doctest::Approx(0.25));
    CHECK(make_chart(c, "shell", 12)->n == 3);
    CHECK_THROWS_AS(make_chart(c, "torus", 16), Error);
}

TEST_CASE("suites run and report") {
    RunConfig c = default_config();
    c.suites = std::vector<std::string>{"algebra", "mean-curvature"};
    c.jobs = 2;
    Report r = run_suite(c);
    REQUIRE(r.suites.size() == 2);
    // declared order, whatever the selection order
    CHECK(r.suites[0].suite == "mean-curvature");
    CHECK(r.suites[1].suite == "algebra");
    CHECK(r.all_pass());

    // an explicit empty selection runs nothing and passes
    RunConfig none = default_config();
    none.suites = std::vector<std::string>{};
    Report empty = run_suite(none);
    CHECK(empty.suites.empty());
    CHECK(empty.all_pass());

    // fixed seeds give identical reports up to timings
    RunConfig again = c;
    again.jobs = 1;
    CHECK(to_json(run_suite(again), false) == to_json(r, false));

    // a suite whose threshold cannot be met fails without throwing
    RunConfig strict = default_config();
    strict.settings["suites"]["algebra"]["jacobi_tol"] = 0.0;
    strict.settings["suites"]["algebra"]["samples"] = 50;
    SuiteRecord s = run_one("algebra", strict);
    CHECK_FALSE(s.pass);
    CHECK(s.error.empty());

    // errors inside a suite are recorded
    RunConfig broken = default_config();
    broken.settings["suites"]["holonomy"]["grid"] = 4;
    SuiteRecord b = run_one("holonomy", broken);
    CHECK_FALSE(b.pass);
    CHECK_FALSE(b.error.empty());
}

TEST_CASE("reports round-trip through JSON and render as csv and text") {
    Report r;
    SuiteRecord s;
    s.suite = "demo";
    s.pass = true;
    s.checks.push_back(make_check("x, with comma", 0.1, "<=", 1.0));
    s.studies.push_back(convergence_study("floor", {8, 16}, {0.0, 0.0}, 1e-12));
    r.suites.push_back(s);
    nlohmann::json j = to_json(r);
    CHECK(j["suites"][0]["studies"][0]["median_order"] == "inf");
    Report back = report_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.suites[0].checks[0].value == 0.1);
    CHECK(std::isinf(back.suites[0].studies[0].median));
    CHECK(back.all_pass());

    std::string csv = format_csv(r);
    CHECK(csv.find("suite,check,value,relation,threshold,pass") == 0);
    CHECK(csv.find("\"x, with comma\"") != std::string::npos);
    CHECK(csv.find("0.10000000000000001") != std::string::npos);
    CHECK(format_text(r).find("PASS demo") == 0);

    fs::path dir = scratch("emit");
    for (const std::string f : {"json", "csv", "text"}) {
        auto paths = emit_report(r, f, (dir / f).string());
        for (const auto& p : paths) CHECK(fs::file_size(p) > 0);
    }
    CHECK(fs::exists(dir / "csv" / "studies.csv"));
    CHECK_THROWS_AS(emit_report(r, "xml", dir.string()), Error);
}
