#pragma once

// Suites, convergence studies and report emission.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gaugebench/constructions.hpp"

namespace gb {

struct RunConfig {
    std::string domain;              // empty: every configured case; construct / dump default to annulus
    std::vector<int> grids;          // overrides every suite's grid list when non-empty
    std::uint64_t seed = 1;
    // absent: every suite; an empty list selects none. Runs follow the declared order.
    std::optional<std::vector<std::string>> suites;
    int jobs = 1;
    std::string out_dir = "out";
    std::string format = "text";
    bool dump_fields = false;
    double solver_tolerance = 1e-10;
    // domains and per-suite grids / thresholds, merged over default_settings()
    nlohmann::json settings;
};

const nlohmann::json& default_settings();
RunConfig default_config();
// Defaults, then the file's keys (settings merged recursively). Throws ConfigError / IoError.
RunConfig load_config(const std::string& path);
void validate(const RunConfig& cfg);

DomainSpec domain_spec(const RunConfig& cfg, const std::string& name);
ChartPtr make_chart(const RunConfig& cfg, const std::string& domain, int grid);

const std::vector<std::string>& suite_names();

struct Study {
    std::string label;
    std::vector<int> sizes;
    std::vector<double> residuals;
    std::vector<double> orders;  // +inf when both residuals are at the floor
    double median = 0.0;
};

// Orders log(r_i / r_{i+1}) / log(N_{i+1} / N_i); residuals at or below floor count as exact.
Study convergence_study(const std::string& label, const std::vector<int>& sizes, const std::vector<double>& residuals,
                        double floor = 0.0);

struct Check {
    std::string name;
    double value = 0.0;
    std::string relation;  // "<=", ">=", ">"
    double threshold = 0.0;
    bool pass = false;
};

Check make_check(const std::string& name, double value, const std::string& relation, double threshold);

struct SuiteRecord {
    std::string suite;
    bool pass = false;
    double seconds = 0.0;
    std::string error;
    nlohmann::json inputs = nlohmann::json::object();
    nlohmann::json rows = nlohmann::json::array();
    std::vector<Study> studies;
    std::vector<Check> checks;
};

struct Report {
    std::vector<SuiteRecord> suites;
    bool all_pass() const;
};

SuiteRecord run_one(const std::string& suite, const RunConfig& cfg);
Report run_suite(const RunConfig& cfg);

nlohmann::json to_json(const Report& r, bool timing = true);
Report report_from_json(const nlohmann::json& j);
std::string format_text(const Report& r);
std::string format_csv(const Report& r);
std::string format_studies_csv(const Report& r);
// Writes report.<format> (csv also writes studies.csv) under out_dir; returns the paths.
std::vector<std::string> emit_report(const Report& r, const std::string& format, const std::string& out_dir);

}  // namespace gb
