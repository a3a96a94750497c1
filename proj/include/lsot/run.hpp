#pragma once

#include "lsot/certificate.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>

namespace lsot {

struct RunConfig {
    std::string scenario;               // suite name, see suite_names()
    nlohmann::json parameters = nlohmann::json::object();
    std::vector<std::string> solvers;   // provenance preference; empty = suite default
    std::vector<double> epsilons;       // entropic schedule, decreasing; empty = suite default
    std::size_t probe_count = 1000;
    std::uint64_t seed = 1;
    std::optional<std::vector<std::string>> checks;  // absent = every check of the suite
    std::string output_dir;
    std::string cache_dir;              // empty disables the lattice cache

    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    // Throws InvalidInput for unknown suites, checks or solvers and malformed schedules.
    void validate() const;
};

std::vector<std::string> suite_names();
std::vector<std::string> suite_checks(const std::string& suite);

struct CheckError {
    std::string check;
    std::string kind;
    std::string message;
};

struct RunReport {
    nlohmann::json config;
    // (check name, certificate), sorted by check name; a check may emit several certificates.
    std::vector<std::pair<std::string, BoundCertificate>> certificates;
    std::vector<std::pair<std::string, nlohmann::json>> entropy_reports;
    std::vector<CheckError> errors;
    std::map<std::string, double> timings;  // seconds per check; kept out of the structured document

    Verdict overall() const;
    // 0 all pass, 1 any fail, 2 inconclusive without fail, 3 execution error.
    int exit_code() const;
    nlohmann::json structured() const;
    void append(const RunReport& other, const std::string& prefix);
};

RunReport run(const RunConfig& config);

// Fixed list of cheap configurations exercising every module's oracles.
std::vector<RunConfig> selftest_configs(std::uint64_t seed);
RunReport selftest(std::uint64_t seed);

enum class Format { structured, tabular, plotdata };
std::vector<Format> parse_formats(const std::string& comma_list);

// Writes report.json / report.csv / plot.csv plus timings.json into `dir`.
// Files written before a failure are removed.
std::vector<std::string> emit(const RunReport& report, const std::vector<Format>& formats, const std::string& dir);

std::string tabular(const RunReport& report);
std::string plotdata(const RunReport& report);

} // namespace lsot
