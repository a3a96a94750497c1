#include "lsot/run.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out = "lsot-out";
    std::string formats = "structured,tabular,plotdata";
    std::string schedule;
    std::string cache;
};

void add_common(CLI::App* sub, Common& c, bool with_config = true)
{
    if (with_config) sub->add_option("--config", c.config, "scenario/config document (JSON)");
    sub->add_option("--seed", c.seed, "random seed (u64)");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--format", c.formats, "comma list of structured, tabular, plotdata");
    if (with_config) {
        sub->add_option("--epsilon-schedule", c.schedule, "comma list of decreasing epsilons");
        sub->add_option("--cache", c.cache, "lattice cache directory");
    }
}

lsot::RunConfig load(const Common& c, const std::string& default_scenario)
{
    nlohmann::json j = nlohmann::json::object();
    if (!c.config.empty()) {
        std::ifstream is(c.config);
        if (!is) throw lsot::InvalidInput("cannot open config " + c.config);
        try {
            is >> j;
        } catch (const nlohmann::json::exception& e) {
            throw lsot::InvalidInput(std::string("config parse error: ") + e.what());
        }
    }
    lsot::RunConfig cfg = lsot::RunConfig::from_json(j);
    if (cfg.scenario.empty()) cfg.scenario = default_scenario;
    if (c.seed_given) cfg.seed = c.seed;
    if (!c.schedule.empty()) {
        cfg.epsilons.clear();
        std::stringstream ss(c.schedule);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                cfg.epsilons.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw lsot::InvalidInput("bad epsilon '" + item + "'");
            }
        }
    }
    if (!c.cache.empty()) cfg.cache_dir = c.cache;
    if (!c.out.empty()) cfg.output_dir = c.out;
    return cfg;
}

int finish(const lsot::RunReport& report, const Common& c)
{
    const auto files = lsot::emit(report, lsot::parse_formats(c.formats), c.out);
    std::size_t pass = 0, slack = 0, fail = 0, inc = 0;
    for (const auto& [name, cert] : report.certificates) {
        switch (cert.verdict) {
        case lsot::Verdict::pass: ++pass; break;
        case lsot::Verdict::pass_with_slack: ++slack; break;
        case lsot::Verdict::fail:
            ++fail;
            std::cerr << "FAIL " << name << ": " << cert.label << " (observed " << cert.observed << ", rhs "
                      << cert.theoretical_rhs << ")\n";
            break;
        case lsot::Verdict::inconclusive: ++inc; break;
        }
    }
    for (const auto& e : report.errors) std::cerr << "ERROR " << e.check << " [" << e.kind << "]: " << e.message << "\n";
    std::cout << report.certificates.size() << " certificates: " << pass << " pass, " << slack << " pass_with_slack, "
              << fail << " fail, " << inc << " inconclusive; " << report.errors.size() << " errors\n";
    for (const auto& f : files) std::cout << "wrote " << f << "\n";
    return report.exit_code();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Transport bound verification runner"};
    app.require_subcommand(1);
    Common c;

    auto* verify = app.add_subcommand("verify", "run the bound suite of a scenario");
    auto* geodesic = app.add_subcommand("geodesic", "geodesic monotonicity along the displacement interpolation");
    auto* heatflow = app.add_subcommand("heatflow", "heat-flow map contraction checks");
    auto* scenario = app.add_subcommand("scenario", "build a scenario and run its full suite");
    auto* selftest = app.add_subcommand("selftest", "run the built-in oracle suite");
    for (auto* s : {verify, geodesic, heatflow, scenario}) add_common(s, c);
    add_common(selftest, c, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }
    for (auto* s : {verify, geodesic, heatflow, scenario, selftest})
        if (s->parsed() && s->count("--seed")) c.seed_given = true;

    try {
        if (selftest->parsed()) return finish(lsot::selftest(c.seed_given ? c.seed : 1), c);

        lsot::RunConfig cfg;
        if (verify->parsed()) cfg = load(c, "gaussian");
        if (scenario->parsed()) {
            cfg = load(c, "gaussian");
            cfg.checks.reset();
        }
        if (geodesic->parsed()) {
            cfg = load(c, "wehrl");
            cfg.checks = std::vector<std::string>{"geodesic", "trace"};
        }
        if (heatflow->parsed()) {
            cfg = load(c, "heatflow");
            if (cfg.scenario != "heatflow") throw lsot::InvalidInput("heatflow subcommand needs the heatflow scenario");
        }
        return finish(lsot::run(cfg), c);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
