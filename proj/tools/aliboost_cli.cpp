// aliboost command-line runner.
//
//   aliboost_cli run      [--config FILE] [--seed N] [--slots N] [--out DIR] [ablation flags]
//   aliboost_cli ablate   --suite rules|levels|bidding [--seeds N] [...]
//   aliboost_cli report   --run-dir DIR [--out DIR]
//   aliboost_cli validate --config FILE
//
// Exit codes: 0 ok, 2 configuration error, 3 runtime error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aliboost/aliboost.hpp"

namespace ab = aliboost;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> slots;
    std::optional<std::string> out;
    std::optional<int> stage_count;
    bool disable_exit = false;
    bool disable_promotion = false;
    bool disable_bidding = false;
    bool disable_speed_factor = false;
    bool disable_user_factor = false;
    bool disable_boosting = false;
    bool trace = false;
};

void add_scenario_options(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config_path, "Scenario config (JSON); defaults when omitted");
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--slots", o.slots, "Number of slots to simulate");
    cmd->add_option("-o,--out", o.out, "Output directory");
    cmd->add_option("--stage-count", o.stage_count, "Number of boosting stages (1-4)");
    cmd->add_flag("--disable-exit", o.disable_exit, "Failing items move on instead of exiting");
    cmd->add_flag("--disable-promotion", o.disable_promotion, "Passing items graduate instead of moving up");
    cmd->add_flag("--disable-bidding", o.disable_bidding, "Deliver boost candidates without the price threshold");
    cmd->add_flag("--disable-speed-factor", o.disable_speed_factor, "Fix the speed factor at 1");
    cmd->add_flag("--disable-user-factor", o.disable_user_factor, "Fix the user factor at 1");
    cmd->add_flag("--disable-boosting", o.disable_boosting, "Natural channel only");
    cmd->add_flag("--trace", o.trace, "Write the per-decision trace");
}

ab::harness::ScenarioConfig resolve(const Overrides& o) {
    ab::harness::ScenarioConfig c = o.config_path.empty() ? ab::harness::ScenarioConfig{}
                                                          : ab::harness::load_config(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (o.slots) c.slots = *o.slots;
    if (o.out) c.output_dir = *o.out;
    if (o.stage_count) c.ablation.stage_count = *o.stage_count;
    c.ablation.disable_exit |= o.disable_exit;
    c.ablation.disable_promotion |= o.disable_promotion;
    c.ablation.disable_bidding |= o.disable_bidding;
    c.ablation.disable_speed_factor |= o.disable_speed_factor;
    c.ablation.disable_user_factor |= o.disable_user_factor;
    c.ablation.disable_boosting |= o.disable_boosting;
    c.write_trace |= o.trace;
    ab::harness::validate(c);
    return c;
}

void print_summary(const ab::metrics::Report& rep) {
    const auto& s = rep.summary;
    std::cout << "cold CTR%      " << s["cold"]["ctr_percent"].get<double>() << '\n'
              << "cold PV        " << s["cold"]["pv"].get<std::int64_t>() << '\n'
              << "traffic share% " << s["traffic_share_percent"].get<double>() << '\n'
              << "ROI            " << (s["roi"].is_null() ? std::string("n/a") : std::to_string(s["roi"].get<double>()))
              << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"aliboost: cold-start item boosting simulator"};
    app.require_subcommand(1);

    Overrides run_o;
    auto* run = app.add_subcommand("run", "Run one scenario and write its artifacts");
    add_scenario_options(run, run_o);

    Overrides abl_o;
    std::string suite;
    int n_seeds = 5;
    bool keep_runs = false;
    auto* ablate = app.add_subcommand("ablate", "Run an ablation suite over paired seeds");
    add_scenario_options(ablate, abl_o);
    ablate->add_option("--suite", suite, "rules, levels or bidding")->required();
    ablate->add_option("--seeds", n_seeds, "Number of paired seeds, starting at --seed");
    ablate->add_flag("--keep-runs", keep_runs, "Also write every arm's run artifacts");

    std::string run_dir;
    std::optional<std::string> report_out;
    auto* report = app.add_subcommand("report", "Recompute the report from a persisted run");
    report->add_option("--run-dir", run_dir, "Directory written by `run`")->required();
    report->add_option("-o,--out", report_out, "Where to write report.csv and summary.json (default: run dir)");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a config file and print it fully resolved");
    validate->add_option("-c,--config", validate_path, "Scenario config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) {
            const auto cfg = resolve(run_o);
            const auto result = ab::harness::run_scenario(cfg);
            ab::harness::write_artifacts(result, cfg.output_dir);
            std::cout << "wrote " << cfg.output_dir << " (" << result.events.size() << " events)\n";
            print_summary(result.report);
        } else if (*ablate) {
            const auto cfg = resolve(abl_o);
            if (n_seeds < 1) throw ab::ConfigError("--seeds must be >= 1");
            std::vector<std::uint64_t> seeds;
            for (int k = 0; k < n_seeds; ++k) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(k));
            const fs::path out = cfg.output_dir;
            const auto res = ab::harness::run_ablation_suite(
                cfg, suite, seeds, nullptr, keep_runs ? std::optional<fs::path>(out) : std::nullopt);
            fs::create_directories(out);
            ab::harness::write_text(out / ("ablation_" + suite + ".csv"), ab::harness::suite_csv(res));
            ab::harness::write_text(out / ("ablation_" + suite + ".json"), ab::harness::to_json(res).dump(2) + "\n");
            std::cout << ab::harness::to_json(res)["relative_delta_percent"].dump(2) << '\n';
        } else if (*report) {
            const auto rep = ab::harness::report_from_artifacts(run_dir);
            const fs::path out = report_out ? fs::path(*report_out) : fs::path(run_dir);
            fs::create_directories(out);
            ab::harness::write_text(out / "report.csv", ab::metrics::report_csv(rep));
            ab::harness::write_text(out / "summary.json", rep.summary.dump(2) + "\n");
            print_summary(rep);
        } else if (*validate) {
            const auto cfg = ab::harness::load_config(validate_path);
            std::cout << ab::harness::to_json(cfg).dump(2) << '\n';
        }
    } catch (const ab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}
