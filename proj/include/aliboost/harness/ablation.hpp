#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aliboost/core/error.hpp"
#include "aliboost/harness/config.hpp"
#include "aliboost/harness/run.hpp"

namespace aliboost::harness {

struct Arm {
    std::string name;
    ScenarioConfig config;
};

/// Arms of a suite; the first one is the reference for relative deltas.
inline std::vector<Arm> suite_arms(const ScenarioConfig& base, const std::string& suite) {
    std::vector<Arm> arms;
    auto arm = [&](std::string name, auto&& edit) {
        ScenarioConfig c = base;
        edit(c.ablation);
        arms.push_back({std::move(name), std::move(c)});
    };
    if (suite == "rules") {
        arm("base", [](AblationFlags&) {});
        arm("no_exit", [](AblationFlags& a) { a.disable_exit = true; });
        arm("no_promotion", [](AblationFlags& a) { a.disable_promotion = true; });
    } else if (suite == "levels") {
        for (int k = 1; k <= 4; ++k) arm("stages_" + std::to_string(k), [k](AblationFlags& a) { a.stage_count = k; });
    } else if (suite == "bidding") {
        arm("base", [](AblationFlags&) {});
        arm("no_bidding", [](AblationFlags& a) { a.disable_bidding = true; });
        arm("no_speed_factor", [](AblationFlags& a) { a.disable_speed_factor = true; });
        arm("no_user_factor", [](AblationFlags& a) { a.disable_user_factor = true; });
    } else {
        throw ConfigError("unknown ablation suite '" + suite + "' (expected rules, levels or bidding)");
    }
    return arms;
}

/// Cold-item metrics compared across arms.
inline std::map<std::string, double> arm_metrics(const metrics::Report& rep) {
    const auto& s = rep.summary;
    std::map<std::string, double> m;
    m["cold_ctr_percent"] = s["cold"]["ctr_percent"].get<double>();
    m["cold_pv"] = s["cold"]["pv"].get<double>();
    m["cold_pays"] = s["cold"]["pays"].get<double>();
    m["cold_gmv"] = s["cold"]["gmv"].get<double>();
    m["cold_boost_ctr_percent"] = s["cold_boost"]["ctr_percent"].get<double>();
    m["cold_natural_pv"] = s["cold_natural"]["pv"].get<double>();
    m["roi"] = s["roi"].is_null() ? std::nan("") : s["roi"].get<double>();
    m["traffic_share_percent"] = s["traffic_share_percent"].get<double>();
    m["all_ctr_percent"] = s["all"]["ctr_percent"].get<double>();
    return m;
}

struct ArmRun {
    std::string arm;
    std::uint64_t seed = 0;
    std::map<std::string, double> values;
};

struct SuiteResult {
    std::string suite;
    std::vector<std::string> arms;
    std::vector<ArmRun> runs;
    std::map<std::string, std::map<std::string, double>> means;           // arm -> metric -> mean
    std::map<std::string, std::map<std::string, double>> relative_delta;  // arm -> metric -> % vs reference
};

/// Runs every arm of `suite` on the same seeds, so worlds, users and item
/// buckets are shared across arms. The hot-item threshold is fixed from the
/// reference arm of each seed.
inline SuiteResult run_ablation_suite(const ScenarioConfig& base, const std::string& suite,
                                      const std::vector<std::uint64_t>& seeds, WarmStartCache* cache = nullptr,
                                      const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
    if (seeds.empty()) throw ConfigError("ablation: at least one seed required");
    WarmStartCache local;
    WarmStartCache* wc = cache ? cache : &local;
    const auto arms = suite_arms(base, suite);
    SuiteResult res;
    res.suite = suite;
    for (const auto& a : arms) res.arms.push_back(a.name);
    for (std::uint64_t seed : seeds) {
        std::optional<double> hot = base.report.hot_threshold;
        for (const auto& a : arms) {
            ScenarioConfig c = a.config;
            c.seed = seed;
            c.report.hot_threshold = hot;
            if (out_dir) c.output_dir = (*out_dir / a.name / ("seed_" + std::to_string(seed))).string();
            const RunResult r = run_scenario(c, wc);
            if (!hot) hot = r.report.summary["hot_threshold"].get<double>();
            if (out_dir) write_artifacts(r, c.output_dir);
            res.runs.push_back({a.name, seed, arm_metrics(r.report)});
        }
    }
    for (const auto& name : res.arms) {
        std::map<std::string, double> sum;
        std::map<std::string, int> n;
        for (const auto& r : res.runs) {
            if (r.arm != name) continue;
            for (const auto& [k, v] : r.values) {
                if (std::isnan(v)) continue;
                sum[k] += v;
                n[k] += 1;
            }
        }
        for (const auto& [k, v] : sum) res.means[name][k] = v / n[k];
    }
    const auto& ref = res.means[res.arms.front()];
    for (const auto& name : res.arms) {
        for (const auto& [k, v] : res.means[name]) {
            auto it = ref.find(k);
            if (it != ref.end() && it->second != 0.0) res.relative_delta[name][k] = 100.0 * (v - it->second) / it->second;
        }
    }
    return res;
}

inline nlohmann::ordered_json to_json(const SuiteResult& r) {
    nlohmann::ordered_json j;
    j["suite"] = r.suite;
    j["reference"] = r.arms.front();
    j["arms"] = r.arms;
    nlohmann::ordered_json means, deltas;
    for (const auto& a : r.arms) {
        means[a] = r.means.count(a) ? nlohmann::ordered_json(r.means.at(a)) : nlohmann::ordered_json::object();
        deltas[a] = r.relative_delta.count(a) ? nlohmann::ordered_json(r.relative_delta.at(a))
                                               : nlohmann::ordered_json::object();
    }
    j["means"] = means;
    j["relative_delta_percent"] = deltas;
    return j;
}

// Per-run metrics CSV: "arm,seed,metric,value".
inline std::string suite_csv(const SuiteResult& r) {
    std::ostringstream os;
    os.precision(17);
    os << "arm,seed,metric,value\n";
    for (const auto& run : r.runs) {
        for (const auto& [k, v] : run.values) os << run.arm << ',' << run.seed << ',' << k << ',' << v << '\n';
    }
    return os.str();
}

}  // namespace aliboost::harness
