#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aliboost/bid/bid.hpp"
#include "aliboost/core/error.hpp"
#include "aliboost/foundation/model.hpp"
#include "aliboost/metrics/report.hpp"
#include "aliboost/sim/natural_channel.hpp"
#include "aliboost/sim/world.hpp"
#include "aliboost/stack/model.hpp"
#include "aliboost/tier/tier.hpp"

namespace aliboost::harness {

struct AblationFlags {
    bool disable_exit = false;
    bool disable_promotion = false;
    int stage_count = 3;
    bool disable_bidding = false;
    bool disable_speed_factor = false;
    bool disable_user_factor = false;
    bool disable_boosting = false;  // no boost channel at all (natural-only platform)
};

struct SessionConfig {
    int size = 20;
    int boost_positions = 2;   // 90/10 natural/boost split
    int boost_candidates = 5;  // boosting items retrieved per request
    // Caps an item's expected candidate sessions per slot at this multiple of
    // its target speed by thinning retrieval; 0 turns the cap off.
    double candidate_reach = 5.0;
};

struct StackSettings {
    stack::StackConfig model;
    stack::FineTuneConfig fine_tune;
    int user_sample = 1000;
    int realtime_window = 3;
    int warm_start_slots = 3;
    int warm_start_epochs = 2;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    int slots = 60;
    int warmup_slots = 10;
    std::string output_dir = "aliboost_out";
    sim::WorldConfig world;
    sim::NaturalRankerConfig natural;
    SessionConfig session;
    foundation::TrainConfig foundation;
    StackSettings stack;
    tier::StageConfig stages;
    int benchmark_window = 3;
    bid::PacingConfig pacing;
    double control_fraction = 0.1;
    AblationFlags ablation;
    metrics::ReportConfig report;
    bool write_trace = false;
};

/// Stage configuration for a different number of levels: the same total
/// per-item budget split geometrically with the base growth ratio, and gammas
/// spread evenly between the base's first and last (K = 1 takes the midpoint).
inline tier::StageConfig stages_for_count(const tier::StageConfig& base, int k) {
    base.validate();
    if (k < 1 || k > 4) throw ConfigError("ablation: stage_count must be in {1,2,3,4}");
    if (k == base.stage_count()) return base;
    double total = 0.0;
    for (auto b : base.budgets) total += static_cast<double>(b);
    const double ratio = base.stage_count() > 1
                             ? static_cast<double>(base.budgets[1]) / static_cast<double>(base.budgets[0])
                             : 3.0;
    double norm = 0.0;
    for (int s = 0; s < k; ++s) norm += std::pow(ratio, s);
    tier::StageConfig out = base;
    out.budgets.clear();
    out.gammas.clear();
    const double g0 = base.gammas.front(), g1 = base.gammas.back();
    for (int s = 0; s < k; ++s) {
        auto b = static_cast<std::int64_t>(std::llround(total * std::pow(ratio, s) / norm));
        if (!out.budgets.empty()) b = std::max(b, out.budgets.back() + 1);
        out.budgets.push_back(b);
        out.gammas.push_back(k == 1 ? 0.5 * (g0 + g1) : g0 + (g1 - g0) * s / (k - 1));
    }
    out.validate();
    return out;
}

inline tier::StageConfig effective_stages(const ScenarioConfig& c) {
    return stages_for_count(c.stages, c.ablation.stage_count);
}

inline void validate(const ScenarioConfig& c) {
    sim::validate(c.world);
    c.stages.validate();
    c.pacing.validate();
    effective_stages(c);
    if (c.slots < 1) throw ConfigError("slots must be >= 1");
    if (c.warmup_slots < 1) throw ConfigError("warmup_slots must be >= 1");
    if (c.session.size < 1 || c.session.boost_positions < 0 || c.session.boost_positions >= c.session.size) {
        throw ConfigError("session: need 0 <= boost_positions < size");
    }
    if (c.session.boost_candidates < 1) throw ConfigError("session: boost_candidates must be >= 1");
    if (!(c.session.candidate_reach >= 0.0)) throw ConfigError("session: candidate_reach must be >= 0");
    if (c.natural.candidates < 1) throw ConfigError("natural: candidates must be >= 1");
    if (c.natural.trending_candidates < 0) throw ConfigError("natural: trending_candidates must be >= 0");
    if (!(c.natural.prior_ctr > 0.0 && c.natural.prior_ctr < 1.0) || !(c.natural.prior_strength > 0.0)) {
        throw ConfigError("natural: prior_ctr must be in (0,1) and prior_strength positive");
    }
    if (c.stack.user_sample < 1) throw ConfigError("stack: user_sample must be >= 1");
    if (c.stack.realtime_window < 1) throw ConfigError("stack: realtime_window must be >= 1");
    if (c.stack.warm_start_slots < 0 || c.stack.warm_start_slots > c.warmup_slots) {
        throw ConfigError("stack: warm_start_slots must be in [0, warmup_slots]");
    }
    if (c.stack.model.hidden.empty()) throw ConfigError("stack: at least one hidden layer required");
    for (int h : c.stack.model.hidden) {
        if (h < 1) throw ConfigError("stack: hidden sizes must be positive");
    }
    if (c.stack.model.cold_dim < 1) throw ConfigError("stack: cold_dim must be >= 1");
    if (c.stack.model.source_weights.count("natural") == 0 || c.stack.model.source_weights.count("boost") == 0) {
        throw ConfigError("stack: source weights must cover 'natural' and 'boost'");
    }
    if (c.stack.fine_tune.batch_size < 1 || c.stack.fine_tune.learning_rate < 0.0) {
        throw ConfigError("stack: invalid fine-tune settings");
    }
    if (c.benchmark_window < 1) throw ConfigError("benchmark_window must be >= 1");
    if (!(c.control_fraction >= 0.0 && c.control_fraction < 1.0)) throw ConfigError("control_fraction must be in [0,1)");
    if (c.report.topk < 1) throw ConfigError("report: topk must be >= 1");
    if (c.report.hot_threshold && !(*c.report.hot_threshold > 0.0)) throw ConfigError("report: hot_threshold must be positive");
    if (c.report.amplification_edges.size() < 2) throw ConfigError("report: need at least two amplification edges");
}

// ---------------------------------------------------------------------------
// JSON mapping. Every field has a default; unknown keys are rejected so that
// typos cannot silently fall back to defaults.
// ---------------------------------------------------------------------------

namespace detail {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        auto it = j_.find(key);
        if (it == j_.end()) return;
        seen_.insert(key);
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where(key) + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        seen_.insert(key);
        return &*it;
    }

    std::string where(const std::string& key = {}) const { return path_ + (key.empty() ? "" : "." + key); }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + where(it.key()) + "'");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void read(const json& j, const std::string& path, sim::GroundTruthModel& t) {
    Reader r(j, path);
    r.get("weight_pref", t.weight_pref);
    r.get("weight_pop", t.weight_pop);
    r.get("weight_quality", t.weight_quality);
    r.get("bias", t.bias);
    r.get("cold_activity_weight", t.cold_activity_weight);
    r.get("cold_fatigue_weight", t.cold_fatigue_weight);
    r.get("pay_scale", t.pay_scale);
    r.finish();
}

inline void read(const json& j, const std::string& path, sim::WorldConfig& w) {
    Reader r(j, path);
    r.get("num_users", w.num_users);
    r.get("num_warm_items", w.num_warm_items);
    r.get("num_categories", w.num_categories);
    r.get("latent_dim", w.latent_dim);
    r.get("mean_arrival_rate", w.mean_arrival_rate);
    r.get("arrival_spread", w.arrival_spread);
    r.get("category_center_scale", w.category_center_scale);
    r.get("item_latent_noise", w.item_latent_noise);
    r.get("quality_observation_noise", w.quality_observation_noise);
    r.get("new_items_per_slot", w.new_items_per_slot);
    r.get("cold_window", w.cold_window);
    r.get("gmv_median", w.gmv_median);
    r.get("gmv_sigma", w.gmv_sigma);
    if (const json* t = r.child("truth")) read(*t, r.where("truth"), w.truth);
    r.finish();
}

inline void read(const json& j, const std::string& path, sim::NaturalRankerConfig& n) {
    Reader r(j, path);
    r.get("candidates", n.candidates);
    r.get("trending_candidates", n.trending_candidates);
    r.get("popularity_weight", n.popularity_weight);
    r.get("ctr_weight", n.ctr_weight);
    r.get("prior_ctr", n.prior_ctr);
    r.get("prior_strength", n.prior_strength);
    r.finish();
}

inline void read(const json& j, const std::string& path, SessionConfig& s) {
    Reader r(j, path);
    r.get("size", s.size);
    r.get("boost_positions", s.boost_positions);
    r.get("boost_candidates", s.boost_candidates);
    r.get("candidate_reach", s.candidate_reach);
    r.finish();
}

inline void read(const json& j, const std::string& path, foundation::TrainConfig& f) {
    Reader r(j, path);
    r.get("embedding_dim", f.embedding_dim);
    r.get("hidden", f.hidden);
    r.get("epochs", f.epochs);
    r.get("batch_size", f.batch_size);
    r.get("learning_rate", f.learning_rate);
    r.get("l2", f.l2);
    r.get("init_scale", f.init_scale);
    r.get("holdout_fraction", f.holdout_fraction);
    r.finish();
}

inline void read(const json& j, const std::string& path, StackSettings& s) {
    Reader r(j, path);
    r.get("hidden", s.model.hidden);
    r.get("cold_dim", s.model.cold_dim);
    r.get("regularization_coeff", s.model.regularization_coeff);
    r.get("cold_init_scale", s.model.cold_init_scale);
    r.get("source_weights", s.model.source_weights);
    if (const json* f = r.child("fine_tune")) {
        Reader fr(*f, r.where("fine_tune"));
        fr.get("epochs", s.fine_tune.epochs);
        fr.get("batch_size", s.fine_tune.batch_size);
        fr.get("learning_rate", s.fine_tune.learning_rate);
        fr.finish();
    }
    r.get("user_sample", s.user_sample);
    r.get("realtime_window", s.realtime_window);
    r.get("warm_start_slots", s.warm_start_slots);
    r.get("warm_start_epochs", s.warm_start_epochs);
    r.finish();
}

inline void read(const json& j, const std::string& path, tier::StageConfig& s) {
    Reader r(j, path);
    r.get("budgets", s.budgets);
    r.get("gammas", s.gammas);
    r.get("min_eval_exposures", s.min_eval_exposures);
    r.get("max_stage_slots", s.max_stage_slots);
    r.finish();
}

inline void read(const json& j, const std::string& path, bid::PacingConfig& p) {
    Reader r(j, path);
    r.get("delta_p", p.delta_p);
    r.get("delta_q", p.delta_q);
    r.get("delta_d", p.delta_d);
    r.get("s_min", p.s_min);
    r.get("s_max", p.s_max);
    r.get("error_floor", p.error_floor);
    std::string mode = to_string(p.mode);
    r.get("mode", mode);
    p.mode = bid::pacing_mode_from_string(mode);
    r.get("gain", p.gain);
    r.get("max_step", p.max_step);
    r.get("slate_size", p.slate_size);
    r.finish();
}

inline void read(const json& j, const std::string& path, AblationFlags& a) {
    Reader r(j, path);
    r.get("disable_exit", a.disable_exit);
    r.get("disable_promotion", a.disable_promotion);
    r.get("stage_count", a.stage_count);
    r.get("disable_bidding", a.disable_bidding);
    r.get("disable_speed_factor", a.disable_speed_factor);
    r.get("disable_user_factor", a.disable_user_factor);
    r.get("disable_boosting", a.disable_boosting);
    r.finish();
}

inline void read(const json& j, const std::string& path, metrics::ReportConfig& m) {
    Reader r(j, path);
    if (const json* h = r.child("hot_threshold")) {
        if (h->is_null()) {
            m.hot_threshold.reset();
        } else if (h->is_number()) {
            m.hot_threshold = h->get<double>();
        } else {
            throw ConfigError(r.where("hot_threshold") + " must be a number or null");
        }
    }
    r.get("topk", m.topk);
    r.get("retention_lags", m.retention_lags);
    r.get("cohort_edges", m.cohort_edges);
    r.get("below_line_age", m.below_line_age);
    r.get("below_line_pv", m.below_line_pv);
    r.get("below_line_span", m.below_line_span);
    r.get("amplification_edges", m.amplification_edges);
    r.finish();
}

}  // namespace detail

/// Overlays `j` onto `base` (defaults when omitted) and validates the result.
inline ScenarioConfig config_from_json(const nlohmann::json& j, ScenarioConfig base = {}) {
    using namespace detail;
    ScenarioConfig& c = base;
    Reader r(j, "config");
    std::string format = "aliboost.scenario";
    int version = 1;
    r.get("format", format);
    r.get("version", version);
    if (format != "aliboost.scenario" || version != 1) throw ConfigError("config: unsupported format or version");
    r.get("seed", c.seed);
    r.get("slots", c.slots);
    r.get("warmup_slots", c.warmup_slots);
    r.get("output_dir", c.output_dir);
    if (const json* x = r.child("world")) read(*x, "config.world", c.world);
    if (const json* x = r.child("natural")) read(*x, "config.natural", c.natural);
    if (const json* x = r.child("session")) read(*x, "config.session", c.session);
    if (const json* x = r.child("foundation")) read(*x, "config.foundation", c.foundation);
    if (const json* x = r.child("stack")) read(*x, "config.stack", c.stack);
    if (const json* x = r.child("stages")) read(*x, "config.stages", c.stages);
    r.get("benchmark_window", c.benchmark_window);
    if (const json* x = r.child("pacing")) read(*x, "config.pacing", c.pacing);
    r.get("control_fraction", c.control_fraction);
    if (const json* x = r.child("ablation")) read(*x, "config.ablation", c.ablation);
    if (const json* x = r.child("report")) read(*x, "config.report", c.report);
    r.get("write_trace", c.write_trace);
    r.finish();
    validate(c);
    return c;
}

/// Fully resolved configuration: every field, defaults inlined.
inline nlohmann::ordered_json to_json(const ScenarioConfig& c) {
    detail::ojson j;
    j["format"] = "aliboost.scenario";
    j["version"] = 1;
    j["seed"] = c.seed;
    j["slots"] = c.slots;
    j["warmup_slots"] = c.warmup_slots;
    j["output_dir"] = c.output_dir;
    const auto& w = c.world;
    j["world"] = {{"num_users", w.num_users},
                  {"num_warm_items", w.num_warm_items},
                  {"num_categories", w.num_categories},
                  {"latent_dim", w.latent_dim},
                  {"mean_arrival_rate", w.mean_arrival_rate},
                  {"arrival_spread", w.arrival_spread},
                  {"category_center_scale", w.category_center_scale},
                  {"item_latent_noise", w.item_latent_noise},
                  {"quality_observation_noise", w.quality_observation_noise},
                  {"new_items_per_slot", w.new_items_per_slot},
                  {"cold_window", w.cold_window},
                  {"gmv_median", w.gmv_median},
                  {"gmv_sigma", w.gmv_sigma},
                  {"truth",
                   {{"weight_pref", w.truth.weight_pref},
                    {"weight_pop", w.truth.weight_pop},
                    {"weight_quality", w.truth.weight_quality},
                    {"bias", w.truth.bias},
                    {"cold_activity_weight", w.truth.cold_activity_weight},
                    {"cold_fatigue_weight", w.truth.cold_fatigue_weight},
                    {"pay_scale", w.truth.pay_scale}}}};
    detail::ojson nat;
    nat["candidates"] = c.natural.candidates;
    nat["trending_candidates"] = c.natural.trending_candidates;
    nat["popularity_weight"] = c.natural.popularity_weight;
    nat["ctr_weight"] = c.natural.ctr_weight;
    nat["prior_ctr"] = c.natural.prior_ctr;
    nat["prior_strength"] = c.natural.prior_strength;
    j["natural"] = nat;
    detail::ojson ses;
    ses["size"] = c.session.size;
    ses["boost_positions"] = c.session.boost_positions;
    ses["boost_candidates"] = c.session.boost_candidates;
    ses["candidate_reach"] = c.session.candidate_reach;
    j["session"] = ses;
    detail::ojson fnd;
    fnd["embedding_dim"] = c.foundation.embedding_dim;
    fnd["hidden"] = c.foundation.hidden;
    fnd["epochs"] = c.foundation.epochs;
    fnd["batch_size"] = c.foundation.batch_size;
    fnd["learning_rate"] = c.foundation.learning_rate;
    fnd["l2"] = c.foundation.l2;
    fnd["init_scale"] = c.foundation.init_scale;
    fnd["holdout_fraction"] = c.foundation.holdout_fraction;
    j["foundation"] = fnd;
    detail::ojson stk;
    stk["hidden"] = c.stack.model.hidden;
    stk["cold_dim"] = c.stack.model.cold_dim;
    stk["regularization_coeff"] = c.stack.model.regularization_coeff;
    stk["cold_init_scale"] = c.stack.model.cold_init_scale;
    stk["source_weights"] = c.stack.model.source_weights;
    detail::ojson ft;
    ft["epochs"] = c.stack.fine_tune.epochs;
    ft["batch_size"] = c.stack.fine_tune.batch_size;
    ft["learning_rate"] = c.stack.fine_tune.learning_rate;
    stk["fine_tune"] = ft;
    stk["user_sample"] = c.stack.user_sample;
    stk["realtime_window"] = c.stack.realtime_window;
    stk["warm_start_slots"] = c.stack.warm_start_slots;
    stk["warm_start_epochs"] = c.stack.warm_start_epochs;
    j["stack"] = stk;
    detail::ojson stg;
    stg["budgets"] = c.stages.budgets;
    stg["gammas"] = c.stages.gammas;
    stg["min_eval_exposures"] = c.stages.min_eval_exposures;
    stg["max_stage_slots"] = c.stages.max_stage_slots;
    j["stages"] = stg;
    j["benchmark_window"] = c.benchmark_window;
    detail::ojson pc;
    pc["delta_p"] = c.pacing.delta_p;
    pc["delta_q"] = c.pacing.delta_q;
    pc["delta_d"] = c.pacing.delta_d;
    pc["s_min"] = c.pacing.s_min;
    pc["s_max"] = c.pacing.s_max;
    pc["error_floor"] = c.pacing.error_floor;
    pc["mode"] = to_string(c.pacing.mode);
    pc["gain"] = c.pacing.gain;
    pc["max_step"] = c.pacing.max_step;
    pc["slate_size"] = c.pacing.slate_size;
    j["pacing"] = pc;
    j["control_fraction"] = c.control_fraction;
    detail::ojson ab;
    ab["disable_exit"] = c.ablation.disable_exit;
    ab["disable_promotion"] = c.ablation.disable_promotion;
    ab["stage_count"] = c.ablation.stage_count;
    ab["disable_bidding"] = c.ablation.disable_bidding;
    ab["disable_speed_factor"] = c.ablation.disable_speed_factor;
    ab["disable_user_factor"] = c.ablation.disable_user_factor;
    ab["disable_boosting"] = c.ablation.disable_boosting;
    j["ablation"] = ab;
    detail::ojson rp;
    rp["hot_threshold"] = c.report.hot_threshold ? detail::ojson(*c.report.hot_threshold) : detail::ojson(nullptr);
    rp["topk"] = c.report.topk;
    rp["retention_lags"] = c.report.retention_lags;
    rp["cohort_edges"] = c.report.cohort_edges;
    rp["below_line_age"] = c.report.below_line_age;
    rp["below_line_pv"] = c.report.below_line_pv;
    rp["below_line_span"] = c.report.below_line_span;
    rp["amplification_edges"] = c.report.amplification_edges;
    j["report"] = rp;
    j["write_trace"] = c.write_trace;
    return j;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace aliboost::harness
