#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aliboost/core/error.hpp"
#include "aliboost/core/types.hpp"
#include "aliboost/sim/world.hpp"
#include "aliboost/tier/tier.hpp"

namespace aliboost::bid {

/// How the smoothed speed error drives the speed factor.
///   level:    S_t = clamp(E~_t)
///   integral: S_t = clamp(S_{t-1} * min(max(E~_t ^ gain, 1 / max_step), max_step))
/// E~_t = dp*E_t + dq*E_{t-1} + dd*E_{t-2}, renormalized over the available history.
enum class PacingMode { level, integral };

inline const char* to_string(PacingMode m) { return m == PacingMode::level ? "level" : "integral"; }

inline PacingMode pacing_mode_from_string(const std::string& s) {
    if (s == "level") return PacingMode::level;
    if (s == "integral") return PacingMode::integral;
    throw ConfigError("unknown pacing mode '" + s + "'");
}

struct PacingConfig {
    double delta_p = 0.6;
    double delta_q = 0.3;
    double delta_d = 0.1;
    double s_min = 0.1;
    double s_max = 10.0;
    double error_floor = 0.01;
    PacingMode mode = PacingMode::integral;
    double gain = 0.5;
    double max_step = 2.0;  // integral mode: bound on S_t / S_{t-1} and its inverse
    int slate_size = 10;

    void validate() const {
        if (delta_p < 0.0 || delta_q < 0.0 || delta_d < 0.0 || !(delta_p > 0.0)) {
            throw ConfigError("pacing: deltas must be non-negative with delta_p > 0");
        }
        if (!(s_min > 0.0) || !(s_max >= s_min)) throw ConfigError("pacing: need 0 < s_min <= s_max");
        if (!(error_floor > 0.0)) throw ConfigError("pacing: error_floor must be positive");
        if (!(gain > 0.0)) throw ConfigError("pacing: gain must be positive");
        if (!(max_step >= 1.0)) throw ConfigError("pacing: max_step must be >= 1");
        if (slate_size < 1) throw ConfigError("pacing: slate_size must be >= 1");
    }
};

struct PacingState {
    ItemId item;
    int stage = 1;
    Slot stage_entered = 0;
    double target_speed = 1.0;
    std::deque<double> error_history;  // most recent first, at most three
    double smoothed_error = 1.0;
    double speed_factor = 1.0;
    std::int64_t deliveries_this_slot = 0;
};

/// U_u = ln(fatigue + e) / sqrt(activity_grade).
inline double compute_user_factor(int fatigue_counter, int activity_grade) {
    if (fatigue_counter < 0) throw ConfigError("user factor: negative fatigue");
    if (activity_grade < 1 || activity_grade > 10) throw ConfigError("user factor: activity grade outside [1,10]");
    return std::log(static_cast<double>(fatigue_counter) + std::numbers::e) / std::sqrt(static_cast<double>(activity_grade));
}

inline double compute_user_factor(const sim::UserProfile& u) {
    return compute_user_factor(u.fatigue_counter, u.activity_grade);
}

/// E = actual / target, floored at `floor` when nothing was delivered.
inline double compute_speed_error(double actual, double target, double floor = 0.01) {
    if (!(target > 0.0)) throw ConfigError("speed error: target must be positive");
    if (actual < 0.0) throw ConfigError("speed error: negative actual speed");
    if (actual == 0.0) return floor;
    return actual / target;
}

inline double smoothed_speed_error(const std::deque<double>& history, const PacingConfig& cfg) {
    if (history.empty()) throw ConfigError("speed error: empty history");
    const double w[3] = {cfg.delta_p, cfg.delta_q, cfg.delta_d};
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < history.size() && k < 3; ++k) {
        num += w[k] * history[k];
        den += w[k];
    }
    return num / den;
}

inline PacingState& update_speed_factor(PacingState& s, double new_error, const PacingConfig& cfg) {
    if (!(new_error > 0.0) || !std::isfinite(new_error)) throw NumericError("speed error must be positive and finite");
    s.error_history.push_front(new_error);
    while (s.error_history.size() > 3) s.error_history.pop_back();
    s.smoothed_error = smoothed_speed_error(s.error_history, cfg);
    const double raw = cfg.mode == PacingMode::level
                           ? s.smoothed_error
                           : s.speed_factor * std::clamp(std::pow(s.smoothed_error, cfg.gain), 1.0 / cfg.max_step,
                                                         cfg.max_step);
    s.speed_factor = std::clamp(raw, cfg.s_min, cfg.s_max);
    return s;
}

struct PriceQuote {
    UserId user;
    ItemId item;
    Slot slot = 0;
    double base_p40 = 0.0;
    double speed_factor = 1.0;
    double user_factor = 1.0;
    double price = 0.0;
};

/// price = P40 * S * U.
inline PriceQuote quote_price(double p40, double speed_factor, double user_factor, UserId user = {}, ItemId item = {},
                              Slot slot = 0) {
    if (!std::isfinite(p40) || !std::isfinite(speed_factor) || !std::isfinite(user_factor)) {
        throw NumericError("quote_price: non-finite input");
    }
    return {user, item, slot, p40, speed_factor, user_factor, p40 * speed_factor * user_factor};
}

inline PriceQuote quote_price(double p40, const PacingState& s, double user_factor, UserId user = {}, Slot slot = 0) {
    return quote_price(p40, s.speed_factor, user_factor, user, s.item, slot);
}

inline bool decide_delivery(double bid, const PriceQuote& q) { return bid > q.price; }

struct BoostCandidate {
    ItemId item;
    double bid = 0.0;
    PriceQuote quote;
};

/// Highest bids first, ties by item id; at most n.
inline std::vector<BoostCandidate> select_boost_slate(std::vector<BoostCandidate> candidates, int n) {
    if (n < 0) throw ConfigError("select_boost_slate: negative slate size");
    std::sort(candidates.begin(), candidates.end(), [](const BoostCandidate& a, const BoostCandidate& b) {
        return a.bid != b.bid ? a.bid > b.bid : a.item < b.item;
    });
    if (candidates.size() > static_cast<std::size_t>(n)) candidates.resize(static_cast<std::size_t>(n));
    return candidates;
}

/// Speed factor at stage entry, before any speed has been observed: the S at
/// which forecast deliveries match the target. Forecast deliveries are
/// `expected_sessions` times the (weighted) share of sampled users whose bid
/// clears P40 * S * U. The share is non-increasing in S, so bisection on log S.
inline double initial_speed_factor(double p40, std::span<const double> sample_bids, std::span<const double> user_factors,
                                   std::span<const double> weights, double expected_sessions, double target_speed,
                                   const PacingConfig& cfg) {
    if (sample_bids.empty() || sample_bids.size() != user_factors.size() ||
        (!weights.empty() && weights.size() != sample_bids.size())) {
        throw ConfigError("initial_speed_factor: inconsistent sample");
    }
    double total_w = 0.0;
    for (std::size_t k = 0; k < sample_bids.size(); ++k) total_w += weights.empty() ? 1.0 : weights[k];
    if (!(total_w > 0.0)) throw ConfigError("initial_speed_factor: zero total weight");
    auto forecast = [&](double s) {
        double w = 0.0;
        for (std::size_t k = 0; k < sample_bids.size(); ++k) {
            if (sample_bids[k] > p40 * s * user_factors[k]) w += weights.empty() ? 1.0 : weights[k];
        }
        return expected_sessions * w / total_w;
    };
    if (forecast(cfg.s_min) <= target_speed) return cfg.s_min;
    if (forecast(cfg.s_max) >= target_speed) return cfg.s_max;
    double lo = std::log(cfg.s_min), hi = std::log(cfg.s_max);
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (forecast(std::exp(mid)) > target_speed ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

inline double stage_target_speed(const tier::BoostLedger& l, const tier::StageConfig& cfg, Slot now) {
    const std::int64_t remaining_budget = std::max<std::int64_t>(0, cfg.budget(l.current_stage) - l.stage_pv);
    const int remaining_slots = cfg.max_stage_slots - (now - l.entered_slot);
    if (remaining_slots <= 0) return 0.0;  // stage has timed out; tier control evaluates it
    return static_cast<double>(remaining_budget) / static_cast<double>(remaining_slots);
}

/// Closes a slot for every continuing stage: speed error from this slot's
/// deliveries, speed-factor update, next target = remaining budget / remaining
/// stage slots. States of items that left boosting are dropped; items that
/// just entered a stage are returned so the caller can initialize them.
inline std::vector<ItemId> end_of_slot_repricing(std::map<ItemId, PacingState>& states, const tier::LedgerBook& book,
                                                 Slot now, const PacingConfig& cfg) {
    std::vector<ItemId> fresh;
    for (auto it = states.begin(); it != states.end();) {
        if (!book.contains(it->first) || !book.at(it->first).active()) {
            it = states.erase(it);
        } else {
            ++it;
        }
    }
    for (const auto& [id, l] : book.ledgers()) {
        if (!l.active()) continue;
        auto st = states.find(id);
        if (st == states.end() || st->second.stage != l.current_stage || st->second.stage_entered != l.entered_slot) {
            fresh.push_back(id);
            continue;
        }
        PacingState& s = st->second;
        const double error = compute_speed_error(static_cast<double>(s.deliveries_this_slot), s.target_speed,
                                                 cfg.error_floor);
        update_speed_factor(s, error, cfg);
        s.deliveries_this_slot = 0;
        const double next = stage_target_speed(l, book.config(), now);
        if (next > 0.0) s.target_speed = next;
    }
    return fresh;
}

// Per-decision trace: one JSON object per line,
//   {"slot", "user_id", "item_id", "bid", "price", "speed_factor", "user_factor", "delivered"}.
struct DecisionTrace {
    Slot slot = 0;
    UserId user;
    ItemId item;
    double bid = 0.0;
    double price = 0.0;
    double speed_factor = 1.0;
    double user_factor = 1.0;
    bool delivered = false;
};

inline nlohmann::ordered_json to_json(const DecisionTrace& t) {
    nlohmann::ordered_json j;
    j["slot"] = t.slot;
    j["user_id"] = t.user.value;
    j["item_id"] = t.item.value;
    j["bid"] = t.bid;
    j["price"] = t.price;
    j["speed_factor"] = t.speed_factor;
    j["user_factor"] = t.user_factor;
    j["delivered"] = t.delivered;
    return j;
}

}  // namespace aliboost::bid
