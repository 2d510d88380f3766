#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "aliboost/core/error.hpp"
#include "aliboost/foundation/model.hpp"
#include "aliboost/sim/world.hpp"

namespace aliboost::sim {

/// The platform's user-oriented ranker. Score = foundation logit
/// + popularity_weight * log(1 + PV so far)
/// + ctr_weight * log(smoothed CTR / prior CTR).
/// Cold items get no special treatment, which is why they stay under-exposed.
/// Retrieval mixes a uniform draw with a trending route that samples items in
/// proportion to their PV in the last closed slot.
struct NaturalRankerConfig {
    int candidates = 60;           // uniform retrieval pool per session
    int trending_candidates = 20;  // draws from the trending route, with replacement
    double popularity_weight = 0.3;
    double ctr_weight = 1.0;
    double prior_ctr = 0.05;
    double prior_strength = 50.0;
};

inline double popularity_score(const WorldState& world, ItemId item, const NaturalRankerConfig& cfg) {
    const auto pv = static_cast<double>(world.pv_so_far(item));
    const auto clicks = static_cast<double>(world.clicks_so_far(item));
    const double smoothed = (clicks + cfg.prior_ctr * cfg.prior_strength) / (pv + cfg.prior_strength);
    return cfg.popularity_weight * std::log1p(pv) + cfg.ctr_weight * std::log(smoothed / cfg.prior_ctr);
}

/// Uniform retrieval of up to `m` uploaded items (without replacement).
inline std::vector<ItemId> retrieve_candidates(const WorldState& world, Slot slot, int m, Rng& rng) {
    std::vector<ItemId> pool = world.available_items(slot);
    const auto take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(std::max(m, 0)));
    for (std::size_t k = 0; k < take; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
        std::swap(pool[k], pool[pick(rng)]);
    }
    pool.resize(take);
    return pool;
}

/// Sampling table for the trending route, built once per slot.
struct TrendingTable {
    std::vector<ItemId> items;
    std::vector<double> cumulative;

    static TrendingTable build(const WorldState& world, Slot slot) {
        TrendingTable t;
        double total = 0.0;
        for (const auto& it : world.items) {
            const auto pv = world.last_slot_pv(it.id);
            if (pv <= 0 || it.upload_slot > slot) continue;
            total += static_cast<double>(pv);
            t.items.push_back(it.id);
            t.cumulative.push_back(total);
        }
        return t;
    }

    ItemId draw(Rng& rng) const {
        std::uniform_real_distribution<double> u(0.0, cumulative.back());
        const double x = u(rng);
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
        if (it == cumulative.end()) --it;
        return items[static_cast<std::size_t>(it - cumulative.begin())];
    }
};

/// Uniform pool plus trending draws, deduplicated and sorted by id.
inline std::vector<ItemId> retrieve_natural_candidates(const WorldState& world, Slot slot, const TrendingTable& trending,
                                                       const NaturalRankerConfig& cfg, Rng& rng) {
    std::vector<ItemId> pool = retrieve_candidates(world, slot, cfg.candidates, rng);
    if (!trending.items.empty()) {
        for (int k = 0; k < cfg.trending_candidates; ++k) pool.push_back(trending.draw(rng));
    }
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    return pool;
}

/// Ranks `candidates` for `user` by logit(user, item) + popularity[item] and
/// returns the top `k` (ties by item id). `popularity` holds popularity_score
/// per item id, computed once per slot.
template <class LogitFn>
std::vector<ItemId> natural_rank(const WorldState& world, UserId user, std::span<const ItemId> candidates, int k,
                                 std::span<const double> popularity, LogitFn&& logit) {
    if (k < 1) throw ConfigError("natural_recommend: k must be >= 1");
    if (!world.has_user(user)) throw LookupError("unknown user id " + std::to_string(user.value));
    std::vector<std::pair<double, ItemId>> scored;
    scored.reserve(candidates.size());
    for (ItemId id : candidates) {
        if (!world.has_item(id)) throw LookupError("unknown item id " + std::to_string(id.value));
        scored.emplace_back(logit(user, id) + popularity[static_cast<std::size_t>(id.value)], id);
    }
    const auto take = std::min<std::size_t>(scored.size(), static_cast<std::size_t>(k));
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    std::vector<ItemId> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
    return out;
}

inline std::vector<ItemId> natural_recommend(const WorldState& world, const foundation::FoundationModel& model,
                                             UserId user, std::span<const ItemId> candidates, int k,
                                             std::span<const double> popularity) {
    return natural_rank(world, user, candidates, k, popularity,
                        [&](UserId u, ItemId i) { return foundation::foundation_logit(model, world, u, i); });
}

inline std::vector<double> popularity_table(const WorldState& world, const NaturalRankerConfig& cfg) {
    std::vector<double> table(world.items.size());
    for (const auto& it : world.items) table[static_cast<std::size_t>(it.id.value)] = popularity_score(world, it.id, cfg);
    return table;
}

/// Convenience overload ranking the whole uploaded catalog.
inline std::vector<ItemId> natural_recommend(const WorldState& world, const foundation::FoundationModel& model,
                                             UserId user, Slot slot, int k, const NaturalRankerConfig& cfg) {
    const auto candidates = world.available_items(slot);
    const auto popularity = popularity_table(world, cfg);
    return natural_recommend(world, model, user, candidates, k, popularity);
}

}  // namespace aliboost::sim
