#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aliboost/core/error.hpp"
#include "aliboost/core/types.hpp"
#include "aliboost/foundation/model.hpp"
#include "aliboost/stack/model.hpp"

namespace aliboost::stack {

struct PotentialGrade {
    ItemId item;
    double ctr_distribution_p40 = 0.0;
    double rank_percent = 0.0;
    int stage = 1;
};

/// D_i: predicted CTR of `item` for every sampled user, in sample order. Pure.
inline Vec potential_distribution(const StackModel& model, const foundation::FoundationModel& foundation,
                                  const sim::WorldState& world, const RealtimeStats& realtime, ItemId item,
                                  std::span<const UserId> user_sample, Slot slot) {
    if (user_sample.empty()) throw ConfigError("potential_distribution: empty user sample");
    Vec out;
    out.reserve(user_sample.size());
    Vec x(model.layout.total_dim());
    const ItemSignals s = realtime.signals(item);
    for (UserId u : user_sample) {
        const double y = foundation::foundation_predict(foundation, world, u, item, slot).value;
        write_stack_input(model, foundation, world, u, item, s, slot, y, x);
        out.push_back(stack_predict(model, x));
    }
    return out;
}

/// Nearest-rank 40th percentile: the ceil(0.4 N)-th smallest value (1-based).
inline double percentile_p40(std::span<const double> distribution) {
    if (distribution.empty()) throw ConfigError("percentile_p40: empty distribution");
    const std::size_t n = distribution.size();
    const std::size_t rank = (2 * n + 4) / 5;  // ceil(2n / 5) in integers
    Vec v(distribution.begin(), distribution.end());
    auto nth = v.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(v.begin(), nth, v.end());
    return *nth;
}

/// Stage from the share of items at or below this one: count / n * 100 below
/// 70 -> 1, below 90 -> 2, else 3. Compared in integers to avoid rounding at
/// the cutoffs.
inline int stage_for_rank_count(std::size_t count, std::size_t n) {
    if (100 * count < 70 * n) return 1;
    if (100 * count < 90 * n) return 2;
    return 3;
}

inline std::map<ItemId, PotentialGrade> rank_and_grade(const std::map<ItemId, double>& p40_all) {
    if (p40_all.empty()) throw ConfigError("rank_and_grade: no items");
    Vec sorted;
    sorted.reserve(p40_all.size());
    for (const auto& [id, p] : p40_all) sorted.push_back(p);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::map<ItemId, PotentialGrade> out;
    for (const auto& [id, p] : p40_all) {
        const auto count = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), p) - sorted.begin());
        out[id] = PotentialGrade{id, p, 100.0 * static_cast<double>(count) / static_cast<double>(n),
                                 stage_for_rank_count(count, n)};
    }
    return out;
}

// Grading snapshot: one JSON object per line,
//   {"slot", "item_id", "p40", "rank_percent", "stage"}.
inline nlohmann::ordered_json grade_record(Slot slot, const PotentialGrade& g) {
    nlohmann::ordered_json j;
    j["slot"] = slot;
    j["item_id"] = g.item.value;
    j["p40"] = g.ctr_distribution_p40;
    j["rank_percent"] = g.rank_percent;
    j["stage"] = g.stage;
    return j;
}

inline void write_grading_snapshot(std::ostream& out, Slot slot, const std::map<ItemId, PotentialGrade>& grades) {
    for (const auto& [id, g] : grades) out << grade_record(slot, g).dump() << '\n';
}

}  // namespace aliboost::stack
