#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "aliboost/core/error.hpp"
#include "aliboost/core/stats.hpp"
#include "aliboost/core/types.hpp"
#include "aliboost/sim/events.hpp"
#include "aliboost/sim/world.hpp"

namespace aliboost::metrics {

/// What the metrics need to know about an item besides its events.
struct ItemMeta {
    Slot upload_slot = sim::kWarmUploadSlot;
    CategoryId category;
    bool control = false;  // item-side A/B bucket held out of boosting
};

struct Catalog {
    std::vector<ItemMeta> items;  // indexed by item id
    int cold_window = 30;

    const ItemMeta& meta(ItemId id) const {
        if (id.value < 0 || static_cast<std::size_t>(id.value) >= items.size()) {
            throw LookupError("catalog: unknown item id " + std::to_string(id.value));
        }
        return items[static_cast<std::size_t>(id.value)];
    }
    bool is_cold(ItemId id, Slot slot) const {
        const ItemMeta& m = meta(id);
        return slot >= m.upload_slot && slot - m.upload_slot < cold_window;
    }
};

/// Item-side A/B bucket: a stable hash of (salt, item id) below `fraction`.
/// Warm items are never in the control bucket.
inline bool is_control_item(ItemId id, Slot upload_slot, double fraction, std::uint64_t salt) {
    if (upload_slot < 0 || fraction <= 0.0) return false;
    const double h = static_cast<double>(mix64(salt ^ (0xb0c3e7ULL + static_cast<std::uint64_t>(id.value))) >> 11) * 0x1.0p-53;
    return h < fraction;
}

inline Catalog catalog_from_world(const sim::WorldState& world, double control_fraction = 0.0, std::uint64_t salt = 0) {
    Catalog c;
    c.cold_window = world.config.cold_window;
    c.items.reserve(world.items.size());
    for (const auto& it : world.items) {
        c.items.push_back({it.upload_slot, it.category, is_control_item(it.id, it.upload_slot, control_fraction, salt)});
    }
    return c;
}

/// Half-open slot range [begin, end).
struct MetricWindow {
    Slot begin = 0;
    Slot end = 0;
    bool contains(Slot s) const { return s >= begin && s < end; }
};

struct Effectiveness {
    std::int64_t pv = 0;
    std::int64_t clicks = 0;
    std::int64_t pays = 0;
    double gmv = 0.0;
    double ctr_percent = 0.0;
};

template <class Filter>
Effectiveness compute_effectiveness(std::span<const sim::EventRecord> events, const MetricWindow& w, Filter&& keep) {
    Effectiveness r;
    for (const auto& e : events) {
        if (!w.contains(e.slot) || !keep(e)) continue;
        ++r.pv;
        r.clicks += e.clicked ? 1 : 0;
        r.pays += e.paid ? 1 : 0;
        r.gmv += e.gmv_value;
    }
    r.ctr_percent = r.pv > 0 ? 100.0 * static_cast<double>(r.clicks) / static_cast<double>(r.pv) : 0.0;
    return r;
}

inline Effectiveness compute_effectiveness(std::span<const sim::EventRecord> events, const MetricWindow& w) {
    return compute_effectiveness(events, w, [](const sim::EventRecord&) { return true; });
}

/// Cold PV / total PV, in percent (0 with no traffic).
template <class ColdPredicate>
double compute_traffic_share(std::span<const sim::EventRecord> events, const MetricWindow& w, ColdPredicate&& is_cold) {
    std::int64_t total = 0, cold = 0;
    for (const auto& e : events) {
        if (!w.contains(e.slot)) continue;
        ++total;
        cold += is_cold(e) ? 1 : 0;
    }
    return total > 0 ? 100.0 * static_cast<double>(cold) / static_cast<double>(total) : 0.0;
}

/// Natural cold PV per boost cold PV; absent when no boost PV.
template <class ColdPredicate>
std::optional<double> compute_roi(std::span<const sim::EventRecord> events, const MetricWindow& w, ColdPredicate&& is_cold) {
    std::int64_t natural = 0, boost = 0;
    for (const auto& e : events) {
        if (!w.contains(e.slot) || !is_cold(e)) continue;
        (e.channel == sim::Channel::boost ? boost : natural) += 1;
    }
    if (boost == 0) return std::nullopt;
    return static_cast<double>(natural) / static_cast<double>(boost);
}

/// (item, slot) -> PV within the window.
inline std::map<std::pair<Slot, std::int32_t>, std::int64_t> per_slot_pv(std::span<const sim::EventRecord> events,
                                                                         const MetricWindow& w) {
    std::map<std::pair<Slot, std::int32_t>, std::int64_t> pv;
    for (const auto& e : events) {
        if (w.contains(e.slot)) ++pv[{e.slot, e.item_id.value}];
    }
    return pv;
}

/// Items whose PV in some slot of the window strictly exceeds `threshold`.
inline std::int64_t count_hot_items(std::span<const sim::EventRecord> events, const MetricWindow& w, double threshold) {
    if (!(threshold > 0.0)) throw ConfigError("count_hot_items: threshold must be positive");
    std::set<std::int32_t> hot;
    for (const auto& [key, pv] : per_slot_pv(events, w)) {
        if (static_cast<double>(pv) > threshold) hot.insert(key.second);
    }
    return static_cast<std::int64_t>(hot.size());
}

/// Nearest-rank percentile of the positive per-(item, slot) PV values.
inline double per_slot_pv_percentile(std::span<const sim::EventRecord> events, const MetricWindow& w, double pct) {
    Vec values;
    for (const auto& [key, pv] : per_slot_pv(events, w)) values.push_back(static_cast<double>(pv));
    if (values.empty()) return 1.0;
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

struct ItemTally {
    std::int64_t natural_pv = 0;
    std::int64_t boost_pv = 0;
    std::int64_t boost_clicks = 0;
};

/// Per-item PV split by channel over each item's cold window.
inline std::map<std::int32_t, ItemTally> cold_window_tallies(std::span<const sim::EventRecord> events, const Catalog& cat) {
    std::map<std::int32_t, ItemTally> t;
    for (const auto& e : events) {
        if (!cat.is_cold(e.item_id, e.slot)) continue;
        ItemTally& x = t[e.item_id.value];
        if (e.channel == sim::Channel::boost) {
            ++x.boost_pv;
            x.boost_clicks += e.clicked ? 1 : 0;
        } else {
            ++x.natural_pv;
        }
    }
    return t;
}

struct AmplificationBucket {
    double ctr_low = 0.0;
    double ctr_high = 0.0;
    std::int64_t items = 0;
    std::optional<double> alpha;
};

/// alpha(bucket) = sum(natural PV of boosted item - mean natural PV of its
/// matched controls) / sum(boost PV), grouping boosted items by boost-period
/// CTR. Controls match on category and launch slot (within match_width
/// slots). Items whose cold window ends after `observed_until` are skipped.
inline std::vector<AmplificationBucket> estimate_amplification(std::span<const sim::EventRecord> events,
                                                               const Catalog& cat, std::span<const double> ctr_edges,
                                                               Slot observed_until, int match_width = 5) {
    if (ctr_edges.size() < 2) throw ConfigError("estimate_amplification: need at least two bucket edges");
    const auto tallies = cold_window_tallies(events, cat);
    auto natural_pv = [&](std::size_t id) {
        auto it = tallies.find(static_cast<std::int32_t>(id));
        return it == tallies.end() ? 0.0 : static_cast<double>(it->second.natural_pv);
    };
    std::vector<AmplificationBucket> out;
    for (std::size_t b = 0; b + 1 < ctr_edges.size(); ++b) out.push_back({ctr_edges[b], ctr_edges[b + 1], 0, std::nullopt});
    Vec lift(out.size(), 0.0), spend(out.size(), 0.0);
    for (std::size_t id = 0; id < cat.items.size(); ++id) {
        const ItemMeta& m = cat.items[id];
        if (m.upload_slot < 0 || m.control || m.upload_slot + cat.cold_window > observed_until) continue;
        auto it = tallies.find(static_cast<std::int32_t>(id));
        if (it == tallies.end() || it->second.boost_pv == 0) continue;
        double control_sum = 0.0;
        int controls = 0;
        for (std::size_t c = 0; c < cat.items.size(); ++c) {
            const ItemMeta& cm = cat.items[c];
            if (!cm.control || cm.category != m.category || std::abs(cm.upload_slot - m.upload_slot) > match_width ||
                cm.upload_slot + cat.cold_window > observed_until) {
                continue;
            }
            control_sum += natural_pv(c);
            ++controls;
        }
        if (controls == 0) continue;
        const double ctr = static_cast<double>(it->second.boost_clicks) / static_cast<double>(it->second.boost_pv);
        for (std::size_t b = 0; b < out.size(); ++b) {
            const bool last = b + 1 == out.size();
            if (ctr >= out[b].ctr_low && (ctr < out[b].ctr_high || (last && ctr <= out[b].ctr_high))) {
                ++out[b].items;
                lift[b] += natural_pv(id) - control_sum / controls;
                spend[b] += static_cast<double>(it->second.boost_pv);
                break;
            }
        }
    }
    for (std::size_t b = 0; b < out.size(); ++b) {
        if (out[b].items > 0 && spend[b] > 0.0) out[b].alpha = lift[b] / spend[b];
    }
    return out;
}

/// Average overlap (percent of k) between the top-k items by per-slot PV at
/// slot t and slot t + lag, over every valid t in the window. Ties rank by id.
inline std::vector<double> topk_retention(std::span<const sim::EventRecord> events, int k, std::span<const int> lags,
                                          const MetricWindow& w) {
    if (k < 1) throw ConfigError("topk_retention: k must be >= 1");
    int max_lag = 0;
    for (int lag : lags) {
        if (lag < 1) throw ConfigError("topk_retention: lags must be >= 1");
        max_lag = std::max(max_lag, lag);
    }
    if (w.end - w.begin <= max_lag) throw ConfigError("topk_retention: window shorter than the largest lag");
    std::vector<std::map<std::int32_t, std::int64_t>> pv(static_cast<std::size_t>(w.end - w.begin));
    for (const auto& e : events) {
        if (w.contains(e.slot)) ++pv[static_cast<std::size_t>(e.slot - w.begin)][e.item_id.value];
    }
    std::vector<std::vector<std::int32_t>> top(pv.size());
    for (std::size_t s = 0; s < pv.size(); ++s) {
        std::vector<std::pair<std::int64_t, std::int32_t>> ranked;
        for (const auto& [id, n] : pv[s]) ranked.emplace_back(-n, id);
        std::sort(ranked.begin(), ranked.end());
        for (std::size_t r = 0; r < ranked.size() && r < static_cast<std::size_t>(k); ++r) top[s].push_back(ranked[r].second);
        std::sort(top[s].begin(), top[s].end());
    }
    std::vector<double> out;
    for (int lag : lags) {
        double sum = 0.0;
        int n = 0;
        for (std::size_t t = 0; t + static_cast<std::size_t>(lag) < top.size(); ++t) {
            const auto& a = top[t];
            const auto& b = top[t + static_cast<std::size_t>(lag)];
            std::vector<std::int32_t> both;
            std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
            sum += 100.0 * static_cast<double>(both.size()) / static_cast<double>(k);
            ++n;
        }
        out.push_back(n > 0 ? sum / n : 0.0);
    }
    return out;
}

/// Share of items launched in [0, observed_until - age] whose mean per-slot PV
/// over ages [age - span, age) is below `line` (percent).
inline std::optional<double> fraction_below_line(std::span<const sim::EventRecord> events, const Catalog& cat, int age,
                                                 double line, int span, Slot observed_until) {
    if (age < 1 || span < 1 || span > age) throw ConfigError("fraction_below_line: need 1 <= span <= age");
    std::map<std::int32_t, std::int64_t> pv;
    for (const auto& e : events) {
        const Slot up = cat.meta(e.item_id).upload_slot;
        if (up < 0) continue;
        const int a = e.slot - up;
        if (a >= age - span && a < age) ++pv[e.item_id.value];
    }
    std::int64_t items = 0, below = 0;
    for (std::size_t id = 0; id < cat.items.size(); ++id) {
        const ItemMeta& m = cat.items[id];
        if (m.upload_slot < 0 || m.upload_slot + age > observed_until) continue;
        ++items;
        auto it = pv.find(static_cast<std::int32_t>(id));
        const double mean = it == pv.end() ? 0.0 : static_cast<double>(it->second) / span;
        below += mean < line ? 1 : 0;
    }
    if (items == 0) return std::nullopt;
    return 100.0 * static_cast<double>(below) / static_cast<double>(items);
}

/// Gini of cumulative item PV at the end of each slot, over the items
/// uploaded by then.
inline Vec gini_trajectory(std::span<const sim::EventRecord> events, const Catalog& cat, const MetricWindow& w) {
    std::vector<std::vector<const sim::EventRecord*>> by_slot(static_cast<std::size_t>(std::max(0, w.end - w.begin)));
    for (const auto& e : events) {
        if (w.contains(e.slot)) by_slot[static_cast<std::size_t>(e.slot - w.begin)].push_back(&e);
    }
    Vec cumulative(cat.items.size(), 0.0);
    Vec out;
    for (std::size_t s = 0; s < by_slot.size(); ++s) {
        for (const auto* e : by_slot[s]) cumulative[static_cast<std::size_t>(e->item_id.value)] += 1.0;
        const Slot now = w.begin + static_cast<Slot>(s);
        Vec present;
        for (std::size_t id = 0; id < cat.items.size(); ++id) {
            if (cat.items[id].upload_slot <= now) present.push_back(cumulative[id]);
        }
        out.push_back(gini(present));
    }
    return out;
}

/// Launch-age cohorts. Disjoint: prev_edge <= age < edge. Cumulative: 0 <= age < edge.
struct Cohort {
    std::string name;
    int min_age = 0;
    int max_age = 0;  // exclusive
};

inline std::vector<Cohort> launch_cohorts(std::span<const int> edges, bool cumulative) {
    std::vector<Cohort> out;
    int prev = 0;
    for (int e : edges) {
        const int lo = cumulative ? 0 : prev;
        out.push_back({(cumulative ? "age<" : "age") + (cumulative ? "" : std::to_string(lo) + "-") + std::to_string(e), lo, e});
        prev = e;
    }
    return out;
}

}  // namespace aliboost::metrics
