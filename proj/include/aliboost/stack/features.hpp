#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "aliboost/core/error.hpp"
#include "aliboost/core/types.hpp"
#include "aliboost/foundation/model.hpp"
#include "aliboost/sim/events.hpp"
#include "aliboost/sim/world.hpp"

namespace aliboost::stack {

/// Real-time signals for one item as of the last closed slot.
struct ItemSignals {
    std::int64_t natural_pv = 0;      // natural channel, trailing window
    std::int64_t natural_clicks = 0;
    std::int64_t boost_pv = 0;        // boost channel, cumulative
    std::int64_t boost_clicks = 0;
    int stage = 0;                    // current boosting stage, 0 when not boosting
};

/// Sliding-window natural statistics plus cumulative boost statistics.
/// Events recorded during a slot become visible only after close_slot(),
/// so features read within a slot are a stable start-of-slot snapshot.
class RealtimeStats {
public:
    explicit RealtimeStats(int window_slots = 3) : window_(window_slots) {
        if (window_slots < 1) throw ConfigError("realtime stats: window must be >= 1 slot");
    }

    int window_slots() const { return window_; }

    void record(const sim::EventRecord& e) {
        Entry& en = entry(e.item_id);
        if (e.channel == sim::Channel::natural) {
            en.open_pv += 1;
            en.open_clicks += e.clicked ? 1 : 0;
        } else {
            en.open_boost_pv += 1;
            en.open_boost_clicks += e.clicked ? 1 : 0;
        }
    }

    void set_stage(ItemId item, int stage) { entry(item).stage = stage; }

    void close_slot() {
        for (auto& en : entries_) {
            en.natural.emplace_back(en.open_pv, en.open_clicks);
            en.window_pv += en.open_pv;
            en.window_clicks += en.open_clicks;
            while (static_cast<int>(en.natural.size()) > window_) {
                en.window_pv -= en.natural.front().first;
                en.window_clicks -= en.natural.front().second;
                en.natural.pop_front();
            }
            en.boost_pv += en.open_boost_pv;
            en.boost_clicks += en.open_boost_clicks;
            en.open_pv = en.open_clicks = en.open_boost_pv = en.open_boost_clicks = 0;
            en.visible_stage = en.stage;
        }
    }

    ItemSignals signals(ItemId item) const {
        if (item.value < 0 || static_cast<std::size_t>(item.value) >= entries_.size()) return {};
        const Entry& en = entries_[static_cast<std::size_t>(item.value)];
        return {en.window_pv, en.window_clicks, en.boost_pv, en.boost_clicks, en.visible_stage};
    }

private:
    struct Entry {
        std::deque<std::pair<std::int64_t, std::int64_t>> natural;
        std::int64_t window_pv = 0, window_clicks = 0;
        std::int64_t open_pv = 0, open_clicks = 0;
        std::int64_t boost_pv = 0, boost_clicks = 0;
        std::int64_t open_boost_pv = 0, open_boost_clicks = 0;
        int stage = 0;
        int visible_stage = 0;
    };

    Entry& entry(ItemId item) {
        if (item.value < 0) throw LookupError("realtime stats: invalid item id");
        const auto i = static_cast<std::size_t>(item.value);
        if (entries_.size() <= i) entries_.resize(i + 1);
        return entries_[i];
    }

    int window_;
    std::vector<Entry> entries_;
};

/// Fixed concatenation order of the stacked input (layout version 1):
///   [y_foun | e_u (foundation) | f_u | e_i^cold | f_i^boost | f_i^natural]
/// f_i^boost = [category one-hot (C), age / cold_window, stage / K,
///              log1p(boost pv) / 10, log1p(boost clicks) / 10, boost ctr, observed quality]
/// f_i^natural = [log1p(window pv) / 10, log1p(window clicks) / 10, window ctr]
struct StackLayout {
    static constexpr int kVersion = 1;

    std::size_t foundation_dim = 8;
    std::size_t user_feature_dim = 1;
    std::size_t cold_dim = 8;
    std::size_t num_categories = 8;
    int cold_window = 30;
    int stage_count = 3;

    std::size_t boost_dim() const { return num_categories + 6; }
    static constexpr std::size_t natural_dim() { return 3; }

    std::size_t score_offset() const { return 0; }
    std::size_t user_embedding_offset() const { return 1; }
    std::size_t user_feature_offset() const { return 1 + foundation_dim; }
    std::size_t cold_offset() const { return user_feature_offset() + user_feature_dim; }
    std::size_t boost_offset() const { return cold_offset() + cold_dim; }
    std::size_t natural_offset() const { return boost_offset() + boost_dim(); }
    std::size_t total_dim() const { return natural_offset() + natural_dim(); }
    /// Columns [0, item_offset()) depend on the user; the rest only on the item.
    std::size_t item_offset() const { return cold_offset(); }

    bool operator==(const StackLayout&) const = default;
};

inline StackLayout layout_for(const sim::WorldState& world, const foundation::FoundationModel& foundation,
                              std::size_t cold_dim, int stage_count) {
    StackLayout l;
    l.foundation_dim = static_cast<std::size_t>(foundation.dim);
    l.user_feature_dim = world.user_feature_dim();
    l.cold_dim = cold_dim;
    l.num_categories = static_cast<std::size_t>(world.config.num_categories);
    l.cold_window = world.config.cold_window;
    l.stage_count = stage_count;
    return l;
}

struct StackFeatureVector {
    double foundation_score = 0.5;
    Vec user_embedding;
    Vec user_features;
    Vec cold_embedding;
    Vec boost_features;
    Vec natural_features;

    Vec values() const {
        Vec x;
        x.reserve(1 + user_embedding.size() + user_features.size() + cold_embedding.size() + boost_features.size() +
                  natural_features.size());
        x.push_back(foundation_score);
        for (const Vec* part : {&user_embedding, &user_features, &cold_embedding, &boost_features, &natural_features}) {
            x.insert(x.end(), part->begin(), part->end());
        }
        return x;
    }
};

inline void fill_boost_features(const StackLayout& l, const sim::ItemProfile& item, const ItemSignals& s, Slot slot,
                                std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const auto c = static_cast<std::size_t>(item.category.value);
    if (c >= l.num_categories) throw FeatureError("stack: category outside layout");
    out[c] = 1.0;
    const double age = static_cast<double>(std::max<Slot>(0, slot - item.upload_slot));
    std::size_t k = l.num_categories;
    out[k++] = std::min(1.0, age / static_cast<double>(l.cold_window));
    out[k++] = static_cast<double>(s.stage) / static_cast<double>(l.stage_count);
    out[k++] = std::log1p(static_cast<double>(s.boost_pv)) / 10.0;
    out[k++] = std::log1p(static_cast<double>(s.boost_clicks)) / 10.0;
    out[k++] = s.boost_pv > 0 ? static_cast<double>(s.boost_clicks) / static_cast<double>(s.boost_pv) : 0.0;
    out[k++] = item.content_features.back();
}

inline void fill_natural_features(const ItemSignals& s, std::span<double> out) {
    out[0] = std::log1p(static_cast<double>(s.natural_pv)) / 10.0;
    out[1] = std::log1p(static_cast<double>(s.natural_clicks)) / 10.0;
    out[2] = s.natural_pv > 0 ? static_cast<double>(s.natural_clicks) / static_cast<double>(s.natural_pv) : 0.0;
}

}  // namespace aliboost::stack
