#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "aliboost/core/error.hpp"
#include "aliboost/core/types.hpp"

namespace aliboost::sim {

/// Parametric click/pay behavior of the synthetic population.
///
/// The click logit is
///   w_pref * <latent_pref, latent_attr> + w_pop * log(1 + PV so far)
///   + w_quality * quality + bias
/// plus, for cold items only, an exploration term that rises with user
/// activity and falls with fatigue. The popularity term is what makes
/// already-exposed items click better, and hence get ranked higher, which is
/// the rich-get-richer loop the boosting channel works against.
struct GroundTruthModel {
    double weight_pref = 3.0;
    double weight_pop = 0.08;
    double weight_quality = 1.5;
    double bias = -3.4;
    double cold_activity_weight = 0.5;
    double cold_fatigue_weight = 0.35;
    double pay_scale = 0.3;
    std::uint64_t seed = 0;
};

struct WorldConfig {
    int num_users = 4000;
    int num_warm_items = 300;
    int num_categories = 8;
    int latent_dim = 8;
    double mean_arrival_rate = 0.5;
    double arrival_spread = 0.6;  // log-normal sigma of per-user arrival rates
    double category_center_scale = 1.0;
    double item_latent_noise = 0.6;
    double quality_observation_noise = 0.1;
    int new_items_per_slot = 6;
    int cold_window = 30;
    double gmv_median = 40.0;
    double gmv_sigma = 0.6;
    GroundTruthModel truth;
};

inline void validate(const WorldConfig& c) {
    if (c.num_users <= 0) throw ConfigError("world: num_users must be positive");
    if (c.num_warm_items <= 0) throw ConfigError("world: num_warm_items must be positive");
    if (c.num_categories <= 0) throw ConfigError("world: num_categories must be positive");
    if (c.latent_dim < 1) throw ConfigError("world: latent_dim must be >= 1");
    if (c.new_items_per_slot < 0) throw ConfigError("world: new_items_per_slot must be >= 0");
    if (c.cold_window <= 0) throw ConfigError("world: cold_window must be positive");
    if (!(c.mean_arrival_rate > 0.0)) throw ConfigError("world: mean_arrival_rate must be positive");
    if (!(c.truth.pay_scale > 0.0 && c.truth.pay_scale <= 1.0)) throw ConfigError("world: pay_scale must be in (0,1]");
    if (!(c.gmv_median > 0.0) || c.gmv_sigma < 0.0) throw ConfigError("world: invalid gmv distribution");
}

struct UserProfile {
    UserId id;
    Vec latent_pref;
    int activity_grade = 1;    // 1..10, decile of arrival_rate
    int fatigue_counter = 0;   // consecutive cold-item exposures without a click
    double arrival_rate = 0.0; // expected sessions per slot
    Vec features;              // static profile features seen by the ranking models
};

constexpr Slot kWarmUploadSlot = -1000;

struct ItemProfile {
    ItemId id;
    CategoryId category;
    Vec latent_attr;
    Vec content_features;  // category one-hot followed by the observed quality scalar
    Slot upload_slot = kWarmUploadSlot;
    double intrinsic_quality = 0.0;

    bool is_cold(Slot now, int cold_window) const {
        return now >= upload_slot && now - upload_slot < cold_window;
    }
};

class WorldState {
public:
    WorldConfig config;
    std::uint64_t seed = 0;
    std::vector<UserProfile> users;
    std::vector<ItemProfile> items;
    std::vector<Vec> category_centers;
    Vec category_gmv_median;
    // Cumulative exposure state, advanced once per closed slot.
    std::vector<std::int64_t> item_pv;
    std::vector<std::int64_t> item_clicks;
    std::vector<std::int64_t> item_last_pv;  // PV in the most recently closed slot

    const UserProfile& user(UserId id) const {
        check(id);
        return users[static_cast<std::size_t>(id.value)];
    }
    UserProfile& user(UserId id) {
        check(id);
        return users[static_cast<std::size_t>(id.value)];
    }
    const ItemProfile& item(ItemId id) const {
        check(id);
        return items[static_cast<std::size_t>(id.value)];
    }
    bool has_item(ItemId id) const { return id.value >= 0 && static_cast<std::size_t>(id.value) < items.size(); }
    bool has_user(UserId id) const { return id.value >= 0 && static_cast<std::size_t>(id.value) < users.size(); }

    bool is_cold(ItemId id, Slot now) const { return item(id).is_cold(now, config.cold_window); }

    std::int64_t pv_so_far(ItemId id) const { return item_pv[static_cast<std::size_t>(item(id).id.value)]; }
    std::int64_t clicks_so_far(ItemId id) const { return item_clicks[static_cast<std::size_t>(item(id).id.value)]; }
    std::int64_t last_slot_pv(ItemId id) const { return item_last_pv[static_cast<std::size_t>(item(id).id.value)]; }

    /// Items already uploaded at `now`, in id order.
    std::vector<ItemId> available_items(Slot now) const {
        std::vector<ItemId> out;
        out.reserve(items.size());
        for (const auto& it : items) {
            if (it.upload_slot <= now) out.push_back(it.id);
        }
        return out;
    }

    std::size_t user_feature_dim() const { return 1; }
    std::size_t item_feature_dim() const { return static_cast<std::size_t>(config.num_categories) + 1; }

    /// Appends a freshly generated item. Each item draws from its own stream,
    /// so item k is identical across runs that share the world seed.
    ItemId upload_item(Slot upload_slot) {
        const ItemId id{static_cast<std::int32_t>(items.size())};
        Rng rng = make_rng(seed, 0x17e70000ULL + static_cast<std::uint64_t>(id.value));
        items.push_back(make_item(id, upload_slot, rng));
        item_pv.push_back(0);
        item_clicks.push_back(0);
        item_last_pv.push_back(0);
        return id;
    }

    void add_exposures(ItemId id, std::int64_t pv, std::int64_t clicks) {
        check(id);
        item_pv[static_cast<std::size_t>(id.value)] += pv;
        item_clicks[static_cast<std::size_t>(id.value)] += clicks;
    }

    /// Closes a slot: per-item PV and clicks indexed by item id.
    void close_slot(std::span<const std::int64_t> pv, std::span<const std::int64_t> clicks) {
        if (pv.size() != items.size() || clicks.size() != items.size()) {
            throw ConfigError("close_slot: one count per item required");
        }
        for (std::size_t i = 0; i < items.size(); ++i) {
            item_pv[i] += pv[i];
            item_clicks[i] += clicks[i];
            item_last_pv[i] = pv[i];
        }
    }

    ItemProfile make_item(ItemId id, Slot upload_slot, Rng& rng) const {
        const int d = config.latent_dim;
        std::uniform_int_distribution<int> cat_dist(0, config.num_categories - 1);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        ItemProfile it;
        it.id = id;
        it.category = CategoryId{cat_dist(rng)};
        it.upload_slot = upload_slot;
        it.latent_attr.resize(static_cast<std::size_t>(d));
        const Vec& center = category_centers[static_cast<std::size_t>(it.category.value)];
        const double noise = config.item_latent_noise / std::sqrt(static_cast<double>(d));
        for (int k = 0; k < d; ++k) it.latent_attr[static_cast<std::size_t>(k)] = center[static_cast<std::size_t>(k)] + noise * normal(rng);
        it.intrinsic_quality = unit(rng);
        it.content_features.assign(static_cast<std::size_t>(config.num_categories) + 1, 0.0);
        it.content_features[static_cast<std::size_t>(it.category.value)] = 1.0;
        const double observed = it.intrinsic_quality + config.quality_observation_noise * normal(rng);
        it.content_features.back() = std::clamp(observed, 0.0, 1.0);
        return it;
    }

private:
    void check(UserId id) const {
        if (!has_user(id)) throw LookupError("unknown user id " + std::to_string(id.value));
    }
    void check(ItemId id) const {
        if (!has_item(id)) throw LookupError("unknown item id " + std::to_string(id.value));
    }
};

/// Builds users, warm items (uploaded before slot 0) and category structure.
inline WorldState generate_world(const WorldConfig& config, std::uint64_t seed) {
    validate(config);
    WorldState w;
    w.config = config;
    w.config.truth.seed = seed;
    w.seed = seed;
    const int d = config.latent_dim;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::normal_distribution<double> normal(0.0, 1.0);

    Rng cat_rng = make_rng(seed, 0xca7);
    w.category_centers.resize(static_cast<std::size_t>(config.num_categories));
    w.category_gmv_median.resize(static_cast<std::size_t>(config.num_categories));
    for (int c = 0; c < config.num_categories; ++c) {
        Vec center(static_cast<std::size_t>(d));
        for (auto& x : center) x = config.category_center_scale * inv_sqrt_d * normal(cat_rng);
        w.category_centers[static_cast<std::size_t>(c)] = std::move(center);
        w.category_gmv_median[static_cast<std::size_t>(c)] = config.gmv_median * std::exp(0.5 * normal(cat_rng));
    }

    Rng user_rng = make_rng(seed, 0x05e7);
    const double mu = std::log(config.mean_arrival_rate) - 0.5 * config.arrival_spread * config.arrival_spread;
    std::lognormal_distribution<double> arrival(mu, config.arrival_spread);
    w.users.resize(static_cast<std::size_t>(config.num_users));
    for (int u = 0; u < config.num_users; ++u) {
        UserProfile& p = w.users[static_cast<std::size_t>(u)];
        p.id = UserId{u};
        p.latent_pref.resize(static_cast<std::size_t>(d));
        for (auto& x : p.latent_pref) x = inv_sqrt_d * normal(user_rng);
        p.arrival_rate = arrival(user_rng);
    }
    // Activity grade = decile of arrival rate (ties broken by id).
    std::vector<int> order(static_cast<std::size_t>(config.num_users));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return w.users[static_cast<std::size_t>(a)].arrival_rate < w.users[static_cast<std::size_t>(b)].arrival_rate;
    });
    for (std::size_t r = 0; r < order.size(); ++r) {
        UserProfile& p = w.users[static_cast<std::size_t>(order[r])];
        p.activity_grade = 1 + static_cast<int>((10 * r) / order.size());
        p.features = {static_cast<double>(p.activity_grade) / 10.0};
    }

    for (int i = 0; i < config.num_warm_items; ++i) w.upload_item(kWarmUploadSlot);
    return w;
}

/// Ground-truth click logit; see GroundTruthModel for the decomposition.
inline double true_click_logit(const WorldState& world, const UserProfile& user, const ItemProfile& item, Slot slot) {
    const GroundTruthModel& t = world.config.truth;
    double logit = t.weight_pref * dot(user.latent_pref, item.latent_attr) +
                   t.weight_pop * std::log1p(static_cast<double>(world.pv_so_far(item.id))) +
                   t.weight_quality * item.intrinsic_quality + t.bias;
    if (item.is_cold(slot, world.config.cold_window)) {
        logit += t.cold_activity_weight * (static_cast<double>(user.activity_grade) - 5.5) / 4.5 -
                 t.cold_fatigue_weight * std::log1p(static_cast<double>(user.fatigue_counter));
    }
    return logit;
}

inline double true_click_prob(const WorldState& world, const UserProfile& user, const ItemProfile& item, Slot slot) {
    if (!world.has_user(user.id)) throw LookupError("unknown user id " + std::to_string(user.id.value));
    if (!world.has_item(item.id)) throw LookupError("unknown item id " + std::to_string(item.id.value));
    return sigmoid(true_click_logit(world, user, item, slot));
}

inline double true_click_prob(const WorldState& world, UserId user, ItemId item, Slot slot) {
    return true_click_prob(world, world.user(user), world.item(item), slot);
}

/// Per-slot session counts: Poisson(arrival_rate) for each user.
inline std::vector<UserId> draw_sessions(const WorldState& world, Rng& rng) {
    std::vector<UserId> sessions;
    for (const auto& u : world.users) {
        std::poisson_distribution<int> pois(u.arrival_rate);
        const int n = pois(rng);
        for (int k = 0; k < n; ++k) sessions.push_back(u.id);
    }
    std::shuffle(sessions.begin(), sessions.end(), rng);
    return sessions;
}

}  // namespace aliboost::sim
