#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "aliboost/sim/events.hpp"
#include "aliboost/sim/world.hpp"

namespace aliboost::sim {

/// A boost-channel placement handed to the session simulator.
struct BoostPlacement {
    ItemId item;
    std::optional<double> bid;
    std::optional<double> price;
    int stage = 1;
};

/// Simulates one user session: boost placements first, then the natural slate
/// with any item already placed by the boost channel removed. Clicks come from
/// the ground truth, pays from pay_scale * quality given a click, GMV from the
/// item category's log-normal price. Fatigue is updated as each cold item is
/// shown. When `click_probs` is given, the probability used for every emitted
/// event is appended to it.
inline std::vector<EventRecord> simulate_session(WorldState& world, UserId user_id, Slot slot,
                                                 std::span<const ItemId> natural_items,
                                                 std::span<const BoostPlacement> boost_items, Rng& rng,
                                                 std::vector<double>* click_probs = nullptr) {
    UserProfile& user = world.user(user_id);
    std::vector<EventRecord> events;
    events.reserve(natural_items.size() + boost_items.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto& truth = world.config.truth;

    auto expose = [&](ItemId item_id, Channel channel, const BoostPlacement* placement) {
        const ItemProfile& item = world.item(item_id);
        const double p = true_click_prob(world, user, item, slot);
        EventRecord e;
        e.slot = slot;
        e.user_id = user_id;
        e.item_id = item_id;
        e.channel = channel;
        e.clicked = unit(rng) < p;
        if (e.clicked && unit(rng) < truth.pay_scale * item.intrinsic_quality) {
            e.paid = true;
            std::lognormal_distribution<double> price(
                std::log(world.category_gmv_median[static_cast<std::size_t>(item.category.value)]),
                world.config.gmv_sigma);
            e.gmv_value = std::max(price(rng), 1e-6);
        }
        if (placement != nullptr) {
            e.bid = placement->bid;
            e.price = placement->price;
            e.stage_at_event = placement->stage;
        }
        if (item.is_cold(slot, world.config.cold_window)) {
            user.fatigue_counter = e.clicked ? 0 : user.fatigue_counter + 1;
        }
        if (click_probs != nullptr) click_probs->push_back(p);
        events.push_back(e);
    };

    for (const auto& b : boost_items) expose(b.item, Channel::boost, &b);
    for (ItemId id : natural_items) {
        const bool taken = std::any_of(boost_items.begin(), boost_items.end(),
                                       [&](const BoostPlacement& b) { return b.item == id; });
        if (!taken) expose(id, Channel::natural, nullptr);
    }
    return events;
}

}  // namespace aliboost::sim
