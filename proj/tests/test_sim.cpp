#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "aliboost/foundation/model.hpp"
#include "aliboost/sim/events.hpp"
#include "aliboost/sim/natural_channel.hpp"
#include "aliboost/sim/session.hpp"
#include "aliboost/sim/world.hpp"

using namespace aliboost;
using namespace aliboost::sim;

namespace {

WorldConfig small_config() {
    WorldConfig c;
    c.num_users = 100;
    c.num_warm_items = 50;
    c.latent_dim = 8;
    return c;
}

// A world whose ground truth is fully controlled by the test: zero latents,
// zero quality and zero bias give a zero logit before any adjustment.
WorldState neutral_world() {
    WorldConfig c = small_config();
    c.truth.bias = 0.0;
    WorldState w = generate_world(c, 1);
    for (auto& u : w.users) std::fill(u.latent_pref.begin(), u.latent_pref.end(), 0.0);
    for (auto& it : w.items) {
        std::fill(it.latent_attr.begin(), it.latent_attr.end(), 0.0);
        it.intrinsic_quality = 0.0;
    }
    return w;
}

}  // namespace

TEST(GenerateWorld, SizesAndDeterminism) {
    const auto a = generate_world(small_config(), 7);
    const auto b = generate_world(small_config(), 7);
    ASSERT_EQ(a.users.size(), 100u);
    ASSERT_EQ(a.items.size(), 50u);
    for (std::size_t u = 0; u < a.users.size(); ++u) {
        EXPECT_EQ(a.users[u].latent_pref, b.users[u].latent_pref);
        EXPECT_EQ(a.users[u].arrival_rate, b.users[u].arrival_rate);
    }
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        EXPECT_EQ(a.items[i].latent_attr, b.items[i].latent_attr);
        EXPECT_EQ(a.items[i].upload_slot, kWarmUploadSlot);
        EXPECT_EQ(a.items[i].content_features.size(), a.item_feature_dim());
    }
}

TEST(GenerateWorld, SeedSensitivity) {
    const auto a = generate_world(small_config(), 7);
    const auto b = generate_world(small_config(), 8);
    EXPECT_NE(a.users[0].latent_pref, b.users[0].latent_pref);
    EXPECT_NE(a.items[0].latent_attr, b.items[0].latent_attr);
}

TEST(GenerateWorld, RejectsDegenerateConfig) {
    WorldConfig c = small_config();
    c.num_users = 0;
    EXPECT_THROW(generate_world(c, 1), ConfigError);
    c = small_config();
    c.latent_dim = 0;
    EXPECT_THROW(generate_world(c, 1), ConfigError);
    c = small_config();
    c.num_warm_items = -3;
    EXPECT_THROW(generate_world(c, 1), ConfigError);
    c = small_config();
    c.truth.pay_scale = 0.0;
    EXPECT_THROW(generate_world(c, 1), ConfigError);
}

TEST(GenerateWorld, ActivityGradesAreArrivalDeciles) {
    const auto w = generate_world(small_config(), 3);
    std::map<int, int> count;
    for (const auto& u : w.users) {
        ASSERT_GE(u.activity_grade, 1);
        ASSERT_LE(u.activity_grade, 10);
        ++count[u.activity_grade];
    }
    for (int g = 1; g <= 10; ++g) EXPECT_EQ(count[g], 10);
    for (const auto& a : w.users) {
        for (const auto& b : w.users) {
            if (a.arrival_rate < b.arrival_rate) EXPECT_LE(a.activity_grade, b.activity_grade);
        }
    }
}

TEST(GenerateWorld, EveryItemHasOneCategory) {
    const auto w = generate_world(small_config(), 5);
    for (const auto& it : w.items) {
        const auto ones = std::count(it.content_features.begin(), it.content_features.end() - 1, 1.0);
        EXPECT_EQ(ones, 1);
        EXPECT_EQ(it.content_features[static_cast<std::size_t>(it.category.value)], 1.0);
        EXPECT_GE(it.content_features.back(), 0.0);
        EXPECT_LE(it.content_features.back(), 1.0);
    }
}

TEST(UploadItem, SameIdSameItemAcrossWorlds) {
    auto a = generate_world(small_config(), 9);
    auto b = generate_world(small_config(), 9);
    const ItemId ia = a.upload_item(4);
    b.upload_item(2);  // upload slot does not change the item's draws
    EXPECT_EQ(a.item(ia).latent_attr, b.item(ia).latent_attr);
    EXPECT_EQ(a.item(ia).upload_slot, 4);
}

TEST(ItemProfile, ColdWindowIsHalfOpen) {
    ItemProfile it;
    it.upload_slot = 10;
    EXPECT_FALSE(it.is_cold(9, 30));
    EXPECT_TRUE(it.is_cold(10, 30));
    EXPECT_TRUE(it.is_cold(39, 30));
    EXPECT_FALSE(it.is_cold(40, 30));
}

TEST(TrueClickProb, ZeroLogitIsHalf) {
    const auto w = neutral_world();
    EXPECT_DOUBLE_EQ(true_click_prob(w, UserId{0}, ItemId{0}, 0), 0.5);
}

TEST(TrueClickProb, HandSetLogitOne) {
    auto w = neutral_world();
    // weight_pref * <p, a> = 3 * (1/3 * 1) = 1
    w.users[0].latent_pref[0] = 1.0 / 3.0;
    w.items[0].latent_attr[0] = 1.0;
    EXPECT_NEAR(true_click_prob(w, UserId{0}, ItemId{0}, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
    EXPECT_NEAR(true_click_prob(w, UserId{0}, ItemId{0}, 0), 0.7311, 1e-4);
}

TEST(TrueClickProb, StrictlyIncreasingInPopularity) {
    auto w = neutral_world();
    const double before = true_click_prob(w, UserId{1}, ItemId{2}, 0);
    w.add_exposures(ItemId{2}, 100, 0);
    const double after = true_click_prob(w, UserId{1}, ItemId{2}, 0);
    EXPECT_GT(after, before);
    EXPECT_NEAR(after, sigmoid(w.config.truth.weight_pop * std::log(101.0)), 1e-15);
}

TEST(TrueClickProb, AlwaysInsideOpenInterval) {
    auto w = generate_world(small_config(), 4);
    for (int k = 0; k < 20; ++k) w.upload_item(0);
    for (const auto& u : w.users) {
        for (const auto& it : w.items) {
            const double p = true_click_prob(w, u, it, 3);
            ASSERT_GT(p, 0.0);
            ASSERT_LT(p, 1.0);
        }
    }
}

TEST(TrueClickProb, ColdTermFallsWithFatigue) {
    auto w = neutral_world();
    const ItemId cold = w.upload_item(0);
    const double fresh = true_click_prob(w, UserId{0}, cold, 0);
    w.users[0].fatigue_counter = 5;
    EXPECT_LT(true_click_prob(w, UserId{0}, cold, 0), fresh);
    // Warm items do not see the cold-only term.
    EXPECT_DOUBLE_EQ(true_click_prob(w, UserId{0}, ItemId{0}, 0), 0.5);
}

TEST(TrueClickProb, UnknownIdsThrow) {
    const auto w = neutral_world();
    EXPECT_THROW(true_click_prob(w, UserId{999}, ItemId{0}, 0), LookupError);
    EXPECT_THROW(true_click_prob(w, UserId{0}, ItemId{999}, 0), LookupError);
}

TEST(DrawSessions, MeanMatchesArrivalRates) {
    const auto w = generate_world(small_config(), 2);
    double expected = 0.0;
    for (const auto& u : w.users) expected += u.arrival_rate;
    Rng rng = make_rng(1, 1);
    double total = 0.0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) total += static_cast<double>(draw_sessions(w, rng).size());
    // Poisson total: sd of the mean is sqrt(expected / reps).
    EXPECT_NEAR(total / reps, expected, 5.0 * std::sqrt(expected / reps));
    Rng a = make_rng(3, 3), b = make_rng(3, 3);
    EXPECT_EQ(draw_sessions(w, a), draw_sessions(w, b));
}

TEST(RetrieveCandidates, UniqueUploadedAndBounded) {
    auto w = generate_world(small_config(), 2);
    const ItemId future = w.upload_item(5);
    Rng rng = make_rng(4, 4);
    for (int m : {0, 10, 49, 50, 500}) {
        const auto c = retrieve_candidates(w, 0, m, rng);
        EXPECT_EQ(c.size(), static_cast<std::size_t>(std::min(m, 50)));
        EXPECT_EQ(std::set<ItemId>(c.begin(), c.end()).size(), c.size());
        EXPECT_EQ(std::count(c.begin(), c.end(), future), 0);
    }
}

TEST(CloseSlot, AccumulatesAndRemembersLastSlot) {
    auto w = generate_world(small_config(), 2);
    std::vector<std::int64_t> pv(w.items.size(), 0), clicks(w.items.size(), 0);
    pv[3] = 7;
    clicks[3] = 2;
    w.close_slot(pv, clicks);
    pv[3] = 1;
    clicks[3] = 0;
    w.close_slot(pv, clicks);
    EXPECT_EQ(w.last_slot_pv(ItemId{3}), 1);
    EXPECT_EQ(w.last_slot_pv(ItemId{4}), 0);
    pv.pop_back();
    EXPECT_THROW(w.close_slot(pv, clicks), ConfigError);
}

// Trending draws follow last-slot PV: an item with three times the PV of
// another is drawn about three times as often; silent and future items never.
TEST(TrendingTable, DrawsProportionalToLastSlotPv) {
    auto w = generate_world(small_config(), 2);
    const ItemId future = w.upload_item(5);
    std::vector<std::int64_t> pv(w.items.size(), 0), clicks(w.items.size(), 0);
    pv[1] = 10;
    pv[2] = 30;
    pv[static_cast<std::size_t>(future.value)] = 100;
    w.close_slot(pv, clicks);
    const auto t = TrendingTable::build(w, 0);
    ASSERT_EQ(t.items.size(), 2u);
    Rng rng = make_rng(6, 6);
    int ones = 0, twos = 0;
    const int n = 40000;
    for (int k = 0; k < n; ++k) {
        const ItemId id = t.draw(rng);
        ones += id == ItemId{1};
        twos += id == ItemId{2};
    }
    EXPECT_EQ(ones + twos, n);
    EXPECT_NEAR(twos / static_cast<double>(n), 0.75, 0.01);
    EXPECT_EQ(TrendingTable::build(w, 5).items.size(), 3u);
}

TEST(TrendingTable, NaturalPoolIsSortedUniqueAndIncludesTrending) {
    auto w = generate_world(small_config(), 2);
    std::vector<std::int64_t> pv(w.items.size(), 0), clicks(w.items.size(), 0);
    pv[42] = 5;
    w.close_slot(pv, clicks);
    NaturalRankerConfig cfg;
    cfg.candidates = 3;
    cfg.trending_candidates = 4;
    Rng rng = make_rng(8, 8);
    for (int rep = 0; rep < 50; ++rep) {
        const auto pool = retrieve_natural_candidates(w, 0, TrendingTable::build(w, 0), cfg, rng);
        EXPECT_TRUE(std::is_sorted(pool.begin(), pool.end()));
        EXPECT_EQ(std::set<ItemId>(pool.begin(), pool.end()).size(), pool.size());
        EXPECT_EQ(std::count(pool.begin(), pool.end(), ItemId{42}), 1);
        EXPECT_LE(pool.size(), 4u);
    }
    // Nothing trending yet: the uniform pool alone.
    const auto fresh = generate_world(small_config(), 2);
    EXPECT_EQ(retrieve_natural_candidates(fresh, 0, TrendingTable::build(fresh, 0), cfg, rng).size(), 3u);
}

TEST(NaturalRecommend, PopularityDominatesWithEqualLatents) {
    auto w = neutral_world();
    for (const auto& it : w.items) w.add_exposures(it.id, 10, 1);
    w.add_exposures(ItemId{17}, 90, 9);  // 10x the PV of every other item
    const auto model = foundation::FoundationModel::zeros(w.users.size(), w.user_feature_dim(), w.item_feature_dim(), 4, 3);
    const auto top = natural_recommend(w, model, UserId{0}, 0, 5, NaturalRankerConfig{});
    ASSERT_EQ(top.size(), 5u);
    EXPECT_EQ(top.front(), ItemId{17});
}

TEST(NaturalRecommend, KLargerThanCatalogReturnsAllRanked) {
    auto w = generate_world(small_config(), 6);
    Rng rng = make_rng(1, 2);
    auto model = foundation::FoundationModel::zeros(w.users.size(), w.user_feature_dim(), w.item_feature_dim(), 4, 3);
    model.head.init_uniform(rng);
    const auto all = natural_recommend(w, model, UserId{3}, 0, 1000, NaturalRankerConfig{});
    EXPECT_EQ(all.size(), w.items.size());
    const auto pop = popularity_table(w, NaturalRankerConfig{});
    double prev = std::numeric_limits<double>::infinity();
    for (ItemId id : all) {
        const double s = foundation::foundation_logit(model, w, UserId{3}, id) + pop[static_cast<std::size_t>(id.value)];
        EXPECT_LE(s, prev);
        prev = s;
    }
    EXPECT_EQ(all, natural_recommend(w, model, UserId{3}, 0, 1000, NaturalRankerConfig{}));
}

TEST(NaturalRecommend, RejectsZeroK) {
    const auto w = neutral_world();
    const auto model = foundation::FoundationModel::zeros(w.users.size(), w.user_feature_dim(), w.item_feature_dim(), 4, 3);
    EXPECT_THROW(natural_recommend(w, model, UserId{0}, 0, 0, NaturalRankerConfig{}), ConfigError);
}

TEST(NaturalRank, TiesBreakByItemId) {
    const auto w = neutral_world();
    const std::vector<ItemId> cands{ItemId{9}, ItemId{3}, ItemId{5}};
    const std::vector<double> pop(w.items.size(), 0.0);
    const auto r = natural_rank(w, UserId{0}, cands, 3, pop, [](UserId, ItemId) { return 0.0; });
    EXPECT_EQ(r, (std::vector<ItemId>{ItemId{3}, ItemId{5}, ItemId{9}}));
}

TEST(PopularityScore, PriorGivesZeroCtrTerm) {
    const auto w = neutral_world();
    NaturalRankerConfig c;
    EXPECT_DOUBLE_EQ(popularity_score(w, ItemId{0}, c), 0.0);
}

TEST(SimulateSession, EmptyListsGiveNoEvents) {
    auto w = neutral_world();
    Rng rng = make_rng(1, 1);
    EXPECT_TRUE(simulate_session(w, UserId{0}, 0, {}, {}, rng).empty());
}

TEST(SimulateSession, ForcedClickWithoutPay) {
    auto w = neutral_world();
    w.config.truth.bias = 1000.0;  // click probability 1; quality 0 makes pay probability 0
    Rng rng = make_rng(1, 1);
    const std::vector<ItemId> nat{ItemId{0}, ItemId{1}, ItemId{2}};
    const auto ev = simulate_session(w, UserId{0}, 0, nat, {}, rng);
    ASSERT_EQ(ev.size(), 3u);
    for (const auto& e : ev) {
        EXPECT_TRUE(e.clicked);
        EXPECT_FALSE(e.paid);
        EXPECT_EQ(e.gmv_value, 0.0);
        EXPECT_EQ(e.channel, Channel::natural);
        EXPECT_TRUE(well_formed(e));
    }
}

TEST(SimulateSession, BoostWinsDedupAndCarriesFields) {
    auto w = neutral_world();
    const ItemId cold = w.upload_item(0);
    Rng rng = make_rng(1, 1);
    const std::vector<ItemId> nat{ItemId{0}, cold, ItemId{1}};
    BoostPlacement p;
    p.item = cold;
    p.bid = 0.3;
    p.price = 0.2;
    p.stage = 2;
    const auto ev = simulate_session(w, UserId{0}, 0, nat, std::vector<BoostPlacement>{p}, rng);
    ASSERT_EQ(ev.size(), 3u);
    EXPECT_EQ(ev[0].item_id, cold);
    EXPECT_EQ(ev[0].channel, Channel::boost);
    EXPECT_EQ(ev[0].bid, 0.3);
    EXPECT_EQ(ev[0].price, 0.2);
    EXPECT_EQ(ev[0].stage_at_event, 2);
    EXPECT_EQ(std::count_if(ev.begin(), ev.end(), [&](const EventRecord& e) { return e.item_id == cold; }), 1);
    for (const auto& e : ev) EXPECT_TRUE(well_formed(e));
}

TEST(SimulateSession, FatigueFollowsColdExposures) {
    auto w = neutral_world();
    const ItemId cold = w.upload_item(0);
    Rng rng = make_rng(1, 1);
    w.config.truth.bias = -1000.0;  // never clicks
    const std::vector<ItemId> nat{cold, ItemId{0}};
    simulate_session(w, UserId{0}, 0, nat, {}, rng);
    EXPECT_EQ(w.users[0].fatigue_counter, 1);  // the warm item does not count
    simulate_session(w, UserId{0}, 0, nat, {}, rng);
    EXPECT_EQ(w.users[0].fatigue_counter, 2);
    w.config.truth.bias = 1000.0;  // always clicks
    simulate_session(w, UserId{0}, 0, nat, {}, rng);
    EXPECT_EQ(w.users[0].fatigue_counter, 0);
}

TEST(SimulateSession, PayRateFollowsQuality) {
    auto w = neutral_world();
    w.config.truth.bias = 1000.0;
    w.items[0].intrinsic_quality = 1.0;
    Rng rng = make_rng(2, 2);
    int pays = 0;
    const int n = 20000;
    const std::vector<ItemId> nat{ItemId{0}};
    std::vector<double> probs;
    for (int k = 0; k < n; ++k) {
        const auto ev = simulate_session(w, UserId{0}, 0, nat, {}, rng, &probs);
        pays += ev[0].paid;
        if (ev[0].paid) {
            EXPECT_GT(ev[0].gmv_value, 0.0);
        }
    }
    const double rate = w.config.truth.pay_scale;
    EXPECT_NEAR(static_cast<double>(pays) / n, rate, 5.0 * std::sqrt(rate * (1 - rate) / n));
    EXPECT_EQ(probs.size(), static_cast<std::size_t>(n));
}

TEST(EventRecord, WellFormedRules) {
    EventRecord e;
    EXPECT_TRUE(well_formed(e));
    e.paid = true;
    EXPECT_FALSE(well_formed(e));  // paid without click
    e.clicked = true;
    EXPECT_FALSE(well_formed(e));  // paid without gmv
    e.gmv_value = 12.0;
    EXPECT_TRUE(well_formed(e));
    e.bid = 0.1;
    EXPECT_FALSE(well_formed(e));  // bid on a natural exposure
    e.channel = Channel::boost;
    EXPECT_FALSE(well_formed(e));  // boost exposure without stage or price
    e.price = 0.05;
    e.stage_at_event = 1;
    EXPECT_TRUE(well_formed(e));
}

TEST(EventLog, JsonRoundTrip) {
    std::vector<EventRecord> v(2);
    v[0].slot = 3;
    v[0].user_id = UserId{4};
    v[0].item_id = ItemId{5};
    v[1] = v[0];
    v[1].channel = Channel::boost;
    v[1].clicked = v[1].paid = true;
    v[1].gmv_value = 0.1 + 0.2;  // not exactly representable in short decimal
    v[1].bid = 1.0 / 3.0;
    v[1].price = 0.25;
    v[1].stage_at_event = 3;
    std::stringstream ss;
    write_event_log(ss, v);
    EXPECT_EQ(read_event_log(ss), v);
}

TEST(EventLog, BadLineIsConfigError) {
    std::stringstream ss("{\"slot\": 1}\n");
    EXPECT_THROW(read_event_log(ss), ConfigError);
    EXPECT_THROW(read_event_log(std::string("/nonexistent/events.jsonl")), ConfigError);
    EXPECT_THROW(channel_from_string("organic"), ConfigError);
}

TEST(SimulateSession, ClickCountWithinThreeSigmaOfTruth) {
    auto w = generate_world(small_config(), 12);
    for (int k = 0; k < 10; ++k) w.upload_item(0);
    Rng rng = make_rng(12, 1);
    Rng pick = make_rng(12, 2);
    double expected = 0.0, variance = 0.0;
    int clicks = 0;
    for (int s = 0; s < 1000; ++s) {
        const UserId u{static_cast<std::int32_t>(pick() % w.users.size())};
        const auto items = retrieve_candidates(w, 0, 10, pick);
        std::vector<double> probs;
        for (const auto& e : simulate_session(w, u, 0, items, {}, rng, &probs)) clicks += e.clicked;
        for (double p : probs) {
            expected += p;
            variance += p * (1.0 - p);
        }
    }
    EXPECT_LE(std::fabs(clicks - expected), 3.0 * std::sqrt(variance));
}
