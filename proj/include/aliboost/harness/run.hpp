#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aliboost/bid/bid.hpp"
#include "aliboost/core/error.hpp"
#include "aliboost/core/stats.hpp"
#include "aliboost/foundation/model.hpp"
#include "aliboost/harness/config.hpp"
#include "aliboost/metrics/metrics.hpp"
#include "aliboost/metrics/report.hpp"
#include "aliboost/sim/events.hpp"
#include "aliboost/sim/natural_channel.hpp"
#include "aliboost/sim/session.hpp"
#include "aliboost/sim/world.hpp"
#include "aliboost/stack/features.hpp"
#include "aliboost/stack/grading.hpp"
#include "aliboost/stack/model.hpp"
#include "aliboost/tier/tier.hpp"

namespace aliboost::harness {

// RNG stream ids. Each consumer draws from its own stream so that switching a
// component off does not shift the randomness seen by the others.
namespace streams {
constexpr std::uint64_t kSessions = 0x5e55'0000'0000ULL;
constexpr std::uint64_t kRetrieval = 0x7e71'0000'0000ULL;
constexpr std::uint64_t kClicks = 0xc11c'0000'0000ULL;
constexpr std::uint64_t kBoostPick = 0xb005'0000'0000ULL;
constexpr std::uint64_t kUserSample = 0x05e7'0000'0000ULL;
constexpr std::uint64_t kWarmSubsample = 0x3a27'0000'0000ULL;
}  // namespace streams

inline std::uint64_t slot_stream(std::uint64_t base, Slot slot) {
    return base + static_cast<std::uint64_t>(static_cast<std::int64_t>(slot) + (1LL << 20));
}

/// Prequential prediction for one cold-item exposure, taken before the label
/// was seen.
struct PredictionRecord {
    Slot slot = 0;
    ItemId item;
    UserId user;
    std::int64_t interaction_index = 0;  // 1-based exposure count of the item
    double foundation = 0.5;
    double stack = 0.5;
    int label = 0;
    sim::Channel channel = sim::Channel::natural;
};

/// Cumulative spend of one item-stage at the end of each slot of the stage.
struct StageSpend {
    ItemId item;
    int stage = 1;
    Slot entered = 0;
    std::int64_t budget = 0;
    std::vector<std::int64_t> cumulative;
    bool finished = false;
    tier::Decision outcome = tier::Decision::stay;
};

struct GradeEvent {
    Slot slot = 0;
    stack::PotentialGrade grade;
    bool admitted = false;
};

/// Everything produced by warm-up, shared by all runs with the same world,
/// foundation and stack settings.
struct WarmStart {
    sim::WorldState world;
    stack::RealtimeStats realtime;
    std::vector<tier::CategoryBenchmark> benchmarks;
    foundation::TrainResult foundation;
    stack::StackModel stack;
    std::vector<UserId> user_sample;
    std::size_t warm_events = 0;
};

inline std::uint64_t foundation_seed(const ScenarioConfig& c) { return mix64(c.seed ^ 0xf0f0'1234ULL); }
inline std::uint64_t stack_seed(const ScenarioConfig& c) { return mix64(c.seed ^ 0x57ac'0001ULL); }

/// Key of the configuration fields warm-up depends on.
inline std::string warm_start_key(const ScenarioConfig& c) {
    const auto j = to_json(c);
    nlohmann::ordered_json k;
    for (const char* f : {"seed", "warmup_slots", "world", "natural", "session", "foundation", "stack",
                          "benchmark_window"}) {
        k[f] = j[f];
    }
    k["stage_count"] = effective_stages(c).stage_count();
    return k.dump();
}

inline std::vector<UserId> sample_users(const sim::WorldState& world, int n, std::uint64_t seed) {
    std::vector<UserId> all;
    all.reserve(world.users.size());
    for (const auto& u : world.users) all.push_back(u.id);
    Rng rng = make_rng(seed, streams::kUserSample);
    const auto take = std::min<std::size_t>(all.size(), static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < take; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, all.size() - 1);
        std::swap(all[k], all[pick(rng)]);
    }
    all.resize(take);
    std::sort(all.begin(), all.end());
    return all;
}

inline std::vector<tier::CategoryBenchmark> make_benchmarks(const sim::WorldConfig& w, int window) {
    std::vector<tier::CategoryBenchmark> out;
    for (int c = 0; c < w.num_categories; ++c) out.push_back({CategoryId{c}, window, 0.0, {}});
    return out;
}

inline void close_world_slot(sim::WorldState& world, std::vector<tier::CategoryBenchmark>& benchmarks,
                             std::span<const sim::EventRecord> slot_events, Slot slot) {
    std::vector<std::int64_t> pv(world.items.size(), 0), clicks(world.items.size(), 0);
    std::vector<std::int64_t> cat_pv(benchmarks.size(), 0), cat_clicks(benchmarks.size(), 0);
    for (const auto& e : slot_events) {
        const auto i = static_cast<std::size_t>(e.item_id.value);
        pv[i] += 1;
        clicks[i] += e.clicked ? 1 : 0;
        if (e.channel == sim::Channel::natural) {
            const auto c = static_cast<std::size_t>(world.item(e.item_id).category.value);
            cat_pv[c] += 1;
            cat_clicks[c] += e.clicked ? 1 : 0;
        }
    }
    world.close_slot(pv, clicks);
    for (std::size_t c = 0; c < benchmarks.size(); ++c) tier::update_benchmark(benchmarks[c], cat_pv[c], cat_clicks[c], slot);
}

/// Natural-only warm-up at negative slots with a popularity ranker, then the
/// foundation fit and a warm start of the stack on the last few warm-up slots.
inline WarmStart build_warm_start(const ScenarioConfig& cfg) {
    sim::WorldState world = sim::generate_world(cfg.world, cfg.seed);
    stack::RealtimeStats realtime(cfg.stack.realtime_window);
    auto benchmarks = make_benchmarks(cfg.world, cfg.benchmark_window);
    std::vector<sim::EventRecord> events;
    struct Snapshot {
        stack::RealtimeStats stats;
        std::size_t begin = 0, end = 0;
    };
    std::vector<Snapshot> snapshots;
    auto zero_logit = [](UserId, ItemId) { return 0.0; };
    for (Slot s = -cfg.warmup_slots; s < 0; ++s) {
        const auto popularity = sim::popularity_table(world, cfg.natural);
        const auto trending = sim::TrendingTable::build(world, s);
        Rng session_rng = make_rng(cfg.seed, slot_stream(streams::kSessions, s));
        Rng retrieval_rng = make_rng(cfg.seed, slot_stream(streams::kRetrieval, s));
        Rng click_rng = make_rng(cfg.seed, slot_stream(streams::kClicks, s));
        const std::size_t begin = events.size();
        if (s >= -cfg.stack.warm_start_slots) snapshots.push_back({realtime, begin, begin});
        for (UserId u : sim::draw_sessions(world, session_rng)) {
            const auto cand = sim::retrieve_natural_candidates(world, s, trending, cfg.natural, retrieval_rng);
            const auto list = sim::natural_rank(world, u, cand, cfg.session.size, popularity, zero_logit);
            for (auto& e : sim::simulate_session(world, u, s, list, {}, click_rng)) events.push_back(e);
        }
        for (std::size_t k = begin; k < events.size(); ++k) realtime.record(events[k]);
        if (!snapshots.empty() && s >= -cfg.stack.warm_start_slots) snapshots.back().end = events.size();
        close_world_slot(world, benchmarks, std::span(events).subspan(begin), s);
        realtime.close_slot();
    }

    foundation::TrainConfig fcfg = cfg.foundation;
    fcfg.cutoff = 0;
    fcfg.seed = foundation_seed(cfg);
    foundation::TrainResult fres = foundation::train_foundation(events, world, fcfg);

    const auto stages = effective_stages(cfg);
    stack::StackModel model = stack::StackModel::create(
        stack::layout_for(world, fres.model, cfg.stack.model.cold_dim, stages.stage_count()), cfg.stack.model,
        stack_seed(cfg));
    if (cfg.stack.warm_start_epochs > 0 && !snapshots.empty()) {
        foundation::FoundationCache fcache(fres.model, world);
        std::vector<stack::TrainingExample> examples;
        constexpr std::size_t kPerSlot = 8000;
        Rng sub = make_rng(cfg.seed, streams::kWarmSubsample);
        for (const auto& snap : snapshots) {
            const std::size_t n = snap.end - snap.begin;
            const double keep = n > kPerSlot ? static_cast<double>(kPerSlot) / static_cast<double>(n) : 1.0;
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            for (std::size_t k = snap.begin; k < snap.end; ++k) {
                if (keep < 1.0 && unit(sub) >= keep) continue;
                const auto& e = events[k];
                examples.push_back(stack::prepare_example(
                    model, fcache, world, snap.stats,
                    {e.user_id, e.item_id, e.clicked ? 1 : 0, std::string(sim::to_string(e.channel)), e.slot}));
            }
        }
        stack::FineTuneConfig ft = cfg.stack.fine_tune;
        ft.epochs = cfg.stack.warm_start_epochs;
        ft.seed = stack_seed(cfg);
        stack::fine_tune(model, examples, ft);
    }
    auto sample = sample_users(world, cfg.stack.user_sample, cfg.seed);
    return WarmStart{std::move(world), std::move(realtime), std::move(benchmarks), std::move(fres),
                     std::move(model), std::move(sample), events.size()};
}

/// Memoizes warm-up across runs that share it (ablation arms, reruns).
class WarmStartCache {
public:
    std::shared_ptr<const WarmStart> get(const ScenarioConfig& cfg) {
        const std::string key = warm_start_key(cfg);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        auto ws = std::make_shared<const WarmStart>(build_warm_start(cfg));
        cache_.emplace(key, ws);
        return ws;
    }
    std::size_t size() const { return cache_.size(); }

private:
    std::map<std::string, std::shared_ptr<const WarmStart>> cache_;
};

struct RunResult {
    ScenarioConfig config;
    tier::StageConfig stages;
    std::vector<sim::EventRecord> events;
    std::vector<tier::AuditRecord> audit;
    std::map<ItemId, tier::BoostLedger> ledgers;
    std::vector<StageSpend> spends;
    std::vector<PredictionRecord> predictions;
    std::vector<GradeEvent> grades;
    std::vector<bid::DecisionTrace> trace;
    metrics::Catalog catalog;
    metrics::Report report;
    foundation::FoundationModel foundation;
    double foundation_train_auc = 0.5;
    double foundation_holdout_auc = 0.5;
    std::int64_t ledger_overflows = 0;
};

inline metrics::MetricWindow run_window(const ScenarioConfig& c) { return {0, c.slots}; }

/// Item catalog of a run, reconstructed from the config alone: world
/// generation plus the per-slot uploads.
inline metrics::Catalog catalog_for_config(const ScenarioConfig& c) {
    sim::WorldState world = sim::generate_world(c.world, c.seed);
    for (Slot t = 0; t < c.slots; ++t) {
        for (int k = 0; k < c.world.new_items_per_slot; ++k) world.upload_item(t);
    }
    return metrics::catalog_from_world(world, c.control_fraction, c.seed);
}

namespace detail {

template <class Fn>
decltype(auto) with_slot_context(Slot t, Fn&& fn) {
    const std::string where = "slot " + std::to_string(t) + ": ";
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(where + e.what());
    } catch (const LookupError& e) {
        throw LookupError(where + e.what());
    } catch (const FeatureError& e) {
        throw FeatureError(where + e.what());
    } catch (const NumericError& e) {
        throw NumericError(where + e.what());
    } catch (const TrainingError& e) {
        throw TrainingError(where + e.what());
    } catch (const AdmissionError& e) {
        throw AdmissionError(where + e.what());
    } catch (const LedgerOverflowError& e) {
        throw LedgerOverflowError(where + e.what());
    }
}

}  // namespace detail

/// One scenario: warm-up (possibly cached), then the slot loop.
inline RunResult run_scenario(const ScenarioConfig& cfg, WarmStartCache* cache = nullptr) {
    validate(cfg);
    const tier::StageConfig stages = effective_stages(cfg);
    std::shared_ptr<const WarmStart> ws = cache ? cache->get(cfg) : std::make_shared<const WarmStart>(build_warm_start(cfg));

    RunResult out;
    out.config = cfg;
    out.stages = stages;
    out.foundation = ws->foundation.model;
    out.foundation_train_auc = ws->foundation.train_auc;
    out.foundation_holdout_auc = ws->foundation.holdout_auc;

    sim::WorldState world = ws->world;
    stack::RealtimeStats realtime = ws->realtime;
    auto benchmarks = ws->benchmarks;
    stack::StackModel model = ws->stack;
    const auto& fmodel = out.foundation;
    foundation::FoundationCache fcache(fmodel, world);
    const auto& sample = ws->user_sample;

    const AblationFlags& ab = cfg.ablation;
    const bool boosting = !ab.disable_boosting;
    const tier::TransitionPolicy policy{ab.disable_exit, ab.disable_promotion};
    tier::LedgerBook book(stages);
    std::map<ItemId, bid::PacingState> pacing;
    std::map<ItemId, double> p40;
    std::map<ItemId, std::size_t> open_spend;
    std::vector<ItemId> fresh;

    Vec sample_weights;
    for (UserId u : sample) sample_weights.push_back(world.user(u).arrival_rate);
    double expected_sessions = 0.0;
    for (const auto& u : world.users) expected_sessions += u.arrival_rate;

    stack::FineTuneConfig ft = cfg.stack.fine_tune;
    ft.seed = stack_seed(cfg);
    // Share of price-clearing candidates that won a boost position last slot;
    // scales the stage-entry delivery forecast for slate competition.
    double fill_rate = 1.0;

    auto open_stage = [&](const tier::BoostLedger& l) {
        open_spend[l.item] = out.spends.size();
        out.spends.push_back({l.item, l.current_stage, l.entered_slot, stages.budget(l.current_stage), {}, false,
                              tier::Decision::stay});
    };

    for (Slot t = 0; t < cfg.slots; ++t) {
        detail::with_slot_context(t, [&] {
            std::vector<ItemId> uploads;
            for (int k = 0; k < cfg.world.new_items_per_slot; ++k) uploads.push_back(world.upload_item(t));

            std::optional<stack::PairScorer> scorer;
            std::map<ItemId, double> keep;  // retrieval thinning per boosting item
            if (boosting) {
                scorer.emplace(model, fcache, world, realtime, t);
                // Regrade every boosting item plus this slot's eligible uploads
                // against one shared user sample.
                std::map<ItemId, double> pool;
                std::map<ItemId, Vec> dists;
                std::vector<ItemId> newcomers;
                for (ItemId id : book.active_items()) {
                    dists[id] = scorer->distribution(id, sample);
                    pool[id] = stack::percentile_p40(dists[id]);
                }
                for (ItemId id : uploads) {
                    if (metrics::is_control_item(id, t, cfg.control_fraction, cfg.seed)) continue;
                    dists[id] = scorer->distribution(id, sample);
                    pool[id] = stack::percentile_p40(dists[id]);
                    newcomers.push_back(id);
                }
                if (!pool.empty()) {
                    const auto graded = stack::rank_and_grade(pool);
                    for (const auto& [id, g] : graded) {
                        const bool admitted = std::find(newcomers.begin(), newcomers.end(), id) != newcomers.end();
                        out.grades.push_back({t, g, admitted});
                        if (admitted) {
                            const auto& l = tier::admit_item(book, id, world.item(id).category, g, t);
                            realtime.set_stage(id, l.current_stage);
                            open_stage(l);
                            fresh.push_back(id);
                        }
                    }
                }
                p40 = pool;
                const auto active = book.active_items();
                const double reach =
                    active.empty() ? 0.0
                                   : std::min(1.0, static_cast<double>(cfg.session.boost_candidates) /
                                                       static_cast<double>(active.size()));
                auto keep_share = [&](double target) {
                    if (cfg.session.candidate_reach <= 0.0 || reach <= 0.0) return 1.0;
                    return std::min(1.0, cfg.session.candidate_reach * target / (expected_sessions * reach));
                };
                Vec ufac(sample.size(), 1.0);
                if (!ab.disable_user_factor) {
                    for (std::size_t k = 0; k < sample.size(); ++k) ufac[k] = bid::compute_user_factor(world.user(sample[k]));
                }
                for (ItemId id : fresh) {
                    const auto& l = book.at(id);
                    if (!l.active()) continue;
                    bid::PacingState st;
                    st.item = id;
                    st.stage = l.current_stage;
                    st.stage_entered = l.entered_slot;
                    st.target_speed = std::max(bid::stage_target_speed(l, stages, t), 1e-9);
                    if (!ab.disable_speed_factor && !ab.disable_bidding) {
                        st.speed_factor = bid::initial_speed_factor(p40.at(id), dists.at(id), ufac, sample_weights,
                                                                    expected_sessions * reach * keep_share(st.target_speed) *
                                                                        fill_rate,
                                                                    st.target_speed,
                                                                    cfg.pacing);
                    }
                    pacing[id] = st;
                }
                fresh.clear();
                for (ItemId id : active) keep[id] = keep_share(pacing.at(id).target_speed);
            }

            const auto popularity = sim::popularity_table(world, cfg.natural);
            const auto trending = sim::TrendingTable::build(world, t);
            Rng session_rng = make_rng(cfg.seed, slot_stream(streams::kSessions, t));
            Rng retrieval_rng = make_rng(cfg.seed, slot_stream(streams::kRetrieval, t));
            Rng click_rng = make_rng(cfg.seed, slot_stream(streams::kClicks, t));
            Rng pick_rng = make_rng(cfg.seed, slot_stream(streams::kBoostPick, t));
            const std::vector<ItemId> eligible = boosting ? book.active_items() : std::vector<ItemId>{};
            std::vector<ItemId> pickable;
            std::int64_t cleared = 0, placed = 0;
            std::vector<std::int64_t> slot_pv(world.items.size(), 0);
            std::vector<stack::EnrichedSample> samples;
            const std::size_t slot_begin = out.events.size();
            auto logit = [&](UserId u, ItemId i) { return fcache.logit(u, i); };

            for (UserId u : sim::draw_sessions(world, session_rng)) {
                const auto cand = sim::retrieve_natural_candidates(world, t, trending, cfg.natural, retrieval_rng);
                auto natural = sim::natural_rank(world, u, cand, cfg.session.size, popularity, logit);

                std::vector<sim::BoostPlacement> placements;
                if (boosting && cfg.session.boost_positions > 0 && !eligible.empty()) {
                    const double ufactor = ab.disable_user_factor ? 1.0 : bid::compute_user_factor(world.user(u));
                    pickable = eligible;
                    std::vector<bid::BoostCandidate> cands;
                    int picked = 0;
                    for (std::size_t k = 0; k < pickable.size() && picked < cfg.session.boost_candidates; ++k) {
                        std::uniform_int_distribution<std::size_t> pick(k, pickable.size() - 1);
                        std::swap(pickable[k], pickable[pick(pick_rng)]);
                        const ItemId id = pickable[k];
                        const auto& l = book.at(id);
                        if (!l.active() || l.stage_pv >= stages.budget(l.current_stage)) continue;
                        ++picked;
                        const double share = keep.at(id);
                        if (share < 1.0 && !std::bernoulli_distribution(share)(pick_rng)) continue;
                        const double b = scorer->predict(u, id);
                        const bid::PacingState& ps = pacing.at(id);
                        const double speed = ab.disable_speed_factor ? 1.0 : ps.speed_factor;
                        const auto q = bid::quote_price(p40.at(id), speed, ufactor, u, id, t);
                        const bool deliver = ab.disable_bidding || bid::decide_delivery(b, q);
                        if (cfg.write_trace) out.trace.push_back({t, u, id, b, q.price, speed, ufactor, deliver});
                        if (deliver) cands.push_back({id, b, q});
                    }
                    cleared += static_cast<std::int64_t>(cands.size());
                    const auto slate = bid::select_boost_slate(std::move(cands), cfg.pacing.slate_size);
                    for (const auto& c : slate) {
                        if (static_cast<int>(placements.size()) >= cfg.session.boost_positions) break;
                        sim::BoostPlacement p;
                        p.item = c.item;
                        if (!ab.disable_bidding) {
                            p.bid = c.bid;
                            p.price = c.quote.price;
                        }
                        p.stage = book.at(c.item).current_stage;
                        placements.push_back(p);
                    }
                    placed += static_cast<std::int64_t>(placements.size());
                }
                // Placed items are removed from the natural list, which is then cut to fill the session.
                natural.erase(std::remove_if(natural.begin(), natural.end(),
                                             [&](ItemId i) {
                                                 return std::any_of(placements.begin(), placements.end(),
                                                                    [&](const auto& p) { return p.item == i; });
                                             }),
                              natural.end());
                const auto room = static_cast<std::size_t>(cfg.session.size) - placements.size();
                if (natural.size() > room) natural.resize(room);

                for (const auto& e : sim::simulate_session(world, u, t, natural, placements, click_rng)) {
                    const auto i = static_cast<std::size_t>(e.item_id.value);
                    slot_pv[i] += 1;
                    if (e.channel == sim::Channel::boost) {
                        try {
                            tier::record_boost_event(book.at(e.item_id), e, stages);
                        } catch (const LedgerOverflowError&) {
                            ++out.ledger_overflows;
                            throw;
                        }
                        pacing.at(e.item_id).deliveries_this_slot += 1;
                    }
                    realtime.record(e);
                    if (world.is_cold(e.item_id, t)) {
                        PredictionRecord pr;
                        pr.slot = t;
                        pr.item = e.item_id;
                        pr.user = e.user_id;
                        pr.interaction_index = world.pv_so_far(e.item_id) + slot_pv[i];
                        pr.foundation = fcache.predict(e.user_id, e.item_id);
                        pr.stack = scorer ? scorer->predict(e.user_id, e.item_id, pr.foundation)
                                          : std::numeric_limits<double>::quiet_NaN();
                        pr.label = e.clicked ? 1 : 0;
                        pr.channel = e.channel;
                        out.predictions.push_back(pr);
                        if (boosting) {
                            samples.push_back({e.user_id, e.item_id, pr.label, std::string(sim::to_string(e.channel)), t});
                        }
                    }
                    out.events.push_back(e);
                }
            }

            // Fine-tune on this slot's cold exposures with start-of-slot features.
            if (boosting && !samples.empty()) {
                std::vector<stack::TrainingExample> examples;
                examples.reserve(samples.size());
                for (const auto& s : samples) examples.push_back(stack::prepare_example(model, fcache, world, realtime, s));
                stack::fine_tune(model, examples, ft);
            }

            close_world_slot(world, benchmarks, std::span(out.events).subspan(slot_begin), t);
            if (cleared > 0) fill_rate = static_cast<double>(placed) / static_cast<double>(cleared);

            if (boosting) {
                const Slot now = t + 1;
                for (ItemId id : book.active_items()) {
                    tier::BoostLedger& l = book.at(id);
                    out.spends[open_spend.at(id)].cumulative.push_back(l.stage_pv);
                    const auto& bench = benchmarks[static_cast<std::size_t>(l.category.value)];
                    const auto d = tier::evaluate_stage(l, bench, stages, now);
                    const auto rec = tier::apply_decision(l, d, bench, stages, now, policy);
                    if (!rec) continue;
                    out.audit.push_back(*rec);
                    StageSpend& sp = out.spends[open_spend.at(id)];
                    sp.finished = true;
                    sp.outcome = rec->decision;
                    if (l.active()) open_stage(l);
                    realtime.set_stage(id, l.active() ? l.current_stage : 0);
                }
            }
            realtime.close_slot();
            if (boosting) {
                auto more = bid::end_of_slot_repricing(pacing, book, t + 1, cfg.pacing);
                fresh.insert(fresh.end(), more.begin(), more.end());
            }
        });
    }

    out.ledgers = book.ledgers();
    out.catalog = metrics::catalog_from_world(world, cfg.control_fraction, cfg.seed);
    out.report = metrics::build_report(out.events, out.catalog, run_window(cfg), cfg.report);
    return out;
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json ledger_json(const RunResult& r) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& [id, l] : r.ledgers) {
        const auto t = tier::total_boost_budget(l, r.stages);
        arr.push_back({{"item_id", id.value},
                       {"category", l.category.value},
                       {"admitted_slot", l.admitted_slot},
                       {"initial_stage", l.initial_stage},
                       {"final_stage", l.current_stage},
                       {"status", tier::to_string(l.status)},
                       {"granted_budget", t.granted},
                       {"passed_budget", t.eq8_passed},
                       {"spent", t.spent},
                       {"total_clicks", l.total_clicks}});
    }
    return arr;
}

/// Run-level diagnostics that are not a function of the event log alone.
inline nlohmann::ordered_json run_stats_json(const RunResult& r) {
    nlohmann::ordered_json j;
    j["foundation_train_auc"] = r.foundation_train_auc;
    j["foundation_holdout_auc"] = r.foundation_holdout_auc;
    j["events"] = r.events.size();
    j["admitted_items"] = r.ledgers.size();
    j["transitions"] = r.audit.size();
    j["ledger_overflows"] = r.ledger_overflows;
    return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + p.string());
    out << s;
}

/// Writes every artifact of a run into `dir`.
inline void write_artifacts(const RunResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "resolved_config.json", to_json(r.config).dump(2) + "\n");
    sim::write_event_log((dir / "events.jsonl").string(), r.events);
    foundation::save_checkpoint(r.foundation, (dir / "foundation.json").string());
    {
        std::ofstream g(dir / "grades.jsonl", std::ios::binary);
        for (const auto& ge : r.grades) {
            auto j = stack::grade_record(ge.slot, ge.grade);
            j["admitted"] = ge.admitted;
            g << j.dump() << '\n';
        }
    }
    {
        std::ofstream a(dir / "audit.jsonl", std::ios::binary);
        tier::write_audit_log(a, r.audit);
    }
    if (r.config.write_trace) {
        std::ofstream tr(dir / "trace.jsonl", std::ios::binary);
        for (const auto& d : r.trace) tr << bid::to_json(d).dump() << '\n';
    }
    write_text(dir / "report.csv", metrics::report_csv(r.report));
    write_text(dir / "summary.json", r.report.summary.dump(2) + "\n");
    write_text(dir / "ledger.json", ledger_json(r).dump(2) + "\n");
    write_text(dir / "run_stats.json", run_stats_json(r).dump(2) + "\n");
}

/// Recomputes the report from a persisted run directory.
inline metrics::Report report_from_artifacts(const std::filesystem::path& dir) {
    const ScenarioConfig cfg = load_config((dir / "resolved_config.json").string());
    const auto events = sim::read_event_log((dir / "events.jsonl").string());
    return metrics::build_report(events, catalog_for_config(cfg), run_window(cfg), cfg.report);
}

}  // namespace aliboost::harness
