// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 3 4        run only the listed criteria
//
// Exit status is non-zero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aliboost/aliboost.hpp"

using namespace aliboost;
namespace fs = std::filesystem;

namespace {

constexpr int kSeeds = 5;
constexpr std::uint64_t kFirstSeed = 101;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << std::fixed << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// Independent reference implementations (criterion 1)
// ---------------------------------------------------------------------------

int oracle_decision(bool active, std::int64_t pv, std::int64_t clicks, int stage, int stages, Slot entered, Slot now,
                    const std::vector<std::int64_t>& budgets, const std::vector<double>& gammas, double bench,
                    int min_eval, int max_slots) {
    // 0 stay, 1 promote, 2 exit, 3 graduate
    if (!active) return 0;
    const bool spent = pv >= budgets[static_cast<std::size_t>(stage - 1)];
    const bool timed_out = now - entered >= max_slots;
    if (!spent && !timed_out) return 0;
    if (pv == 0 || pv < min_eval) return 2;
    const double ctr = static_cast<double>(clicks) / static_cast<double>(pv);
    if (!(ctr >= gammas[static_cast<std::size_t>(stage - 1)] * bench)) return 2;
    return stage == stages ? 3 : 1;
}

double oracle_p40(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t k = 1;
    while (5 * k < 2 * v.size()) ++k;  // smallest k with k >= 0.4 n
    return v[k - 1];
}

std::map<int, std::pair<double, int>> oracle_grades(const std::vector<std::pair<int, double>>& items) {
    std::map<int, std::pair<double, int>> out;
    const double n = static_cast<double>(items.size());
    for (const auto& [id, p] : items) {
        int count = 0;
        for (const auto& other : items) count += other.second <= p ? 1 : 0;
        const double r = 100.0 * count / n;
        out[id] = {r, r < 70.0 ? 1 : (r < 90.0 ? 2 : 3)};
    }
    return out;
}

double oracle_speed_factor(const std::vector<double>& errors_newest_first, double prev_s, bool level,
                           const bid::PacingConfig& c) {
    const double w[3] = {c.delta_p, c.delta_q, c.delta_d};
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < std::min<std::size_t>(3, errors_newest_first.size()); ++k) {
        num += w[k] * errors_newest_first[k];
        den += w[k];
    }
    const double e = num / den;
    double step = std::pow(e, c.gain);
    if (step > c.max_step) step = c.max_step;
    if (step < 1.0 / c.max_step) step = 1.0 / c.max_step;
    const double raw = level ? e : prev_s * step;
    return std::min(c.s_max, std::max(c.s_min, raw));
}

bool close_rel(double a, double b, double tol = 1e-12) {
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

Outcome criterion1() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr int kTrials = 20000;
    long mismatches = 0;
    std::map<std::string, long> checked;

    // evaluate_stage
    for (int t = 0; t < kTrials; ++t) {
        const int K = 1 + static_cast<int>(rng() % 4);
        std::vector<std::int64_t> budgets;
        std::vector<double> gammas;
        std::int64_t b = 5 + static_cast<std::int64_t>(rng() % 50);
        double g = 1.0 + unit(rng) * 0.2;
        for (int k = 0; k < K; ++k) {
            budgets.push_back(b);
            gammas.push_back(g);
            b += 1 + static_cast<std::int64_t>(rng() % 200);
            g += 0.01 + unit(rng) * 0.3;
        }
        const int min_eval = static_cast<int>(rng() % 30);
        const int max_slots = 1 + static_cast<int>(rng() % 12);
        auto cfg = tier::StageConfig::make(budgets, gammas, min_eval, max_slots);
        tier::BoostLedger l;
        l.current_stage = 1 + static_cast<int>(rng() % static_cast<unsigned>(K));
        const auto B = budgets[static_cast<std::size_t>(l.current_stage - 1)];
        l.stage_pv = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(B + 1));
        l.stage_clicks = l.stage_pv > 0 ? static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(l.stage_pv + 1)) : 0;
        l.entered_slot = static_cast<Slot>(rng() % 50);
        l.status = rng() % 10 == 0 ? tier::Status::exited : tier::Status::active;
        const Slot now = l.entered_slot + static_cast<Slot>(rng() % 15);
        tier::CategoryBenchmark bench;
        // Benchmarks on a coarse grid make exact threshold ties common.
        bench.rolling_ctr = rng() % 3 == 0 ? static_cast<double>(rng() % 20) / 40.0 : unit(rng) * 0.4;
        const auto d = tier::evaluate_stage(l, bench, cfg, now);
        const int want = oracle_decision(l.active(), l.stage_pv, l.stage_clicks, l.current_stage, K, l.entered_slot,
                                         now, budgets, gammas, bench.rolling_ctr, min_eval, max_slots);
        const int got = d == tier::Decision::stay ? 0 : d == tier::Decision::promote ? 1 : d == tier::Decision::exit ? 2 : 3;
        mismatches += got != want;
        ++checked["evaluate_stage"];
    }

    // percentile_p40
    for (int t = 0; t < kTrials; ++t) {
        const std::size_t n = 1 + rng() % 200;
        std::vector<double> v(n);
        for (auto& x : v) x = rng() % 4 == 0 ? static_cast<double>(rng() % 10) / 10.0 : unit(rng);
        mismatches += stack::percentile_p40(v) != oracle_p40(v);
        ++checked["percentile_p40"];
    }

    // rank_and_grade
    for (int t = 0; t < kTrials / 10; ++t) {
        const std::size_t n = 1 + rng() % 120;
        std::vector<std::pair<int, double>> items;
        std::map<ItemId, double> p40s;
        for (std::size_t k = 0; k < n; ++k) {
            const double p = rng() % 3 == 0 ? static_cast<double>(rng() % 8) / 8.0 : unit(rng);
            items.emplace_back(static_cast<int>(k), p);
            p40s[ItemId{static_cast<std::int32_t>(k)}] = p;
        }
        const auto got = stack::rank_and_grade(p40s);
        const auto want = oracle_grades(items);
        for (const auto& [id, g] : got) {
            const auto& w = want.at(id.value);
            mismatches += !close_rel(g.rank_percent, w.first) || g.stage != w.second;
            ++checked["rank_and_grade"];
        }
    }

    // compute_speed_error / update_speed_factor
    for (int t = 0; t < kTrials; ++t) {
        bid::PacingConfig c;
        c.delta_p = 0.1 + unit(rng);
        c.delta_q = unit(rng);
        c.delta_d = unit(rng);
        c.mode = rng() % 2 ? bid::PacingMode::level : bid::PacingMode::integral;
        c.gain = 0.1 + unit(rng);
        c.max_step = rng() % 4 == 0 ? 1e9 : 1.0 + unit(rng) * 3.0;
        bid::PacingState s;
        s.speed_factor = std::exp((unit(rng) - 0.5) * 4.0);
        std::vector<double> errors;
        const int steps = 1 + static_cast<int>(rng() % 6);
        bool ok = true;
        for (int k = 0; k < steps; ++k) {
            const double target = 0.5 + unit(rng) * 50.0;
            const double actual = rng() % 5 == 0 ? 0.0 : unit(rng) * 100.0;
            const double e = bid::compute_speed_error(actual, target, c.error_floor);
            const double e_want = actual == 0.0 ? c.error_floor : actual / target;
            ok = ok && close_rel(e, e_want);
            errors.insert(errors.begin(), e_want);
            const double want = oracle_speed_factor(errors, s.speed_factor, c.mode == bid::PacingMode::level, c);
            bid::update_speed_factor(s, e, c);
            ok = ok && close_rel(s.speed_factor, want);
        }
        mismatches += !ok;
        ++checked["speed_factor"];
    }

    // quote_price / decide_delivery
    for (int t = 0; t < kTrials; ++t) {
        const double p40 = unit(rng);
        const double S = 0.1 + unit(rng) * 9.9;
        const int fatigue = static_cast<int>(rng() % 30);
        const int grade = 1 + static_cast<int>(rng() % 10);
        const double U = bid::compute_user_factor(fatigue, grade);
        const double U_want = std::log(fatigue + std::exp(1.0)) / std::sqrt(static_cast<double>(grade));
        const auto q = bid::quote_price(p40, S, U);
        const double price_want = p40 * S * U_want;
        const double b = rng() % 4 == 0 ? q.price : unit(rng);
        const bool deliver_want = b > q.price;
        mismatches += !close_rel(U, U_want) || !close_rel(q.price, price_want) || bid::decide_delivery(b, q) != deliver_want;
        ++checked["quote_price"];
    }

    std::string detail;
    for (const auto& [k, n] : checked) detail += k + "=" + std::to_string(n) + " ";
    bool enough = true;
    for (const auto& [k, n] : checked) enough = enough && n >= 10000;
    return {mismatches == 0 && enough, detail + "mismatches=" + std::to_string(mismatches)};
}

// ---------------------------------------------------------------------------
// Criterion 2: finite-difference gradients
// ---------------------------------------------------------------------------

double rel_err(double a, double b) { return std::fabs(a - b) / std::max(1e-6, std::fabs(a) + std::fabs(b)); }

Outcome criterion2() {
    harness::ScenarioConfig cfg;
    cfg.world.num_users = 300;
    cfg.world.num_warm_items = 60;
    cfg.warmup_slots = 2;
    cfg.stack.warm_start_slots = 1;
    cfg.foundation.epochs = 1;
    const auto ws = harness::build_warm_start(cfg);
    sim::WorldState world = ws.world;
    for (int k = 0; k < 5; ++k) world.upload_item(0);
    foundation::FoundationCache fcache(ws.foundation.model, world);

    double worst_stack = 0.0, worst_found = 0.0;
    std::size_t n_checked = 0;
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 3; ++rep) {
        stack::StackConfig sc;
        sc.regularization_coeff = 1e-3;
        sc.source_weights = {{"boost", 2.0}, {"natural", 1.0}};
        auto model = stack::StackModel::create(ws.stack.layout, sc, 900 + static_cast<std::uint64_t>(rep));
        std::vector<stack::TrainingExample> batch;
        for (int k = 0; k < 10; ++k) {
            const UserId u{static_cast<std::int32_t>(rng() % world.users.size())};
            const ItemId i{static_cast<std::int32_t>(world.items.size() - 1 - rng() % 5)};
            batch.push_back(stack::prepare_example(model, fcache, world, ws.realtime,
                                                   {u, i, static_cast<int>(rng() % 2), k % 2 ? "boost" : "natural", 0}));
        }
        stack::StackGradient g;
        stack::stack_objective(model, batch, &g);
        const double h = 1e-6;
        auto params = model.mlp.params();
        for (std::size_t p = 0; p < params.size(); p += 7) {
            const double keep = params[p];
            params[p] = keep + h;
            const double up = stack::stack_objective(model, batch);
            params[p] = keep - h;
            const double dn = stack::stack_objective(model, batch);
            params[p] = keep;
            const double fd = (up - dn) / (2 * h);
            if (std::fabs(fd) + std::fabs(g.mlp[p]) > 1e-7) worst_stack = std::max(worst_stack, rel_err(fd, g.mlp[p]));
            ++n_checked;
        }
        for (const auto& [id, gc] : g.cold) {
            Vec& row = model.materialize(ItemId{id});
            for (std::size_t c = 0; c < row.size(); ++c) {
                const double keep = row[c];
                row[c] = keep + h;
                const double up = stack::stack_objective(model, batch);
                row[c] = keep - h;
                const double dn = stack::stack_objective(model, batch);
                row[c] = keep;
                const double fd = (up - dn) / (2 * h);
                if (std::fabs(fd) + std::fabs(gc[c]) > 1e-7) worst_stack = std::max(worst_stack, rel_err(fd, gc[c]));
                ++n_checked;
            }
        }
    }

    // Foundation: 10 seeded warm-item exposures.
    foundation::FoundationModel fm = ws.foundation.model;
    std::vector<sim::EventRecord> batch;
    for (int k = 0; k < 10; ++k) {
        sim::EventRecord e;
        e.user_id = UserId{static_cast<std::int32_t>(rng() % world.users.size())};
        e.item_id = ItemId{static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(cfg.world.num_warm_items))};
        e.clicked = rng() % 2;
        batch.push_back(e);
    }
    const double l2 = 1e-3;
    foundation::FoundationGrad g;
    foundation::foundation_loss(fm, world, batch, l2, &g);
    auto fd_check = [&](double& param, double analytic) {
        const double h = 1e-6, keep = param;
        param = keep + h;
        const double up = foundation::foundation_loss(fm, world, batch, l2, nullptr);
        param = keep - h;
        const double dn = foundation::foundation_loss(fm, world, batch, l2, nullptr);
        param = keep;
        const double fd = (up - dn) / (2 * h);
        if (std::fabs(fd) + std::fabs(analytic) > 1e-7) worst_found = std::max(worst_found, rel_err(fd, analytic));
        ++n_checked;
    };
    auto head = fm.head.params();
    for (std::size_t p = 0; p < head.size(); p += 3) fd_check(head[p], g.head[p]);
    const auto d = static_cast<std::size_t>(fm.dim);
    for (int u : g.touched_users) {
        for (std::size_t k = 0; k < d; ++k) fd_check(fm.user_embeddings[static_cast<std::size_t>(u) * d + k], g.user_embeddings[static_cast<std::size_t>(u) * d + k]);
    }
    for (int r : g.touched_item_rows) {
        for (std::size_t k = 0; k < d; ++k) fd_check(fm.item_embeddings[static_cast<std::size_t>(r) * d + k], g.item_embeddings[static_cast<std::size_t>(r) * d + k]);
    }
    const bool ok = worst_stack < 1e-4 && worst_found < 1e-4;
    return {ok, "coords=" + std::to_string(n_checked) + " max_rel_err stack=" + fmt(worst_stack * 1e6, 3) +
                    "e-6 foundation=" + fmt(worst_found * 1e6, 3) + "e-6"};
}

// ---------------------------------------------------------------------------
// Scenario runs shared by criteria 3, 4, 6, 7 and 8
// ---------------------------------------------------------------------------

struct Digest {
    std::string arm;
    std::uint64_t seed = 0;
    double cold_ctr = 0.0;
    double roi = std::nan("");
    std::vector<double> retention;
    double below_line = std::nan("");
    double auc_stack[2] = {0.5, 0.5};
    double auc_found[2] = {0.5, 0.5};
    std::map<int, std::pair<int, int>> pacing;  // stage -> (within, finished)
    std::int64_t overflows = 0;
    bool ledgers_within_budget = true;
    double seconds = 0.0;
};

bool stage_on_trajectory(const harness::StageSpend& s, int max_slots) {
    for (int tau : {5, 10}) {
        if (s.cumulative.empty()) return false;
        const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(tau), s.cumulative.size()) - 1;
        const double spent = static_cast<double>(s.cumulative[idx]);
        const double target = static_cast<double>(s.budget) * tau / max_slots;
        if (std::fabs(spent - target) > 0.2 * target) return false;
    }
    return true;
}

Digest digest(const std::string& arm, const harness::RunResult& r, double seconds) {
    Digest d;
    d.arm = arm;
    d.seed = r.config.seed;
    d.seconds = seconds;
    const auto& s = r.report.summary;
    d.cold_ctr = s["cold"]["ctr_percent"].get<double>();
    if (!s["roi"].is_null()) d.roi = s["roi"].get<double>();
    d.retention = s["retention_percent"].get<std::vector<double>>();
    if (!s["below_line_percent"].is_null()) d.below_line = s["below_line_percent"].get<double>();
    for (int phase = 0; phase < 2; ++phase) {
        std::vector<double> st, fo;
        std::vector<int> y;
        for (const auto& p : r.predictions) {
            const bool in_phase = phase == 0 ? p.interaction_index <= 3 : p.interaction_index >= 4;
            if (!in_phase || std::isnan(p.stack)) continue;
            st.push_back(p.stack);
            fo.push_back(p.foundation);
            y.push_back(p.label);
        }
        d.auc_stack[phase] = auc(st, y).value_or(0.5);
        d.auc_found[phase] = auc(fo, y).value_or(0.5);
    }
    for (const auto& sp : r.spends) {
        if (!sp.finished) continue;
        auto& [within, total] = d.pacing[sp.stage];
        within += stage_on_trajectory(sp, r.stages.max_stage_slots) ? 1 : 0;
        total += 1;
    }
    d.overflows = r.ledger_overflows;
    for (const auto& [id, l] : r.ledgers) {
        if (l.stage_pv > r.stages.budget(l.current_stage)) d.ledgers_within_budget = false;
    }
    return d;
}

std::map<std::string, harness::ScenarioConfig> arm_configs() {
    harness::ScenarioConfig base;
    std::map<std::string, harness::ScenarioConfig> arms;
    auto add = [&](const std::string& name, auto&& edit) {
        harness::ScenarioConfig c = base;
        edit(c.ablation);
        arms[name] = c;
    };
    add("base", [](harness::AblationFlags&) {});
    add("no_exit", [](harness::AblationFlags& a) { a.disable_exit = true; });
    add("no_promotion", [](harness::AblationFlags& a) { a.disable_promotion = true; });
    add("stages_1", [](harness::AblationFlags& a) { a.stage_count = 1; });
    add("no_bidding", [](harness::AblationFlags& a) { a.disable_bidding = true; });
    add("no_speed_factor", [](harness::AblationFlags& a) { a.disable_speed_factor = true; });
    add("no_user_factor", [](harness::AblationFlags& a) { a.disable_user_factor = true; });
    add("boosting_off", [](harness::AblationFlags& a) { a.disable_boosting = true; });
    return arms;
}

class RunBank {
public:
    const std::vector<Digest>& get(const std::string& arm) {
        auto it = digests_.find(arm);
        if (it != digests_.end()) return it->second;
        const auto cfgs = arm_configs();
        std::vector<Digest> out;
        for (int k = 0; k < kSeeds; ++k) {
            harness::ScenarioConfig c = cfgs.at(arm);
            c.seed = kFirstSeed + static_cast<std::uint64_t>(k);
            // Retention and hot-item metrics are compared on one threshold per seed.
            if (arm != "base") c.report.hot_threshold = hot_threshold(c.seed);
            const auto t0 = std::chrono::steady_clock::now();
            const auto r = harness::run_scenario(c, &cache_);
            const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (arm == "base") hot_[c.seed] = r.report.summary["hot_threshold"].get<double>();
            out.push_back(digest(arm, r, sec));
            ++runs_;
        }
        return digests_[arm] = out;
    }
    int runs() const { return runs_; }
    std::int64_t overflows() const {
        std::int64_t n = 0;
        for (const auto& [a, ds] : digests_) {
            for (const auto& d : ds) n += d.overflows + (d.ledgers_within_budget ? 0 : 1);
        }
        return n;
    }

private:
    double hot_threshold(std::uint64_t seed) {
        if (!hot_.count(seed)) get("base");
        return hot_.at(seed);
    }
    harness::WarmStartCache cache_;
    std::map<std::string, std::vector<Digest>> digests_;
    std::map<std::uint64_t, double> hot_;
    int runs_ = 0;
};

template <class F>
double mean_of(const std::vector<Digest>& ds, F&& f) {
    double s = 0.0;
    for (const auto& d : ds) s += f(d);
    return s / static_cast<double>(ds.size());
}

Outcome criterion3(RunBank& bank) {
    const auto& ds = bank.get("base");
    const double s1 = mean_of(ds, [](const Digest& d) { return d.auc_stack[0]; });
    const double f1 = mean_of(ds, [](const Digest& d) { return d.auc_found[0]; });
    const double s2 = mean_of(ds, [](const Digest& d) { return d.auc_stack[1]; });
    const double f2 = mean_of(ds, [](const Digest& d) { return d.auc_found[1]; });
    const bool ok = s1 - f1 >= 0.02 && s2 - f2 >= 0.02;
    return {ok, "phase I stack=" + fmt(s1) + " foundation=" + fmt(f1) + " lift=" + fmt(s1 - f1) +
                    "; phase II stack=" + fmt(s2) + " foundation=" + fmt(f2) + " lift=" + fmt(s2 - f2)};
}

Outcome criterion4(RunBank& bank) {
    std::map<int, std::pair<int, int>> on, off;
    for (const auto& d : bank.get("base")) {
        for (const auto& [k, v] : d.pacing) {
            on[k].first += v.first;
            on[k].second += v.second;
        }
    }
    for (const auto& d : bank.get("no_speed_factor")) {
        for (const auto& [k, v] : d.pacing) {
            off[k].first += v.first;
            off[k].second += v.second;
        }
    }
    bool ok = !on.empty();
    std::string detail = "enabled:";
    for (const auto& [k, v] : on) {
        const double f = v.second ? static_cast<double>(v.first) / v.second : 0.0;
        ok = ok && v.second > 0 && f >= 0.9;
        detail += " stage" + std::to_string(k) + "=" + fmt(100 * f, 1) + "% (n=" + std::to_string(v.second) + ")";
    }
    int w = 0, n = 0;
    for (const auto& [k, v] : off) {
        w += v.first;
        n += v.second;
    }
    const double f_off = n ? static_cast<double>(w) / n : 0.0;
    ok = ok && n > 0 && f_off < 0.5;
    detail += "; disabled overall=" + fmt(100 * f_off, 1) + "% (n=" + std::to_string(n) + ")";
    return {ok, detail};
}

Outcome criterion5() {
    harness::ScenarioConfig cfg;
    cfg.seed = kFirstSeed;
    const auto ws = harness::build_warm_start(cfg);
    sim::WorldState world = ws.world;
    std::vector<ItemId> items;
    for (int k = 0; k < 1000; ++k) items.push_back(world.upload_item(0));
    foundation::FoundationCache fcache(ws.foundation.model, world);
    stack::PairScorer scorer(ws.stack, fcache, world, ws.realtime, 0);
    std::map<ItemId, double> p40;
    for (ItemId id : items) p40[id] = stack::percentile_p40(scorer.distribution(id, ws.user_sample));
    const auto grades = stack::rank_and_grade(p40);
    int counts[4] = {0, 0, 0, 0};
    for (const auto& [id, g] : grades) counts[g.stage] += 1;
    const double s1 = counts[1] / 10.0, s2 = counts[2] / 10.0, s3 = counts[3] / 10.0;
    const bool ok = std::fabs(s1 - 70) <= 3 && std::fabs(s2 - 20) <= 3 && std::fabs(s3 - 10) <= 3;
    std::set<double> distinct;
    for (const auto& [id, p] : p40) distinct.insert(p);
    return {ok, "shares " + fmt(s1, 1) + "/" + fmt(s2, 1) + "/" + fmt(s3, 1) + " over " + std::to_string(grades.size()) +
                    " items (" + std::to_string(distinct.size()) + " distinct P40)"};
}

Outcome criterion6(RunBank& bank) {
    auto ctr = [&](const std::string& a) { return mean_of(bank.get(a), [](const Digest& d) { return d.cold_ctr; }); };
    auto roi = [&](const std::string& a) { return mean_of(bank.get(a), [](const Digest& d) { return d.roi; }); };
    const double base_ctr = ctr("base"), base_roi = roi("base");
    std::string detail = "base ctr=" + fmt(base_ctr, 3) + " roi=" + fmt(base_roi, 3);
    bool ok = true;
    for (const std::string a : {"no_exit", "no_promotion"}) {
        const double c = ctr(a), r = roi(a);
        ok = ok && c < base_ctr && r < base_roi;
        detail += "; " + a + " ctr=" + fmt(c, 3) + " roi=" + fmt(r, 3);
    }
    const double k1c = ctr("stages_1"), k1r = roi("stages_1");
    ok = ok && base_ctr > k1c && base_roi > k1r;
    detail += "; stages_1 ctr=" + fmt(k1c, 3) + " roi=" + fmt(k1r, 3);
    double drops[3];
    int k = 0;
    for (const std::string a : {"no_bidding", "no_speed_factor", "no_user_factor"}) {
        drops[k] = base_ctr - ctr(a);
        detail += "; " + a + " ctr drop=" + fmt(drops[k], 3);
        ++k;
    }
    ok = ok && drops[0] > drops[1] && drops[0] > drops[2];
    return {ok, detail};
}

Outcome criterion7(RunBank& bank) {
    const auto& on = bank.get("base");
    const auto& off = bank.get("boosting_off");
    const std::size_t lags = on.front().retention.size();
    bool ok = lags == 4;
    std::string detail = "retention on/off:";
    for (std::size_t k = 0; k < lags; ++k) {
        const double a = mean_of(on, [&](const Digest& d) { return d.retention[k]; });
        const double b = mean_of(off, [&](const Digest& d) { return d.retention[k]; });
        ok = ok && a < b;
        detail += " " + fmt(a, 1) + "/" + fmt(b, 1);
    }
    const double bl_on = mean_of(on, [](const Digest& d) { return d.below_line; });
    const double bl_off = mean_of(off, [](const Digest& d) { return d.below_line; });
    ok = ok && bl_on < bl_off;
    detail += "; below-line on/off " + fmt(bl_on, 1) + "%/" + fmt(bl_off, 1) + "%";
    return {ok, detail};
}

// ---------------------------------------------------------------------------
// Criterion 8: budget bookkeeping on a hand-tallied instance
// ---------------------------------------------------------------------------

struct Script {
    int start_stage;
    std::vector<std::pair<int, int>> stages;  // (pv, clicks) delivered in each stage, in order
    std::int64_t granted, passed, spent;      // hand tally
    bool last_open = false;                   // the last stage is still running
};

Outcome criterion8(RunBank* bank) {
    // budgets 100/300/900, gammas 1.05/1.2/1.35, benchmark CTR 0.1, min 20 exposures, 10-slot stages.
    const auto cfg = tier::StageConfig::make({100, 300, 900}, {1.05, 1.20, 1.35}, 20, 10);
    const std::vector<Script> scripts = {
        {1, {{100, 11}, {300, 40}, {900, 130}}, 1300, 1300, 1300},  // promote, promote, graduate
        {1, {{100, 5}}, 100, 0, 100},                               // exit
        {1, {{100, 11}, {300, 30}}, 400, 100, 400},                 // promote, exit
        {1, {{100, 11}, {300, 40}, {900, 100}}, 1300, 400, 1300},   // promote, promote, exit
        {2, {{300, 40}, {900, 130}}, 1200, 1200, 1200},             // promote, graduate
        {3, {{900, 100}}, 900, 0, 900},                             // exit
        {3, {{900, 130}}, 900, 900, 900},                           // graduate
        {1, {{10, 5}}, 100, 0, 10},                                 // times out under the minimum: exit
        {1, {{50, 6}, {30, 3}}, 400, 100, 80, true},                    // times out and passes; stage 2 still open
        {2, {{300, 30}}, 300, 0, 300},                              // exit
    };
    tier::LedgerBook book(cfg);
    tier::CategoryBenchmark bench;
    bench.rolling_ctr = 0.1;
    int mismatches = 0;
    for (std::size_t k = 0; k < scripts.size(); ++k) {
        const ItemId id{static_cast<std::int32_t>(k)};
        stack::PotentialGrade g{id, 0.1, 50.0, scripts[k].start_stage};
        tier::BoostLedger& l = tier::admit_item(book, id, CategoryId{0}, g, 0);
        Slot now = 0;
        const auto& stages = scripts[k].stages;
        for (std::size_t st = 0; st < stages.size(); ++st) {
            const auto [pv, clicks] = stages[st];
            for (int e = 0; e < pv; ++e) {
                sim::EventRecord ev;
                ev.item_id = id;
                ev.channel = sim::Channel::boost;
                ev.clicked = e < clicks;
                ev.stage_at_event = l.current_stage;
                tier::record_boost_event(l, ev, cfg);
            }
            // Spent stages are due one slot later; under-spent ones wait for the timeout.
            const Slot due = l.stage_pv >= cfg.budget(l.current_stage) ? now + 1 : l.entered_slot + cfg.max_stage_slots;
            if (scripts[k].last_open && st + 1 == stages.size()) break;
            tier::apply_decision(l, tier::evaluate_stage(l, bench, cfg, due), bench, cfg, due);
            now = due;
            if (!l.active()) break;
        }
        const auto t = tier::total_boost_budget(l, cfg);
        mismatches += t.granted != scripts[k].granted || t.eq8_passed != scripts[k].passed || t.spent != scripts[k].spent;
    }
    std::int64_t overflows = bank ? bank->overflows() : 0;
    const int runs = bank ? bank->runs() : 0;
    return {mismatches == 0 && overflows == 0,
            "hand-tally mismatches=" + std::to_string(mismatches) + "/10; ledger overflows=" + std::to_string(overflows) +
                " over " + std::to_string(runs) + " runs"};
}

// ---------------------------------------------------------------------------
// Criterion 9: rerun from persisted config
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome criterion9() {
    const fs::path root = fs::temp_directory_path() / "aliboost_acceptance_c9";
    fs::remove_all(root);
    harness::ScenarioConfig cfg;
    cfg.seed = 424242;
    cfg.slots = 40;
    cfg.write_trace = true;
    cfg.output_dir = (root / "first").string();
    harness::write_artifacts(harness::run_scenario(cfg), cfg.output_dir);

    harness::ScenarioConfig again = harness::load_config((root / "first" / "resolved_config.json").string());
    again.output_dir = (root / "second").string();
    harness::write_artifacts(harness::run_scenario(again), again.output_dir);

    int identical = 0, compared = 0;
    std::string differing;
    for (const char* f : {"events.jsonl", "report.csv", "summary.json", "audit.jsonl", "grades.jsonl", "trace.jsonl",
                          "ledger.json", "foundation.json"}) {
        ++compared;
        if (slurp(root / "first" / f) == slurp(root / "second" / f) && !slurp(root / "first" / f).empty()) {
            ++identical;
        } else {
            differing += std::string(" ") + f;
        }
    }
    // The report recomputed from the log alone must match the one written by the run.
    const auto rep = harness::report_from_artifacts(root / "first");
    const bool report_ok = metrics::report_csv(rep) == slurp(root / "first" / "report.csv") &&
                           rep.summary.dump(2) + "\n" == slurp(root / "first" / "summary.json");
    fs::remove_all(root);
    return {identical == compared && report_ok,
            std::to_string(identical) + "/" + std::to_string(compared) + " artifacts bitwise identical" +
                (differing.empty() ? "" : " (differ:" + differing + ")") +
                "; report from log " + (report_ok ? "matches" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));
    auto selected = [&](int c) { return only.empty() || only.count(c) != 0; };

    RunBank bank;
    const std::vector<std::pair<int, std::string>> names = {
        {1, "formula oracles"},         {2, "gradient correctness"}, {3, "stacking lift on cold phases"},
        {4, "pacing convergence"},      {5, "grade partition"},      {6, "ablation directionality"},
        {7, "Matthew-effect mitigation"}, {8, "budget safety and bookkeeping"}, {9, "determinism"},
    };
    int failures = 0;
    for (const auto& [id, name] : names) {
        if (!selected(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            switch (id) {
                case 1: o = criterion1(); break;
                case 2: o = criterion2(); break;
                case 3: o = criterion3(bank); break;
                case 4: o = criterion4(bank); break;
                case 5: o = criterion5(); break;
                case 6: o = criterion6(bank); break;
                case 7: o = criterion7(bank); break;
                case 8: o = criterion8(&bank); break;
                case 9: o = criterion9(); break;
            }
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << " ["
                  << fmt(sec, 1) << "s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
