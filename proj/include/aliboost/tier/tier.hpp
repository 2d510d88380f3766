#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aliboost/core/error.hpp"
#include "aliboost/core/types.hpp"
#include "aliboost/sim/events.hpp"
#include "aliboost/sim/world.hpp"
#include "aliboost/stack/grading.hpp"

namespace aliboost::tier {

/// Per-stage exposure budgets and promotion safety factors, both strictly increasing.
struct StageConfig {
    std::vector<std::int64_t> budgets{100, 300, 900};
    Vec gammas{1.05, 1.20, 1.35};
    int min_eval_exposures = 20;
    int max_stage_slots = 10;

    int stage_count() const { return static_cast<int>(budgets.size()); }
    std::int64_t budget(int stage) const { return budgets.at(static_cast<std::size_t>(stage - 1)); }
    double gamma(int stage) const { return gammas.at(static_cast<std::size_t>(stage - 1)); }

    void validate() const {
        if (budgets.empty()) throw ConfigError("stages: at least one stage required");
        if (budgets.size() != gammas.size()) throw ConfigError("stages: budgets and gammas differ in length");
        for (std::size_t k = 0; k < budgets.size(); ++k) {
            if (budgets[k] <= 0) throw ConfigError("stages: budgets must be positive");
            if (!(gammas[k] >= 1.0) || !std::isfinite(gammas[k])) throw ConfigError("stages: gammas must be >= 1");
            if (k > 0 && budgets[k] <= budgets[k - 1]) throw ConfigError("stages: budgets must be strictly increasing");
            if (k > 0 && gammas[k] <= gammas[k - 1]) throw ConfigError("stages: gammas must be strictly increasing");
        }
        if (min_eval_exposures < 0) throw ConfigError("stages: min_eval_exposures must be >= 0");
        if (max_stage_slots < 1) throw ConfigError("stages: max_stage_slots must be >= 1");
    }

    static StageConfig make(std::vector<std::int64_t> budgets, Vec gammas, int min_eval = 20, int max_slots = 10) {
        StageConfig c{std::move(budgets), std::move(gammas), min_eval, max_slots};
        c.validate();
        return c;
    }
};

enum class Decision { stay, promote, exit, graduate };

inline const char* to_string(Decision d) {
    switch (d) {
        case Decision::stay: return "stay";
        case Decision::promote: return "promote";
        case Decision::exit: return "exit";
        case Decision::graduate: return "graduate";
    }
    return "stay";
}

enum class Status { active, exited, graduated };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::active: return "active";
        case Status::exited: return "exited";
        case Status::graduated: return "graduated";
    }
    return "active";
}

struct HistoryEntry {
    int stage = 1;
    Decision decision = Decision::stay;
    Slot slot = 0;
    double observed_ctr = 0.0;
    double benchmark = 0.0;
    double gamma = 1.0;
    bool threshold_met = false;
    std::int64_t stage_pv = 0;
};

struct BoostLedger {
    ItemId item;
    CategoryId category;
    int initial_stage = 1;
    int current_stage = 1;
    Status status = Status::active;
    Slot admitted_slot = 0;
    Slot entered_slot = 0;
    std::int64_t stage_pv = 0;
    std::int64_t stage_clicks = 0;
    std::int64_t total_pv = 0;
    std::int64_t total_clicks = 0;
    std::vector<HistoryEntry> history;

    bool active() const { return status == Status::active; }
};

/// CTR of the category's natural-channel traffic over the trailing window.
struct CategoryBenchmark {
    CategoryId category;
    int window_slots = 3;
    double rolling_ctr = 0.0;
    std::deque<std::pair<std::int64_t, std::int64_t>> window;  // (pv, clicks) per slot
};

/// Pushes one slot's natural (pv, clicks) and recomputes the ratio; a window
/// with zero PV keeps the previous value.
inline CategoryBenchmark& update_benchmark(CategoryBenchmark& b, std::int64_t pv, std::int64_t clicks, Slot /*slot*/) {
    if (b.window_slots < 1) throw ConfigError("benchmark: window must be >= 1 slot");
    if (pv < 0 || clicks < 0 || clicks > pv) throw ConfigError("benchmark: invalid counts");
    b.window.emplace_back(pv, clicks);
    while (static_cast<int>(b.window.size()) > b.window_slots) b.window.pop_front();
    std::int64_t tp = 0, tc = 0;
    for (const auto& [p, c] : b.window) {
        tp += p;
        tc += c;
    }
    if (tp > 0) b.rolling_ctr = static_cast<double>(tc) / static_cast<double>(tp);
    return b;
}

/// Counts only natural events of the benchmark's category.
inline CategoryBenchmark& update_benchmark(CategoryBenchmark& b, std::span<const sim::EventRecord> events,
                                           const sim::WorldState& world, Slot slot) {
    std::int64_t pv = 0, clicks = 0;
    for (const auto& e : events) {
        if (e.channel != sim::Channel::natural || world.item(e.item_id).category != b.category) continue;
        ++pv;
        clicks += e.clicked ? 1 : 0;
    }
    return update_benchmark(b, pv, clicks, slot);
}

class LedgerBook {
public:
    explicit LedgerBook(StageConfig config = {}) : config_(std::move(config)) { config_.validate(); }

    const StageConfig& config() const { return config_; }

    bool contains(ItemId item) const { return ledgers_.count(item) != 0; }

    BoostLedger& at(ItemId item) {
        auto it = ledgers_.find(item);
        if (it == ledgers_.end()) throw LookupError("ledger: item " + std::to_string(item.value) + " not admitted");
        return it->second;
    }
    const BoostLedger& at(ItemId item) const {
        auto it = ledgers_.find(item);
        if (it == ledgers_.end()) throw LookupError("ledger: item " + std::to_string(item.value) + " not admitted");
        return it->second;
    }

    const std::map<ItemId, BoostLedger>& ledgers() const { return ledgers_; }
    std::map<ItemId, BoostLedger>& ledgers() { return ledgers_; }

    std::vector<ItemId> active_items() const {
        std::vector<ItemId> out;
        for (const auto& [id, l] : ledgers_) {
            if (l.active()) out.push_back(id);
        }
        return out;
    }

private:
    StageConfig config_;
    std::map<ItemId, BoostLedger> ledgers_;
};

/// Opens a ledger at the graded stage (capped at K).
inline BoostLedger& admit_item(LedgerBook& book, ItemId item, CategoryId category, const stack::PotentialGrade& grade,
                               Slot slot) {
    if (book.contains(item)) throw AdmissionError("item " + std::to_string(item.value) + " already admitted");
    if (grade.stage < 1) throw AdmissionError("grade stage must be >= 1");
    BoostLedger l;
    l.item = item;
    l.category = category;
    l.initial_stage = std::min(grade.stage, book.config().stage_count());
    l.current_stage = l.initial_stage;
    l.admitted_slot = slot;
    l.entered_slot = slot;
    return book.ledgers()[item] = l;
}

inline BoostLedger& record_boost_event(BoostLedger& l, const sim::EventRecord& e, const StageConfig& cfg) {
    if (e.channel != sim::Channel::boost) throw LookupError("ledger: natural event passed to the boost ledger");
    if (e.item_id != l.item) throw LookupError("ledger: event item does not match ledger");
    if (!l.active()) throw LedgerOverflowError("ledger: boost exposure for inactive item " + std::to_string(l.item.value));
    if (l.stage_pv >= cfg.budget(l.current_stage)) {
        throw LedgerOverflowError("ledger: item " + std::to_string(l.item.value) + " exceeded stage " +
                                  std::to_string(l.current_stage) + " budget");
    }
    l.stage_pv += 1;
    l.total_pv += 1;
    const int c = e.clicked ? 1 : 0;
    l.stage_clicks += c;
    l.total_clicks += c;
    return l;
}

inline double stage_ctr(const BoostLedger& l) {
    return l.stage_pv > 0 ? static_cast<double>(l.stage_clicks) / static_cast<double>(l.stage_pv) : 0.0;
}

inline bool stage_due(const BoostLedger& l, const StageConfig& cfg, Slot now) {
    return l.stage_pv >= cfg.budget(l.current_stage) || now - l.entered_slot >= cfg.max_stage_slots;
}

/// stay until the stage budget is spent or the stage times out; then promote
/// iff stage CTR >= gamma_k * benchmark (exit below min_eval_exposures);
/// a promotion out of the last stage is a graduation.
inline Decision evaluate_stage(const BoostLedger& l, const CategoryBenchmark& b, const StageConfig& cfg, Slot now) {
    if (!l.active()) return Decision::stay;
    if (!stage_due(l, cfg, now)) return Decision::stay;
    if (l.stage_pv < cfg.min_eval_exposures || l.stage_pv == 0) return Decision::exit;
    if (stage_ctr(l) >= cfg.gamma(l.current_stage) * b.rolling_ctr) {
        return l.current_stage >= cfg.stage_count() ? Decision::graduate : Decision::promote;
    }
    return Decision::exit;
}

/// Rule ablations: without exit a failing item moves on as if it passed;
/// without promotion a passing item leaves boosting at its current stage.
struct TransitionPolicy {
    bool disable_exit = false;
    bool disable_promotion = false;
};

struct AuditRecord {
    Slot slot = 0;
    ItemId item;
    int stage = 1;
    Decision decision = Decision::stay;
    double ctr = 0.0;
    double benchmark = 0.0;
    double gamma = 1.0;
    bool threshold_met = false;
    std::int64_t stage_pv = 0;
};

/// Applies the policy to an evaluated decision and advances the ledger.
/// Returns the audit record for any non-stay transition.
inline std::optional<AuditRecord> apply_decision(BoostLedger& l, Decision evaluated, const CategoryBenchmark& b,
                                                 const StageConfig& cfg, Slot now, const TransitionPolicy& policy = {}) {
    if (evaluated == Decision::stay || !l.active()) return std::nullopt;
    const bool passed = evaluated == Decision::promote || evaluated == Decision::graduate;
    Decision applied = evaluated;
    if (!passed && policy.disable_exit) {
        applied = l.current_stage >= cfg.stage_count() ? Decision::graduate : Decision::promote;
    }
    if (passed && policy.disable_promotion) applied = Decision::graduate;

    AuditRecord rec{now, l.item, l.current_stage, applied, stage_ctr(l), b.rolling_ctr, cfg.gamma(l.current_stage),
                    passed, l.stage_pv};
    l.history.push_back({l.current_stage, applied, now, rec.ctr, rec.benchmark, rec.gamma, passed, l.stage_pv});
    switch (applied) {
        case Decision::promote:
            l.current_stage += 1;
            l.entered_slot = now;
            l.stage_pv = 0;
            l.stage_clicks = 0;
            break;
        case Decision::graduate: l.status = Status::graduated; break;
        case Decision::exit: l.status = Status::exited; break;
        case Decision::stay: break;
    }
    return rec;
}

struct BudgetTotals {
    std::int64_t granted = 0;     // B summed over every stage entered
    std::int64_t eq8_passed = 0;  // B summed over stages whose threshold was met
    std::int64_t spent = 0;       // boost exposures actually consumed
};

inline BudgetTotals total_boost_budget(const BoostLedger& l, const StageConfig& cfg) {
    BudgetTotals t;
    for (const auto& h : l.history) {
        t.granted += cfg.budget(h.stage);
        if (h.threshold_met) t.eq8_passed += cfg.budget(h.stage);
    }
    if (l.active()) t.granted += cfg.budget(l.current_stage);
    t.spent = l.total_pv;
    return t;
}

// Stage-transition audit log: one JSON object per line,
//   {"slot", "item_id", "stage", "decision", "ctr", "benchmark", "gamma",
//    "threshold_met", "stage_pv"}.
inline nlohmann::ordered_json to_json(const AuditRecord& r) {
    nlohmann::ordered_json j;
    j["slot"] = r.slot;
    j["item_id"] = r.item.value;
    j["stage"] = r.stage;
    j["decision"] = to_string(r.decision);
    j["ctr"] = r.ctr;
    j["benchmark"] = r.benchmark;
    j["gamma"] = r.gamma;
    j["threshold_met"] = r.threshold_met;
    j["stage_pv"] = r.stage_pv;
    return j;
}

inline void write_audit_log(std::ostream& out, std::span<const AuditRecord> records) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

}  // namespace aliboost::tier
