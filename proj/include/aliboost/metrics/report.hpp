#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aliboost/metrics/metrics.hpp"

namespace aliboost::metrics {

struct ReportConfig {
    std::optional<double> hot_threshold;  // absent: 99th percentile of this run's per-slot PV
    int topk = 20;
    std::vector<int> retention_lags{7, 14, 21, 30};
    std::vector<int> cohort_edges{3, 7, 30};
    int below_line_age = 30;
    double below_line_pv = 10.0;
    int below_line_span = 5;
    Vec amplification_edges{0.0, 0.04, 0.08, 0.12, 0.2, 1.0};
};

struct ReportRow {
    std::string window;
    std::string cohort;
    std::string metric;
    double value = 0.0;
};

constexpr int kReportSchemaVersion = 1;

struct Report {
    std::vector<ReportRow> rows;
    nlohmann::ordered_json summary;

    std::optional<double> find(const std::string& window, const std::string& cohort, const std::string& metric) const {
        for (const auto& r : rows) {
            if (r.window == window && r.cohort == cohort && r.metric == metric) return r.value;
        }
        return std::nullopt;
    }
};

namespace detail {

inline void emit(Report& rep, const std::string& window, const std::string& cohort, const Effectiveness& e) {
    rep.rows.push_back({window, cohort, "pv", static_cast<double>(e.pv)});
    rep.rows.push_back({window, cohort, "clicks", static_cast<double>(e.clicks)});
    rep.rows.push_back({window, cohort, "pays", static_cast<double>(e.pays)});
    rep.rows.push_back({window, cohort, "gmv", e.gmv});
    rep.rows.push_back({window, cohort, "ctr_percent", e.ctr_percent});
}

inline nlohmann::ordered_json effectiveness_json(const Effectiveness& e) {
    nlohmann::ordered_json j;
    j["pv"] = e.pv;
    j["clicks"] = e.clicks;
    j["pays"] = e.pays;
    j["gmv"] = e.gmv;
    j["ctr_percent"] = e.ctr_percent;
    return j;
}

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

/// Every metric of a run as a pure function of its event log and item catalog.
inline Report build_report(std::span<const sim::EventRecord> events, const Catalog& cat, const MetricWindow& window,
                           const ReportConfig& cfg) {
    using detail::emit;
    Report rep;
    const std::string wname = std::to_string(window.begin) + "-" + std::to_string(window.end);
    auto cold = [&](const sim::EventRecord& e) { return cat.is_cold(e.item_id, e.slot); };
    auto age_of = [&](const sim::EventRecord& e) { return e.slot - cat.meta(e.item_id).upload_slot; };

    const Effectiveness all = compute_effectiveness(events, window);
    const Effectiveness natural =
        compute_effectiveness(events, window, [](const sim::EventRecord& e) { return e.channel == sim::Channel::natural; });
    const Effectiveness boost =
        compute_effectiveness(events, window, [](const sim::EventRecord& e) { return e.channel == sim::Channel::boost; });
    const Effectiveness cold_all = compute_effectiveness(events, window, cold);
    const Effectiveness cold_boost = compute_effectiveness(
        events, window, [&](const sim::EventRecord& e) { return cold(e) && e.channel == sim::Channel::boost; });
    const Effectiveness cold_natural = compute_effectiveness(
        events, window, [&](const sim::EventRecord& e) { return cold(e) && e.channel == sim::Channel::natural; });
    emit(rep, wname, "all", all);
    emit(rep, wname, "natural", natural);
    emit(rep, wname, "boost", boost);
    emit(rep, wname, "cold", cold_all);
    emit(rep, wname, "cold_boost", cold_boost);
    emit(rep, wname, "cold_natural", cold_natural);

    nlohmann::ordered_json cohorts = nlohmann::ordered_json::object();
    for (bool cumulative : {false, true}) {
        for (const Cohort& c : launch_cohorts(cfg.cohort_edges, cumulative)) {
            const Effectiveness e = compute_effectiveness(events, window, [&](const sim::EventRecord& ev) {
                const int a = age_of(ev);
                return a >= c.min_age && a < c.max_age;
            });
            emit(rep, wname, c.name, e);
            cohorts[c.name] = detail::effectiveness_json(e);
        }
    }

    const double share = compute_traffic_share(events, window, cold);
    const auto roi = compute_roi(events, window, cold);
    const double hot_threshold = cfg.hot_threshold.value_or(per_slot_pv_percentile(events, window, 99.0));
    const auto hot = count_hot_items(events, window, hot_threshold);
    rep.rows.push_back({wname, "cold", "traffic_share_percent", share});
    if (roi) rep.rows.push_back({wname, "cold", "roi", *roi});
    rep.rows.push_back({wname, "all", "hot_items", static_cast<double>(hot)});

    std::vector<double> retention;
    if (!cfg.retention_lags.empty() &&
        window.end - window.begin > *std::max_element(cfg.retention_lags.begin(), cfg.retention_lags.end())) {
        retention = topk_retention(events, cfg.topk, cfg.retention_lags, window);
        for (std::size_t k = 0; k < retention.size(); ++k) {
            rep.rows.push_back({wname, "all", "top" + std::to_string(cfg.topk) + "_retention_lag" +
                                                  std::to_string(cfg.retention_lags[k]), retention[k]});
        }
    }
    const auto below = fraction_below_line(events, cat, cfg.below_line_age, cfg.below_line_pv, cfg.below_line_span,
                                           window.end);
    if (below) rep.rows.push_back({wname, "launched", "below_line_percent", *below});
    const Vec gini_path = gini_trajectory(events, cat, window);
    if (!gini_path.empty()) {
        rep.rows.push_back({wname, "all", "gini_first", gini_path.front()});
        rep.rows.push_back({wname, "all", "gini_last", gini_path.back()});
    }
    const auto amp = estimate_amplification(events, cat, cfg.amplification_edges, window.end);

    nlohmann::ordered_json& s = rep.summary;
    s["schema"] = "aliboost.report";
    s["version"] = kReportSchemaVersion;
    s["window"] = {window.begin, window.end};
    s["all"] = detail::effectiveness_json(all);
    s["natural"] = detail::effectiveness_json(natural);
    s["boost"] = detail::effectiveness_json(boost);
    s["cold"] = detail::effectiveness_json(cold_all);
    s["cold_boost"] = detail::effectiveness_json(cold_boost);
    s["cold_natural"] = detail::effectiveness_json(cold_natural);
    s["cohorts"] = cohorts;
    s["traffic_share_percent"] = share;
    s["roi"] = detail::optional_json(roi);
    s["hot_threshold"] = hot_threshold;
    s["hot_items"] = hot;
    s["topk"] = cfg.topk;
    s["retention_lags"] = cfg.retention_lags;
    s["retention_percent"] = retention;
    s["below_line_percent"] = detail::optional_json(below);
    s["gini_trajectory"] = gini_path;
    nlohmann::ordered_json amp_json = nlohmann::ordered_json::array();
    for (const auto& b : amp) {
        amp_json.push_back({{"ctr_low", b.ctr_low}, {"ctr_high", b.ctr_high}, {"items", b.items},
                            {"alpha", detail::optional_json(b.alpha)}});
    }
    s["amplification"] = amp_json;
    return rep;
}

// Report CSV (schema version 1): header "window,cohort,metric,value".
inline void write_report_csv(std::ostream& out, const Report& rep) {
    out << "window,cohort,metric,value\n";
    out.precision(17);
    for (const auto& r : rep.rows) out << r.window << ',' << r.cohort << ',' << r.metric << ',' << r.value << '\n';
}

inline std::string report_csv(const Report& rep) {
    std::ostringstream os;
    write_report_csv(os, rep);
    return os.str();
}

}  // namespace aliboost::metrics
