#pragma once

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aliboost/core/error.hpp"
#include "aliboost/core/types.hpp"

namespace aliboost::sim {

enum class Channel { natural, boost };

inline const char* to_string(Channel c) { return c == Channel::boost ? "boost" : "natural"; }

inline Channel channel_from_string(const std::string& s) {
    if (s == "natural") return Channel::natural;
    if (s == "boost") return Channel::boost;
    throw ConfigError("unknown channel '" + s + "'");
}

/// One exposure and its outcome. The unit of persistence and of every metric.
struct EventRecord {
    Slot slot = 0;
    UserId user_id;
    ItemId item_id;
    Channel channel = Channel::natural;
    bool clicked = false;
    bool paid = false;
    double gmv_value = 0.0;
    std::optional<double> bid;
    std::optional<double> price;
    std::optional<int> stage_at_event;

    bool operator==(const EventRecord&) const = default;
};

/// Checks the record-level invariants: paid => clicked, gmv > 0 <=> paid,
/// boost-only fields absent on natural exposures, stage present on boost ones.
inline bool well_formed(const EventRecord& e) {
    if (e.paid && !e.clicked) return false;
    if ((e.gmv_value > 0.0) != e.paid) return false;
    if (e.gmv_value < 0.0) return false;
    if (e.channel == Channel::natural) return !e.bid && !e.price && !e.stage_at_event;
    return e.stage_at_event.has_value() && e.bid.has_value() == e.price.has_value();
}

inline nlohmann::ordered_json to_json(const EventRecord& e) {
    nlohmann::ordered_json j;
    j["slot"] = e.slot;
    j["user_id"] = e.user_id.value;
    j["item_id"] = e.item_id.value;
    j["channel"] = to_string(e.channel);
    j["clicked"] = e.clicked;
    j["paid"] = e.paid;
    j["gmv_value"] = e.gmv_value;
    if (e.bid) j["bid"] = *e.bid;
    if (e.price) j["price"] = *e.price;
    if (e.stage_at_event) j["stage_at_event"] = *e.stage_at_event;
    return j;
}

inline EventRecord event_from_json(const nlohmann::json& j) {
    EventRecord e;
    e.slot = j.at("slot").get<Slot>();
    e.user_id = UserId{j.at("user_id").get<std::int32_t>()};
    e.item_id = ItemId{j.at("item_id").get<std::int32_t>()};
    e.channel = channel_from_string(j.at("channel").get<std::string>());
    e.clicked = j.at("clicked").get<bool>();
    e.paid = j.at("paid").get<bool>();
    e.gmv_value = j.at("gmv_value").get<double>();
    if (j.contains("bid")) e.bid = j["bid"].get<double>();
    if (j.contains("price")) e.price = j["price"].get<double>();
    if (j.contains("stage_at_event")) e.stage_at_event = j["stage_at_event"].get<int>();
    return e;
}

/// Line-delimited JSON: one record per line, fields in declaration order.
inline void write_event_log(std::ostream& out, const std::vector<EventRecord>& events) {
    for (const auto& e : events) out << to_json(e).dump() << '\n';
}

inline void write_event_log(const std::string& path, const std::vector<EventRecord>& events) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open event log for writing: " + path);
    write_event_log(out, events);
}

inline std::vector<EventRecord> read_event_log(std::istream& in) {
    std::vector<EventRecord> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            events.push_back(event_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError("event log line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return events;
}

inline std::vector<EventRecord> read_event_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open event log: " + path);
    return read_event_log(in);
}

}  // namespace aliboost::sim
