#include "safewatch/gateway/codec.hpp"

#include <fmt/format.h>

namespace safewatch::gateway {

using escalation::ValidationError;

Json to_json(const vitals::RangeBand& b) {
    return {{"from_week", b.from_week}, {"bpm_lo", b.bpm_lo}, {"bpm_hi", b.bpm_hi}, {"spo2_lo", b.spo2_lo}};
}

Json to_json(const Profile& p) {
    Json bands = Json::array();
    for (const auto& b : p.pregnancy.bands) bands.push_back(to_json(b));
    Json contacts = Json::array();
    for (const auto& c : p.contacts) {
        contacts.push_back({{"name", c.name}, {"phone", c.phone}, {"email", c.email}, {"priority", c.priority}});
    }
    return {{"device_id", p.device_id},
            {"wearer_name", p.wearer_name},
            {"pregnancy",
             {{"pregnant", p.pregnancy.pregnant}, {"gestation_weeks", p.pregnancy.gestation_weeks}, {"bands", bands}}},
            {"contacts", contacts}};
}

Json to_json(const gps::GeoFix& fix) {
    Json j{{"t_ms", fix.t_ms}, {"source", fix.source}, {"lat", nullptr}, {"lon", nullptr}};
    if (fix.position) {
        j["lat"] = fix.position->lat;
        j["lon"] = fix.position->lon;
    }
    return j;
}

Json to_json(const escalation::DeliveryOutcome& o) {
    Json attempts = Json::array();
    for (const auto& a : o.attempts) {
        attempts.push_back({{"t_ms", a.t_ms}, {"ok", a.ok}, {"detail", a.detail}});
    }
    return {{"contact", o.contact},
            {"channel", escalation::to_string(o.channel)},
            {"destination", o.destination},
            {"attempts", attempts},
            {"sent", o.sent()}};
}

Json to_json(const escalation::AlertCase& c) {
    Json reasons = Json::array();
    for (auto r : c.cause.reasons) reasons.push_back(vitals::to_string(r));
    Json dispatch = Json::array();
    for (const auto& o : c.dispatch_record) dispatch.push_back(to_json(o));
    return {{"id", c.id},
            {"cause", escalation::to_string(c.cause.kind)},
            {"reasons", reasons},
            {"opened_at_ms", c.opened_at_ms},
            {"ack_deadline_ms", c.ack_deadline_ms ? Json(*c.ack_deadline_ms) : Json(nullptr)},
            {"status", escalation::to_string(c.status)},
            {"status_at_ms", c.status_at_ms},
            {"fix", c.fix ? to_json(*c.fix) : Json(nullptr)},
            {"address", c.address ? Json(*c.address) : Json(nullptr)},
            {"needs_contacts", c.needs_contacts},
            {"dispatch", dispatch}};
}

std::optional<vitals::Reason> reason_from(std::string_view s) {
    for (auto r : {vitals::Reason::HeartRateLow, vitals::Reason::HeartRateHigh, vitals::Reason::Spo2Low,
                   vitals::Reason::SupinePosition}) {
        if (vitals::to_string(r) == s) return r;
    }
    return std::nullopt;
}

namespace {

template <class T>
T field(const Json& j, const char* key, const std::string& path, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ValidationError(path + key, fmt::format("'{}' has the wrong type", key));
    }
}

}  // namespace

std::vector<vitals::RangeBand> bands_from_json(const Json& j) {
    if (!j.is_array()) {
        throw ValidationError("bands", "bands must be an array");
    }
    std::vector<vitals::RangeBand> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto path = fmt::format("bands[{}].", i);
        const vitals::RangeBand d{};
        out.push_back({field(j[i], "from_week", path, d.from_week), field(j[i], "bpm_lo", path, d.bpm_lo),
                       field(j[i], "bpm_hi", path, d.bpm_hi), field(j[i], "spo2_lo", path, d.spo2_lo)});
    }
    return out;
}

Profile profile_from_json(const Json& j, const std::vector<vitals::RangeBand>& default_bands) {
    if (!j.is_object()) {
        throw ValidationError("profile", "profile must be a JSON object");
    }
    Profile p;
    p.device_id = field<std::string>(j, "device_id", "", kDefaultDevice);
    if (p.device_id.empty()) {
        throw ValidationError("device_id", "device_id is empty");
    }
    p.wearer_name = field<std::string>(j, "wearer_name", "", "wearer");

    p.pregnancy.bands = default_bands;
    if (j.contains("pregnancy") && !j["pregnancy"].is_null()) {
        const auto& pj = j["pregnancy"];
        if (!pj.is_object()) {
            throw ValidationError("pregnancy", "pregnancy must be an object");
        }
        p.pregnancy.pregnant = field(pj, "pregnant", "pregnancy.", false);
        p.pregnancy.gestation_weeks = field(pj, "gestation_weeks", "pregnancy.", 0);
        if (pj.contains("bands")) {
            p.pregnancy.bands = bands_from_json(pj["bands"]);
        }
    }
    try {
        p.pregnancy.validate();
    } catch (const std::invalid_argument& e) {
        throw ValidationError("pregnancy", e.what());
    }

    if (j.contains("contacts") && !j["contacts"].is_null()) {
        const auto& cj = j["contacts"];
        if (!cj.is_array()) {
            throw ValidationError("contacts", "contacts must be an array");
        }
        std::vector<escalation::Contact> contacts;
        for (std::size_t i = 0; i < cj.size(); ++i) {
            const auto path = fmt::format("contacts[{}].", i);
            if (!cj[i].is_object()) {
                throw ValidationError(path.substr(0, path.size() - 1), "contact must be an object");
            }
            contacts.push_back({field<std::string>(cj[i], "name", path, ""),
                                field<std::string>(cj[i], "phone", path, ""),
                                field<std::string>(cj[i], "email", path, ""), field(cj[i], "priority", path, 0)});
        }
        p.contacts = escalation::validate_contacts(std::move(contacts));
    }
    return p;
}

escalation::DeliveryOutcome outcome_from_json(const Json& j) {
    escalation::DeliveryOutcome o;
    o.contact = j.at("contact").get<std::string>();
    o.channel = escalation::channel_from(j.at("channel").get<std::string>()).value_or(escalation::Channel::Sms);
    o.destination = j.at("destination").get<std::string>();
    for (const auto& a : j.at("attempts")) {
        o.attempts.push_back({a.at("t_ms").get<std::int64_t>(), a.at("ok").get<bool>(), a.at("detail").get<std::string>()});
    }
    return o;
}

}  // namespace safewatch::gateway
