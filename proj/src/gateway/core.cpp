#include "safewatch/gateway/core.hpp"

#include "safewatch/geocode.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace safewatch::gateway {

using escalation::AlertCase;
using escalation::CaseStatus;
using escalation::CauseKind;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

void Effects::append(Effects&& other) {
    auto move_into = [](auto& to, auto& from) {
        to.insert(to.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
    };
    move_into(records, other.records);
    move_into(sends, other.sends);
    move_into(dispatches, other.dispatches);
    move_into(geocodes, other.geocodes);
}

UnknownCase::UnknownCase(const std::string& device, std::uint64_t id)
    : std::runtime_error(fmt::format("no case {} for device '{}'", id, device)) {}

bool low_signal(int bpm, int spo2_tenths) { return bpm <= 20 || bpm >= 255 || spo2_tenths == 0; }

GatewayCore::GatewayCore(CoreSettings settings) : settings_(std::move(settings)) {}

std::int64_t GatewayCore::advance(std::int64_t now_ms) {
    now_ = std::max(now_, now_ms);
    return now_;
}

GatewayCore::DeviceState& GatewayCore::device(const std::string& id) { return devices_[id]; }

Profile GatewayCore::profile_for(const std::string& device) const {
    if (auto it = profiles_.find(device); it != profiles_.end()) {
        return it->second;
    }
    Profile p;
    p.device_id = device;
    p.pregnancy.bands = settings_.default_bands;
    return p;
}

void GatewayCore::record(const std::string& dev, const char* kind, Json payload, Effects& fx) const {
    fx.records.push_back({dev, kind, now_, std::move(payload)});
}

void GatewayCore::record_case(const std::string& dev, const AlertCase& c, Effects& fx) const {
    record(dev, "alert", {{"event", "case"}, {"case", to_json(c)}}, fx);
}

AlertCase* GatewayCore::lookup(const std::string& dev, std::uint64_t id) {
    auto d = devices_.find(dev);
    if (d == devices_.end()) return nullptr;
    auto c = d->second.cases.find(id);
    return c == d->second.cases.end() ? nullptr : &c->second;
}

void GatewayCore::enter_dispatch(const std::string& dev, AlertCase& c, std::int64_t at, Effects& fx) {
    auto& state = device(dev);
    const auto profile = profile_for(dev);
    if (profile.contacts.empty()) {
        // Nobody to tell: fall back to asking the wearer for contacts.
        c.status = CaseStatus::AwaitingUserAck;
        c.status_at_ms = at;
        c.ack_deadline_ms.reset();
        c.needs_contacts = true;
        fx.sends.push_back({dev, wire::Display{std::string(escalation::prompt_text(escalation::Prompt::SelectContacts))}});
        return;
    }
    auto last = state.last_dispatch.find(c.cause.kind);
    const std::optional<std::int64_t> last_at =
        last == state.last_dispatch.end() ? std::nullopt : std::optional<std::int64_t>(last->second);
    if (escalation::within_cooldown(last_at, at, settings_.timing)) {
        c = escalation::suppress(c, at);
        return;
    }
    c.status = CaseStatus::Dispatching;
    c.status_at_ms = at;
    c.needs_contacts = false;
    state.last_dispatch[c.cause.kind] = at;
    fx.dispatches.push_back({dev, c, profile.contacts, profile.wearer_name});
}

void GatewayCore::open(const std::string& dev, const escalation::Cause& cause, Effects& fx) {
    auto& state = device(dev);
    const auto profile = profile_for(dev);
    auto opened = escalation::open_case(next_case_id_++, cause, now_, state.latest_fix, profile.contacts.size(),
                                        settings_.timing);
    auto& c = opened.alert;
    if (c.status == CaseStatus::Dispatching) {
        enter_dispatch(dev, c, now_, fx);
    }
    for (auto p : opened.prompts) {
        fx.sends.push_back({dev, wire::Display{std::string(escalation::prompt_text(p))}});
    }
    if (cause.kind == CauseKind::VitalsAbnormal) {
        state.last_vitals_case_ms = now_;
    }
    state.cases[c.id] = c;
    record_case(dev, c, fx);
}

void GatewayCore::on_ack(const std::string& dev, AlertCase& c, Effects& fx) {
    const auto before = c.status;
    auto next = escalation::case_step(c, escalation::UserAck{now_});
    if (next.status == CaseStatus::Dispatching && before != CaseStatus::Dispatching) {
        enter_dispatch(dev, next, next.status_at_ms, fx);
    }
    if (next.status != before || next.status_at_ms != c.status_at_ms) {
        c = next;
        record_case(dev, c, fx);
    }
}

void GatewayCore::on_vitals(const std::string& dev, const wire::Vitals& v, Effects& fx) {
    auto& state = device(dev);
    vitals::VitalsReading reading{now_, v.bpm, v.spo2_tenths / 10.0, vitals::Quality::Good};
    std::vector<vitals::Reason> reasons;
    if (low_signal(v.bpm, v.spo2_tenths)) {
        reading.quality = vitals::Quality::LowSignal;
    } else {
        reasons = vitals::classify_vitals(reading, std::nullopt, profile_for(dev).pregnancy).reasons;
    }
    state.latest_vitals = reading;
    state.latest_reasons = reasons;

    Json rj = Json::array();
    for (auto r : reasons) rj.push_back(vitals::to_string(r));
    record(dev, "vitals",
           {{"event", "vitals"},
            {"bpm", v.bpm},
            {"spo2_tenths", v.spo2_tenths},
            {"spo2", reading.spo2_pct},
            {"quality", reading.quality == vitals::Quality::Good ? "good" : "low_signal"},
            {"reasons", rj}},
           fx);

    if (reasons.empty()) return;
    const bool waiting = std::any_of(state.cases.begin(), state.cases.end(), [](const auto& kv) {
        return kv.second.cause.kind == CauseKind::VitalsAbnormal && kv.second.status == CaseStatus::AwaitingUserAck;
    });
    if (waiting || escalation::within_cooldown(state.last_vitals_case_ms, now_, settings_.timing)) {
        return;
    }
    open(dev, {CauseKind::VitalsAbnormal, reasons}, fx);
}

void GatewayCore::on_frame(const std::string& dev, const wire::Frame& frame, Effects& fx) {
    std::visit(overloaded{
                   [&](const wire::Sos&) {
                       record(dev, "alert", {{"event", "sos"}}, fx);
                       open(dev, {CauseKind::Panic, {}}, fx);
                   },
                   [&](const wire::Fall&) {
                       record(dev, "alert", {{"event", "fall"}}, fx);
                       open(dev, {CauseKind::FallConfirmed, {}}, fx);
                   },
                   [&](const wire::Ok&) {
                       auto& state = device(dev);
                       AlertCase* target = nullptr;
                       for (auto& [id, c] : state.cases) {
                           if (c.status == CaseStatus::AwaitingUserAck) {
                               target = &c;
                               break;
                           }
                       }
                       record(dev, "ack",
                              {{"source", "device"}, {"case_id", target ? Json(target->id) : Json(nullptr)}}, fx);
                       if (target) on_ack(dev, *target, fx);
                   },
                   [&](const wire::Vitals& v) { on_vitals(dev, v, fx); },
                   [&](const wire::Gps& g) {
                       auto& state = device(dev);
                       const gps::Coordinates at{gps::from_e5(g.lat_e5), gps::from_e5(g.lon_e5)};
                       state.latest_fix = gps::GeoFix{now_, at, "wire"};
                       record(dev, "fix",
                              {{"event", "fix"},
                               {"lat_e5", g.lat_e5},
                               {"lon_e5", g.lon_e5},
                               {"lat", at.lat},
                               {"lon", at.lon}},
                              fx);
                       const auto key = gps::cache_key(at);
                       if (state.geocode_key != key) {
                           state.geocode_key = key;
                           state.address.reset();
                           fx.geocodes.push_back({dev, *state.latest_fix});
                       }
                   },
                   [&](const wire::Display&) {
                       // Display frames only travel towards the watch.
                   },
               },
               frame);
}

Effects GatewayCore::apply(std::int64_t now_ms, const Input& input) {
    advance(now_ms);
    Effects fx;
    std::visit(overloaded{
                   [&](const FrameIn& in) { on_frame(in.device, in.frame, fx); },
                   [&](const AckIn& in) {
                       auto* c = lookup(in.device, in.case_id);
                       if (!c) throw UnknownCase(in.device, in.case_id);
                       record(in.device, "ack", {{"source", "api"}, {"case_id", in.case_id}}, fx);
                       on_ack(in.device, *c, fx);
                   },
                   [&](const DispatchDone& in) {
                       auto* c = lookup(in.device, in.case_id);
                       if (!c) throw UnknownCase(in.device, in.case_id);
                       Json outcomes = Json::array();
                       for (const auto& o : in.outcomes) outcomes.push_back(to_json(o));
                       record(in.device, "alert",
                              {{"event", "dispatch"},
                               {"case_id", in.case_id},
                               {"address", in.address ? Json(*in.address) : Json(nullptr)},
                               {"outcomes", outcomes}},
                              fx);
                       auto next = escalation::case_step(*c, escalation::DispatchResult{now_, in.address, in.outcomes});
                       if (next.status != c->status) {
                           *c = next;
                           record_case(in.device, *c, fx);
                       }
                   },
                   [&](const AddressResolved& in) {
                       auto& state = device(in.device);
                       record(in.device, "fix",
                              {{"event", "address"}, {"lat", in.at.lat}, {"lon", in.at.lon}, {"address", in.address}},
                              fx);
                       if (state.geocode_key == gps::cache_key(in.at)) {
                           state.address = in.address;
                       }
                   },
                   [&](const ProfileIn& in) {
                       const auto& dev = in.profile.device_id;
                       profiles_[dev] = in.profile;
                       device(dev);
                       record(dev, "profile", to_json(in.profile), fx);
                       if (in.profile.contacts.empty()) return;
                       // Cases that were waiting only for contacts go out now.
                       for (auto& [id, c] : device(dev).cases) {
                           if (c.needs_contacts && c.status == CaseStatus::AwaitingUserAck) {
                               enter_dispatch(dev, c, now_, fx);
                               record_case(dev, c, fx);
                           }
                       }
                   },
               },
               input);
    return fx;
}

Effects GatewayCore::tick(std::int64_t now_ms) {
    advance(now_ms);
    Effects fx;
    for (auto& [dev, state] : devices_) {
        for (auto& [id, c] : state.cases) {
            if (c.status != CaseStatus::AwaitingUserAck || !c.ack_deadline_ms || now_ < *c.ack_deadline_ms) {
                continue;
            }
            auto next = escalation::case_step(c, escalation::Tick{now_});
            enter_dispatch(dev, next, next.status_at_ms, fx);
            c = next;
            record_case(dev, c, fx);
        }
    }
    return fx;
}

std::optional<Input> input_from_record(const Record& r, const std::vector<vitals::RangeBand>& default_bands) {
    const auto& p = r.payload;
    const auto event = p.value("event", std::string());
    if (r.kind == "vitals") {
        return FrameIn{r.device, wire::Vitals{p.at("bpm").get<int>(), p.at("spo2_tenths").get<int>()}};
    }
    if (r.kind == "fix" && event == "fix") {
        return FrameIn{r.device, wire::Gps{p.at("lat_e5").get<std::int64_t>(), p.at("lon_e5").get<std::int64_t>()}};
    }
    if (r.kind == "fix" && event == "address") {
        return AddressResolved{r.device, {p.at("lat").get<double>(), p.at("lon").get<double>()},
                               p.at("address").get<std::string>()};
    }
    if (r.kind == "alert" && event == "sos") return FrameIn{r.device, wire::Sos{}};
    if (r.kind == "alert" && event == "fall") return FrameIn{r.device, wire::Fall{}};
    if (r.kind == "alert" && event == "dispatch") {
        DispatchDone d{r.device, p.at("case_id").get<std::uint64_t>(), std::nullopt, {}};
        if (!p.at("address").is_null()) d.address = p.at("address").get<std::string>();
        for (const auto& o : p.at("outcomes")) d.outcomes.push_back(outcome_from_json(o));
        return d;
    }
    if (r.kind == "ack") {
        if (p.at("source") == "api") return AckIn{r.device, p.at("case_id").get<std::uint64_t>()};
        return FrameIn{r.device, wire::Ok{}};
    }
    if (r.kind == "profile") {
        return ProfileIn{profile_from_json(p, default_bands)};
    }
    return std::nullopt;
}

ReplayReport GatewayCore::replay(const std::vector<Record>& log) {
    ReplayReport report;
    report.records = log.size();
    std::vector<NewRecord> produced;
    std::size_t matched = 0;

    auto compare_up_to = [&](std::size_t limit) {
        while (matched < produced.size() && matched < limit) {
            const auto& want = log[matched];
            const auto& got = produced[matched];
            if (!(got == NewRecord{want.device, want.kind, want.t_ms, want.payload})) {
                if (report.mismatches++ == 0) {
                    report.first_mismatch =
                        fmt::format("seq {}: logged {} regenerated {}", want.seq, to_json(want).dump(),
                                    Json{{"device", got.device}, {"kind", got.kind}, {"t_ms", got.t_ms},
                                         {"payload", got.payload}}
                                        .dump());
                }
            }
            ++matched;
        }
    };

    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& r = log[i];
        auto ticked = tick(r.t_ms);
        produced.insert(produced.end(), ticked.records.begin(), ticked.records.end());
        if (auto input = input_from_record(r, settings_.default_bands)) {
            ++report.inputs;
            auto fx = apply(r.t_ms, *input);
            produced.insert(produced.end(), fx.records.begin(), fx.records.end());
        }
        compare_up_to(i + 1);
    }
    compare_up_to(log.size());
    if (produced.size() != log.size()) {
        report.mismatches += produced.size() > log.size() ? produced.size() - log.size() : log.size() - produced.size();
        if (report.first_mismatch.empty()) {
            report.first_mismatch = fmt::format("regenerated {} records, log has {}", produced.size(), log.size());
        }
    }
    return report;
}

Json GatewayCore::snapshot(const std::string& dev) const {
    Json j{{"device", dev},     {"latest_vitals", nullptr}, {"latest_fix", nullptr},
           {"address", nullptr}, {"cases", Json::array()},  {"profile", nullptr}};
    if (auto p = profiles_.find(dev); p != profiles_.end()) {
        j["profile"] = to_json(p->second);
    }
    auto it = devices_.find(dev);
    if (it == devices_.end()) return j;
    const auto& s = it->second;
    if (s.latest_vitals) {
        Json reasons = Json::array();
        for (auto r : s.latest_reasons) reasons.push_back(vitals::to_string(r));
        j["latest_vitals"] = {{"t_ms", s.latest_vitals->t_ms},
                              {"bpm", s.latest_vitals->bpm},
                              {"spo2", s.latest_vitals->spo2_pct},
                              {"quality", s.latest_vitals->quality == vitals::Quality::Good ? "good" : "low_signal"},
                              {"reasons", reasons}};
    }
    if (s.latest_fix) j["latest_fix"] = to_json(*s.latest_fix);
    if (s.address) j["address"] = *s.address;
    for (const auto& [id, c] : s.cases) j["cases"].push_back(to_json(c));
    return j;
}

std::vector<Profile> GatewayCore::profiles() const {
    std::vector<Profile> out;
    for (const auto& [_, p] : profiles_) out.push_back(p);
    return out;
}

std::vector<std::string> GatewayCore::devices() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : devices_) out.push_back(id);
    return out;
}

std::optional<AlertCase> GatewayCore::find_case(const std::string& dev, std::uint64_t id) const {
    auto d = devices_.find(dev);
    if (d == devices_.end()) return std::nullopt;
    auto c = d->second.cases.find(id);
    if (c == d->second.cases.end()) return std::nullopt;
    return c->second;
}

std::vector<DispatchJob> GatewayCore::pending_dispatches() const {
    std::vector<DispatchJob> out;
    for (const auto& [dev, state] : devices_) {
        const auto profile = profile_for(dev);
        for (const auto& [id, c] : state.cases) {
            if (c.status == CaseStatus::Dispatching) out.push_back({dev, c, profile.contacts, profile.wearer_name});
        }
    }
    return out;
}

}  // namespace safewatch::gateway
