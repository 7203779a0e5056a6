#include "safewatch/escalation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <ctime>
#include <set>

namespace safewatch::escalation {

ButtonStep button_step(const ButtonState& state, std::int64_t press_at_ms, std::int64_t window_ms) {
    ButtonStep out{state, false};
    auto& s = out.state;
    if (s.last_press_ms && press_at_ms - *s.last_press_ms <= window_ms && s.press_count > 0) {
        ++s.press_count;
    } else {
        s.press_count = 1;
    }
    s.last_press_ms = press_at_ms;
    if (s.press_count >= 2) {
        out.panic = true;
        s = ButtonState{};
    }
    return out;
}

bool is_e164(std::string_view phone) {
    if (phone.size() < 3 || phone.size() > 16 || phone.front() != '+' || phone[1] == '0') {
        return false;
    }
    return std::all_of(phone.begin() + 1, phone.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_email(std::string_view email) {
    const auto at = email.find('@');
    if (at == std::string_view::npos || at == 0 || at + 1 >= email.size()) {
        return false;
    }
    if (email.find('@', at + 1) != std::string_view::npos) {
        return false;
    }
    const auto domain = email.substr(at + 1);
    const auto dot = domain.find('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 >= domain.size()) {
        return false;
    }
    return std::none_of(email.begin(), email.end(), [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return u <= 0x20 || u >= 0x7f || c == ',';
    });
}

std::vector<Contact> validate_contacts(std::vector<Contact> contacts) {
    std::set<int> seen;
    for (std::size_t i = 0; i < contacts.size(); ++i) {
        auto& c = contacts[i];
        const auto where = fmt::format("contacts[{}]", i);
        if (c.name.empty()) {
            throw ValidationError(where + ".name", "contact name is empty");
        }
        if (c.phone.empty() && c.email.empty()) {
            throw ValidationError(where, "contact needs a phone or an email");
        }
        if (!c.phone.empty() && !is_e164(c.phone)) {
            throw ValidationError(where + ".phone", fmt::format("'{}' is not E.164", c.phone));
        }
        if (!c.email.empty() && !is_email(c.email)) {
            throw ValidationError(where + ".email", fmt::format("'{}' is not an email address", c.email));
        }
        if (c.priority == 0) {
            c.priority = static_cast<int>(i) + 1;
        }
        if (c.priority < 0) {
            throw ValidationError(where + ".priority", "priority must be positive");
        }
        if (!seen.insert(c.priority).second) {
            throw ValidationError(where + ".priority", fmt::format("duplicate priority {}", c.priority));
        }
    }
    return contacts;
}

std::string_view to_string(CauseKind k) {
    switch (k) {
        case CauseKind::Panic:
            return "Panic";
        case CauseKind::FallConfirmed:
            return "FallConfirmed";
        case CauseKind::VitalsAbnormal:
            return "VitalsAbnormal";
    }
    return "Unknown";
}

std::string_view to_string(CaseStatus s) {
    switch (s) {
        case CaseStatus::AwaitingUserAck:
            return "AwaitingUserAck";
        case CaseStatus::Dispatching:
            return "Dispatching";
        case CaseStatus::Dispatched:
            return "Dispatched";
        case CaseStatus::Acknowledged:
            return "Acknowledged";
        case CaseStatus::Suppressed:
            return "Suppressed";
    }
    return "Unknown";
}

std::string_view to_string(Channel c) { return c == Channel::Sms ? "sms" : "email"; }

std::optional<CauseKind> cause_kind_from(std::string_view s) {
    for (auto k : {CauseKind::Panic, CauseKind::FallConfirmed, CauseKind::VitalsAbnormal}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::optional<CaseStatus> case_status_from(std::string_view s) {
    for (auto k : {CaseStatus::AwaitingUserAck, CaseStatus::Dispatching, CaseStatus::Dispatched,
                   CaseStatus::Acknowledged, CaseStatus::Suppressed}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::optional<Channel> channel_from(std::string_view s) {
    if (s == "sms") return Channel::Sms;
    if (s == "email") return Channel::Email;
    return std::nullopt;
}

std::string_view prompt_text(Prompt p) {
    switch (p) {
        case Prompt::SelectContacts:
            return "ADD CONTACT";
        case Prompt::CheckVitals:
            return "VITALS: OK?";
    }
    return "";
}

Opened open_case(std::uint64_t id, const Cause& cause, std::int64_t now_ms,
                 const std::optional<gps::GeoFix>& fix, std::size_t contact_count, const Timing& timing) {
    Opened out;
    auto& c = out.alert;
    c.id = id;
    c.cause = cause;
    c.opened_at_ms = now_ms;
    c.status_at_ms = now_ms;
    if (fix && fix->valid()) {
        c.fix = fix;
    }

    if (contact_count == 0) {
        c.status = CaseStatus::AwaitingUserAck;
        c.needs_contacts = true;
        out.prompts.push_back(Prompt::SelectContacts);
        return out;
    }
    if (cause.kind == CauseKind::VitalsAbnormal) {
        c.status = CaseStatus::AwaitingUserAck;
        c.ack_deadline_ms = now_ms + timing.ack_window_ms;
        out.prompts.push_back(Prompt::CheckVitals);
    } else {
        c.status = CaseStatus::Dispatching;
    }
    return out;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

AlertCase case_step(const AlertCase& alert, const CaseEvent& event) {
    AlertCase next = alert;
    std::visit(overloaded{
                   [&](const UserAck& ack) {
                       if (next.status != CaseStatus::AwaitingUserAck) {
                           return;
                       }
                       if (!next.ack_deadline_ms || ack.at_ms < *next.ack_deadline_ms) {
                           next.status = CaseStatus::Acknowledged;
                           next.status_at_ms = ack.at_ms;
                       } else {
                           // Too late: the deadline already passed.
                           next.status = CaseStatus::Dispatching;
                           next.status_at_ms = *next.ack_deadline_ms;
                       }
                   },
                   [&](const Tick& tick) {
                       if (next.status == CaseStatus::AwaitingUserAck && next.ack_deadline_ms &&
                           tick.now_ms >= *next.ack_deadline_ms) {
                           next.status = CaseStatus::Dispatching;
                           next.status_at_ms = *next.ack_deadline_ms;
                       }
                   },
                   [&](const DispatchResult& result) {
                       if (next.status != CaseStatus::Dispatching || result.outcomes.empty()) {
                           return;
                       }
                       next.status = CaseStatus::Dispatched;
                       next.status_at_ms = result.at_ms;
                       next.address = result.address;
                       next.dispatch_record = result.outcomes;
                   },
               },
               event);
    return next;
}

bool within_cooldown(std::optional<std::int64_t> last_dispatch_ms, std::int64_t now_ms, const Timing& timing) {
    return last_dispatch_ms && now_ms - *last_dispatch_ms < timing.cooldown_ms;
}

AlertCase suppress(const AlertCase& alert, std::int64_t now_ms) {
    AlertCase next = alert;
    next.status = CaseStatus::Suppressed;
    next.status_at_ms = now_ms;
    return next;
}

std::string location_text(const AlertCase& alert) {
    if (alert.address && !alert.address->empty()) {
        return *alert.address;
    }
    if (alert.fix && alert.fix->position) {
        return gps::format_coordinates(*alert.fix->position);
    }
    return "location unavailable";
}

std::string cause_text(const Cause& cause) {
    switch (cause.kind) {
        case CauseKind::Panic:
            return "panic button pressed";
        case CauseKind::FallConfirmed:
            return "fall detected";
        case CauseKind::VitalsAbnormal: {
            std::string reasons;
            for (auto r : cause.reasons) {
                if (!reasons.empty()) reasons += ", ";
                reasons += vitals::to_string(r);
            }
            return reasons.empty() ? "abnormal vitals" : fmt::format("abnormal vitals ({})", reasons);
        }
    }
    return "alert";
}

std::string format_time(std::int64_t t_ms) {
    const std::time_t secs = static_cast<std::time_t>(t_ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%d %H:%M:%S UTC", &tm);
    return buf;
}

std::vector<PlannedMessage> plan_dispatch(const AlertCase& alert, std::vector<Contact> contacts,
                                          std::string_view wearer_name) {
    if (alert.status != CaseStatus::Dispatching) {
        throw std::invalid_argument("plan_dispatch needs a case in Dispatching");
    }
    if (contacts.empty()) {
        throw NoContacts();
    }
    std::stable_sort(contacts.begin(), contacts.end(),
                     [](const Contact& a, const Contact& b) { return a.priority < b.priority; });

    const auto body = fmt::format("SafeWatch alert: {} for {} at {}. Location: {}", cause_text(alert.cause),
                                  wearer_name, format_time(alert.opened_at_ms), location_text(alert));
    std::vector<PlannedMessage> plan;
    for (const auto& c : contacts) {
        if (!c.phone.empty()) {
            plan.push_back({c, Channel::Sms, c.phone, body});
        }
        if (!c.email.empty()) {
            plan.push_back({c, Channel::Email, c.email, body});
        }
    }
    return plan;
}

}  // namespace safewatch::escalation
