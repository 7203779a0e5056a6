#pragma once

#include "safewatch/geocode.hpp"
#include "safewatch/gps.hpp"
#include "safewatch/vitals.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace safewatch::escalation {

struct Timing {
    std::int64_t double_press_window_ms = 600;
    std::int64_t ack_window_ms = 60000;
    std::int64_t cooldown_ms = 120000;
    std::int64_t retry_delay_ms = 5000;
};

// ---------------------------------------------------------------------------
// Panic button

struct ButtonState {
    std::optional<std::int64_t> last_press_ms;
    int press_count = 0;
};

struct ButtonStep {
    ButtonState state;
    bool panic = false;
};

/// Two presses no more than `window_ms` apart raise a panic and reset.
ButtonStep button_step(const ButtonState& state, std::int64_t press_at_ms, std::int64_t window_ms);

// ---------------------------------------------------------------------------
// Contacts

struct Contact {
    std::string name;
    std::string phone;  // E.164, may be empty
    std::string email;  // may be empty
    int priority = 0;

    friend bool operator==(const Contact&, const Contact&) = default;
};

class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

bool is_e164(std::string_view phone);
bool is_email(std::string_view email);

/// Checks every contact and that priorities are unique. Contacts whose
/// priority is 0 are numbered by list position first (1, 2, ...).
std::vector<Contact> validate_contacts(std::vector<Contact> contacts);

// ---------------------------------------------------------------------------
// Alert cases

enum class CauseKind { Panic, FallConfirmed, VitalsAbnormal };

struct Cause {
    CauseKind kind = CauseKind::Panic;
    std::vector<vitals::Reason> reasons;  // VitalsAbnormal only

    friend bool operator==(const Cause&, const Cause&) = default;
};

enum class CaseStatus { AwaitingUserAck, Dispatching, Dispatched, Acknowledged, Suppressed };

enum class Channel { Sms, Email };

std::string_view to_string(CauseKind k);
std::string_view to_string(CaseStatus s);
std::string_view to_string(Channel c);
std::optional<CauseKind> cause_kind_from(std::string_view s);
std::optional<CaseStatus> case_status_from(std::string_view s);
std::optional<Channel> channel_from(std::string_view s);

struct Attempt {
    std::int64_t t_ms = 0;
    bool ok = false;
    std::string detail;

    friend bool operator==(const Attempt&, const Attempt&) = default;
};

/// One contact on one channel, with every attempt made.
struct DeliveryOutcome {
    std::string contact;
    Channel channel = Channel::Sms;
    std::string destination;
    std::vector<Attempt> attempts;

    bool sent() const { return !attempts.empty() && attempts.back().ok; }
    friend bool operator==(const DeliveryOutcome&, const DeliveryOutcome&) = default;
};

struct AlertCase {
    std::uint64_t id = 0;
    Cause cause;
    std::int64_t opened_at_ms = 0;
    std::optional<std::int64_t> ack_deadline_ms;
    CaseStatus status = CaseStatus::AwaitingUserAck;
    std::int64_t status_at_ms = 0;
    std::optional<gps::GeoFix> fix;
    std::optional<std::string> address;
    bool needs_contacts = false;
    std::vector<DeliveryOutcome> dispatch_record;

    bool terminal() const {
        return status == CaseStatus::Dispatched || status == CaseStatus::Acknowledged ||
               status == CaseStatus::Suppressed;
    }
};

enum class Prompt { SelectContacts, CheckVitals };

/// Text shown on the watch display for a prompt (fits a Display frame).
std::string_view prompt_text(Prompt p);

struct Opened {
    AlertCase alert;
    std::vector<Prompt> prompts;
};

/// Opens a case. Panic and FallConfirmed go straight to Dispatching;
/// VitalsAbnormal waits for the wearer until now + ack_window_ms. With no
/// contacts the case waits without a deadline and asks for contacts.
Opened open_case(std::uint64_t id, const Cause& cause, std::int64_t now_ms,
                 const std::optional<gps::GeoFix>& fix, std::size_t contact_count, const Timing& timing);

struct UserAck {
    std::int64_t at_ms = 0;
};
struct Tick {
    std::int64_t now_ms = 0;
};
struct DispatchResult {
    std::int64_t at_ms = 0;
    std::optional<std::string> address;
    std::vector<DeliveryOutcome> outcomes;
};

using CaseEvent = std::variant<UserAck, Tick, DispatchResult>;

/// Applies one event. Ack strictly before the deadline acknowledges; a tick at
/// or past it starts dispatch. Events that do not apply leave the case as is.
AlertCase case_step(const AlertCase& alert, const CaseEvent& event);

/// Cross-case rule: a case whose cause already dispatched within the cooldown
/// is suppressed instead of dispatched. `last_dispatch_ms` is when the last
/// same-cause case entered Dispatching.
bool within_cooldown(std::optional<std::int64_t> last_dispatch_ms, std::int64_t now_ms, const Timing& timing);

AlertCase suppress(const AlertCase& alert, std::int64_t now_ms);

struct PlannedMessage {
    Contact contact;
    Channel channel = Channel::Sms;
    std::string destination;
    std::string body;
};

class NoContacts : public std::runtime_error {
public:
    NoContacts() : std::runtime_error("no emergency contacts registered") {}
};

/// Location line used in every message: address, else "lat,lon", else
/// "location unavailable".
std::string location_text(const AlertCase& alert);

std::string cause_text(const Cause& cause);

/// UTC "YYYY-MM-DD HH:MM:SS UTC" for epoch milliseconds.
std::string format_time(std::int64_t t_ms);

/// One SMS per phone and one email per address, contacts in priority order.
std::vector<PlannedMessage> plan_dispatch(const AlertCase& alert, std::vector<Contact> contacts,
                                          std::string_view wearer_name);

}  // namespace safewatch::escalation
