#pragma once

#include "safewatch/escalation.hpp"
#include "safewatch/gateway/codec.hpp"
#include "safewatch/gateway/record_log.hpp"
#include "safewatch/gps.hpp"
#include "safewatch/vitals.hpp"
#include "safewatch/wire.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

// The gateway's state machine with no I/O. Inputs and clock readings go in,
// records to persist, frames to send and jobs to run come out. The service
// wraps it with sockets, HTTP and threads; replay drives it from the log.

namespace safewatch::gateway {

struct NewRecord {
    std::string device;
    std::string kind;
    std::int64_t t_ms = 0;
    Json payload;

    friend bool operator==(const NewRecord&, const NewRecord&) = default;
};

struct DeviceSend {
    std::string device;
    wire::Frame frame;
};

struct DispatchJob {
    std::string device;
    escalation::AlertCase alert;
    std::vector<escalation::Contact> contacts;
    std::string wearer;
};

struct GeocodeJob {
    std::string device;
    gps::GeoFix fix;
};

struct Effects {
    std::vector<NewRecord> records;
    std::vector<DeviceSend> sends;
    std::vector<DispatchJob> dispatches;
    std::vector<GeocodeJob> geocodes;

    void append(Effects&& other);
};

struct FrameIn {
    std::string device;
    wire::Frame frame;
};
struct AckIn {
    std::string device;
    std::uint64_t case_id = 0;
};
struct DispatchDone {
    std::string device;
    std::uint64_t case_id = 0;
    std::optional<std::string> address;
    std::vector<escalation::DeliveryOutcome> outcomes;
};
struct AddressResolved {
    std::string device;
    gps::Coordinates at;
    std::string address;
};
struct ProfileIn {
    Profile profile;
};

using Input = std::variant<FrameIn, AckIn, DispatchDone, AddressResolved, ProfileIn>;

class UnknownCase : public std::runtime_error {
public:
    UnknownCase(const std::string& device, std::uint64_t id);
};

struct CoreSettings {
    escalation::Timing timing;
    std::vector<vitals::RangeBand> default_bands{vitals::RangeBand{}};
};

/// A reading at or beyond the beat gate, or with no SpO2, is not classified.
bool low_signal(int bpm, int spo2_tenths);

struct ReplayReport {
    std::size_t records = 0;
    std::size_t inputs = 0;
    std::size_t mismatches = 0;
    std::string first_mismatch;
};

class GatewayCore {
public:
    explicit GatewayCore(CoreSettings settings = {});

    /// Times earlier than the last seen time are treated as the last seen time.
    Effects apply(std::int64_t now_ms, const Input& input);
    Effects tick(std::int64_t now_ms);

    /// Rebuilds state from a log written by this core. Every record the core
    /// regenerates is compared with the logged one.
    ReplayReport replay(const std::vector<Record>& log);

    /// Snapshot without connection status. Deterministic for a given history.
    Json snapshot(const std::string& device) const;
    std::vector<std::string> devices() const;
    Profile profile_for(const std::string& device) const;
    std::vector<Profile> profiles() const;
    std::optional<escalation::AlertCase> find_case(const std::string& device, std::uint64_t id) const;
    /// Cases left in Dispatching, e.g. after a restart mid-dispatch.
    std::vector<DispatchJob> pending_dispatches() const;
    std::int64_t now_ms() const { return now_; }

private:
    struct DeviceState {
        std::optional<vitals::VitalsReading> latest_vitals;
        std::vector<vitals::Reason> latest_reasons;
        std::optional<gps::GeoFix> latest_fix;
        std::optional<std::string> address;
        std::optional<std::pair<long long, long long>> geocode_key;
        std::map<std::uint64_t, escalation::AlertCase> cases;
        std::map<escalation::CauseKind, std::int64_t> last_dispatch;
        std::optional<std::int64_t> last_vitals_case_ms;
    };

    std::int64_t advance(std::int64_t now_ms);
    DeviceState& device(const std::string& id);
    void on_frame(const std::string& dev, const wire::Frame& frame, Effects& fx);
    void on_vitals(const std::string& dev, const wire::Vitals& v, Effects& fx);
    void on_ack(const std::string& dev, escalation::AlertCase& c, Effects& fx);
    void open(const std::string& dev, const escalation::Cause& cause, Effects& fx);
    void enter_dispatch(const std::string& dev, escalation::AlertCase& c, std::int64_t at, Effects& fx);
    void record_case(const std::string& dev, const escalation::AlertCase& c, Effects& fx) const;
    void record(const std::string& dev, const char* kind, Json payload, Effects& fx) const;
    escalation::AlertCase* lookup(const std::string& dev, std::uint64_t id);

    CoreSettings settings_;
    std::int64_t now_ = 0;
    std::uint64_t next_case_id_ = 1;
    std::map<std::string, DeviceState> devices_;
    std::map<std::string, Profile> profiles_;
};

/// Turns a logged record back into the input that produced it, if any.
std::optional<Input> input_from_record(const Record& r, const std::vector<vitals::RangeBand>& default_bands);

}  // namespace safewatch::gateway
