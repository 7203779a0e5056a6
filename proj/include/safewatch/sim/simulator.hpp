#pragma once

#include "safewatch/sim/device.hpp"
#include "safewatch/sim/trace.hpp"
#include "safewatch/wire.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace safewatch::sim {

enum class Reply { None, Ok };

Reply reply_from(const std::string& text);  // "none" | "ok", throws std::invalid_argument
std::string to_string(Reply r);

struct RunOptions {
    /// Trace milliseconds per wall millisecond. Zero or less streams as fast
    /// as the socket allows.
    double speed = 1.0;
    std::optional<Reply> reply;  // overrides the trace header
    std::string device_id = "watch";
    std::int64_t reply_delay_ms = 3000;  // trace time between a prompt and button A
    std::int64_t linger_ms = 0;          // keep listening after the last row
    DeviceConfig device;
};

struct PromptSeen {
    std::int64_t t_ms = 0;
    std::string text;
    bool local = false;  // raised by the watch itself rather than a D frame
};

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    Reply reply = Reply::None;
    std::size_t rows = 0;
    std::map<std::string, int> frames_sent;
    std::vector<wire::Frame> sent;
    std::vector<PromptSeen> prompts;
    std::vector<std::int64_t> replies;
    std::vector<motion::FallEvent> fall_events;
    int frames_received = 0;
    int receive_errors = 0;
    std::int64_t sim_end_ms = 0;
    std::int64_t wall_ms = 0;
    std::optional<std::string> error;

    int sent_count(const std::string& frame_name) const;
    bool ok() const { return !error; }
};

void print_report(std::ostream& out, const RunReport& report);

/// Drives the device pipeline with no gateway attached; only prompts the
/// watch raises itself are answered.
RunReport simulate(const Trace& trace, Reply reply, const DeviceConfig& device = {},
                   std::int64_t reply_delay_ms = 3000);

/// Streams the trace to a gateway over TCP. Connection problems end the run
/// early and are returned in `error` with everything exchanged so far.
RunReport run(const Trace& trace, const std::string& host, int port, const RunOptions& options = {});

struct EvalMetrics {
    double threshold_g = 0.0;
    int fall_traces = 0;
    int adl_traces = 0;
    int detected = 0;
    int false_alarms = 0;

    std::optional<double> detection_rate() const;
    std::optional<double> false_alarm_rate() const;
};

void print_metrics(std::ostream& out, const EvalMetrics& metrics);

/// Offline motion pipeline per trace at the given RMS threshold. A fall trace
/// counts as detected on FallConfirmed; an adl trace is a false alarm on any
/// PromptUser. Only accelerometer rows are read; reply scripts are ignored.
EvalMetrics evaluate(const std::vector<Trace>& corpus, double threshold_g);

/// Every *.trace file in `dir`, by file name. Throws on an empty corpus.
std::vector<Trace> load_corpus(const std::string& dir);

}  // namespace safewatch::sim
