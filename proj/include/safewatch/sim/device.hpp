#pragma once

#include "safewatch/escalation.hpp"
#include "safewatch/motion.hpp"
#include "safewatch/sim/trace.hpp"
#include "safewatch/vitals.hpp"
#include "safewatch/wire.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace safewatch::sim {

inline constexpr const char* kFallPromptText = "ARE YOU OK?";

struct DeviceConfig {
    motion::Calibration calibration;
    motion::FallConfig fall;
    std::int64_t double_press_window_ms = 600;
    std::int64_t vitals_period_ms = 1000;
};

struct DeviceOutput {
    std::vector<wire::Frame> frames;           // to the gateway
    std::vector<std::string> local_prompts;    // drawn on the watch by itself
    std::vector<motion::FallEvent> fall_events;
};

/// The watch firmware loop: raw samples in, wire frames out.
///
/// Button A answers an open fall prompt locally; with no fall pending it
/// sends OK to the gateway. Button B feeds the double-press detector.
/// Vitals are held back until the rate ring has been refilled once past the
/// first beat, whose interval is measured from power-on.
class Device {
public:
    explicit Device(DeviceConfig config = {});

    DeviceOutput step(const Row& row);

    const motion::FallDetectorState& fall_state() const { return fall_; }
    const vitals::BeatState& beat_state() const { return beat_; }
    bool fall_pending() const;

private:
    void on_accel(const AccelRow& row, DeviceOutput& out);
    void on_ppg(const PpgRow& row, DeviceOutput& out);
    void on_nmea(const NmeaRow& row, DeviceOutput& out);
    void on_button(const ButtonRow& row, DeviceOutput& out);
    void apply_fall(const motion::FallStep& step, DeviceOutput& out);

    DeviceConfig config_;
    motion::FallDetectorState fall_;
    motion::GVector last_g_{};
    vitals::BeatState beat_;
    std::size_t accepted_beats_ = 0;
    std::deque<vitals::PpgSample> window_;
    std::optional<std::int64_t> last_vitals_ms_;
    escalation::ButtonState buttons_;
};

}  // namespace safewatch::sim
