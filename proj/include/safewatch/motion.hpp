#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace safewatch::motion {

/// One accelerometer reading as the ADC reports it (10-bit counts).
struct RawAccelSample {
    std::int64_t t_ms = 0;
    int x_raw = 0;
    int y_raw = 0;
    int z_raw = 0;
};

/// Linear map of ADC counts onto [-100, 100], then a signed division to g.
/// The defaults are the bench calibration of the ADXL335 on the prototype.
struct AxisCalibration {
    int in_lo = 0;
    int in_hi = 1023;
    int divisor = 100;

    bool valid() const { return in_lo < in_hi && (divisor == 100 || divisor == -100); }
};

struct Calibration {
    AxisCalibration x{269, 404, -100};
    AxisCalibration y{265, 403, -100};
    AxisCalibration z{268, 403, 100};
};

struct GVector {
    double xg = 0.0;
    double yg = 0.0;
    double zg = 0.0;

    GVector operator-() const { return {-xg, -yg, -zg}; }
    friend bool operator==(const GVector&, const GVector&) = default;
};

/// Roll, pitch and yaw in whole degrees, shifted into [0, 360].
struct OrientationAngles {
    int roll = 180;
    int pitch = 180;
    int yaw = 180;

    friend bool operator==(const OrientationAngles&, const OrientationAngles&) = default;
};

/// Arduino `map()`: integer arithmetic, truncating division, no clamping.
long arduino_map(long x, long in_min, long in_max, long out_min, long out_max);

double calibrate_axis(int raw, const AxisCalibration& cal);
GVector calibrate(const RawAccelSample& sample, const Calibration& cal = {});

/// Inverse of calibrate_axis up to one count of quantisation; used by the
/// simulator to synthesise raw counts. Result is clamped to the 10-bit range.
int raw_for_g(double g, const AxisCalibration& cal);

OrientationAngles orientation(const GVector& g);

double rms_accel(const GVector& g);

enum class SleepPosition { Supine, Prone, LeftSide, RightSide, Upright };

std::string_view to_string(SleepPosition p);

/// Classifies from the dominant gravity axis. The angles are inverted back to
/// a unit direction first, so the same |component| >= 0.7 rule applies.
SleepPosition sleep_position(const OrientationAngles& o);
SleepPosition sleep_position(const GVector& g);

// ---------------------------------------------------------------------------
// Fall detection

struct FallConfig {
    double rms_threshold_g = 1.4;
    std::int64_t confirm_window_ms = 15000;
    std::int64_t cooldown_ms = 120000;
};

enum class FallPhase { Monitoring, CandidateFall, AwaitingConfirmation, Confirmed, Cleared };

std::string_view to_string(FallPhase p);

struct FallDetectorState {
    FallPhase phase = FallPhase::Monitoring;
    std::int64_t detected_at_ms = 0;   // CandidateFall onwards
    std::int64_t deadline_ms = 0;      // AwaitingConfirmation onwards
    std::int64_t resolved_at_ms = 0;   // Confirmed / Cleared
    std::int64_t last_update_ms = 0;
    std::uint32_t incident = 0;        // bumped on every new candidate
    FallConfig config;
};

enum class FallEventKind { PromptUser, FallDismissed, FallConfirmed };

std::string_view to_string(FallEventKind k);

struct FallEvent {
    FallEventKind kind;
    std::uint32_t incident;
    std::int64_t t_ms;

    friend bool operator==(const FallEvent&, const FallEvent&) = default;
};

struct FallStep {
    FallDetectorState state;
    std::vector<FallEvent> events;
};

/// Advances the detector by one sample. The threshold is evaluated per sample.
/// A press counts only while the prompt is open and strictly before the
/// deadline; at or after the deadline the fall is confirmed.
FallStep fall_step(const FallDetectorState& state, const GVector& sample, std::int64_t now_ms,
                   bool ok_pressed);

}  // namespace safewatch::motion
