#pragma once

#include "safewatch/motion.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace safewatch::vitals {

struct PpgSample {
    std::int64_t t_ms = 0;
    std::int64_t ir = 0;
    std::int64_t red = 0;
};

inline constexpr std::size_t kDefaultRateSize = 4;
inline constexpr std::size_t kSpo2Window = 100;

/// Heart-rate tracker state: the beat detector's filter plus the ring of
/// recent rates that the displayed average is taken over.
struct BeatState {
    explicit BeatState(std::size_t rate_size = kDefaultRateSize) : rates(rate_size, 0) {}

    std::int64_t last_beat_ms = 0;
    std::vector<std::uint8_t> rates;
    std::size_t rate_spot = 0;
    int beat_avg = 0;

    // beat detector
    bool primed = false;
    double dc = 0.0;
    double prev_ac = 0.0;
    bool armed = false;
};

class VitalsError : public std::runtime_error {
public:
    enum class Kind { LowSignal, ShortWindow, ClockAnomaly };

    VitalsError(Kind kind, const char* what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline constexpr double kDcAlpha = 0.95;
inline constexpr double kHysteresisFraction = 0.02;

/// DC-tracking zero-crossing beat detector. Fires on the downward crossing of
/// the AC component after it has risen above +2% of the DC estimate.
bool check_for_beat(BeatState& state, const PpgSample& sample);

/// 60 / (delta / 1000), accepted only inside (20, 255). Returns the rate
/// truncated to an integer. Throws ClockAnomaly for delta <= 0.
std::optional<int> bpm_from_delta(std::int64_t delta_ms);

/// Stores (byte)bpm in the ring and recomputes the truncated mean over the
/// whole ring, unfilled slots included.
void update_average(BeatState& state, int bpm);

/// Runs one sample through detector, gate and average. Returns the accepted
/// rate when a beat was detected and passed the gate.
std::optional<int> feed_heart_rate(BeatState& state, const PpgSample& sample);

/// SpO2 from the ratio of ratios, 110 - 25 R, clamped, one decimal.
double spo2_from_ratio(double ratio);

double ratio_of_ratios(std::span<const PpgSample> window);

/// Needs at least 100 samples; throws LowSignal on a flat or zero channel.
double spo2_from_window(std::span<const PpgSample> window);

enum class Quality { Good, LowSignal };

struct VitalsReading {
    std::int64_t t_ms = 0;
    int bpm = 0;
    double spo2_pct = 0.0;
    Quality quality = Quality::Good;
};

struct RangeBand {
    int from_week = 0;
    int bpm_lo = 50;
    int bpm_hi = 115;
    double spo2_lo = 94.0;
};

/// Wearer's profile for vitals. Pregnant wearers use the band with the
/// greatest from_week not after their gestation; everyone else the first band.
struct PregnancyProfile {
    bool pregnant = false;
    int gestation_weeks = 0;
    std::vector<RangeBand> bands{RangeBand{}};

    const RangeBand& band() const;
    void validate() const;
};

enum class Reason { HeartRateLow, HeartRateHigh, Spo2Low, SupinePosition };

std::string_view to_string(Reason r);

struct Classification {
    std::vector<Reason> reasons;

    bool normal() const { return reasons.empty(); }
    bool has(Reason r) const;
};

inline constexpr int kLateGestationWeeks = 28;

/// Position is optional: the wire link carries no orientation, so the gateway
/// classifies without it and the supine rule is skipped.
Classification classify_vitals(const VitalsReading& reading,
                               std::optional<motion::SleepPosition> position,
                               const PregnancyProfile& profile);

}  // namespace safewatch::vitals
