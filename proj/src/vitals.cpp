#include "safewatch/vitals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace safewatch::vitals {

bool check_for_beat(BeatState& state, const PpgSample& sample) {
    const auto ir = static_cast<double>(sample.ir);
    if (!state.primed) {
        state.primed = true;
        state.dc = ir;
        state.prev_ac = 0.0;
        state.armed = false;
        return false;
    }

    state.dc = kDcAlpha * state.dc + (1.0 - kDcAlpha) * ir;
    const double ac = ir - state.dc;
    const double band = kHysteresisFraction * state.dc;

    bool beat = false;
    if (ac > band && band > 0.0) {
        state.armed = true;
    } else if (state.armed && state.prev_ac > 0.0 && ac <= 0.0) {
        state.armed = false;
        beat = true;
    }
    state.prev_ac = ac;
    return beat;
}

std::optional<int> bpm_from_delta(std::int64_t delta_ms) {
    if (delta_ms <= 0) {
        throw VitalsError(VitalsError::Kind::ClockAnomaly, "non-positive beat interval");
    }
    const double bpm = 60.0 / (static_cast<double>(delta_ms) / 1000.0);
    if (bpm < 255.0 && bpm > 20.0) {
        return static_cast<int>(bpm);
    }
    return std::nullopt;
}

void update_average(BeatState& state, int bpm) {
    state.rates[state.rate_spot++] = static_cast<std::uint8_t>(bpm);
    state.rate_spot %= state.rates.size();

    int sum = 0;
    for (auto r : state.rates) {
        sum += r;
    }
    state.beat_avg = sum / static_cast<int>(state.rates.size());
}

std::optional<int> feed_heart_rate(BeatState& state, const PpgSample& sample) {
    if (!check_for_beat(state, sample)) {
        return std::nullopt;
    }
    const std::int64_t delta = sample.t_ms - state.last_beat_ms;
    state.last_beat_ms = sample.t_ms;
    if (delta <= 0) {
        return std::nullopt;
    }
    auto bpm = bpm_from_delta(delta);
    if (bpm) {
        update_average(state, *bpm);
    }
    return bpm;
}

double spo2_from_ratio(double ratio) {
    const double raw = std::clamp(110.0 - 25.0 * ratio, 0.0, 100.0);
    return std::round(raw * 10.0) / 10.0;
}

namespace {

struct ChannelStats {
    double dc = 0.0;
    double ac = 0.0;
};

template <typename Get>
ChannelStats channel_stats(std::span<const PpgSample> window, Get get) {
    double sum = 0.0;
    for (const auto& s : window) {
        sum += static_cast<double>(get(s));
    }
    const double mean = sum / static_cast<double>(window.size());
    double sq = 0.0;
    for (const auto& s : window) {
        const double d = static_cast<double>(get(s)) - mean;
        sq += d * d;
    }
    return {mean, std::sqrt(sq / static_cast<double>(window.size()))};
}

}  // namespace

double ratio_of_ratios(std::span<const PpgSample> window) {
    if (window.size() < kSpo2Window) {
        throw VitalsError(VitalsError::Kind::ShortWindow, "SpO2 window needs 100 samples");
    }
    const auto red = channel_stats(window, [](const PpgSample& s) { return s.red; });
    const auto ir = channel_stats(window, [](const PpgSample& s) { return s.ir; });
    if (red.dc <= 0.0 || ir.dc <= 0.0 || ir.ac == 0.0 || red.ac == 0.0) {
        throw VitalsError(VitalsError::Kind::LowSignal, "flat or empty PPG channel");
    }
    return (red.ac / red.dc) / (ir.ac / ir.dc);
}

double spo2_from_window(std::span<const PpgSample> window) {
    return spo2_from_ratio(ratio_of_ratios(window));
}

const RangeBand& PregnancyProfile::band() const {
    const RangeBand* chosen = &bands.front();
    if (!pregnant) {
        return *chosen;
    }
    for (const auto& b : bands) {
        if (b.from_week <= gestation_weeks && b.from_week >= chosen->from_week) {
            chosen = &b;
        }
    }
    return *chosen;
}

void PregnancyProfile::validate() const {
    if (gestation_weeks < 0 || gestation_weeks > 42) {
        throw std::invalid_argument("gestation_weeks must be within 0..42");
    }
    if (bands.empty()) {
        throw std::invalid_argument("profile needs at least one range band");
    }
    for (const auto& b : bands) {
        if (b.bpm_lo >= b.bpm_hi) {
            throw std::invalid_argument("bpm_lo must be below bpm_hi");
        }
        if (b.spo2_lo < 80.0 || b.spo2_lo > 100.0) {
            throw std::invalid_argument("spo2_lo must be within 80..100");
        }
    }
}

std::string_view to_string(Reason r) {
    switch (r) {
        case Reason::HeartRateLow:
            return "heart_rate_low";
        case Reason::HeartRateHigh:
            return "heart_rate_high";
        case Reason::Spo2Low:
            return "spo2_low";
        case Reason::SupinePosition:
            return "supine_position";
    }
    return "unknown";
}

bool Classification::has(Reason r) const {
    return std::find(reasons.begin(), reasons.end(), r) != reasons.end();
}

Classification classify_vitals(const VitalsReading& reading,
                               std::optional<motion::SleepPosition> position,
                               const PregnancyProfile& profile) {
    if (reading.quality != Quality::Good) {
        throw VitalsError(VitalsError::Kind::LowSignal, "reading is not classifiable");
    }
    const auto& band = profile.band();
    Classification c;
    if (reading.bpm < band.bpm_lo) {
        c.reasons.push_back(Reason::HeartRateLow);
    } else if (reading.bpm > band.bpm_hi) {
        c.reasons.push_back(Reason::HeartRateHigh);
    }
    if (reading.spo2_pct < band.spo2_lo) {
        c.reasons.push_back(Reason::Spo2Low);
    }
    if (profile.pregnant && profile.gestation_weeks >= kLateGestationWeeks && position &&
        *position == motion::SleepPosition::Supine) {
        c.reasons.push_back(Reason::SupinePosition);
    }
    return c;
}

}  // namespace safewatch::vitals
