#include "safewatch/sim/scenario.hpp"

#include "safewatch/gps.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace safewatch::sim {

UnknownScenario::UnknownScenario(const std::string& name)
    : std::invalid_argument(fmt::format("unknown scenario '{}'", name)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    // Box-Muller; the second variate is dropped to keep the draw count simple.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

const std::vector<ScenarioInfo>& scenarios() {
    static const std::vector<ScenarioInfo> all{
        {"adl-walk", "adl", "none", 60000, "walking, resting vitals"},
        {"adl-sit", "adl", "none", 60000, "walk, sit down, stay seated"},
        {"fall-forward", "fall", "none", 40000, "walk, forward fall, lie prone, no response"},
        {"fall-side", "fall", "none", 40000, "walk, sideways fall, lie on side, no response"},
        {"fall-forward-ok", "fall", "ok", 40000, "forward fall, wearer answers the prompt"},
        {"desat", "adl", "none", 30000, "seated, SpO2 near 90%, no response"},
        {"desat-ack", "adl", "ok", 30000, "seated, SpO2 near 90%, wearer acknowledges"},
        {"brady", "adl", "none", 30000, "seated, heart rate 40 bpm"},
        {"supine-sleep", "adl", "none", 60000, "lying on the back, resting vitals"},
        {"panic", "adl", "none", 20000, "walking, double press at 5 s"},
    };
    return all;
}

const ScenarioInfo& scenario_info(const std::string& name) {
    for (const auto& s : scenarios()) {
        if (s.name == name) return s;
    }
    throw UnknownScenario(name);
}

namespace {

using motion::GVector;

GVector scale(const GVector& g, double k) { return {g.xg * k, g.yg * k, g.zg * k}; }
double magnitude(const GVector& g) { return std::sqrt(g.xg * g.xg + g.yg * g.yg + g.zg * g.zg); }

constexpr GVector kUpright{1.0, 0.0, 0.0};
constexpr GVector kSupine{0.0, 0.0, 1.0};
constexpr GVector kProne{0.0, 0.0, -1.0};
constexpr GVector kSide{0.0, 1.0, 0.0};
const GVector kSeated{0.70710678, 0.0, 0.70710678};

// Accelerometer script: a function of trace time plus per-sample noise.
struct Motion {
    std::function<GVector(std::int64_t, Rng&)> at;
};

struct Vitals {
    double bpm = 72.0;
    double ratio = 0.5;
};

struct Script {
    Motion motion;
    Vitals vitals;
    std::vector<std::int64_t> presses;  // button B
};

GVector jitter(const GVector& g, Rng& rng, double sigma) {
    return {g.xg + sigma * rng.normal(), g.yg + sigma * rng.normal(), g.zg + sigma * rng.normal()};
}

GVector walking(std::int64_t t, double step_hz, double phase) {
    const double w = 2.0 * std::numbers::pi * step_hz * static_cast<double>(t) / 1000.0 + phase;
    return {1.0 + 0.25 * std::sin(w), 0.15 * std::sin(0.5 * w), 0.1 * std::sin(w + 1.0)};
}

GVector blend(const GVector& a, const GVector& b, double k) {
    return {a.xg + (b.xg - a.xg) * k, a.yg + (b.yg - a.yg) * k, a.zg + (b.zg - a.zg) * k};
}

// ADL samples never reach the cap; rare noise excursions are pulled back.
GVector cap_adl(GVector g) {
    const double m = magnitude(g);
    const double cap = kAdlMaxMagnitudeG - 0.1;
    return m > cap ? scale(g, cap / m) : g;
}

Motion walk_motion(Rng& rng) {
    const double hz = rng.uniform(1.6, 2.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return {[=](std::int64_t t, Rng& r) { return cap_adl(jitter(walking(t, hz, phase), r, 0.02)); }};
}

Motion sit_motion(Rng& rng) {
    const double hz = rng.uniform(1.6, 2.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto sit_at = static_cast<std::int64_t>(rng.uniform(15000.0, 25000.0));
    const double bump = rng.uniform(0.2, 0.4);
    return {[=](std::int64_t t, Rng& r) {
        GVector g;
        if (t < sit_at) {
            g = walking(t, hz, phase);
        } else if (t < sit_at + 1000) {
            // Lowering into the chair, then the seat contact bump.
            const double k = static_cast<double>(t - sit_at) / 1000.0;
            g = blend(kUpright, kSeated, k);
            if (t >= sit_at + 700) g = scale(g, 1.0 + bump);
        } else {
            g = kSeated;
        }
        return cap_adl(jitter(g, r, 0.02));
    }};
}

Motion still_motion(const GVector& posture) {
    return {[=](std::int64_t, Rng& r) { return cap_adl(jitter(posture, r, 0.01)); }};
}

// Raw counts for g on all three axes under the bench calibration.
AccelRow to_row(std::int64_t t, const GVector& g) {
    const motion::Calibration cal;
    return {t, motion::raw_for_g(g.xg, cal.x), motion::raw_for_g(g.yg, cal.y), motion::raw_for_g(g.zg, cal.z)};
}

GVector calibrated(const AccelRow& row) { return motion::calibrate(row.sample()); }

// An impact vector whose calibrated magnitude clears the floor after
// quantisation.
GVector impact_vector(const GVector& direction, double target) {
    const double unit = magnitude(direction);
    for (double m = target;; m += 0.02) {
        const auto g = scale(direction, m / unit);
        if (magnitude(calibrated(to_row(0, g))) >= kImpactMinMagnitudeG) return g;
    }
}

Motion fall_motion(Rng& rng, const GVector& lying, const GVector& impact_dir) {
    auto walk = walk_motion(rng);
    const auto fall_at = static_cast<std::int64_t>(rng.uniform(8000.0, 12000.0)) / kAccelPeriodMs * kAccelPeriodMs;
    const GVector impact = impact_vector(impact_dir, rng.uniform(3.1, 4.0));
    const double free_fall = rng.uniform(0.2, 0.4);
    return {[=](std::int64_t t, Rng& r) {
        if (t < fall_at) return walk.at(t, r);
        if (t < fall_at + 300) return jitter(scale(kUpright, free_fall), r, 0.02);
        if (t < fall_at + 300 + kImpactMs) return impact;
        return jitter(lying, r, 0.01);
    }};
}

Script script_for(const std::string& name, Rng& rng) {
    if (name == "adl-walk") return {walk_motion(rng), {72.0, 0.5}, {}};
    if (name == "adl-sit") return {sit_motion(rng), {70.0, 0.5}, {}};
    if (name == "fall-forward" || name == "fall-forward-ok") {
        return {fall_motion(rng, kProne, {0.3, 0.2, -1.0}), {80.0, 0.5}, {}};
    }
    if (name == "fall-side") return {fall_motion(rng, kSide, {0.3, 1.0, 0.2}), {80.0, 0.5}, {}};
    if (name == "desat" || name == "desat-ack") return {still_motion(kSeated), {75.0, 0.8}, {}};
    if (name == "brady") return {still_motion(kSeated), {40.0, 0.5}, {}};
    if (name == "supine-sleep") return {still_motion(kSupine), {60.0, 0.5}, {}};
    if (name == "panic") return {walk_motion(rng), {90.0, 0.5}, {5015, 5415}};
    throw UnknownScenario(name);
}

}  // namespace

Trace generate(const std::string& name, std::uint64_t seed) {
    const auto& info = scenario_info(name);
    Rng rng(seed);
    const Script script = script_for(name, rng);

    // Independent streams so adding rows of one kind never shifts another.
    Rng accel_rng(seed ^ 0xA5A5A5A5A5A5A5A5ULL);
    Rng ppg_rng(seed ^ 0x5A5A5A5A5A5A5A5AULL);
    Rng gps_rng(seed ^ 0x0F0F0F0F0F0F0F0FULL);

    const double hz = script.vitals.bpm / 60.0 * (1.0 + 0.01 * rng.normal());
    const double red_amp = script.vitals.ratio * kPpgAmplitude * kPpgDcRed / kPpgDcIr;
    gps::Coordinates where{48.11730 + 0.0001 * rng.normal(), 11.51667 + 0.0001 * rng.normal()};

    Trace trace;
    trace.header = {info.name, seed, info.label, info.reply};
    auto presses = script.presses;
    std::size_t next_press = 0;
    for (std::int64_t t = 0; t < info.duration_ms; t += 5) {
        if (t % kAccelPeriodMs == 0) {
            trace.rows.push_back(to_row(t, script.motion.at(t, accel_rng)));
        } else if (t % kPpgPeriodMs == kPpgOffsetMs) {
            const double s = std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(t) / 1000.0);
            trace.rows.push_back(PpgRow{t, std::llround(kPpgDcIr + kPpgAmplitude * s + 15.0 * ppg_rng.normal()),
                                        std::llround(kPpgDcRed + red_amp * s + 15.0 * ppg_rng.normal())});
        } else if (t % kGpsPeriodMs == kGpsOffsetMs) {
            where.lat += 2e-6 * gps_rng.normal();
            where.lon += 2e-6 * gps_rng.normal();
            trace.rows.push_back(NmeaRow{t, gps::render(gps::to_nmea({t, where, "GGA"}))});
        } else if (next_press < presses.size() && t == presses[next_press]) {
            trace.rows.push_back(ButtonRow{t, 'B'});
            ++next_press;
        }
    }
    return trace;
}

}  // namespace safewatch::sim
