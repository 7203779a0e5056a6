#pragma once

#include "safewatch/sim/trace.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace safewatch::sim {

class UnknownScenario : public std::invalid_argument {
public:
    explicit UnknownScenario(const std::string& name);
};

struct ScenarioInfo {
    std::string name;
    std::string label;   // fall | adl
    std::string reply;   // none | ok
    std::int64_t duration_ms = 0;
    std::string summary;
};

const std::vector<ScenarioInfo>& scenarios();
const ScenarioInfo& scenario_info(const std::string& name);

/// Same (name, seed) gives the same rows on every platform: the generator
/// draws raw 64-bit words and converts them itself rather than going through
/// the implementation-defined standard distributions.
Trace generate(const std::string& name, std::uint64_t seed);

// Sample clocks, in trace milliseconds.
inline constexpr std::int64_t kAccelPeriodMs = 20;
inline constexpr std::int64_t kPpgPeriodMs = 40;
inline constexpr std::int64_t kPpgOffsetMs = 10;
inline constexpr std::int64_t kGpsPeriodMs = 1000;
inline constexpr std::int64_t kGpsOffsetMs = 5;

// Synthesis limits the corpus is built around.
inline constexpr double kAdlMaxMagnitudeG = 1.8;
inline constexpr double kImpactMinMagnitudeG = 3.0;
inline constexpr std::int64_t kImpactMs = 200;

inline constexpr double kPpgDcIr = 50000.0;
inline constexpr double kPpgDcRed = 40000.0;
inline constexpr double kPpgAmplitude = 2500.0;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();

private:
    std::mt19937_64 engine_;
};

}  // namespace safewatch::sim
