#include "safewatch/motion.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace safewatch::motion {

namespace {

// The firmware divides by 3.14, not pi. Kept so angles match the device.
constexpr double kDevicePi = 3.14;

double safe_atan2(double y, double x) {
    if (y == 0.0 && x == 0.0) {
        return 0.0;
    }
    return std::atan2(y, x);
}

int shifted_degrees(double radians) {
    const int truncated = static_cast<int>((radians * 180.0) / kDevicePi);
    return std::clamp(truncated + 180, 0, 360);
}

double angle_radians(int shifted) { return (shifted - 180) * kDevicePi / 180.0; }

SleepPosition position_for_axis(int axis, double value) {
    switch (axis) {
        case 0:
            return SleepPosition::Upright;
        case 1:
            return value >= 0 ? SleepPosition::LeftSide : SleepPosition::RightSide;
        default:
            return value >= 0 ? SleepPosition::Supine : SleepPosition::Prone;
    }
}

// The largest |component| decides. Whenever some axis clears the 0.7 g
// dominance band it is necessarily the largest, so the band never disagrees;
// tilted postures below the band still resolve to their nearest axis.
SleepPosition dominant_axis_position(const std::array<double, 3>& v) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
        if (std::abs(v[i]) > std::abs(v[best])) {
            best = i;
        }
    }
    return position_for_axis(best, v[best]);
}

}  // namespace

long arduino_map(long x, long in_min, long in_max, long out_min, long out_max) {
    return (x - in_min) * (out_max - out_min) / (in_max - in_min) + out_min;
}

double calibrate_axis(int raw, const AxisCalibration& cal) {
    const long mapped = arduino_map(raw, cal.in_lo, cal.in_hi, -100, 100);
    return static_cast<double>(mapped) / static_cast<double>(cal.divisor);
}

GVector calibrate(const RawAccelSample& sample, const Calibration& cal) {
    return {calibrate_axis(sample.x_raw, cal.x), calibrate_axis(sample.y_raw, cal.y),
            calibrate_axis(sample.z_raw, cal.z)};
}

int raw_for_g(double g, const AxisCalibration& cal) {
    const double mapped = g * cal.divisor;
    const double span = cal.in_hi - cal.in_lo;
    // Pick the count whose forward map lands closest to the target.
    const int guess = static_cast<int>(std::lround(cal.in_lo + (mapped + 100.0) * span / 200.0));
    int best = std::clamp(guess, 0, 1023);
    double best_err = std::abs(calibrate_axis(best, cal) - g);
    for (int candidate = guess - 2; candidate <= guess + 2; ++candidate) {
        const int c = std::clamp(candidate, 0, 1023);
        const double err = std::abs(calibrate_axis(c, cal) - g);
        if (err < best_err) {
            best = c;
            best_err = err;
        }
    }
    return best;
}

OrientationAngles orientation(const GVector& g) {
    return {shifted_degrees(safe_atan2(g.yg, g.zg)), shifted_degrees(safe_atan2(g.zg, g.xg)),
            shifted_degrees(safe_atan2(g.xg, g.yg))};
}

double rms_accel(const GVector& g) {
    return std::sqrt((g.xg * g.xg + g.yg * g.yg + g.zg * g.zg) / 3.0);
}

std::string_view to_string(SleepPosition p) {
    switch (p) {
        case SleepPosition::Supine:
            return "Supine";
        case SleepPosition::Prone:
            return "Prone";
        case SleepPosition::LeftSide:
            return "LeftSide";
        case SleepPosition::RightSide:
            return "RightSide";
        case SleepPosition::Upright:
            return "Upright";
    }
    return "Unknown";
}

SleepPosition sleep_position(const GVector& g) { return dominant_axis_position({g.xg, g.yg, g.zg}); }

SleepPosition sleep_position(const OrientationAngles& o) {
    // Each angle pins the direction of one planar projection of gravity:
    // roll -> (z, y), pitch -> (x, z), yaw -> (y, x). Collinearity with each
    // projection is a linear constraint; the least-squares unit solution is
    // the eigenvector of the smallest eigenvalue.
    const double r = angle_radians(o.roll);
    const double p = angle_radians(o.pitch);
    const double y = angle_radians(o.yaw);

    Eigen::Matrix3d constraints;
    constraints << 0.0, -std::cos(r), std::sin(r),  //
        std::sin(p), 0.0, -std::cos(p),             //
        -std::cos(y), std::sin(y), 0.0;
    Eigen::Matrix3d along;
    along << 0.0, std::sin(r), std::cos(r),  //
        std::cos(p), 0.0, std::sin(p),       //
        std::sin(y), std::cos(y), 0.0;

    const Eigen::Matrix3d normal = constraints.transpose() * constraints;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(normal);
    Eigen::Vector3d direction = solver.eigenvectors().col(0);
    if ((along * direction).sum() < 0.0) {
        direction = -direction;
    }
    return dominant_axis_position({direction.x(), direction.y(), direction.z()});
}

std::string_view to_string(FallPhase p) {
    switch (p) {
        case FallPhase::Monitoring:
            return "Monitoring";
        case FallPhase::CandidateFall:
            return "CandidateFall";
        case FallPhase::AwaitingConfirmation:
            return "AwaitingConfirmation";
        case FallPhase::Confirmed:
            return "Confirmed";
        case FallPhase::Cleared:
            return "Cleared";
    }
    return "Unknown";
}

std::string_view to_string(FallEventKind k) {
    switch (k) {
        case FallEventKind::PromptUser:
            return "PromptUser";
        case FallEventKind::FallDismissed:
            return "FallDismissed";
        case FallEventKind::FallConfirmed:
            return "FallConfirmed";
    }
    return "Unknown";
}

FallStep fall_step(const FallDetectorState& state, const GVector& sample, std::int64_t now_ms,
                   bool ok_pressed) {
    if (now_ms < state.last_update_ms) {
        throw std::invalid_argument("fall_step: time went backwards");
    }
    FallStep out{state, {}};
    auto& s = out.state;
    s.last_update_ms = now_ms;

    if (s.phase == FallPhase::Confirmed || s.phase == FallPhase::Cleared) {
        if (now_ms - s.resolved_at_ms < s.config.cooldown_ms) {
            return out;
        }
        s.phase = FallPhase::Monitoring;
    }

    if (s.phase == FallPhase::Monitoring) {
        if (rms_accel(sample) > s.config.rms_threshold_g) {
            s.phase = FallPhase::CandidateFall;
            s.detected_at_ms = now_ms;
            ++s.incident;
            out.events.push_back({FallEventKind::PromptUser, s.incident, now_ms});
        }
        return out;
    }

    if (s.phase == FallPhase::CandidateFall) {
        s.phase = FallPhase::AwaitingConfirmation;
        s.deadline_ms = s.detected_at_ms + s.config.confirm_window_ms;
    }

    // AwaitingConfirmation
    if (now_ms >= s.deadline_ms) {
        s.phase = FallPhase::Confirmed;
        s.resolved_at_ms = now_ms;
        out.events.push_back({FallEventKind::FallConfirmed, s.incident, now_ms});
    } else if (ok_pressed) {
        s.phase = FallPhase::Cleared;
        s.resolved_at_ms = now_ms;
        out.events.push_back({FallEventKind::FallDismissed, s.incident, now_ms});
    }
    return out;
}

}  // namespace safewatch::motion
