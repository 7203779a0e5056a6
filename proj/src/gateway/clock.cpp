#include "safewatch/gateway/clock.hpp"

#include <chrono>
#include <thread>

namespace safewatch::gateway {

namespace {

std::int64_t steady_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::int64_t system_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace

std::int64_t SystemClock::now_ms() const { return system_ms(); }

void SystemClock::sleep_for(std::int64_t ms) {
    if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

ScaledClock::ScaledClock(double speed, std::int64_t start_ms)
    : speed_(speed > 0 ? speed : 1.0), start_ms_(start_ms >= 0 ? start_ms : system_ms()),
      steady_origin_ns_(steady_ns()) {}

std::int64_t ScaledClock::now_ms() const {
    const double elapsed_ms = static_cast<double>(steady_ns() - steady_origin_ns_) / 1e6;
    return start_ms_ + static_cast<std::int64_t>(elapsed_ms * speed_);
}

void ScaledClock::sleep_for(std::int64_t ms) {
    if (ms <= 0) return;
    const auto target = now_ms() + ms;
    std::this_thread::sleep_for(std::chrono::microseconds(static_cast<std::int64_t>(ms * 1000.0 / speed_)));
    // Rounding can leave us a hair short.
    while (now_ms() < target) std::this_thread::sleep_for(std::chrono::microseconds(100));
}

std::int64_t ManualClock::now_ms() const {
    std::lock_guard lock(mu_);
    return now_;
}

void ManualClock::sleep_for(std::int64_t ms) {
    std::unique_lock lock(mu_);
    const auto target = now_ + ms;
    cv_.wait(lock, [&] { return now_ >= target; });
}

void ManualClock::set(std::int64_t t_ms) {
    {
        std::lock_guard lock(mu_);
        now_ = t_ms;
    }
    cv_.notify_all();
}

void ManualClock::advance(std::int64_t ms) {
    {
        std::lock_guard lock(mu_);
        now_ += ms;
    }
    cv_.notify_all();
}

}  // namespace safewatch::gateway
