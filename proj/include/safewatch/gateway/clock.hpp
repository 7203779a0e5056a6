#pragma once

#include <condition_variable>
#include <cstdint>
#include <mutex>

namespace safewatch::gateway {

/// Epoch milliseconds. Every timeout in the gateway goes through this.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() const = 0;
    /// Blocks until `ms` of this clock's time has passed.
    virtual void sleep_for(std::int64_t ms) = 0;
    /// Wall-clock milliseconds per clock millisecond.
    virtual double wall_per_ms() const { return 1.0; }
};

class SystemClock : public Clock {
public:
    std::int64_t now_ms() const override;
    void sleep_for(std::int64_t ms) override;
};

/// Runs `speed` times faster than the wall clock, starting at `start_ms`
/// (defaults to the current system time).
class ScaledClock : public Clock {
public:
    explicit ScaledClock(double speed, std::int64_t start_ms = -1);

    std::int64_t now_ms() const override;
    void sleep_for(std::int64_t ms) override;
    double wall_per_ms() const override { return 1.0 / speed_; }

private:
    double speed_;
    std::int64_t start_ms_;
    std::int64_t steady_origin_ns_;
};

/// Moves only when told to. sleep_for waits for other threads to advance it.
class ManualClock : public Clock {
public:
    explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}

    std::int64_t now_ms() const override;
    void sleep_for(std::int64_t ms) override;
    double wall_per_ms() const override { return 0.0; }

    void set(std::int64_t t_ms);
    void advance(std::int64_t ms);

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::int64_t now_;
};

}  // namespace safewatch::gateway
