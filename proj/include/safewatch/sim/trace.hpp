#pragma once

#include "safewatch/motion.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

// Text trace, one sample per line:
//
//   H scenario=<name> seed=<n> label=<fall|adl> reply=<none|ok>
//   A <t_ms> <x> <y> <z>        accelerometer ADC counts
//   P <t_ms> <ir> <red>         PPG counts
//   N <t_ms> <nmea sentence>
//   B <t_ms> <A|B>              button press

namespace safewatch::sim {

struct TraceHeader {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string label = "adl";
    std::string reply = "none";

    friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

struct AccelRow {
    std::int64_t t_ms = 0;
    int x = 0;
    int y = 0;
    int z = 0;

    motion::RawAccelSample sample() const { return {t_ms, x, y, z}; }
    friend bool operator==(const AccelRow&, const AccelRow&) = default;
};
struct PpgRow {
    std::int64_t t_ms = 0;
    std::int64_t ir = 0;
    std::int64_t red = 0;
    friend bool operator==(const PpgRow&, const PpgRow&) = default;
};
struct NmeaRow {
    std::int64_t t_ms = 0;
    std::string line;
    friend bool operator==(const NmeaRow&, const NmeaRow&) = default;
};
struct ButtonRow {
    std::int64_t t_ms = 0;
    char button = 'A';
    friend bool operator==(const ButtonRow&, const ButtonRow&) = default;
};

using Row = std::variant<AccelRow, PpgRow, NmeaRow, ButtonRow>;

std::int64_t row_time(const Row& row);

struct Trace {
    TraceHeader header;
    std::vector<Row> rows;

    std::int64_t duration_ms() const { return rows.empty() ? 0 : row_time(rows.back()); }
    friend bool operator==(const Trace&, const Trace&) = default;
};

class TraceError : public std::runtime_error {
public:
    TraceError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

void write_trace(std::ostream& out, const Trace& trace);
/// Checks syntax and that timestamps strictly increase.
Trace read_trace(std::istream& in);

void save_trace(const std::string& path, const Trace& trace);
Trace load_trace(const std::string& path);

}  // namespace safewatch::sim
