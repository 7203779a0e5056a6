#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Newline-delimited ASCII frames between watch and gateway.
//
//   SOS\n   FALL\n   OK\n
//   V,<bpm>,<spo2_tenths>\n
//   G,<lat_e5>,<lon_e5>\n
//   D,<text>\n            (gateway -> watch, at most 14 bytes on the wire)

namespace safewatch::wire {

struct Sos {
    friend bool operator==(const Sos&, const Sos&) = default;
};
struct Fall {
    friend bool operator==(const Fall&, const Fall&) = default;
};
struct Ok {
    friend bool operator==(const Ok&, const Ok&) = default;
};
struct Vitals {
    int bpm = 0;
    int spo2_tenths = 0;
    friend bool operator==(const Vitals&, const Vitals&) = default;
};
struct Gps {
    std::int64_t lat_e5 = 0;
    std::int64_t lon_e5 = 0;
    friend bool operator==(const Gps&, const Gps&) = default;
};
struct Display {
    std::string text;
    friend bool operator==(const Display&, const Display&) = default;
};

using Frame = std::variant<Sos, Fall, Ok, Vitals, Gps, Display>;

inline constexpr std::size_t kMaxDisplayText = 11;
inline constexpr std::size_t kMaxDisplayFrame = 14;
inline constexpr std::size_t kMaxBuffered = 64;
inline constexpr int kMaxBpm = 255;
inline constexpr int kMaxSpo2Tenths = 1000;
inline constexpr std::int64_t kMaxLatE5 = 9000000;
inline constexpr std::int64_t kMaxLonE5 = 18000000;

class EncodeError : public std::invalid_argument {
public:
    enum class Kind { DisplayTooLong, InvalidFrame };

    EncodeError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Empty when the frame satisfies its invariants, else the violated rule.
std::string validate(const Frame& frame);

std::string encode(const Frame& frame);

std::string_view frame_name(const Frame& frame);

/// Parses one line without its terminator. Returns the reason on failure.
std::variant<Frame, std::string> parse_line(std::string_view line);

struct FrameError {
    std::string line;    // offending bytes, possibly truncated to the buffer cap
    std::string reason;

    friend bool operator==(const FrameError&, const FrameError&) = default;
};

using Decoded = std::variant<Frame, FrameError>;

/// Incremental decoder for one connection.
///
/// Lines are cut at '\n' (a preceding '\r' is dropped). A bad line yields one
/// FrameError; if a suffix of it is a valid frame that frame follows the
/// error, which is how the stream resynchronises after line noise that was
/// not newline-terminated. The buffer keeps at most 64 bytes: on overflow the
/// oldest bytes are discarded and the line is reported bad at its newline.
class Decoder {
public:
    std::vector<Decoded> feed(std::string_view chunk);

    std::size_t buffered() const { return buffer_.size(); }
    std::uint64_t discarded_bytes() const { return discarded_; }

private:
    void finish_line(std::vector<Decoded>& out);

    std::string buffer_;
    bool overflowed_ = false;
    std::uint64_t discarded_ = 0;
};

std::vector<Frame> frames_of(const std::vector<Decoded>& items);
std::vector<FrameError> errors_of(const std::vector<Decoded>& items);

}  // namespace safewatch::wire
