#include "safewatch/wire.hpp"

#include <fmt/format.h>

#include <charconv>

namespace safewatch::wire {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool display_char_ok(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x20 && u <= 0x7e && c != ',';
}

// Optional '-' then 1..18 digits, nothing else.
bool parse_int(std::string_view text, std::int64_t& out) {
    if (text.empty() || text.size() > 19) {
        return false;
    }
    const std::size_t digits_from = text.front() == '-' ? 1 : 0;
    if (digits_from == text.size()) {
        return false;
    }
    for (std::size_t i = digits_from; i < text.size(); ++i) {
        if (text[i] < '0' || text[i] > '9') {
            return false;
        }
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            parts.push_back(line.substr(start));
            return parts;
        }
        parts.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

std::string validate(const Frame& frame) {
    return std::visit(
        overloaded{
            [](const Vitals& v) -> std::string {
                if (v.bpm < 0 || v.bpm > kMaxBpm) return "bpm out of range";
                if (v.spo2_tenths < 0 || v.spo2_tenths > kMaxSpo2Tenths) return "spo2 out of range";
                return {};
            },
            [](const Gps& g) -> std::string {
                if (g.lat_e5 < -kMaxLatE5 || g.lat_e5 > kMaxLatE5) return "latitude out of range";
                if (g.lon_e5 < -kMaxLonE5 || g.lon_e5 > kMaxLonE5) return "longitude out of range";
                return {};
            },
            [](const Display& d) -> std::string {
                if (d.text.size() > kMaxDisplayText) return "display text longer than 11";
                for (char c : d.text) {
                    if (!display_char_ok(c)) return "display text holds ',' or a control byte";
                }
                return {};
            },
            [](const auto&) -> std::string { return {}; },
        },
        frame);
}

std::string encode(const Frame& frame) {
    if (const auto* d = std::get_if<Display>(&frame); d && d->text.size() > kMaxDisplayText) {
        throw EncodeError(EncodeError::Kind::DisplayTooLong,
                          fmt::format("display text is {} chars, limit {}", d->text.size(), kMaxDisplayText));
    }
    if (auto why = validate(frame); !why.empty()) {
        throw EncodeError(EncodeError::Kind::InvalidFrame, why);
    }
    return std::visit(overloaded{
                          [](const Sos&) -> std::string { return "SOS\n"; },
                          [](const Fall&) -> std::string { return "FALL\n"; },
                          [](const Ok&) -> std::string { return "OK\n"; },
                          [](const Vitals& v) { return fmt::format("V,{},{}\n", v.bpm, v.spo2_tenths); },
                          [](const Gps& g) { return fmt::format("G,{},{}\n", g.lat_e5, g.lon_e5); },
                          [](const Display& d) { return fmt::format("D,{}\n", d.text); },
                      },
                      frame);
}

std::string_view frame_name(const Frame& frame) {
    return std::visit(overloaded{
                          [](const Sos&) { return std::string_view("SOS"); },
                          [](const Fall&) { return std::string_view("FALL"); },
                          [](const Ok&) { return std::string_view("OK"); },
                          [](const Vitals&) { return std::string_view("V"); },
                          [](const Gps&) { return std::string_view("G"); },
                          [](const Display&) { return std::string_view("D"); },
                      },
                      frame);
}

std::variant<Frame, std::string> parse_line(std::string_view line) {
    if (line == "SOS") return Frame{Sos{}};
    if (line == "FALL") return Frame{Fall{}};
    if (line == "OK") return Frame{Ok{}};

    const auto parts = split(line);
    const auto tag = parts.front();
    Frame frame;
    if (tag == "V" || tag == "G") {
        if (parts.size() != 3) {
            return fmt::format("{} frame needs 2 fields, got {}", tag, parts.size() - 1);
        }
        std::int64_t a = 0;
        std::int64_t b = 0;
        if (!parse_int(parts[1], a) || !parse_int(parts[2], b)) {
            return std::string("non-integer field");
        }
        if (tag == "V") {
            if (a < 0 || a > kMaxBpm || b < 0 || b > kMaxSpo2Tenths) {
                return std::string("vitals out of range");
            }
            frame = Vitals{static_cast<int>(a), static_cast<int>(b)};
        } else {
            frame = Gps{a, b};
        }
    } else if (tag == "D") {
        // Display text may not contain ',', so exactly one separator.
        if (parts.size() != 2) {
            return std::string("display frame needs 1 field");
        }
        frame = Display{std::string(parts[1])};
    } else {
        return std::string("unknown frame tag");
    }
    if (auto why = validate(frame); !why.empty()) {
        return why;
    }
    return frame;
}

std::vector<Decoded> Decoder::feed(std::string_view chunk) {
    std::vector<Decoded> out;
    for (char c : chunk) {
        if (c == '\n') {
            finish_line(out);
            continue;
        }
        if (buffer_.size() == kMaxBuffered) {
            buffer_.erase(buffer_.begin());
            ++discarded_;
            overflowed_ = true;
        }
        buffer_.push_back(c);
    }
    return out;
}

void Decoder::finish_line(std::vector<Decoded>& out) {
    std::string_view line = buffer_;
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }

    if (!overflowed_) {
        if (line.empty()) {
            buffer_.clear();
            return;
        }
        auto parsed = parse_line(line);
        if (auto* frame = std::get_if<Frame>(&parsed)) {
            out.emplace_back(std::move(*frame));
            buffer_.clear();
            return;
        }
        out.emplace_back(FrameError{std::string(line), std::get<std::string>(parsed)});
    } else {
        out.emplace_back(FrameError{std::string(line), "line exceeded 64 bytes"});
    }

    for (std::size_t start = 1; start < line.size(); ++start) {
        auto parsed = parse_line(line.substr(start));
        if (auto* frame = std::get_if<Frame>(&parsed)) {
            out.emplace_back(std::move(*frame));
            break;
        }
    }
    discarded_ += buffer_.size();
    buffer_.clear();
    overflowed_ = false;
}

std::vector<Frame> frames_of(const std::vector<Decoded>& items) {
    std::vector<Frame> out;
    for (const auto& item : items) {
        if (const auto* f = std::get_if<Frame>(&item)) out.push_back(*f);
    }
    return out;
}

std::vector<FrameError> errors_of(const std::vector<Decoded>& items) {
    std::vector<FrameError> out;
    for (const auto& item : items) {
        if (const auto* e = std::get_if<FrameError>(&item)) out.push_back(*e);
    }
    return out;
}

}  // namespace safewatch::wire
