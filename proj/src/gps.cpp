#include "safewatch/gps.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <cstdlib>

namespace safewatch::gps {

namespace {

[[noreturn]] void malformed(const std::string& why) {
    throw NmeaError(NmeaError::Kind::Malformed, why);
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

std::vector<std::string> split_fields(std::string_view body) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = body.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(body.substr(start));
            return out;
        }
        out.emplace_back(body.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_number(const std::string& text, const char* what) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw NmeaError(NmeaError::Kind::FieldParse, fmt::format("bad {} field '{}'", what, text));
    }
    return value;
}

// ddmm.mmmm (or dddmm.mmmm) to signed decimal degrees.
double parse_coordinate(const std::string& value, const std::string& hemisphere, char positive,
                        char negative, double limit, const char* what) {
    const double raw = parse_number(value, what);
    if (raw < 0.0) {
        throw NmeaError(NmeaError::Kind::FieldParse, fmt::format("negative {} '{}'", what, value));
    }
    const double degrees = std::floor(raw / 100.0);
    const double minutes = raw - degrees * 100.0;
    if (minutes >= 60.0) {
        throw NmeaError(NmeaError::Kind::FieldParse, fmt::format("{} minutes out of range", what));
    }
    double decimal = degrees + minutes / 60.0;
    if (decimal > limit) {
        throw NmeaError(NmeaError::Kind::FieldParse, fmt::format("{} out of range", what));
    }
    if (hemisphere.size() != 1 || (hemisphere[0] != positive && hemisphere[0] != negative)) {
        throw NmeaError(NmeaError::Kind::FieldParse, fmt::format("bad {} hemisphere", what));
    }
    if (hemisphere[0] == negative) {
        decimal = -decimal;
    }
    return decimal;
}

std::string field_at(const NmeaSentence& s, std::size_t i) {
    if (i >= s.fields.size()) {
        throw NmeaError(NmeaError::Kind::FieldParse,
                        fmt::format("{} has only {} fields", s.type, s.fields.size()));
    }
    return s.fields[i];
}

// Renders |degrees| as ddmm.mmmmm with the given degree width.
std::string render_coordinate(double degrees, int degree_width) {
    constexpr std::int64_t kUnitsPerMinute = 100000;
    const auto total = static_cast<std::int64_t>(std::llround(std::abs(degrees) * 60.0 * kUnitsPerMinute));
    const std::int64_t whole = total / (60 * kUnitsPerMinute);
    const std::int64_t rem = total % (60 * kUnitsPerMinute);
    return fmt::format("{:0{}d}{:02d}.{:05d}", whole, degree_width, rem / kUnitsPerMinute,
                       rem % kUnitsPerMinute);
}

}  // namespace

std::uint8_t nmea_checksum(std::string_view body) {
    std::uint8_t sum = 0;
    for (char c : body) {
        sum ^= static_cast<std::uint8_t>(c);
    }
    return sum;
}

NmeaSentence parse_sentence(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty() || line.front() != '$') {
        malformed("sentence does not start with '$'");
    }
    const auto star = line.rfind('*');
    if (star == std::string_view::npos) {
        malformed("sentence has no checksum delimiter");
    }
    if (line.size() - star != 3) {
        malformed("checksum must be two hex digits");
    }
    const int hi = hex_value(line[star + 1]);
    const int lo = hex_value(line[star + 2]);
    if (hi < 0 || lo < 0) {
        malformed("checksum is not hex");
    }

    const auto body = line.substr(1, star - 1);
    for (char c : body) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x20 || u > 0x7e || c == '$' || c == '*') {
            malformed("sentence body holds a reserved or non-printable byte");
        }
    }

    NmeaSentence s;
    s.checksum = static_cast<std::uint8_t>(hi * 16 + lo);
    const auto computed = nmea_checksum(body);
    if (computed != s.checksum) {
        throw NmeaError(NmeaError::Kind::BadChecksum,
                        fmt::format("checksum {:02X} stated, {:02X} computed", s.checksum, computed));
    }

    auto parts = split_fields(body);
    s.type = std::move(parts.front());
    if (s.type.size() != 5) {
        malformed("sentence type must be five characters");
    }
    for (char c : s.type) {
        if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'))) {
            malformed("sentence type must be uppercase alphanumeric");
        }
    }
    s.fields.assign(std::make_move_iterator(parts.begin() + 1), std::make_move_iterator(parts.end()));
    return s;
}

std::string render(const NmeaSentence& sentence) {
    std::string body = sentence.type;
    for (const auto& f : sentence.fields) {
        body += ',';
        body += f;
    }
    return fmt::format("${}*{:02X}", body, sentence.checksum);
}

GeoFix to_fix(const NmeaSentence& sentence, std::int64_t t_ms) {
    const std::string_view id = std::string_view(sentence.type).substr(2);
    GeoFix fix;
    fix.t_ms = t_ms;

    std::size_t lat_at = 0;
    if (id == "GGA") {
        fix.source = "GGA";
        const auto quality = field_at(sentence, 5);
        if (quality.empty() || quality == "0") {
            return fix;
        }
        lat_at = 1;
    } else if (id == "RMC") {
        fix.source = "RMC";
        const auto status = field_at(sentence, 1);
        if (status != "A") {
            return fix;
        }
        lat_at = 2;
    } else {
        throw NmeaError(NmeaError::Kind::UnsupportedSentence,
                        fmt::format("unsupported sentence {}", sentence.type));
    }

    Coordinates c;
    c.lat = parse_coordinate(field_at(sentence, lat_at), field_at(sentence, lat_at + 1), 'N', 'S',
                             90.0, "latitude");
    c.lon = parse_coordinate(field_at(sentence, lat_at + 2), field_at(sentence, lat_at + 3), 'E',
                             'W', 180.0, "longitude");
    fix.position = c;
    return fix;
}

NmeaSentence to_nmea(const GeoFix& fix) {
    const std::int64_t day_ms = ((fix.t_ms % 86400000) + 86400000) % 86400000;
    const auto hh = day_ms / 3600000;
    const auto mm = (day_ms / 60000) % 60;
    const auto ss = (day_ms / 1000) % 60;
    const auto cs = (day_ms / 10) % 100;

    NmeaSentence s;
    s.type = "GPGGA";
    s.fields.push_back(fmt::format("{:02d}{:02d}{:02d}.{:02d}", hh, mm, ss, cs));
    if (fix.position) {
        const auto& p = *fix.position;
        s.fields.push_back(render_coordinate(p.lat, 2));
        s.fields.emplace_back(p.lat < 0 ? "S" : "N");
        s.fields.push_back(render_coordinate(p.lon, 3));
        s.fields.emplace_back(p.lon < 0 ? "W" : "E");
        s.fields.emplace_back("1");
        s.fields.emplace_back("08");
        s.fields.emplace_back("0.9");
        s.fields.emplace_back("545.4");
    } else {
        for (int i = 0; i < 4; ++i) s.fields.emplace_back("");
        s.fields.emplace_back("0");
        s.fields.emplace_back("00");
        s.fields.emplace_back("99.9");
        s.fields.emplace_back("");
    }
    s.fields.emplace_back("M");
    s.fields.emplace_back(fix.position ? "46.9" : "");
    s.fields.emplace_back("M");
    s.fields.emplace_back("");
    s.fields.emplace_back("");

    std::string body = s.type;
    for (const auto& f : s.fields) {
        body += ',';
        body += f;
    }
    s.checksum = nmea_checksum(body);
    return s;
}

std::string format_coordinates(const Coordinates& c) { return fmt::format("{:.5f},{:.5f}", c.lat, c.lon); }

std::int64_t to_e5(double degrees) { return std::llround(degrees * 1e5); }

double from_e5(std::int64_t e5) { return static_cast<double>(e5) / 1e5; }

}  // namespace safewatch::gps
