#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace safewatch::gps {

struct NmeaSentence {
    std::string type;                 // talker + sentence id, e.g. "GPGGA"
    std::vector<std::string> fields;  // everything between the type and '*'
    std::uint8_t checksum = 0;

    friend bool operator==(const NmeaSentence&, const NmeaSentence&) = default;
};

class NmeaError : public std::runtime_error {
public:
    enum class Kind { Malformed, BadChecksum, UnsupportedSentence, FieldParse };

    NmeaError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// XOR of every byte between '$' and '*'.
std::uint8_t nmea_checksum(std::string_view body);

/// Parses one sentence. A single trailing "\r\n", "\r" or "\n" is tolerated.
NmeaSentence parse_sentence(std::string_view line);

/// "$TYPE,f1,...,fn*HH" with uppercase hex.
std::string render(const NmeaSentence& sentence);

struct Coordinates {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const Coordinates&, const Coordinates&) = default;
};

struct GeoFix {
    std::int64_t t_ms = 0;
    std::optional<Coordinates> position;  // absent when the receiver has no fix
    std::string source;                   // "GGA" or "RMC"

    bool valid() const { return position.has_value(); }
};

/// Supports GGA and RMC.
GeoFix to_fix(const NmeaSentence& sentence, std::int64_t t_ms);

/// Renders a GGA sentence at 1e-5 minute resolution; time of day comes from t_ms.
NmeaSentence to_nmea(const GeoFix& fix);

/// "lat,lon" at five decimals, the form alerts carry when no address is known.
std::string format_coordinates(const Coordinates& c);

/// Integer 1e-5 degree scaling used on the wire.
std::int64_t to_e5(double degrees);
double from_e5(std::int64_t e5);

}  // namespace safewatch::gps
