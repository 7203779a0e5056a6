#pragma once

#include "safewatch/gps.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace safewatch::gps {

struct Address {
    std::string display;
    Coordinates resolved_from;
    std::string provider;
};

class ProviderUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Backend that turns a coordinate into display text. Implementations throw
/// ProviderUnavailable on any failure, including an empty answer.
class GeocodingClient {
public:
    virtual ~GeocodingClient() = default;
    virtual std::string lookup(const Coordinates& at) = 0;
    virtual std::string provider() const = 0;
};

/// Canned answers keyed by coordinates rounded to 4 decimals; an optional
/// fallback answers everything else.
class StubGeocodingClient : public GeocodingClient {
public:
    void add(const Coordinates& at, std::string display);
    void set_fallback(std::string display) { fallback_ = std::move(display); }
    void set_unavailable(bool down) { unavailable_ = down; }

    std::string lookup(const Coordinates& at) override;
    std::string provider() const override { return "stub"; }

private:
    std::map<std::pair<long long, long long>, std::string> table_;
    std::string fallback_;
    bool unavailable_ = false;
};

/// GET <url>?lat=<lat>&lon=<lon>, plain-text body is the address.
class HttpGeocodingClient : public GeocodingClient {
public:
    explicit HttpGeocodingClient(std::string url,
                                 std::chrono::milliseconds deadline = std::chrono::milliseconds(2000));

    std::string lookup(const Coordinates& at) override;
    std::string provider() const override { return "http"; }

private:
    std::string url_;
    std::chrono::milliseconds deadline_;
};

/// Caching front for a client. Safe to call from several threads.
class Geocoder {
public:
    explicit Geocoder(std::shared_ptr<GeocodingClient> client) : client_(std::move(client)) {}

    /// Throws std::invalid_argument for an invalid fix and ProviderUnavailable
    /// when the backend fails. Failures are not cached.
    Address reverse_geocode(const GeoFix& fix);

    std::size_t cache_size() const;

private:
    std::shared_ptr<GeocodingClient> client_;
    mutable std::mutex mutex_;
    std::map<std::pair<long long, long long>, Address> cache_;
};

std::pair<long long, long long> cache_key(const Coordinates& at);

}  // namespace safewatch::gps
