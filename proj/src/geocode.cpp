#include "safewatch/geocode.hpp"

#include "safewatch/http_client.hpp"

#include <fmt/format.h>

#include <cmath>

namespace safewatch::gps {

std::pair<long long, long long> cache_key(const Coordinates& at) {
    return {std::llround(at.lat * 1e4), std::llround(at.lon * 1e4)};
}

void StubGeocodingClient::add(const Coordinates& at, std::string display) {
    table_[cache_key(at)] = std::move(display);
}

std::string StubGeocodingClient::lookup(const Coordinates& at) {
    if (unavailable_) {
        throw ProviderUnavailable("stub geocoder marked unavailable");
    }
    if (auto it = table_.find(cache_key(at)); it != table_.end()) {
        return it->second;
    }
    if (!fallback_.empty()) {
        return fallback_;
    }
    throw ProviderUnavailable(fmt::format("no stub address for {}", format_coordinates(at)));
}

HttpGeocodingClient::HttpGeocodingClient(std::string url, std::chrono::milliseconds deadline)
    : url_(std::move(url)), deadline_(deadline) {}

std::string HttpGeocodingClient::lookup(const Coordinates& at) {
    const auto sep = url_.find('?') == std::string::npos ? '?' : '&';
    const auto url = fmt::format("{}{}lat={:.5f}&lon={:.5f}", url_, sep, at.lat, at.lon);
    const auto res = net::http_get(url, deadline_);
    if (!res.ok()) {
        throw ProviderUnavailable(
            fmt::format("geocoder answered {} {}", res.status, res.error.empty() ? res.body : res.error));
    }
    auto text = res.body;
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ')) {
        text.pop_back();
    }
    if (text.empty()) {
        throw ProviderUnavailable("geocoder returned an empty address");
    }
    return text;
}

Address Geocoder::reverse_geocode(const GeoFix& fix) {
    if (!fix.valid()) {
        throw std::invalid_argument("reverse_geocode needs a valid fix");
    }
    const auto key = cache_key(*fix.position);
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) {
            return it->second;
        }
    }
    // The lookup runs unlocked so a slow provider does not serialise callers.
    Address address{client_->lookup(*fix.position), *fix.position, client_->provider()};
    if (address.display.empty()) {
        throw ProviderUnavailable("geocoder returned an empty address");
    }
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(address)).first->second;
}

std::size_t Geocoder::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

}  // namespace safewatch::gps
