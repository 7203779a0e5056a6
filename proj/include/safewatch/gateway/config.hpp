#pragma once

#include "safewatch/escalation.hpp"
#include "safewatch/gateway/codec.hpp"
#include "safewatch/vitals.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace safewatch::gateway {

struct EmailConfig {
    std::string url;  // empty disables email
    std::string service_id = "safewatch";
    std::string template_id = "alert";
    std::string user_id;
    std::int64_t timeout_ms = 5000;
};

struct SmsConfig {
    std::string mode = "file";  // "file" or "webhook"
    std::string path = "sms_outbox.txt";
    std::string url;
    std::int64_t timeout_ms = 5000;
};

struct GeocoderConfig {
    std::string url;             // empty: no geocoding, alerts carry coordinates
    std::string stub_address;    // when set, every lookup answers this text
    std::int64_t timeout_ms = 2000;
};

struct GatewayConfig {
    std::string device_host = "127.0.0.1";
    int device_port = 7470;
    std::string api_host = "127.0.0.1";
    int api_port = 8080;
    std::string data_dir = "safewatch-data";
    double clock_speed = 1.0;
    std::int64_t tick_ms = 50;  // wall milliseconds between timer checks

    std::vector<vitals::RangeBand> default_bands{vitals::RangeBand{}};
    escalation::Timing timing;
    EmailConfig email;
    SmsConfig sms;
    GeocoderConfig geocoder;
    std::vector<Profile> profiles;  // seeded when the record log is empty
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
GatewayConfig config_from_json(const Json& j);
GatewayConfig load_config(const std::string& path);
Json to_json(const GatewayConfig& c);

}  // namespace safewatch::gateway
