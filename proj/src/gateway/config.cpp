#include "safewatch/gateway/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <stdexcept>

namespace safewatch::gateway {

namespace {

void check_keys(const Json& j, const std::string& section, std::set<std::string> allowed) {
    if (!j.is_object()) {
        throw std::invalid_argument(fmt::format("config: '{}' must be an object", section));
    }
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) {
            throw std::invalid_argument(fmt::format("config: unknown key '{}{}'", section.empty() ? "" : section + ".", key));
        }
    }
}

template <class T>
void read(const Json& j, const char* key, T& into, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw std::invalid_argument(fmt::format("config: '{}.{}' has the wrong type", section, key));
    }
}

}  // namespace

GatewayConfig config_from_json(const Json& j) {
    GatewayConfig c;
    check_keys(j, "", {"gateway", "vitals", "escalation", "email", "sms", "geocoder", "profiles"});

    if (j.contains("gateway")) {
        const auto& g = j["gateway"];
        check_keys(g, "gateway",
                   {"device_host", "device_port", "api_host", "api_port", "data_dir", "clock_speed", "tick_ms"});
        read(g, "device_host", c.device_host, "gateway");
        read(g, "device_port", c.device_port, "gateway");
        read(g, "api_host", c.api_host, "gateway");
        read(g, "api_port", c.api_port, "gateway");
        read(g, "data_dir", c.data_dir, "gateway");
        read(g, "clock_speed", c.clock_speed, "gateway");
        read(g, "tick_ms", c.tick_ms, "gateway");
    }
    if (j.contains("vitals")) {
        const auto& v = j["vitals"];
        check_keys(v, "vitals", {"bands"});
        if (v.contains("bands")) {
            c.default_bands = bands_from_json(v["bands"]);
            vitals::PregnancyProfile probe;
            probe.bands = c.default_bands;
            probe.validate();
        }
    }
    if (j.contains("escalation")) {
        const auto& e = j["escalation"];
        check_keys(e, "escalation", {"double_press_window_ms", "ack_window_ms", "cooldown_ms", "retry_delay_ms"});
        read(e, "double_press_window_ms", c.timing.double_press_window_ms, "escalation");
        read(e, "ack_window_ms", c.timing.ack_window_ms, "escalation");
        read(e, "cooldown_ms", c.timing.cooldown_ms, "escalation");
        read(e, "retry_delay_ms", c.timing.retry_delay_ms, "escalation");
    }
    if (j.contains("email")) {
        const auto& e = j["email"];
        check_keys(e, "email", {"url", "service_id", "template_id", "user_id", "timeout_ms"});
        read(e, "url", c.email.url, "email");
        read(e, "service_id", c.email.service_id, "email");
        read(e, "template_id", c.email.template_id, "email");
        read(e, "user_id", c.email.user_id, "email");
        read(e, "timeout_ms", c.email.timeout_ms, "email");
    }
    if (j.contains("sms")) {
        const auto& s = j["sms"];
        check_keys(s, "sms", {"mode", "path", "url", "timeout_ms"});
        read(s, "mode", c.sms.mode, "sms");
        read(s, "path", c.sms.path, "sms");
        read(s, "url", c.sms.url, "sms");
        read(s, "timeout_ms", c.sms.timeout_ms, "sms");
        if (c.sms.mode != "file" && c.sms.mode != "webhook") {
            throw std::invalid_argument("config: sms.mode must be 'file' or 'webhook'");
        }
    }
    if (j.contains("geocoder")) {
        const auto& g = j["geocoder"];
        check_keys(g, "geocoder", {"url", "stub_address", "timeout_ms"});
        read(g, "url", c.geocoder.url, "geocoder");
        read(g, "stub_address", c.geocoder.stub_address, "geocoder");
        read(g, "timeout_ms", c.geocoder.timeout_ms, "geocoder");
    }
    if (j.contains("profiles")) {
        if (!j["profiles"].is_array()) {
            throw std::invalid_argument("config: 'profiles' must be an array");
        }
        for (const auto& p : j["profiles"]) c.profiles.push_back(profile_from_json(p, c.default_bands));
    }

    if (c.clock_speed <= 0) throw std::invalid_argument("config: gateway.clock_speed must be positive");
    if (c.tick_ms <= 0) throw std::invalid_argument("config: gateway.tick_ms must be positive");
    if (c.timing.ack_window_ms <= 0 || c.timing.cooldown_ms < 0 || c.timing.retry_delay_ms < 0 ||
        c.timing.double_press_window_ms <= 0) {
        throw std::invalid_argument("config: escalation windows must be positive");
    }
    return c;
}

GatewayConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open config file '{}'", path));
    }
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument(fmt::format("config '{}' is not valid JSON: {}", path, e.what()));
    }
    return config_from_json(j);
}

Json to_json(const GatewayConfig& c) {
    Json bands = Json::array();
    for (const auto& b : c.default_bands) bands.push_back(to_json(b));
    Json profiles = Json::array();
    for (const auto& p : c.profiles) profiles.push_back(to_json(p));
    return {{"gateway",
             {{"device_host", c.device_host},
              {"device_port", c.device_port},
              {"api_host", c.api_host},
              {"api_port", c.api_port},
              {"data_dir", c.data_dir},
              {"clock_speed", c.clock_speed},
              {"tick_ms", c.tick_ms}}},
            {"vitals", {{"bands", bands}}},
            {"escalation",
             {{"double_press_window_ms", c.timing.double_press_window_ms},
              {"ack_window_ms", c.timing.ack_window_ms},
              {"cooldown_ms", c.timing.cooldown_ms},
              {"retry_delay_ms", c.timing.retry_delay_ms}}},
            {"email",
             {{"url", c.email.url},
              {"service_id", c.email.service_id},
              {"template_id", c.email.template_id},
              {"user_id", c.email.user_id},
              {"timeout_ms", c.email.timeout_ms}}},
            {"sms", {{"mode", c.sms.mode}, {"path", c.sms.path}, {"url", c.sms.url}, {"timeout_ms", c.sms.timeout_ms}}},
            {"geocoder",
             {{"url", c.geocoder.url}, {"stub_address", c.geocoder.stub_address}, {"timeout_ms", c.geocoder.timeout_ms}}},
            {"profiles", profiles}};
}

}  // namespace safewatch::gateway
