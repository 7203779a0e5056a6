#include "safewatch/http_client.hpp"

#include <httplib.h>

namespace safewatch::net {

namespace {

httplib::Client make_client(const Url& url, std::chrono::milliseconds timeout) {
    httplib::Client client(url.origin);
    const auto sec = static_cast<time_t>(timeout.count() / 1000);
    const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    return client;
}

HttpResult from(const httplib::Result& res) {
    HttpResult out;
    if (!res) {
        out.error = httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

}  // namespace

std::optional<Url> parse_url(const std::string& url) {
    constexpr std::string_view scheme = "http://";
    if (url.rfind(scheme, 0) != 0) {
        return std::nullopt;
    }
    const auto slash = url.find('/', scheme.size());
    Url out;
    if (slash == std::string::npos) {
        out.origin = url;
        out.path = "/";
    } else {
        out.origin = url.substr(0, slash);
        out.path = url.substr(slash);
    }
    if (out.origin.size() == scheme.size()) {
        return std::nullopt;
    }
    return out;
}

HttpResult http_get(const std::string& url, std::chrono::milliseconds timeout) {
    const auto parsed = parse_url(url);
    if (!parsed) {
        return {0, {}, "unsupported url: " + url};
    }
    auto client = make_client(*parsed, timeout);
    return from(client.Get(parsed->path));
}

HttpResult http_post_json(const std::string& url, const std::string& json_body,
                          std::chrono::milliseconds timeout) {
    const auto parsed = parse_url(url);
    if (!parsed) {
        return {0, {}, "unsupported url: " + url};
    }
    auto client = make_client(*parsed, timeout);
    return from(client.Post(parsed->path, json_body, "application/json"));
}

}  // namespace safewatch::net
