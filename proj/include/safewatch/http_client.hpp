#pragma once

#include <chrono>
#include <optional>
#include <string>

namespace safewatch::net {

struct HttpResult {
    int status = 0;  // 0 when the request never completed
    std::string body;
    std::string error;

    bool ok() const { return status >= 200 && status < 300; }
};

/// Splits "http://host:port/path" into origin and path. Only plain http.
struct Url {
    std::string origin;
    std::string path;
};

std::optional<Url> parse_url(const std::string& url);

HttpResult http_get(const std::string& url, std::chrono::milliseconds timeout);
HttpResult http_post_json(const std::string& url, const std::string& json_body,
                          std::chrono::milliseconds timeout);

}  // namespace safewatch::net
