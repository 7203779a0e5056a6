#include "safewatch/gateway/service.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace safewatch::gateway {

namespace {

constexpr std::size_t kMaxDeviceId = 64;

bool valid_device_id(std::string_view id) {
    if (id.empty() || id.size() > kMaxDeviceId) return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        if (!ok) return false;
    }
    return true;
}

void reply_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& kind, const std::string& message,
                 const std::string& field = {}) {
    Json body{{"error", kind}, {"message", message}};
    if (!field.empty()) body["field"] = field;
    reply_json(res, status, body);
}

std::uint64_t parse_u64(const std::string& text, std::uint64_t fallback) {
    if (text.empty()) return fallback;
    try {
        std::size_t used = 0;
        const auto v = std::stoull(text, &used);
        return used == text.size() ? v : fallback;
    } catch (const std::exception&) {
        return fallback;
    }
}

}  // namespace

ServiceDeps deps_from_config(const GatewayConfig& config) {
    ServiceDeps deps;
    if (config.clock_speed == 1.0) {
        deps.clock = std::make_shared<SystemClock>();
    } else {
        deps.clock = std::make_shared<ScaledClock>(config.clock_speed);
    }
    if (!config.geocoder.stub_address.empty()) {
        auto stub = std::make_shared<gps::StubGeocodingClient>();
        stub->set_fallback(config.geocoder.stub_address);
        deps.geocoder = std::make_shared<gps::Geocoder>(stub);
    } else if (!config.geocoder.url.empty()) {
        deps.geocoder = std::make_shared<gps::Geocoder>(std::make_shared<gps::HttpGeocodingClient>(
            config.geocoder.url, std::chrono::milliseconds(config.geocoder.timeout_ms)));
    }
    if (!config.email.url.empty()) {
        deps.channels.email = std::make_shared<HttpEmailSender>(config.email);
    }
    if (config.sms.mode == "webhook") {
        if (!config.sms.url.empty()) {
            deps.channels.sms = std::make_shared<WebhookSmsSender>(config.sms.url, config.sms.timeout_ms);
        }
    } else if (!config.sms.path.empty()) {
        fs::path p = config.sms.path;
        if (p.is_relative()) p = fs::path(config.data_dir) / p;
        deps.channels.sms = std::make_shared<FileSmsSender>(p.string());
    }
    return deps;
}

// ---------------------------------------------------------------------------

WorkQueue::WorkQueue() : thread_([this] { run(); }) {}

WorkQueue::~WorkQueue() { stop(); }

void WorkQueue::push(std::function<void()> job) {
    {
        std::lock_guard lock(mu_);
        jobs_.push_back(std::move(job));
    }
    cv_.notify_one();
}

void WorkQueue::drain() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return (jobs_.empty() && !busy_) || stopping_; });
}

void WorkQueue::stop() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    idle_cv_.notify_all();
    if (thread_.joinable()) thread_.join();
}

void WorkQueue::run() {
    std::unique_lock lock(mu_);
    while (true) {
        cv_.wait(lock, [&] { return stopping_ || !jobs_.empty(); });
        if (stopping_) return;
        auto job = std::move(jobs_.front());
        jobs_.pop_front();
        busy_ = true;
        lock.unlock();
        try {
            job();
        } catch (const std::exception& e) {
            spdlog::error("background job failed: {}", e.what());
        }
        lock.lock();
        busy_ = false;
        if (jobs_.empty()) idle_cv_.notify_all();
    }
}

// ---------------------------------------------------------------------------

GatewayService::GatewayService(GatewayConfig config, ServiceDeps deps)
    : config_(std::move(config)), deps_(std::move(deps)),
      core_(CoreSettings{config_.timing, config_.default_bands}) {
    if (!deps_.clock) deps_.clock = std::make_shared<SystemClock>();
}

GatewayService::~GatewayService() { stop(); }

void GatewayService::start() {
    if (running_) return;
    fs::create_directories(config_.data_dir);
    const auto log_path = (fs::path(config_.data_dir) / "records.jsonl").string();
    log_ = std::make_unique<RecordLog>(log_path);
    dispatch_q_ = std::make_unique<WorkQueue>();
    geocode_q_ = std::make_unique<WorkQueue>();

    const auto existing = log_->all();
    if (!existing.empty()) {
        replay_report_ = core_.replay(existing);
        spdlog::info("replayed {} records ({} inputs) from {}", replay_report_.records, replay_report_.inputs,
                     log_path);
        if (replay_report_.mismatches) {
            spdlog::error("replay diverged from the log in {} records; first: {}", replay_report_.mismatches,
                          replay_report_.first_mismatch);
        }
        for (const auto& job : core_.pending_dispatches()) {
            spdlog::warn("case {} was mid-dispatch at shutdown, sending again", job.alert.id);
            queue_dispatch(job);
        }
    } else {
        std::vector<Profile> seed = config_.profiles;
        const auto compacted = fs::path(config_.data_dir) / "profiles.json";
        if (fs::exists(compacted)) {
            std::ifstream in(compacted);
            const auto j = Json::parse(in);
            seed.clear();
            for (const auto& p : j) seed.push_back(profile_from_json(p, config_.default_bands));
        }
        for (const auto& p : seed) {
            submit([&](std::int64_t now) { return core_.apply(now, ProfileIn{p}); });
        }
    }

    // Device link.
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(config_.device_port));
    if (::inet_pton(AF_INET, config_.device_host.c_str(), &addr.sin_addr) != 1) {
        throw std::runtime_error(fmt::format("bad device_host '{}'", config_.device_host));
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw std::runtime_error(
            fmt::format("cannot listen on {}:{}: {}", config_.device_host, config_.device_port, std::strerror(errno)));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    device_port_ = ntohs(addr.sin_port);

    // HTTP API.
    http_ = std::make_unique<httplib::Server>();
    setup_http();
    if (config_.api_port == 0) {
        api_port_ = http_->bind_to_any_port(config_.api_host);
    } else if (http_->bind_to_port(config_.api_host, config_.api_port)) {
        api_port_ = config_.api_port;
    } else {
        api_port_ = -1;
    }
    if (api_port_ <= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw std::runtime_error(fmt::format("cannot listen on {}:{}", config_.api_host, config_.api_port));
    }

    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    http_thread_ = std::thread([this] { http_->listen_after_bind(); });
    tick_thread_ = std::thread([this] { tick_loop(); });
    http_->wait_until_ready();
    spdlog::info("gateway up: devices on {}:{}, api on {}:{}", config_.device_host, device_port_, config_.api_host,
                 api_port_);
}

void GatewayService::stop() {
    if (!running_.exchange(false)) return;
    tick_cv_.notify_all();
    if (log_) log_->close();
    if (http_) http_->stop();
    if (http_thread_.joinable()) http_thread_.join();
    if (accept_thread_.joinable()) accept_thread_.join();
    if (tick_thread_.joinable()) tick_thread_.join();
    {
        std::lock_guard lock(sessions_mu_);
        for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : conn_threads_) {
        if (t.joinable()) t.join();
    }
    conn_threads_.clear();
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (dispatch_q_) dispatch_q_->stop();
    if (geocode_q_) geocode_q_->stop();
    spdlog::info("gateway stopped");
}

void GatewayService::drain() {
    // A finished dispatch never queues more work, but a geocode may race with
    // a dispatch, so go round until both are quiet.
    for (int i = 0; i < 2; ++i) {
        if (dispatch_q_) dispatch_q_->drain();
        if (geocode_q_) geocode_q_->drain();
    }
}

void GatewayService::submit(const std::function<Effects(std::int64_t)>& step) {
    std::lock_guard lock(core_mu_);
    const auto now = deps_.clock->now_ms();
    handle(core_.tick(now));
    handle(step(now));
}

void GatewayService::handle(Effects&& fx) {
    bool profile_changed = false;
    for (auto& r : fx.records) {
        profile_changed = profile_changed || r.kind == "profile";
        log_->append(std::move(r.device), std::move(r.kind), r.t_ms, std::move(r.payload));
    }
    for (const auto& s : fx.sends) send_to_device(s.device, s.frame);
    for (const auto& d : fx.dispatches) queue_dispatch(d);
    for (const auto& g : fx.geocodes) queue_geocode(g);
    if (profile_changed) write_profiles();
}

void GatewayService::write_profiles() {
    Json all = Json::array();
    for (const auto& p : core_.profiles()) all.push_back(to_json(p));
    const auto path = fs::path(config_.data_dir) / "profiles.json";
    const auto tmp = fs::path(config_.data_dir) / "profiles.json.tmp";
    {
        std::ofstream out(tmp);
        out << all.dump(2) << '\n';
    }
    fs::rename(tmp, path);
}

void GatewayService::send_to_device(const std::string& device, const wire::Frame& frame) {
    std::shared_ptr<Session> session;
    {
        std::lock_guard lock(sessions_mu_);
        if (auto it = sessions_.find(device); it != sessions_.end()) session = it->second;
    }
    if (!session) {
        spdlog::warn("device {} not connected, dropping {} frame", device, wire::frame_name(frame));
        return;
    }
    const auto bytes = wire::encode(frame);
    std::lock_guard lock(session->write_mu);
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const auto n = ::send(session->fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) {
            spdlog::warn("write to device {} failed", device);
            return;
        }
        sent += static_cast<std::size_t>(n);
    }
}

void GatewayService::queue_dispatch(const DispatchJob& job) {
    dispatch_q_->push([this, job] {
        auto out = run_dispatch(job.alert, job.contacts, job.wearer, deps_.geocoder.get(), deps_.channels,
                                *deps_.clock, config_.timing.retry_delay_ms);
        std::size_t sent = 0;
        for (const auto& o : out.outcomes) sent += o.sent() ? 1 : 0;
        spdlog::info("case {} on {}: {} of {} messages delivered", job.alert.id, job.device, sent, out.outcomes.size());
        submit([&](std::int64_t now) {
            return core_.apply(now, DispatchDone{job.device, job.alert.id, out.address, out.outcomes});
        });
    });
}

void GatewayService::queue_geocode(const GeocodeJob& job) {
    if (!deps_.geocoder) return;
    geocode_q_->push([this, job] {
        try {
            auto address = deps_.geocoder->reverse_geocode(job.fix);
            submit([&](std::int64_t now) {
                return core_.apply(now, AddressResolved{job.device, *job.fix.position, address.display});
            });
        } catch (const std::exception& e) {
            spdlog::debug("geocoding {} failed: {}", job.device, e.what());
        }
    });
}

Json GatewayService::snapshot(const std::string& device) {
    std::lock_guard lock(core_mu_);
    return core_.snapshot(device);
}

Json GatewayService::state(const std::string& device) {
    auto j = snapshot(device);
    std::lock_guard lock(sessions_mu_);
    j["connected"] = sessions_.count(device) > 0;
    const auto it = stats_.find(device);
    j["link"] = {{"frames", it == stats_.end() ? 0 : it->second.frames},
                 {"frame_errors", it == stats_.end() ? 0 : it->second.frame_errors}};
    return j;
}

Json GatewayService::records(const std::string& device, std::uint64_t since_device_seq) {
    Json out = Json::array();
    for (const auto& r : log_->device_since(device, since_device_seq)) out.push_back(to_json(r));
    return {{"device", device}, {"records", out}};
}

Json GatewayService::ack(const std::string& device, std::uint64_t case_id) {
    std::optional<escalation::AlertCase> c;
    submit([&](std::int64_t now) {
        auto fx = core_.apply(now, AckIn{device, case_id});
        c = core_.find_case(device, case_id);
        return fx;
    });
    return to_json(*c);
}

Json GatewayService::register_profile(const Json& body) {
    auto profile = profile_from_json(body, config_.default_bands);
    submit([&](std::int64_t now) { return core_.apply(now, ProfileIn{profile}); });
    return to_json(profile);
}

std::vector<Record> GatewayService::log_records() const { return log_->all(); }

// ---------------------------------------------------------------------------
// Device link

void GatewayService::accept_loop() {
    while (running_) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        const auto conn_id = next_conn_++;
        std::lock_guard lock(sessions_mu_);
        conn_fds_.push_back(fd);
        conn_threads_.emplace_back([this, fd, conn_id] { serve_connection(fd, conn_id); });
    }
}

void GatewayService::serve_connection(int fd, std::uint64_t conn_id) {
    std::string device;
    std::string preamble;
    auto session = std::make_shared<Session>();
    session->fd = fd;
    session->conn_id = conn_id;
    wire::Decoder decoder;

    auto attach = [&](std::string id) {
        device = std::move(id);
        std::lock_guard lock(sessions_mu_);
        if (auto old = sessions_.find(device); old != sessions_.end()) {
            spdlog::info("device {} reconnected, dropping the older link", device);
            ::shutdown(old->second->fd, SHUT_RDWR);
        }
        sessions_[device] = session;
        spdlog::info("device {} connected", device);
    };

    char buf[4096];
    while (running_) {
        pollfd p{fd, POLLIN, 0};
        const int ready = ::poll(&p, 1, 100);
        if (ready == 0) continue;
        if (ready < 0) break;
        const auto n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) break;
        std::string_view chunk(buf, static_cast<std::size_t>(n));

        std::string held;
        if (device.empty()) {
            // The first line may name the device: "ID,<device>".
            preamble.append(chunk);
            const auto nl = preamble.find('\n');
            if (nl == std::string::npos && preamble.size() <= kMaxDeviceId + 4) continue;
            std::string_view first(preamble.data(), nl == std::string::npos ? preamble.size() : nl);
            if (!first.empty() && first.back() == '\r') first.remove_suffix(1);
            if (nl != std::string::npos && first.substr(0, 3) == "ID,") {
                const auto id = first.substr(3);
                if (!valid_device_id(id)) {
                    spdlog::warn("rejecting connection with bad device id '{}'", id);
                    break;
                }
                attach(std::string(id));
                held = preamble.substr(nl + 1);
            } else {
                attach(kDefaultDevice);
                held = preamble;
            }
            preamble.clear();
            chunk = held;
        }

        for (auto& item : decoder.feed(chunk)) {
            if (auto* frame = std::get_if<wire::Frame>(&item)) {
                {
                    std::lock_guard lock(sessions_mu_);
                    ++stats_[device].frames;
                }
                submit([&](std::int64_t now) { return core_.apply(now, FrameIn{device, *frame}); });
            } else {
                const auto& err = std::get<wire::FrameError>(item);
                {
                    std::lock_guard lock(sessions_mu_);
                    ++stats_[device].frame_errors;
                }
                spdlog::warn("device {}: bad frame ({}): '{}'", device, err.reason, err.line);
            }
        }
    }

    std::lock_guard lock(sessions_mu_);
    if (!device.empty()) {
        if (auto it = sessions_.find(device); it != sessions_.end() && it->second->conn_id == conn_id) {
            sessions_.erase(it);
            spdlog::info("device {} disconnected", device);
        }
    }
    std::erase(conn_fds_, fd);
    ::close(fd);
}

void GatewayService::tick_loop() {
    std::unique_lock lock(tick_mu_);
    while (running_) {
        tick_cv_.wait_for(lock, std::chrono::milliseconds(config_.tick_ms), [&] { return !running_; });
        if (!running_) break;
        submit([&](std::int64_t now) { return core_.tick(now); });
    }
}

// ---------------------------------------------------------------------------
// HTTP API

void GatewayService::setup_http() {
    auto& s = *http_;
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type, Last-Event-ID"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    s.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Get(R"(/v1/devices/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
        reply_json(res, 200, state(req.matches[1]));
    });

    s.Get(R"(/v1/devices/([^/]+)/records)", [this](const httplib::Request& req, httplib::Response& res) {
        reply_json(res, 200, records(req.matches[1], parse_u64(req.get_param_value("since"), 0)));
    });

    s.Post(R"(/v1/devices/([^/]+)/ack)", [this](const httplib::Request& req, httplib::Response& res) {
        Json body;
        try {
            body = Json::parse(req.body);
        } catch (const Json::exception&) {
            return reply_error(res, 400, "BadRequest", "body is not JSON");
        }
        if (!body.is_object() || !body.contains("case_id") || !body["case_id"].is_number_unsigned()) {
            return reply_error(res, 400, "BadRequest", "body needs a numeric case_id", "case_id");
        }
        try {
            reply_json(res, 200, ack(req.matches[1], body["case_id"].get<std::uint64_t>()));
        } catch (const UnknownCase& e) {
            reply_error(res, 404, "UnknownCase", e.what());
        }
    });

    s.Post("/v1/profile", [this](const httplib::Request& req, httplib::Response& res) {
        Json body;
        try {
            body = Json::parse(req.body);
        } catch (const Json::exception&) {
            return reply_error(res, 400, "BadRequest", "body is not JSON");
        }
        try {
            reply_json(res, 200, register_profile(body));
        } catch (const escalation::ValidationError& e) {
            reply_error(res, 400, "ValidationError", e.what(), e.field());
        }
    });

    s.Get("/v1/events", [this](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t cursor = parse_u64(req.get_param_value("since"), 0);
        if (req.has_header("Last-Event-ID")) {
            cursor = parse_u64(req.get_header_value("Last-Event-ID"), cursor);
        }
        const std::string device = req.get_param_value("device");
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [this, cursor, device](std::size_t, httplib::DataSink& sink) mutable {
                if (!running_) return false;
                auto batch = log_->since(cursor);
                if (batch.empty()) {
                    if (!log_->wait_beyond(cursor, std::chrono::steady_clock::now() + std::chrono::seconds(1))) {
                        static const std::string ping = ": keepalive\n\n";
                        return running_ && sink.write(ping.data(), ping.size());
                    }
                    return running_.load();
                }
                for (const auto& r : batch) {
                    cursor = r.seq;
                    if (!device.empty() && r.device != device) continue;
                    const auto msg = fmt::format("id: {}\nevent: {}\ndata: {}\n\n", r.seq, r.kind, to_json(r).dump());
                    if (!sink.write(msg.data(), msg.size())) return false;
                }
                return true;
            });
    });
}

}  // namespace safewatch::gateway
