#pragma once

#include "safewatch/gateway/clock.hpp"
#include "safewatch/gateway/config.hpp"
#include "safewatch/gateway/core.hpp"
#include "safewatch/gateway/dispatch.hpp"
#include "safewatch/gateway/record_log.hpp"
#include "safewatch/geocode.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace safewatch::gateway {

struct ServiceDeps {
    std::shared_ptr<Clock> clock;
    std::shared_ptr<gps::Geocoder> geocoder;  // may be null
    Channels channels;
};

/// Builds clock, geocoder and senders from the config sections.
ServiceDeps deps_from_config(const GatewayConfig& config);

/// Single worker thread draining a FIFO of jobs.
class WorkQueue {
public:
    WorkQueue();
    ~WorkQueue();
    void push(std::function<void()> job);
    /// Blocks until the queue is empty and no job is running.
    void drain();
    void stop();

private:
    void run();

    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable idle_cv_;
    std::deque<std::function<void()>> jobs_;
    bool busy_ = false;
    bool stopping_ = false;
    std::thread thread_;
};

class GatewayService {
public:
    GatewayService(GatewayConfig config, ServiceDeps deps);
    ~GatewayService();

    GatewayService(const GatewayService&) = delete;
    GatewayService& operator=(const GatewayService&) = delete;

    /// Opens the data directory, replays the log and starts listening.
    /// Port 0 in the config picks a free port.
    void start();
    void stop();

    int device_port() const { return device_port_; }
    int api_port() const { return api_port_; }
    const ReplayReport& replay_report() const { return replay_report_; }

    // The HTTP API calls these; tests may call them directly.
    Json state(const std::string& device);
    /// Core state only, without connection status.
    Json snapshot(const std::string& device);
    Json records(const std::string& device, std::uint64_t since_device_seq);
    /// Throws UnknownCase.
    Json ack(const std::string& device, std::uint64_t case_id);
    /// Throws escalation::ValidationError.
    Json register_profile(const Json& body);
    std::vector<Record> log_records() const;

    /// Waits for queued dispatch and geocode work to finish.
    void drain();

private:
    struct Session {
        int fd = -1;
        std::uint64_t conn_id = 0;
        std::mutex write_mu;
    };
    struct LinkStats {
        std::uint64_t frames = 0;
        std::uint64_t frame_errors = 0;
    };

    void submit(const std::function<Effects(std::int64_t)>& step);
    void handle(Effects&& fx);
    void send_to_device(const std::string& device, const wire::Frame& frame);
    void queue_dispatch(const DispatchJob& job);
    void queue_geocode(const GeocodeJob& job);
    void write_profiles();

    void accept_loop();
    void serve_connection(int fd, std::uint64_t conn_id);
    void tick_loop();
    void setup_http();

    GatewayConfig config_;
    ServiceDeps deps_;
    std::unique_ptr<RecordLog> log_;
    GatewayCore core_;
    ReplayReport replay_report_;
    std::mutex core_mu_;

    std::mutex sessions_mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, LinkStats> stats_;
    std::vector<std::thread> conn_threads_;
    std::vector<int> conn_fds_;
    std::atomic<std::uint64_t> next_conn_{1};

    std::unique_ptr<httplib::Server> http_;
    std::thread http_thread_;
    std::thread accept_thread_;
    std::thread tick_thread_;
    int listen_fd_ = -1;
    int device_port_ = 0;
    int api_port_ = 0;
    std::atomic<bool> running_{false};
    std::mutex tick_mu_;
    std::condition_variable tick_cv_;

    std::unique_ptr<WorkQueue> dispatch_q_;
    std::unique_ptr<WorkQueue> geocode_q_;
};

}  // namespace safewatch::gateway
