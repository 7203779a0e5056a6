#include "safewatch/sim/simulator.hpp"

#include <fmt/format.h>

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <ostream>
#include <queue>
#include <stdexcept>

namespace safewatch::sim {

Reply reply_from(const std::string& text) {
    if (text == "none") return Reply::None;
    if (text == "ok") return Reply::Ok;
    throw std::invalid_argument(fmt::format("reply must be none or ok, got '{}'", text));
}

std::string to_string(Reply r) { return r == Reply::Ok ? "ok" : "none"; }

int RunReport::sent_count(const std::string& frame_name) const {
    const auto it = frames_sent.find(frame_name);
    return it == frames_sent.end() ? 0 : it->second;
}

void print_report(std::ostream& out, const RunReport& r) {
    int total = 0;
    for (const auto& [name, n] : r.frames_sent) total += n;
    out << "scenario=" << r.scenario << '\n'
        << "seed=" << r.seed << '\n'
        << "reply=" << to_string(r.reply) << '\n'
        << "rows=" << r.rows << '\n'
        << "frames_sent=" << total << '\n';
    for (const auto& [name, n] : r.frames_sent) out << "frames_sent." << name << '=' << n << '\n';
    out << "frames_received=" << r.frames_received << '\n'
        << "receive_errors=" << r.receive_errors << '\n'
        << "prompts=" << r.prompts.size() << '\n';
    for (std::size_t i = 0; i < r.prompts.size(); ++i) {
        const auto& p = r.prompts[i];
        out << fmt::format("prompt.{}={} {} {}\n", i, p.t_ms, p.local ? "local" : "gateway", p.text);
    }
    out << "replies=" << r.replies.size() << '\n';
    for (std::size_t i = 0; i < r.replies.size(); ++i) out << "reply." << i << '=' << r.replies[i] << '\n';
    out << "sim_end_ms=" << r.sim_end_ms << '\n' << "wall_ms=" << r.wall_ms << '\n';
    if (r.error) out << "error=" << *r.error << '\n';
}

namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

// Merges trace rows with scheduled button-A replies and feeds the device.
class Session {
public:
    using Sender = std::function<bool(const wire::Frame&)>;

    Session(const Trace& trace, Reply reply, const DeviceConfig& device, std::int64_t reply_delay_ms, RunReport& report)
        : trace_(trace), reply_(reply), delay_(reply_delay_ms), device_(device), report_(report) {
        report_.scenario = trace.header.scenario;
        report_.seed = trace.header.seed;
        report_.reply = reply;
        report_.rows = trace.rows.size();
    }

    void set_sender(Sender s) { send_ = std::move(s); }

    std::int64_t next_time() const {
        const auto row = next_row_ < trace_.rows.size() ? row_time(trace_.rows[next_row_]) : kNever;
        const auto reply = replies_.empty() ? kNever : replies_.top();
        return std::min(row, reply);
    }

    std::int64_t now() const { return now_; }

    // Processes the earliest pending event. Rows win ties with replies.
    void advance() {
        const auto row = next_row_ < trace_.rows.size() ? row_time(trace_.rows[next_row_]) : kNever;
        if (!replies_.empty() && replies_.top() < row) {
            const auto t = replies_.top();
            replies_.pop();
            now_ = std::max(now_, t);
            report_.replies.push_back(t);
            handle(device_.step(ButtonRow{now_, 'A'}));
            return;
        }
        now_ = std::max(now_, row);
        handle(device_.step(trace_.rows[next_row_++]));
    }

    // Returns true when the prompt scheduled a reply.
    bool prompt(std::int64_t t, const std::string& text, bool local) {
        report_.prompts.push_back({t, text, local});
        if (reply_ != Reply::Ok) return false;
        replies_.push(t + delay_);
        return true;
    }

    bool failed() const { return report_.error.has_value(); }

private:
    void handle(const DeviceOutput& out) {
        report_.fall_events.insert(report_.fall_events.end(), out.fall_events.begin(), out.fall_events.end());
        for (const auto& text : out.local_prompts) prompt(now_, text, true);
        for (const auto& f : out.frames) {
            if (failed()) return;
            if (send_ && !send_(f)) return;
            report_.sent.push_back(f);
            ++report_.frames_sent[std::string(wire::frame_name(f))];
        }
    }

    const Trace& trace_;
    Reply reply_;
    std::int64_t delay_;
    Device device_;
    RunReport& report_;
    Sender send_;
    std::size_t next_row_ = 0;
    std::int64_t now_ = 0;
    std::priority_queue<std::int64_t, std::vector<std::int64_t>, std::greater<>> replies_;
};

class Socket {
public:
    Socket(const std::string& host, int port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* found = nullptr;
        const int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &found);
        if (rc != 0) throw std::runtime_error(fmt::format("resolve {}: {}", host, ::gai_strerror(rc)));
        std::string last = "no address";
        for (auto* ai = found; ai; ai = ai->ai_next) {
            const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
                fd_ = fd;
                break;
            }
            last = std::strerror(errno);
            ::close(fd);
        }
        ::freeaddrinfo(found);
        if (fd_ < 0) throw std::runtime_error(fmt::format("connect {}:{}: {}", host, port, last));
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    ~Socket() {
        if (fd_ >= 0) ::close(fd_);
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    bool send_all(std::string_view data) {
        while (!data.empty()) {
            const auto n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) return false;
            data.remove_prefix(static_cast<std::size_t>(n));
        }
        return true;
    }

    int fd() const { return fd_; }

private:
    int fd_ = -1;
};

}  // namespace

RunReport simulate(const Trace& trace, Reply reply, const DeviceConfig& device, std::int64_t reply_delay_ms) {
    RunReport report;
    Session session(trace, reply, device, reply_delay_ms, report);
    while (session.next_time() != kNever) session.advance();
    report.sim_end_ms = session.now();
    return report;
}

RunReport run(const Trace& trace, const std::string& host, int port, const RunOptions& options) {
    using Wall = std::chrono::steady_clock;
    RunReport report;
    const Reply reply = options.reply.value_or(reply_from(trace.header.reply));
    Session session(trace, reply, options.device, options.reply_delay_ms, report);
    const auto started = Wall::now();
    auto finish = [&] {
        report.sim_end_ms = session.now();
        report.wall_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(Wall::now() - started).count();
        return report;
    };

    std::optional<Socket> sock;
    try {
        sock.emplace(host, port);
    } catch (const std::exception& e) {
        report.error = e.what();
        return finish();
    }
    auto lost = [&](const std::string& why) {
        if (!report.error) report.error = "connection lost: " + why;
    };
    if (!sock->send_all("ID," + options.device_id + "\n")) {
        lost(std::strerror(errno));
        return finish();
    }
    session.set_sender([&](const wire::Frame& f) {
        if (sock->send_all(wire::encode(f))) return true;
        lost(std::strerror(errno));
        return false;
    });

    const bool paced = options.speed > 0.0;
    auto sim_elapsed = [&] {
        const std::chrono::duration<double, std::milli> wall = Wall::now() - started;
        return wall.count() * options.speed;
    };
    wire::Decoder decoder;

    // Waits until trace time `target`, reading whatever the gateway sends.
    // Returns false early when a prompt scheduled a reply before the target.
    auto wait_until = [&](std::int64_t target) {
        for (;;) {
            double remaining_wall = 0.0;
            if (paced) remaining_wall = (static_cast<double>(target) - sim_elapsed()) / options.speed;
            const int timeout = remaining_wall > 0.0 ? static_cast<int>(std::ceil(std::min(remaining_wall, 50.0))) : 0;
            pollfd p{sock->fd(), POLLIN, 0};
            const int rc = ::poll(&p, 1, timeout);
            if (rc < 0 && errno != EINTR) {
                lost(std::strerror(errno));
                return true;
            }
            if (rc > 0 && (p.revents & (POLLIN | POLLHUP | POLLERR))) {
                char buf[512];
                const auto n = ::recv(sock->fd(), buf, sizeof buf, 0);
                if (n <= 0) {
                    lost(n == 0 ? "closed by gateway" : std::strerror(errno));
                    return true;
                }
                bool rescheduled = false;
                const auto at = std::max(session.now(), paced ? static_cast<std::int64_t>(sim_elapsed()) : 0);
                for (const auto& item : decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)))) {
                    if (const auto* f = std::get_if<wire::Frame>(&item)) {
                        ++report.frames_received;
                        if (const auto* d = std::get_if<wire::Display>(f)) {
                            rescheduled = session.prompt(at, d->text, false) || rescheduled;
                        }
                    } else {
                        ++report.receive_errors;
                    }
                }
                if (rescheduled && session.next_time() < target) return false;
                continue;
            }
            if (remaining_wall <= 0.0) return true;
        }
    };

    const std::int64_t end = trace.duration_ms() + std::max<std::int64_t>(options.linger_ms, 0);
    while (!session.failed()) {
        const auto next = session.next_time();
        const auto target = next == kNever ? end : next;
        if (!wait_until(target)) continue;
        if (session.failed()) break;
        if (next == kNever) {
            // A prompt that arrived during the final wait may still need its reply.
            if (session.next_time() == kNever) break;
            continue;
        }
        session.advance();
    }
    return finish();
}

std::optional<double> EvalMetrics::detection_rate() const {
    if (fall_traces == 0) return std::nullopt;
    return static_cast<double>(detected) / fall_traces;
}

std::optional<double> EvalMetrics::false_alarm_rate() const {
    if (adl_traces == 0) return std::nullopt;
    return static_cast<double>(false_alarms) / adl_traces;
}

void print_metrics(std::ostream& out, const EvalMetrics& m) {
    auto rate = [](const std::optional<double>& r) { return r ? fmt::format("{:.4f}", *r) : std::string("n/a"); };
    out << fmt::format("threshold_g={}\n", m.threshold_g) << "fall_traces=" << m.fall_traces << '\n'
        << "adl_traces=" << m.adl_traces << '\n'
        << "detected=" << m.detected << '\n'
        << "false_alarms=" << m.false_alarms << '\n'
        << "detection_rate=" << rate(m.detection_rate()) << '\n'
        << "false_alarm_rate=" << rate(m.false_alarm_rate()) << '\n';
}

EvalMetrics evaluate(const std::vector<Trace>& corpus, double threshold_g) {
    EvalMetrics m;
    m.threshold_g = threshold_g;
    const motion::Calibration cal;
    for (const auto& trace : corpus) {
        motion::FallDetectorState state;
        state.config.rms_threshold_g = threshold_g;
        bool prompted = false;
        bool confirmed = false;
        for (const auto& row : trace.rows) {
            const auto* a = std::get_if<AccelRow>(&row);
            if (!a) continue;
            auto step = motion::fall_step(state, motion::calibrate(a->sample(), cal), a->t_ms, false);
            state = step.state;
            for (const auto& ev : step.events) {
                prompted = prompted || ev.kind == motion::FallEventKind::PromptUser;
                confirmed = confirmed || ev.kind == motion::FallEventKind::FallConfirmed;
            }
        }
        if (trace.header.label == "fall") {
            ++m.fall_traces;
            m.detected += confirmed ? 1 : 0;
        } else {
            ++m.adl_traces;
            m.false_alarms += prompted ? 1 : 0;
        }
    }
    return m;
}

std::vector<Trace> load_corpus(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".trace") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error(fmt::format("no .trace files in {}", dir));
    std::vector<Trace> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(load_trace(f.string()));
    return out;
}

}  // namespace safewatch::sim
