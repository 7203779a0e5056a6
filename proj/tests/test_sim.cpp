#include "safewatch/sim/scenario.hpp"
#include "safewatch/sim/simulator.hpp"
#include "safewatch/sim/trace.hpp"
#include "safewatch/vitals.hpp"

#include <doctest.h>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

using namespace safewatch;
using namespace safewatch::sim;

namespace {

std::string text_of(const Trace& t) {
    std::ostringstream out;
    write_trace(out, t);
    return out.str();
}

double magnitude(const motion::GVector& g) { return std::sqrt(g.xg * g.xg + g.yg * g.yg + g.zg * g.zg); }

std::vector<motion::GVector> accel_of(const Trace& t) {
    std::vector<motion::GVector> out;
    for (const auto& row : t.rows) {
        if (const auto* a = std::get_if<AccelRow>(&row)) out.push_back(motion::calibrate(a->sample()));
    }
    return out;
}

std::vector<wire::Vitals> vitals_frames(const RunReport& r) {
    std::vector<wire::Vitals> out;
    for (const auto& f : r.sent) {
        if (const auto* v = std::get_if<wire::Vitals>(&f)) out.push_back(*v);
    }
    return out;
}

// One-connection TCP peer standing in for the gateway.
class FakeGateway {
public:
    explicit FakeGateway(std::string greeting, bool hang_up = false) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
        socklen_t len = sizeof addr;
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        ::listen(listen_fd_, 1);
        thread_ = std::thread([this, greeting = std::move(greeting), hang_up] {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) return;
            char buf[4096];
            bool greeted = false;
            for (;;) {
                const auto n = ::recv(fd, buf, sizeof buf, 0);
                if (n <= 0) break;
                received_.append(buf, static_cast<std::size_t>(n));
                if (!greeted && received_.find('\n') != std::string::npos) {
                    greeted = true;
                    if (hang_up) break;
                    ::send(fd, greeting.data(), greeting.size(), MSG_NOSIGNAL);
                }
            }
            ::close(fd);
            done_ = true;
        });
    }
    ~FakeGateway() {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        if (thread_.joinable()) thread_.join();
    }
    int port() const { return port_; }
    std::string received() {
        if (thread_.joinable()) thread_.join();
        return received_;
    }

private:
    int listen_fd_ = -1;
    int port_ = 0;
    std::thread thread_;
    std::string received_;
    std::atomic<bool> done_{false};
};

}  // namespace

TEST_CASE("generate is deterministic per (scenario, seed)") {
    CHECK(text_of(generate("fall-forward", 7)) == text_of(generate("fall-forward", 7)));
    CHECK(text_of(generate("fall-forward", 7)) != text_of(generate("fall-forward", 8)));
    for (const auto& s : scenarios()) {
        CHECK(generate(s.name, 3) == generate(s.name, 3));
    }
    CHECK_THROWS_AS(generate("moonwalk", 1), UnknownScenario);
}

TEST_CASE("trace round trip and timestamps") {
    for (const auto& s : scenarios()) {
        const auto t = generate(s.name, 11);
        CHECK(t.header.label == s.label);
        CHECK(t.header.reply == s.reply);
        std::istringstream in(text_of(t));
        const auto back = read_trace(in);
        REQUIRE(back == t);
        for (std::size_t i = 1; i < t.rows.size(); ++i) REQUIRE(row_time(t.rows[i]) > row_time(t.rows[i - 1]));
        CHECK(t.duration_ms() < s.duration_ms);
        CHECK(t.duration_ms() >= s.duration_ms - 20);
    }

    const auto path = (std::filesystem::temp_directory_path() / "sw_roundtrip.trace").string();
    save_trace(path, generate("panic", 2));
    CHECK(load_trace(path) == generate("panic", 2));
    std::filesystem::remove(path);
}

TEST_CASE("read_trace rejects malformed input") {
    auto bad = [](const std::string& text) {
        std::istringstream in(text);
        CHECK_THROWS_AS(read_trace(in), TraceError);
    };
    bad("");
    bad("A 0 1 2 3\n");
    bad("H scenario=x seed=1 label=maybe reply=none\n");
    bad("H scenario=x seed=1 label=adl reply=none\nA 5 1 2\n");
    bad("H scenario=x seed=1 label=adl reply=none\nA 5 1 2 3\nP 5 1 2\n");
    bad("H scenario=x seed=1 label=adl reply=none\nB 5 C\n");
    bad("H scenario=x seed=1 label=adl reply=none\nQ 5 1\n");
    bad("H scenario=x seed=1 label=adl reply=none\nP 5 1 x\n");

    std::istringstream ok("H scenario=x seed=1 label=adl reply=none\r\n\nN 5 $GPGGA,1*00\nB 6 A\n");
    const auto t = read_trace(ok);
    REQUIRE(t.rows.size() == 2);
    CHECK(std::get<NmeaRow>(t.rows[0]).line == "$GPGGA,1*00");
}

TEST_CASE("adl scenarios stay under the threshold after calibration") {
    for (const char* name : {"adl-walk", "adl-sit", "desat", "brady", "supine-sleep", "panic"}) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            for (const auto& g : accel_of(generate(name, seed))) {
                REQUIRE(magnitude(g) < kAdlMaxMagnitudeG);
                REQUIRE(motion::rms_accel(g) <= 1.4);
            }
        }
    }
}

TEST_CASE("fall scenarios contain a 200 ms impact of at least 3 g followed by stillness") {
    for (const char* name : {"fall-forward", "fall-side", "fall-forward-ok"}) {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const auto g = accel_of(generate(name, seed));
            std::size_t first = g.size();
            std::size_t count = 0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (magnitude(g[i]) >= kImpactMinMagnitudeG) {
                    first = std::min(first, i);
                    ++count;
                }
            }
            REQUIRE(count == static_cast<std::size_t>(kImpactMs / kAccelPeriodMs));
            // Contiguous spike, then at least 15 s of lying still.
            for (std::size_t i = first; i < first + count; ++i) REQUIRE(magnitude(g[i]) >= kImpactMinMagnitudeG);
            const std::size_t after = first + count;
            REQUIRE(g.size() - after >= 15000 / kAccelPeriodMs);
            for (std::size_t i = after; i < g.size(); ++i) REQUIRE(std::abs(magnitude(g[i]) - 1.0) < 0.15);
        }
    }
}

TEST_CASE("offline pipeline: fall without a reply sends FALL") {
    const auto r = simulate(generate("fall-forward", 7), Reply::None);
    CHECK(r.sent_count("FALL") == 1);
    REQUIRE(r.prompts.size() == 1);
    CHECK(r.prompts[0].text == kFallPromptText);
    CHECK(r.prompts[0].local);
    CHECK(r.replies.empty());
    CHECK(r.sent_count("G") >= 30);
}

TEST_CASE("offline pipeline: answering the prompt clears the fall") {
    const auto r = simulate(generate("fall-forward-ok", 7), Reply::Ok);
    CHECK(r.sent_count("FALL") == 0);
    CHECK(r.sent_count("OK") == 0);
    REQUIRE(r.replies.size() == 1);
    CHECK(r.replies[0] == r.prompts[0].t_ms + 3000);
    bool dismissed = false;
    for (const auto& ev : r.fall_events) dismissed = dismissed || ev.kind == motion::FallEventKind::FallDismissed;
    CHECK(dismissed);
}

TEST_CASE("offline pipeline: double press sends SOS") {
    const auto r = simulate(generate("panic", 1), Reply::None);
    CHECK(r.sent_count("SOS") == 1);
    CHECK(r.sent_count("FALL") == 0);
}

TEST_CASE("vitals frames reflect the scripted heart rate and ratio") {
    struct Expect {
        const char* name;
        int bpm;
        int spo2_tenths;
    };
    // Tenths from 110 - 25 R at the scripted ratio.
    for (const auto& e : {Expect{"adl-walk", 72, 975}, Expect{"desat", 75, 900}, Expect{"brady", 40, 975}}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto frames = vitals_frames(simulate(generate(e.name, seed), Reply::None));
            INFO(e.name << " seed " << seed);
            REQUIRE(frames.size() >= 10);
            for (const auto& v : frames) {
                REQUIRE(std::abs(v.bpm - e.bpm) <= 3);
                REQUIRE(std::abs(v.spo2_tenths - e.spo2_tenths) <= 10);
            }
        }
    }
    CHECK(vitals_frames(simulate(generate("desat", 1), Reply::None)).front().spo2_tenths < 940);
}

TEST_CASE("vitals wait for a full ring of measured beats") {
    Device device;
    int accepted = 0;
    std::size_t frames = 0;
    for (const auto& row : generate("adl-walk", 4).rows) {
        const bool ppg = std::holds_alternative<PpgRow>(row);
        const auto before = device.beat_state().rate_spot;
        const auto out = device.step(row);
        if (ppg && device.beat_state().rate_spot != before) ++accepted;
        for (const auto& f : out.frames) {
            if (std::holds_alternative<wire::Vitals>(f)) {
                REQUIRE(accepted > static_cast<int>(vitals::kDefaultRateSize));
                ++frames;
            }
        }
    }
    CHECK(frames >= 40);
}

TEST_CASE("eval on a generated corpus") {
    std::vector<Trace> corpus;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        corpus.push_back(generate(seed % 2 ? "fall-forward" : "fall-side", seed));
        corpus.push_back(generate(seed % 2 ? "adl-walk" : "adl-sit", seed));
    }
    const auto m = evaluate(corpus, 1.4);
    CHECK(m.fall_traces == 20);
    CHECK(m.adl_traces == 20);
    CHECK(m.detection_rate() == 1.0);
    CHECK(m.false_alarm_rate() == 0.0);
    CHECK(evaluate(corpus, 10.0).detection_rate() == 0.0);

    double last_det = 2.0;
    double last_fa = 2.0;
    for (double thr = 0.2; thr <= 3.0; thr += 0.1) {
        const auto e = evaluate(corpus, thr);
        REQUIRE(*e.detection_rate() <= last_det);
        REQUIRE(*e.false_alarm_rate() <= last_fa);
        last_det = *e.detection_rate();
        last_fa = *e.false_alarm_rate();
    }

    const auto only_adl = evaluate({generate("adl-walk", 1)}, 1.4);
    CHECK_FALSE(only_adl.detection_rate().has_value());
    std::ostringstream out;
    print_metrics(out, only_adl);
    CHECK(out.str().find("detection_rate=n/a") != std::string::npos);
}

TEST_CASE("load_corpus reads .trace files and refuses an empty directory") {
    const auto dir = std::filesystem::temp_directory_path() / "sw_corpus_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    CHECK_THROWS(load_corpus(dir.string()));
    save_trace((dir / "b.trace").string(), generate("adl-walk", 2));
    save_trace((dir / "a.trace").string(), generate("fall-side", 2));
    const auto c = load_corpus(dir.string());
    REQUIRE(c.size() == 2);
    CHECK(c[0].header.scenario == "fall-side");
    std::filesystem::remove_all(dir);
}

TEST_CASE("run streams frames, answers gateway prompts and reports") {
    FakeGateway gw("D,VITALS: OK?\n");
    RunOptions opt;
    opt.speed = 50.0;
    opt.reply = Reply::Ok;
    opt.device_id = "w7";
    opt.reply_delay_ms = 1000;
    const auto r = run(generate("panic", 1), "127.0.0.1", gw.port(), opt);
    INFO(r.error.value_or(""));
    REQUIRE(r.ok());
    CHECK(r.sent_count("SOS") == 1);
    CHECK(r.frames_received == 1);
    REQUIRE(r.prompts.size() == 1);
    CHECK_FALSE(r.prompts[0].local);
    CHECK(r.prompts[0].text == "VITALS: OK?");
    REQUIRE(r.replies.size() == 1);
    CHECK(r.sent_count("OK") == 1);
    // Paced to a fiftieth of the 20 s trace.
    CHECK(r.wall_ms >= 350);
    CHECK(r.wall_ms < 2000);

    const auto got = gw.received();
    CHECK(got.rfind("ID,w7\n", 0) == 0);
    CHECK(got.find("SOS\n") != std::string::npos);
    CHECK(got.find("OK\n") != std::string::npos);

    std::ostringstream out;
    print_report(out, r);
    CHECK(out.str().find("frames_sent.SOS=1") != std::string::npos);
    CHECK(out.str().find("prompt.0=") != std::string::npos);
}

TEST_CASE("run reports a lost connection with the partial session") {
    FakeGateway gw("", true);
    RunOptions opt;
    opt.speed = 0.0;
    const auto r = run(generate("adl-walk", 1), "127.0.0.1", gw.port(), opt);
    REQUIRE(r.error.has_value());
    CHECK(r.error->find("connection lost") != std::string::npos);

    const auto refused = run(generate("adl-walk", 1), "127.0.0.1", 1, opt);
    REQUIRE(refused.error.has_value());
    CHECK(refused.sent.empty());
}

TEST_CASE("run at 100x finishes a 60 s trace in under 3 s") {
    FakeGateway gw("");
    RunOptions opt;
    opt.speed = 100.0;
    const auto start = std::chrono::steady_clock::now();
    const auto r = run(generate("adl-walk", 5), "127.0.0.1", gw.port(), opt);
    const auto wall = std::chrono::steady_clock::now() - start;
    REQUIRE(r.ok());
    CHECK(wall < std::chrono::seconds(3));
    CHECK(r.wall_ms >= 550);
    // Same trace and speed, same frames.
    FakeGateway gw2("");
    const auto again = run(generate("adl-walk", 5), "127.0.0.1", gw2.port(), opt);
    CHECK(again.sent == r.sent);
    CHECK(again.frames_sent == r.frames_sent);
}
