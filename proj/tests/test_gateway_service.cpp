#include "gateway_fixture.hpp"

#include "safewatch/sim/scenario.hpp"
#include "safewatch/sim/simulator.hpp"
#include "safewatch/wire.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>

using namespace std::chrono_literals;
using fixture::Gateway;
using fixture::Json;
using fixture::wait_for;

namespace {

// A bare TCP link standing in for the watch.
class Link {
public:
    explicit Link(int port, const std::string& preamble = "") {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(port));
        ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
        REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
        if (!preamble.empty()) send(preamble);
    }
    ~Link() { ::close(fd_); }

    void send(const std::string& bytes) { REQUIRE(::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL) > 0); }

    // Frames received within the timeout.
    std::vector<safewatch::wire::Frame> read_frames(std::chrono::milliseconds timeout, std::size_t want = 1) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while (frames_.size() < want && std::chrono::steady_clock::now() < deadline) {
            pollfd p{fd_, POLLIN, 0};
            if (::poll(&p, 1, 10) <= 0) continue;
            char buf[256];
            const auto n = ::recv(fd_, buf, sizeof buf, 0);
            if (n <= 0) break;
            for (const auto& f : safewatch::wire::frames_of(decoder_.feed(std::string_view(buf, n)))) {
                frames_.push_back(f);
            }
        }
        return frames_;
    }

private:
    int fd_ = -1;
    safewatch::wire::Decoder decoder_;
    std::vector<safewatch::wire::Frame> frames_;
};

Json get_json(httplib::Client& c, const std::string& path, int expect = 200) {
    auto res = c.Get(path);
    REQUIRE(res);
    REQUIRE(res->status == expect);
    return Json::parse(res->body);
}

Json post_json(httplib::Client& c, const std::string& path, const std::string& body, int expect) {
    auto res = c.Post(path, body, "application/json");
    REQUIRE(res);
    INFO(res->body);
    REQUIRE(res->status == expect);
    return Json::parse(res->body);
}

struct SseEvent {
    std::uint64_t id = 0;
    std::string event;
    Json data;
};

// Reads /v1/events until `count` events arrived or the timeout passes.
std::vector<SseEvent> read_events(int port, const std::string& query, std::size_t count,
                                  const std::string& last_event_id = "") {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(3, 0);
    httplib::Headers headers;
    if (!last_event_id.empty()) headers.emplace("Last-Event-ID", last_event_id);
    std::vector<SseEvent> out;
    std::string buffer;
    c.Get("/v1/events" + query, headers, [&](const char* data, std::size_t len) {
        buffer.append(data, len);
        for (auto end = buffer.find("\n\n"); end != std::string::npos; end = buffer.find("\n\n")) {
            const auto block = buffer.substr(0, end);
            buffer.erase(0, end + 2);
            if (block.rfind(':', 0) == 0) continue;  // keepalive
            SseEvent ev;
            std::istringstream lines(block);
            for (std::string line; std::getline(lines, line);) {
                if (line.rfind("id: ", 0) == 0) ev.id = std::stoull(line.substr(4));
                if (line.rfind("event: ", 0) == 0) ev.event = line.substr(7);
                if (line.rfind("data: ", 0) == 0) ev.data = Json::parse(line.substr(6));
            }
            out.push_back(ev);
        }
        return out.size() < count;
    });
    return out;
}

}  // namespace

TEST_CASE("state of an unknown device is empty, not an error") {
    Gateway gw(fixture::unique_dir("sw-svc-state"));
    const auto j = get_json(gw.http(), "/v1/devices/nobody/state");
    CHECK(j["device"] == "nobody");
    CHECK(j["cases"].empty());
    CHECK(j["connected"] == false);
    CHECK(j["profile"].is_null());

    auto res = gw.http().Get("/v1/devices/watch/state");
    REQUIRE(res);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(Json::parse(res->body)["profile"]["wearer_name"] == "Mia");
    auto pre = gw.http().Options("/v1/profile");
    REQUIRE(pre);
    CHECK(pre->status == 204);
}

TEST_CASE("POST /v1/profile validates and stores") {
    Gateway gw(fixture::unique_dir("sw-svc-profile"));
    auto& c = gw.http();
    auto err = post_json(c, "/v1/profile", R"({"device_id":"w2","contacts":[{"name":"A","phone":"12"}]})", 400);
    CHECK(err["error"] == "ValidationError");
    CHECK(err["field"] == "contacts[0].phone");
    CHECK(post_json(c, "/v1/profile", "not json", 400)["error"] == "BadRequest");

    const auto ok = post_json(
        c, "/v1/profile",
        R"({"device_id":"w2","wearer_name":"Lea","pregnancy":{"pregnant":true,"gestation_weeks":30},"contacts":[{"name":"B","email":"b@x.org"}]})",
        200);
    CHECK(ok["contacts"][0]["priority"] == 1);
    const auto state = get_json(c, "/v1/devices/w2/state");
    CHECK(state["profile"]["wearer_name"] == "Lea");

    const auto recs = get_json(c, "/v1/devices/w2/records");
    REQUIRE(recs["records"].size() == 1);
    CHECK(recs["records"][0]["kind"] == "profile");
    CHECK(recs["records"][0]["device_seq"] == 1);
    CHECK(get_json(c, "/v1/devices/w2/records?since=1")["records"].empty());

    // Compacted profile file reflects the registration.
    std::ifstream in(std::filesystem::path(gw.data_dir()) / "profiles.json");
    const auto all = Json::parse(in);
    CHECK(all.size() == 2);
}

TEST_CASE("POST ack: bad body, unknown case, vitals case acknowledged") {
    Gateway gw(fixture::unique_dir("sw-svc-ack"), 1.0);
    auto& c = gw.http();
    CHECK(post_json(c, "/v1/devices/watch/ack", R"({"case":1})", 400)["field"] == "case_id");
    CHECK(post_json(c, "/v1/devices/watch/ack", R"({"case_id":99})", 404)["error"] == "UnknownCase");

    Link link(gw.device_port());
    link.send("V,72,880\n");
    const auto frames = link.read_frames(2s);
    REQUIRE(frames.size() == 1);
    CHECK(frames[0] == safewatch::wire::Frame{safewatch::wire::Display{"VITALS: OK?"}});
    REQUIRE(wait_for([&] { return gw.any_case("watch", "AwaitingUserAck"); }, 2s));
    const auto id = gw.cases("watch")[0]["id"].get<std::uint64_t>();
    const auto acked = post_json(c, "/v1/devices/watch/ack", fmt::format(R"({{"case_id":{}}})", id), 200);
    CHECK(acked["status"] == "Acknowledged");
    gw.service().drain();
    CHECK(gw.email().bodies().empty());
    CHECK(gw.sms_lines().empty());
}

TEST_CASE("device link: SOS with a fix dispatches email and SMS with the address") {
    Gateway gw(fixture::unique_dir("sw-svc-sos"));
    Link link(gw.device_port(), "ID,watch\n");
    link.send("G,4811730,1151667\n");
    REQUIRE(wait_for([&] { return gw.service().snapshot("watch")["address"] == fixture::kStubAddress; }, 2s));
    link.send("SOS\n");
    REQUIRE(wait_for([&] { return gw.any_case("watch", "Dispatched"); }, 3s));
    gw.service().drain();

    const auto emails = gw.email().bodies();
    REQUIRE(emails.size() == 1);
    CHECK(emails[0]["user_id"] == "user-1");
    CHECK(emails[0]["template_params"]["to_email"] == "ann@example.com");
    CHECK(emails[0]["template_params"]["location"] == fixture::kStubAddress);
    const auto sms = gw.sms_lines();
    REQUIRE(sms.size() == 1);
    CHECK(sms[0].rfind("+15550000001\t", 0) == 0);
    CHECK(sms[0].find(fixture::kStubAddress) != std::string::npos);

    const auto state = get_json(gw.http(), "/v1/devices/watch/state");
    CHECK(state["connected"] == true);
    CHECK(state["link"]["frames"] == 2);
    CHECK(state["cases"][0]["cause"] == "Panic");
    CHECK(state["cases"][0]["dispatch"].size() == 2);
}

TEST_CASE("device link: garbage is counted and the link keeps working") {
    Gateway gw(fixture::unique_dir("sw-svc-garbage"));
    Link link(gw.device_port(), "ID,w9\n");
    link.send("V,1\n\x01\x02zz\nV,70,980\n");
    REQUIRE(wait_for([&] { return !gw.service().snapshot("w9")["latest_vitals"].is_null(); }, 2s));
    const auto state = gw.service().state("w9");
    CHECK(state["link"]["frame_errors"] == 2);
    CHECK(state["link"]["frames"] == 1);
    CHECK(state["latest_vitals"]["bpm"] == 70);
}

TEST_CASE("a device without contacts is told to add one") {
    Gateway gw(fixture::unique_dir("sw-svc-nocontacts"), 100.0, {fixture::profile("lonely", false)});
    Link link(gw.device_port(), "ID,lonely\n");
    link.send("SOS\n");
    const auto frames = link.read_frames(2s);
    REQUIRE(frames.size() == 1);
    CHECK(frames[0] == safewatch::wire::Frame{safewatch::wire::Display{"ADD CONTACT"}});

    // Registering a contact releases the waiting case.
    post_json(gw.http(), "/v1/profile", R"({"device_id":"lonely","contacts":[{"name":"Z","phone":"+4912345"}]})", 200);
    REQUIRE(wait_for([&] { return gw.any_case("lonely", "Dispatched"); }, 3s));
    gw.service().drain();
    REQUIRE(gw.sms_lines().size() == 1);
    CHECK(gw.sms_lines()[0].find("location unavailable") != std::string::npos);
}

TEST_CASE("SSE streams the log in order and resumes after Last-Event-ID") {
    Gateway gw(fixture::unique_dir("sw-svc-sse"));
    Link link(gw.device_port(), "ID,watch\n");
    for (int i = 0; i < 5; ++i) link.send(fmt::format("V,{},970\n", 70 + i));
    REQUIRE(wait_for([&] { return gw.service().log_records().size() >= 6; }, 2s));

    const auto first = read_events(gw.service().api_port(), "", 3);
    REQUIRE(first.size() == 3);
    CHECK(first[0].id == 1);
    CHECK(first[0].event == "profile");
    CHECK(first[1].event == "vitals");
    CHECK(first[1].data["payload"]["bpm"] == 70);

    const auto rest = read_events(gw.service().api_port(), "", 3, std::to_string(first.back().id));
    REQUIRE(rest.size() == 3);
    std::uint64_t expect = first.back().id + 1;
    for (const auto& ev : rest) CHECK(ev.id == expect++);

    const auto filtered = read_events(gw.service().api_port(), "?device=watch&since=1", 5);
    REQUIRE(filtered.size() == 5);
    for (const auto& ev : filtered) CHECK(ev.event == "vitals");

    // Live: an event written after the stream opened still arrives.
    std::thread later([&] {
        std::this_thread::sleep_for(200ms);
        link.send("V,99,960\n");
    });
    const auto live = read_events(gw.service().api_port(), "?since=6", 1);
    later.join();
    REQUIRE(live.size() == 1);
    CHECK(live[0].id == 7);
    CHECK(live[0].data["payload"]["bpm"] == 99);
}

TEST_CASE("restart replays the log to the same state") {
    Gateway gw(fixture::unique_dir("sw-svc-restart"));
    {
        Link link(gw.device_port(), "ID,watch\n");
        link.send("G,4811730,1151667\nV,72,975\nSOS\n");
        REQUIRE(wait_for([&] { return gw.any_case("watch", "Dispatched"); }, 3s));
        gw.service().drain();
    }
    const auto before = gw.service().snapshot("watch").dump();
    const auto records = gw.service().log_records().size();
    gw.restart();
    CHECK(gw.service().replay_report().records == records);
    CHECK(gw.service().replay_report().mismatches == 0);
    CHECK(gw.service().snapshot("watch").dump() == before);
    // Nothing was sent twice.
    gw.service().drain();
    CHECK(gw.email().bodies().size() == 1);
}

TEST_CASE("simulator against the gateway: panic trace ends in a dispatched case") {
    Gateway gw(fixture::unique_dir("sw-svc-sim"));
    safewatch::sim::RunOptions opt;
    opt.speed = 100.0;
    const auto report = safewatch::sim::run(safewatch::sim::generate("panic", 1), "127.0.0.1", gw.device_port(), opt);
    INFO(report.error.value_or(""));
    REQUIRE(report.ok());
    CHECK(report.sent_count("SOS") == 1);
    REQUIRE(wait_for([&] { return gw.any_case("watch", "Dispatched"); }, 3s));
    const auto c = gw.cases("watch")[0];
    CHECK(c["cause"] == "Panic");
    CHECK(c["fix"]["lat"].get<double>() == doctest::Approx(48.1173).epsilon(1e-3));
}
