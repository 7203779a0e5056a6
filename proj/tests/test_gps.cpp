#include "safewatch/geocode.hpp"
#include "safewatch/gps.hpp"

#include <doctest.h>
#include <httplib.h>

#include <random>
#include <thread>

using namespace safewatch::gps;

namespace {

const std::string kGga = "$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*47";

NmeaError::Kind error_kind(const std::string& line) {
    try {
        parse_sentence(line);
    } catch (const NmeaError& e) {
        return e.kind();
    }
    FAIL("expected an NmeaError");
    return NmeaError::Kind::Malformed;
}

}  // namespace

TEST_CASE("parse_sentence: standard GGA example") {
    // Independent XOR over the body bytes.
    unsigned x = 0;
    for (char c : kGga.substr(1, kGga.find('*') - 1)) x ^= static_cast<unsigned char>(c);
    REQUIRE(x == 0x47);

    const auto s = parse_sentence(kGga);
    CHECK(s.type == "GPGGA");
    CHECK(s.fields.size() == 14);
    CHECK(s.checksum == 0x47);
    CHECK(render(s) == kGga);
    CHECK(parse_sentence(kGga + "\r\n") == s);
}

TEST_CASE("parse_sentence errors") {
    auto bad = kGga;
    bad.replace(bad.size() - 2, 2, "48");
    CHECK(error_kind(bad) == NmeaError::Kind::BadChecksum);
    CHECK(error_kind(kGga.substr(1)) == NmeaError::Kind::Malformed);
    CHECK(error_kind("$GPGGA,1,2") == NmeaError::Kind::Malformed);
    CHECK(error_kind("$*00") == NmeaError::Kind::Malformed);
    CHECK(error_kind("") == NmeaError::Kind::Malformed);
    CHECK(error_kind("$GPGGA,1*4") == NmeaError::Kind::Malformed);
    CHECK(error_kind("$GPGGA,1*ZZ") == NmeaError::Kind::Malformed);
}

TEST_CASE("to_fix converts ddmm.mmmm") {
    const auto fix = to_fix(parse_sentence(kGga), 5);
    REQUIRE(fix.valid());
    CHECK(fix.position->lat == doctest::Approx(48.0 + 7.038 / 60.0).epsilon(1e-12));
    CHECK(fix.position->lat == doctest::Approx(48.11730).epsilon(1e-7));
    CHECK(fix.position->lon == doctest::Approx(11.51667).epsilon(1e-6));
    CHECK(std::abs(fix.position->lon - 11.51667) < 1e-5);
    CHECK(fix.source == "GGA");
    CHECK(fix.t_ms == 5);
}

TEST_CASE("to_fix handles no-fix, hemispheres and RMC") {
    NmeaSentence nofix{"GPGGA", {"123519", "", "", "", "", "0", "00", "", "", "M", "", "M", "", ""}, 0};
    CHECK_FALSE(to_fix(nofix, 0).valid());

    NmeaSentence origin{"GPGGA", {"0", "0000.000", "N", "00000.000", "E", "1", "08", "", "", "M", "", "M", "", ""}, 0};
    const auto o = to_fix(origin, 0);
    REQUIRE(o.valid());
    CHECK(o.position->lat == 0.0);
    CHECK(o.position->lon == 0.0);

    NmeaSentence sw{"GPGGA", {"0", "3352.500", "S", "15112.000", "W", "1", "08", "", "", "M", "", "M", "", ""}, 0};
    const auto f = to_fix(sw, 0);
    CHECK(f.position->lat == doctest::Approx(-33.875));
    CHECK(f.position->lon == doctest::Approx(-151.2));

    const auto rmc = parse_sentence("$GPRMC,123519,A,4807.038,N,01131.000,E,022.4,084.4,230394,003.1,W*6A");
    const auto rf = to_fix(rmc, 0);
    REQUIRE(rf.valid());
    CHECK(rf.source == "RMC");
    CHECK(rf.position->lat == doctest::Approx(48.1173));

    NmeaSentence void_rmc = rmc;
    void_rmc.fields[1] = "V";
    CHECK_FALSE(to_fix(void_rmc, 0).valid());

    NmeaSentence gsv{"GPGSV", {"1"}, 0};
    CHECK_THROWS_AS(to_fix(gsv, 0), NmeaError);

    NmeaSentence junk = origin;
    junk.fields[1] = "48x7.0";
    try {
        to_fix(junk, 0);
        FAIL("expected FieldParse");
    } catch (const NmeaError& e) {
        CHECK(e.kind() == NmeaError::Kind::FieldParse);
    }
}

TEST_CASE("render(parse(line)) reproduces well-formed lines") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> len(0, 8);
    std::uniform_int_distribution<int> nfields(0, 20);
    const std::string alphabet = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ.-+ /abcdef";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    for (int i = 0; i < 2000; ++i) {
        std::string body = "GP";
        for (int k = 0; k < 3; ++k) body += static_cast<char>('A' + pick(rng) % 26);
        const int n = nfields(rng);
        for (int f = 0; f < n; ++f) {
            body += ',';
            const int l = len(rng);
            for (int c = 0; c < l; ++c) body += alphabet[pick(rng)];
        }
        unsigned x = 0;
        for (char c : body) x ^= static_cast<unsigned char>(c);
        char cs[3];
        std::snprintf(cs, sizeof cs, "%02X", x);
        const std::string line = "$" + body + "*" + cs;
        REQUIRE(render(parse_sentence(line)) == line);
    }
}

TEST_CASE("to_fix(to_nmea(fix)) is within 1e-5 degrees") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> lat(-90.0, 90.0);
    std::uniform_real_distribution<double> lon(-180.0, 180.0);
    for (int i = 0; i < 5000; ++i) {
        GeoFix fix{i * 1000LL, Coordinates{lat(rng), lon(rng)}, "GGA"};
        const auto line = render(to_nmea(fix));
        const auto back = to_fix(parse_sentence(line), fix.t_ms);
        REQUIRE(back.valid());
        REQUIRE(std::abs(back.position->lat - fix.position->lat) < 1e-5);
        REQUIRE(std::abs(back.position->lon - fix.position->lon) < 1e-5);
    }
    for (auto edge : {Coordinates{90, 180}, Coordinates{-90, -180}, Coordinates{0, 0}, Coordinates{59.9999999, 0.9999999}}) {
        const auto back = to_fix(parse_sentence(render(to_nmea({0, edge, "GGA"}))), 0);
        CHECK(std::abs(back.position->lat - edge.lat) < 1e-5);
        CHECK(std::abs(back.position->lon - edge.lon) < 1e-5);
    }
    const auto none = to_fix(parse_sentence(render(to_nmea({0, std::nullopt, "GGA"}))), 0);
    CHECK_FALSE(none.valid());
}

TEST_CASE("fuzz: arbitrary lines yield a sentence or a typed error") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 90);
    int parsed = 0;
    for (int i = 0; i < 10000; ++i) {
        std::string line;
        if (i % 3 == 0) line = "$";
        const int n = len(rng);
        for (int k = 0; k < n; ++k) line += static_cast<char>(byte(rng));
        if (i % 5 == 0) line = kGga.substr(0, static_cast<std::size_t>(n) % kGga.size()) + line;
        try {
            const auto s = parse_sentence(line);
            ++parsed;
            try {
                to_fix(s, 0);
            } catch (const NmeaError&) {
            }
        } catch (const NmeaError&) {
        }
    }
    CHECK(parsed >= 0);
}

TEST_CASE("format_coordinates uses five decimals") {
    CHECK(format_coordinates({48.1173, 11.516666}) == "48.11730,11.51667");
}

TEST_CASE("Geocoder caches per rounded coordinate") {
    auto stub = std::make_shared<StubGeocodingClient>();
    stub->add({48.1173, 11.5167}, "Stub Street 1");
    Geocoder geocoder(stub);

    const GeoFix fix{0, Coordinates{48.11730, 11.51667}, "GGA"};
    const auto a = geocoder.reverse_geocode(fix);
    CHECK(a.display == "Stub Street 1");
    CHECK(a.provider == "stub");
    CHECK(geocoder.cache_size() == 1);

    stub->set_unavailable(true);
    CHECK(geocoder.reverse_geocode({0, Coordinates{48.117301, 11.516702}, "GGA"}).display == "Stub Street 1");
    CHECK_THROWS_AS(geocoder.reverse_geocode({0, Coordinates{10, 10}, "GGA"}), ProviderUnavailable);
    CHECK_THROWS_AS(geocoder.reverse_geocode({0, std::nullopt, "GGA"}), std::invalid_argument);
}

TEST_CASE("HttpGeocodingClient talks GET lat/lon and honours its deadline") {
    httplib::Server server;
    server.Get("/reverse", [](const httplib::Request& req, httplib::Response& res) {
        if (req.get_param_value("lat") == "1.00000") {
            std::this_thread::sleep_for(std::chrono::milliseconds(600));
        }
        res.set_content("Addr " + req.get_param_value("lat") + " " + req.get_param_value("lon"), "text/plain");
    });
    server.Get("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    HttpGeocodingClient ok(base + "/reverse");
    CHECK(ok.lookup({48.1173, 11.51667}) == "Addr 48.11730 11.51667");

    HttpGeocodingClient slow(base + "/reverse", std::chrono::milliseconds(200));
    CHECK_THROWS_AS(slow.lookup({1.0, 2.0}), ProviderUnavailable);

    HttpGeocodingClient down(base + "/down");
    CHECK_THROWS_AS(down.lookup({1.0, 2.0}), ProviderUnavailable);

    HttpGeocodingClient refused("http://127.0.0.1:1/none", std::chrono::milliseconds(200));
    CHECK_THROWS_AS(refused.lookup({1.0, 2.0}), ProviderUnavailable);

    server.stop();
    t.join();
}
