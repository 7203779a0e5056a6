#include "safewatch/wire.hpp"

#include <doctest.h>

#include <random>

using namespace safewatch::wire;

namespace {

std::vector<Frame> boundary_frames() {
    std::vector<Frame> out{Sos{}, Fall{}, Ok{}};
    for (int bpm : {0, 1, 72, 254, 255}) {
        for (int spo2 : {0, 1, 975, 999, 1000}) out.push_back(Vitals{bpm, spo2});
    }
    for (std::int64_t lat : std::initializer_list<std::int64_t>{-kMaxLatE5, -1, 0, 1, 4811730, kMaxLatE5}) {
        for (std::int64_t lon : std::initializer_list<std::int64_t>{-kMaxLonE5, -1, 0, 1151667, kMaxLonE5}) out.push_back(Gps{lat, lon});
    }
    for (const char* t : {"", " ", "A", "ARE YOU OK?", "VITALS: OK?", "ADD CONTACT", "~!@#$%^&*()"}) {
        out.push_back(Display{t});
    }
    return out;
}

std::vector<Frame> random_frames(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<int> kind(0, 5);
    std::uniform_int_distribution<int> bpm(0, kMaxBpm);
    std::uniform_int_distribution<int> spo2(0, kMaxSpo2Tenths);
    std::uniform_int_distribution<std::int64_t> lat(-kMaxLatE5, kMaxLatE5);
    std::uniform_int_distribution<std::int64_t> lon(-kMaxLonE5, kMaxLonE5);
    std::uniform_int_distribution<int> len(0, static_cast<int>(kMaxDisplayText));
    std::uniform_int_distribution<int> ch(0x20, 0x7e);
    std::vector<Frame> out;
    for (int i = 0; i < n; ++i) {
        switch (kind(rng)) {
            case 0: out.push_back(Sos{}); break;
            case 1: out.push_back(Fall{}); break;
            case 2: out.push_back(Ok{}); break;
            case 3: out.push_back(Vitals{bpm(rng), spo2(rng)}); break;
            case 4: out.push_back(Gps{lat(rng), lon(rng)}); break;
            default: {
                std::string t;
                const int l = len(rng);
                while (static_cast<int>(t.size()) < l) {
                    const char c = static_cast<char>(ch(rng));
                    if (c != ',') t += c;
                }
                out.push_back(Display{t});
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("encode examples") {
    CHECK(encode(Sos{}) == "SOS\n");
    CHECK(encode(Sos{}).size() == 4);
    CHECK(encode(Fall{}) == "FALL\n");
    CHECK(encode(Ok{}) == "OK\n");
    CHECK(encode(Vitals{72, 975}) == "V,72,975\n");
    CHECK(encode(Gps{4811730, 1151667}) == "G,4811730,1151667\n");
    CHECK(encode(Gps{-4811730, -1151667}) == "G,-4811730,-1151667\n");
    CHECK(encode(Display{"ARE YOU OK?"}) == "D,ARE YOU OK?\n");
}

TEST_CASE("encode rejects invalid frames") {
    try {
        encode(Display{"TWELVE CHARS"});
        FAIL("expected DisplayTooLong");
    } catch (const EncodeError& e) {
        CHECK(e.kind() == EncodeError::Kind::DisplayTooLong);
    }
    CHECK_THROWS_AS(encode(Display{"A,B"}), EncodeError);
    CHECK_THROWS_AS(encode(Display{"A\nB"}), EncodeError);
    CHECK_THROWS_AS(encode(Vitals{256, 0}), EncodeError);
    CHECK_THROWS_AS(encode(Vitals{0, 1001}), EncodeError);
    CHECK_THROWS_AS(encode(Vitals{-1, 0}), EncodeError);
    CHECK_THROWS_AS(encode(Gps{kMaxLatE5 + 1, 0}), EncodeError);
    CHECK_THROWS_AS(encode(Gps{0, -kMaxLonE5 - 1}), EncodeError);
}

TEST_CASE("display frames fit the fixed 14-byte read") {
    std::mt19937_64 rng(1);
    for (const auto& f : random_frames(rng, 5000)) {
        if (std::holds_alternative<Display>(f)) {
            REQUIRE(encode(f).size() <= kMaxDisplayFrame);
        }
    }
    CHECK(encode(Display{std::string(kMaxDisplayText, 'X')}).size() == kMaxDisplayFrame);
}

TEST_CASE("decoder reassembles split chunks") {
    Decoder d;
    auto first = d.feed("SO");
    CHECK(first.empty());
    auto rest = d.feed("S\nFALL\n");
    CHECK(frames_of(rest) == std::vector<Frame>{Sos{}, Fall{}});
    CHECK(errors_of(rest).empty());
    CHECK(d.buffered() == 0);
}

TEST_CASE("decoder reports arity errors and continues") {
    Decoder d;
    auto out = d.feed("V,72\nOK\n");
    REQUIRE(out.size() == 2);
    REQUIRE(std::holds_alternative<FrameError>(out[0]));
    CHECK(std::get<FrameError>(out[0]).line == "V,72");
    CHECK(std::get<Frame>(out[1]) == Frame{Ok{}});

    CHECK(errors_of(Decoder{}.feed("V,72,975,1\n")).size() == 1);
    CHECK(errors_of(Decoder{}.feed("V,+72,975\n")).size() == 1);
    CHECK(errors_of(Decoder{}.feed("V,72,1001\n")).size() == 1);
    CHECK(errors_of(Decoder{}.feed("G,1,x\n")).size() == 1);
    CHECK(errors_of(Decoder{}.feed("sos\n")).size() == 1);
}

TEST_CASE("decoder accepts CRLF and skips blank lines") {
    Decoder d;
    const auto out = d.feed("OK\r\n\n\r\nSOS\n");
    CHECK(errors_of(out).empty());
    CHECK(frames_of(out) == std::vector<Frame>{Ok{}, Sos{}});
}

TEST_CASE("decoder resynchronises after random bytes") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int trial = 0; trial < 500; ++trial) {
        std::string noise;
        for (int i = 0; i < 100; ++i) noise += static_cast<char>(byte(rng));
        Decoder d;
        auto out = d.feed(noise);
        auto tail = d.feed("OK\n");
        out.insert(out.end(), tail.begin(), tail.end());
        REQUIRE(!out.empty());
        // The last thing decoded is the OK frame.
        REQUIRE(std::holds_alternative<Frame>(out.back()));
        REQUIRE(std::get<Frame>(out.back()) == Frame{Ok{}});
        const bool noise_had_newline = noise.find('\n') != std::string::npos;
        if (!noise_had_newline) {
            // The whole noise run is glued to "OK", so one error then the frame.
            REQUIRE(errors_of(out).size() == 1);
            REQUIRE(frames_of(out).size() == 1);
        } else {
            REQUIRE(!errors_of(out).empty());
        }
    }
}

TEST_CASE("decode(encode(f)) == [f] over boundary values") {
    for (const auto& f : boundary_frames()) {
        REQUIRE(validate(f).empty());
        Decoder d;
        const auto out = d.feed(encode(f));
        REQUIRE(out.size() == 1);
        REQUIRE(std::get<Frame>(out[0]) == f);
        const auto direct = parse_line(std::string_view(encode(f)).substr(0, encode(f).size() - 1));
        REQUIRE(std::get<Frame>(direct) == f);
    }
}

TEST_CASE("any chunking of a valid stream yields the same frames") {
    std::mt19937_64 rng(12);
    const auto frames = random_frames(rng, 300);
    std::string stream;
    for (const auto& f : frames) stream += encode(f);

    for (int split = 0; split < 1000; ++split) {
        Decoder d;
        std::vector<Decoded> out;
        std::size_t pos = 0;
        std::uniform_int_distribution<std::size_t> step(0, 40);
        while (pos < stream.size()) {
            const auto n = std::min(step(rng), stream.size() - pos);
            auto got = d.feed(std::string_view(stream).substr(pos, n));
            out.insert(out.end(), got.begin(), got.end());
            pos += n;
        }
        REQUIRE(errors_of(out).empty());
        REQUIRE(frames_of(out) == frames);
    }
}

TEST_CASE("1 MB of random bytes keeps the buffer bounded") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<std::size_t> chunk(1, 4096);
    Decoder d;
    std::size_t total = 0;
    std::size_t produced = 0;
    while (total < (1u << 20)) {
        std::string c(chunk(rng), '\0');
        for (auto& b : c) b = static_cast<char>(byte(rng));
        for (const auto& item : d.feed(c)) {
            if (const auto* f = std::get_if<Frame>(&item)) {
                REQUIRE(validate(*f).empty());
            }
            ++produced;
        }
        REQUIRE(d.buffered() <= kMaxBuffered);
        total += c.size();
    }
    CHECK(produced > 0);
    const auto after = d.feed("\nSOS\n");
    CHECK(frames_of(after).back() == Frame{Sos{}});
}

TEST_CASE("overlong line is one error and the decoder keeps going") {
    Decoder d;
    auto out = d.feed(std::string(200, 'A') + "\nOK\n");
    CHECK(errors_of(out).size() == 1);
    CHECK(errors_of(out)[0].line.size() <= kMaxBuffered);
    CHECK(frames_of(out) == std::vector<Frame>{Ok{}});
    CHECK(d.discarded_bytes() >= 200);
}
