#include "oracles.hpp"

#include "xfuse/error.hpp"
#include "xfuse/frame.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

using namespace xfuse;
namespace fs = std::filesystem;

TEST_CASE("XFR1 encode/decode round trip is bit exact") {
    const Frame f = testutil::random_frame(7, 5, 1, -3.f, 3.f, 42);
    const auto bytes = encode_frame(f);
    REQUIRE(bytes.size() == 16 + 4 * 35);
    CHECK(std::memcmp(bytes.data(), "XFR1", 4) == 0);
    CHECK(bytes[4] == 7);  // little-endian width
    CHECK(bytes[8] == 5);
    CHECK(bytes[12] == 0);
    const Frame g = decode_frame(bytes, 42);
    CHECK(g.width == 7);
    CHECK(g.height == 5);
    CHECK(g.frame_index == 42);
    CHECK(std::memcmp(g.pixels.data(), f.pixels.data(), 4 * 35) == 0);
}

TEST_CASE("XFR1 decoding rejects malformed input") {
    auto bytes = encode_frame(testutil::random_frame(4, 4, 2));
    SUBCASE("bad magic") {
        bytes[0] = 'Y';
        CHECK_THROWS_AS(decode_frame(bytes), IoError);
    }
    SUBCASE("truncated payload") {
        bytes.pop_back();
        CHECK_THROWS_AS(decode_frame(bytes), IoError);
    }
    SUBCASE("truncated header") {
        bytes.resize(10);
        CHECK_THROWS_AS(decode_frame(bytes), IoError);
    }
    SUBCASE("unknown dtype") {
        bytes[12] = 1;
        CHECK_THROWS_AS(decode_frame(bytes), IoError);
    }
    SUBCASE("non-finite pixel") {
        const float nan = std::numeric_limits<float>::quiet_NaN();
        std::memcpy(bytes.data() + 16, &nan, 4);
        CHECK_THROWS_AS(decode_frame(bytes), IoError);
    }
}

TEST_CASE("frame validation") {
    CHECK_THROWS_AS(Frame(0, 3), ValidationError);
    CHECK_THROWS_AS(Frame(2, 2, std::vector<float>(3)), ValidationError);
    CHECK_THROWS_AS(Frame(1, 1, std::vector<float>{std::numeric_limits<float>::infinity()}),
                    ValidationError);
    CHECK_NOTHROW(Frame(2, 2, std::vector<float>(4, 0.5f)));
}

TEST_CASE("roles") {
    CHECK(parse_role("HR") == Role::HR);
    CHECK(parse_role("LR") == Role::LR);
    CHECK(parse_role("RECON") == Role::RECON);
    CHECK(role_name(Role::RECON) == "RECON");
    CHECK_THROWS_AS(parse_role("hr?"), ValidationError);
}

TEST_CASE("sequence lookup and validation") {
    Sequence s;
    for (std::int64_t i : {0, 20, 40}) s.frames.push_back(testutil::constant_frame(3, 3, float(i), i));
    CHECK(s.frame_indices() == std::vector<std::int64_t>{0, 20, 40});
    REQUIRE(s.find(20) != nullptr);
    CHECK(s.find(20)->pixels[0] == 20.f);
    CHECK(s.find(21) == nullptr);
    CHECK_NOTHROW(validate(s));
    s.frames[2].frame_index = 20;
    CHECK_THROWS_AS(validate(s), ValidationError);
    s.frames[2].frame_index = 40;
    s.frames[1] = testutil::constant_frame(4, 3, 0.f, 20);
    CHECK_THROWS_AS(validate(s), ValidationError);
}

TEST_CASE("sequence pair checks the spatial factor") {
    SequencePair p;
    p.hr.frames.push_back(testutil::constant_frame(16, 8, 0.f));
    p.lr.role = Role::LR;
    p.lr.frames.push_back(testutil::constant_frame(4, 2, 0.f));
    CHECK_NOTHROW(validate(p));
    p.spatial_factor = 2;
    CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("manifest round trip") {
    testutil::TempDir tmp("manifest");
    Sequence s;
    s.role = Role::LR;
    s.native_step = 20;
    for (std::int64_t i : {3, 23, 43}) s.frames.push_back(testutil::random_frame(6, 4, std::uint64_t(i), 0, 1, i));
    write_manifest(s, tmp.path() / "seq");

    std::ifstream m(tmp.path() / "seq" / kManifestName);
    std::string text((std::istreambuf_iterator<char>(m)), {});
    CHECK(text.find("role: LR") != std::string::npos);
    CHECK(text.find("native_step: 20") != std::string::npos);
    CHECK(fs::exists(tmp.path() / "seq" / "frame_00000023.xfr"));

    const Sequence r = read_manifest(tmp.path() / "seq");
    CHECK(r.role == Role::LR);
    CHECK(r.native_step == 20);
    REQUIRE(r.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(r.frames[i].frame_index == s.frames[i].frame_index);
        CHECK(r.frames[i].pixels == s.frames[i].pixels);
    }
}

TEST_CASE("manifest errors") {
    testutil::TempDir tmp("manifest_err");
    const auto write = [&](const std::string& body) {
        std::ofstream(tmp.path() / kManifestName) << body;
    };
    write_frame(testutil::constant_frame(2, 2, 0.5f), tmp.path() / "a.xfr");
    write_frame(testutil::constant_frame(3, 2, 0.5f), tmp.path() / "b.xfr");

    SUBCASE("missing directory") { CHECK_THROWS_AS(read_manifest(tmp.path() / "nope"), IoError); }
    SUBCASE("missing frame file is named") {
        write("role: HR\nwidth: 2\nheight: 2\nnative_step: 1\nframe: 0 gone.xfr\n");
        try {
            read_manifest(tmp.path());
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("gone.xfr") != std::string::npos);
        }
    }
    SUBCASE("dimension mismatch") {
        write("role: HR\nwidth: 2\nheight: 2\nnative_step: 1\nframe: 0 a.xfr\nframe: 1 b.xfr\n");
        CHECK_THROWS_AS(read_manifest(tmp.path()), ValidationError);
    }
    SUBCASE("non-increasing indices") {
        write("role: HR\nwidth: 2\nheight: 2\nnative_step: 1\nframe: 5 a.xfr\nframe: 5 a.xfr\n");
        CHECK_THROWS_AS(read_manifest(tmp.path()), ValidationError);
    }
    SUBCASE("unknown key") {
        write("role: HR\nwidth: 2\nheight: 2\ncolour: red\n");
        CHECK_THROWS_AS(read_manifest(tmp.path()), IoError);
    }
    SUBCASE("malformed number") {
        write("role: HR\nwidth: two\nheight: 2\n");
        CHECK_THROWS_AS(read_manifest(tmp.path()), IoError);
    }
}
