#include <cmath>
#include <cstring>
#include <limits>

#include "doctest.h"
#include "edlb/errors.hpp"
#include "edlb/formats.hpp"
#include "edlb/rng.hpp"

using namespace edlb;

namespace {

std::size_t parse_offset(const std::function<void()>& f) {
    try {
        f();
    } catch (const ParseError& e) {
        return e.offset();
    }
    FAIL("expected a ParseError");
    return 0;
}

}  // namespace

TEST_SUITE("formats") {
    TEST_CASE("ppm round trip and header layout") {
        Rng rng(3);
        Image8 img{5, 3, {}};
        for (int i = 0; i < 45; ++i) img.rgb.push_back(static_cast<std::uint8_t>(rng.below(256)));
        const std::string bytes = encode_ppm(img);
        CHECK(bytes.rfind("P6\n5 3\n255\n", 0) == 0);
        CHECK(bytes.size() == 11 + 45);
        const auto back = decode_ppm(bytes);
        CHECK(back.width == 5);
        CHECK(back.height == 3);
        CHECK(back.rgb == img.rgb);

        // Comments inside the header are allowed.
        const auto commented = decode_ppm("P6 # made by hand\n5 3\n# max\n255\n" + bytes.substr(11));
        CHECK(commented.rgb == img.rgb);
    }

    TEST_CASE("ppm rejects other max values and bad headers with offsets") {
        std::string body(12, '\0');
        CHECK(parse_offset([&] { decode_ppm("P6\n2 2\n65535\n" + body + body); }) == 7);
        CHECK(parse_offset([&] { decode_ppm("P6\n2 2\n100\n" + body); }) == 7);
        CHECK(parse_offset([] { decode_ppm("P3\n2 2\n255\n"); }) == 0);
        CHECK(parse_offset([&] { decode_ppm("P6\n2 x\n255\n" + body); }) == 5);
        CHECK(parse_offset([] { decode_ppm("P6\n2 2\n255\nabc"); }) == 14);
        CHECK(parse_offset([] { decode_ppm("P6\n2 2"); }) == 6);
        CHECK_THROWS_AS(encode_ppm(Image8{2, 2, std::vector<std::uint8_t>(5)}), DimensionError);
    }

    TEST_CASE("pfm round trip is bit exact") {
        Rng rng(11);
        FloatMap m{7, 4, {}};
        for (int i = 0; i < 28; ++i) m.data.push_back(static_cast<float>(rng.normal(0.0, 100.0)));
        m.data[3] = std::numeric_limits<float>::denorm_min();
        m.data[5] = -0.0f;
        m.data[9] = std::numeric_limits<float>::max();
        const auto back = decode_pfm(encode_pfm(m));
        REQUIRE(back.data.size() == m.data.size());
        CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(float)) == 0);
    }

    TEST_CASE("pfm stores little-endian floats bottom row first") {
        FloatMap m{2, 2, {1.0f, 2.0f, 3.0f, 4.0f}};  // top row 1 2, bottom row 3 4
        const std::string bytes = encode_pfm(m);
        const std::string header = "Pf\n2 2\n-1.0\n";
        REQUIRE(bytes.rfind(header, 0) == 0);
        REQUIRE(bytes.size() == header.size() + 16);
        const unsigned char three_le[4] = {0x00, 0x00, 0x40, 0x40};  // 3.0f
        CHECK(std::memcmp(bytes.data() + header.size(), three_le, 4) == 0);

        // A positive scale marks big-endian data.
        std::string be = "Pf\n1 1\n1.0\n";
        be += std::string("\x40\x40\x00\x00", 4);
        CHECK(decode_pfm(be).data[0] == 3.0f);
    }

    TEST_CASE("pfm parse errors") {
        CHECK(parse_offset([] { decode_pfm("PF\n1 1\n-1.0\n0000"); }) == 0);
        CHECK(parse_offset([] { decode_pfm("Pf\n1 1\nabc\n0000"); }) == 7);
        CHECK(parse_offset([] { decode_pfm("Pf\n1 1\n0\n0000"); }) == 7);
        CHECK(parse_offset([] { decode_pfm("Pf\n2 2\n-1.0\n0000"); }) == 16);
    }

    TEST_CASE("tum writes normalised quaternions and reads them back") {
        Rng rng(5);
        std::vector<StampedPose> traj;
        for (int i = 0; i < 20; ++i) {
            const Vec3 aa{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
            traj.push_back({0.1 * i, PoseSE3::from_axis_angle(aa, {rng.normal(), rng.normal(), rng.normal()})});
        }
        const std::string text = encode_tum(traj);
        std::size_t pos = text.find('\n') + 1;
        for (int i = 0; i < 20; ++i) {
            double v[8];
            REQUIRE(std::sscanf(text.c_str() + pos, "%lf %lf %lf %lf %lf %lf %lf %lf", &v[0], &v[1], &v[2], &v[3], &v[4],
                                &v[5], &v[6], &v[7]) == 8);
            const double n = std::sqrt(v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]);
            CHECK(std::abs(n - 1.0) < 1e-6);
            pos = text.find('\n', pos) + 1;
        }
        const auto back = decode_tum(text);
        REQUIRE(back.size() == traj.size());
        for (std::size_t i = 0; i < traj.size(); ++i) {
            CHECK(back[i].timestamp == doctest::Approx(traj[i].timestamp));
            for (int k = 0; k < 9; ++k) CHECK(std::abs(back[i].pose.R[k] - traj[i].pose.R[k]) < 1e-7);
            for (int k = 0; k < 3; ++k) CHECK(std::abs(back[i].pose.t[k] - traj[i].pose.t[k]) < 1e-8);
        }
    }

    TEST_CASE("tum parse errors point at the offending line") {
        const std::string good = "0 0 0 0 0 0 0 1\n";
        CHECK(parse_offset([&] { decode_tum(good + "1 2 3\n"); }) == good.size());
        CHECK(parse_offset([&] { decode_tum(good + good + "1 0 0 0 0 0 0 1 9\n"); }) == 2 * good.size());
        CHECK(parse_offset([] { decode_tum("0 0 0 0 0 0 0 0\n"); }) == 0);
        CHECK(decode_tum("# header only\n\n").empty());
    }
}
