#include "oracles.hpp"

#include "xfuse/degrade.hpp"
#include "xfuse/error.hpp"
#include "xfuse/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace xfuse;

TEST_CASE("bin_spatial matches the block-mean oracle") {
    const Frame f = testutil::random_frame(16, 12, 3, 0.f, 1.f, 9);
    const Frame b = bin_spatial(f, 4);
    CHECK(b.width == 4);
    CHECK(b.height == 3);
    CHECK(b.frame_index == 9);
    const auto ref = oracle::bin_mean(f, 4);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(b.pixels[i] == doctest::Approx(ref[i]).epsilon(1e-6));
    CHECK_THROWS_AS(bin_spatial(testutil::random_frame(10, 8, 1), 4), ValidationError);
    CHECK_THROWS_AS(bin_spatial(f, 1), ValidationError);
}

TEST_CASE("nearest-rank percentile agrees with the full-sort oracle") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(-1.f, 1.f);
    for (std::size_t n : {1u, 2u, 7u, 100u, 1001u}) {
        std::vector<float> v(n);
        for (float& x : v) x = u(rng);
        for (double q : {0.0, 0.0035, 0.25, 0.5, 0.9965, 1.0})
            CHECK(nearest_rank_percentile(v, q) == oracle::percentile(v, q));
    }
    CHECK(nearest_rank_percentile({1, 2, 3, 4}, 0.5) == 2);
    CHECK_THROWS_AS(nearest_rank_percentile({}, 0.5), ValidationError);
}

TEST_CASE("normalize_sequence clips to the 0.35 / 99.65 percentiles") {
    Sequence s;
    for (int i = 0; i < 3; ++i) s.frames.push_back(testutil::random_frame(20, 10, std::uint64_t(i), -2.f, 5.f, i));
    s.frames[1].pixels[0] = 1000.f;  // outlier gets clipped
    const auto [out, st] = normalize_sequence(s);
    std::vector<float> all;
    for (const Frame& f : s.frames) all.insert(all.end(), f.pixels.begin(), f.pixels.end());
    CHECK(st.p_low == oracle::percentile(all, 0.0035));
    CHECK(st.p_high == oracle::percentile(all, 0.9965));
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < s.frames[k].size(); ++i) {
            const double v = out.frames[k].pixels[i];
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            const double want =
                std::clamp((double(s.frames[k].pixels[i]) - st.p_low) / (st.p_high - st.p_low), 0.0, 1.0);
            CHECK(v == doctest::Approx(want).epsilon(1e-6));
        }
    CHECK(out.frames[1].pixels[0] == 1.0f);

    Sequence flat;
    flat.frames.push_back(testutil::constant_frame(4, 4, 0.3f));
    CHECK_THROWS_AS(normalize_sequence(flat), ValidationError);
}

TEST_CASE("downsample_temporal keeps every k-th frame") {
    Sequence s;
    for (int i = 0; i < 45; ++i) s.frames.push_back(testutil::constant_frame(2, 2, float(i), i));
    const auto d = downsample_temporal(s, 20, false);
    CHECK(d.frame_indices() == std::vector<std::int64_t>{0, 20, 40});
    CHECK(d.native_step == 20);
    CHECK(downsample_temporal(s, 20, true).frame_indices() == std::vector<std::int64_t>{0, 20, 40, 44});
    CHECK(downsample_temporal(s, 450, true).frame_indices() == std::vector<std::int64_t>{0, 44});
    CHECK(downsample_temporal(s, 450, false).frame_indices() == std::vector<std::int64_t>{0});
    CHECK_THROWS_AS(downsample_temporal(s, 0, false), ValidationError);
}

TEST_CASE("add_poisson is deterministic, seeded and unbiased") {
    const Frame f = testutil::random_frame(64, 64, 1, 0.f, 1.f, 3);
    const NoiseConfig cfg{1000.0, 7, std::nullopt};
    const Frame a = add_poisson(f, cfg), b = add_poisson(f, cfg);
    CHECK(a.pixels == b.pixels);
    CHECK(add_poisson(f, {1000.0, 8, std::nullopt}).pixels != a.pixels);
    Frame g = f;
    g.frame_index = 4;
    CHECK(add_poisson(g, cfg).pixels != a.pixels);

    double bias = 0, var = 0, mean_i = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double d = double(a.pixels[i]) - f.pixels[i];
        bias += d;
        var += d * d;
        mean_i += f.pixels[i];
        // counts are integers
        CHECK(std::abs(a.pixels[i] * 1000.0 - std::round(a.pixels[i] * 1000.0)) < 1e-3);
    }
    bias /= double(f.size());
    var /= double(f.size());
    mean_i /= double(f.size());
    CHECK(std::abs(bias) < 3 * std::sqrt(mean_i / 1000.0 / double(f.size())) + 1e-9);
    CHECK(var == doctest::Approx(mean_i / 1000.0).epsilon(0.05));
    CHECK_THROWS_AS(add_poisson(f, {0.0, 0, std::nullopt}), ValidationError);
}

TEST_CASE("calibrate_b0 closed form and errors") {
    Sequence s;
    s.frames.push_back(testutil::constant_frame(256, 256, 0.25f));
    const auto c = calibrate_b0(s, 40.0, 1);
    CHECK(c.closed_form == doctest::Approx(0.25 * 1e4).epsilon(1e-12));
    CHECK_FALSE(c.refined);
    CHECK(std::abs(c.measured_psnr - 40.0) <= 0.5);
    CHECK_THROWS_AS(calibrate_b0(s, 80.0), ValidationError);
    CHECK_THROWS_AS(calibrate_b0(s, 5.0), ValidationError);

    Sequence dim;
    dim.frames.push_back(testutil::constant_frame(8, 8, 1e-6f));
    CHECK_THROWS_AS(calibrate_b0(dim, 20.0), ValidationError);  // b0 would fall below 10

    Sequence zero;
    zero.frames.push_back(testutil::constant_frame(8, 8, 0.f));
    CHECK_THROWS_AS(calibrate_b0(zero, 30.0), ValidationError);
}

TEST_CASE("calibrate_b0 bisects when clipping breaks the closed form") {
    // values above 1 are clipped before sampling, adding a fixed error floor
    Sequence s;
    Frame f = testutil::random_frame(128, 128, 2, 0.2f, 0.8f);
    for (std::size_t i = 0; i < f.size(); i += 4) f.pixels[i] = 1.02f;
    s.frames.push_back(f);
    const auto c = calibrate_b0(s, 35.0, 0);
    CHECK(c.refined);
    CHECK(std::abs(c.measured_psnr - 35.0) < std::abs(measure_noise_psnr(s, c.closed_form, 0) - 35.0));
}
