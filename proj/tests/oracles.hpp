#pragma once

// Slow, obviously-correct reference implementations used by the tests.

#include "xfuse/attention.hpp"
#include "xfuse/frame.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace oracle {

/// Lower nearest-rank percentile from a full sort: element ceil(qN) - 1.
inline double percentile(std::vector<float> v, double q) {
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * double(v.size())));
    return v[rank == 0 ? 0 : rank - 1];
}

/// SSIM by direct 2-D weighted sums at every valid window position.
inline double ssim(const std::vector<double>& a, const std::vector<double>& b, int w, int h,
                   int win = 11, double sigma = 1.5, double range = 1.0) {
    std::vector<double> g(static_cast<std::size_t>(win));
    double gs = 0.0;
    for (int i = 0; i < win; ++i) {
        const double d = i - win / 2;
        g[std::size_t(i)] = std::exp(-d * d / (2 * sigma * sigma));
        gs += g[std::size_t(i)];
    }
    const double c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
    double total = 0.0;
    int count = 0;
    for (int y0 = 0; y0 + win <= h; ++y0)
        for (int x0 = 0; x0 + win <= w; ++x0) {
            double mx = 0, my = 0;
            for (int j = 0; j < win; ++j)
                for (int i = 0; i < win; ++i) {
                    const double wt = g[std::size_t(i)] * g[std::size_t(j)] / (gs * gs);
                    const std::size_t p = std::size_t((y0 + j) * w + x0 + i);
                    mx += wt * a[p];
                    my += wt * b[p];
                }
            double vx = 0, vy = 0, cxy = 0;
            for (int j = 0; j < win; ++j)
                for (int i = 0; i < win; ++i) {
                    const double wt = g[std::size_t(i)] * g[std::size_t(j)] / (gs * gs);
                    const std::size_t p = std::size_t((y0 + j) * w + x0 + i);
                    vx += wt * (a[p] - mx) * (a[p] - mx);
                    vy += wt * (b[p] - my) * (b[p] - my);
                    cxy += wt * (a[p] - mx) * (b[p] - my);
                }
            total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / count;
}

/// Ordinary least squares with intercept: returns [intercept, slopes...].
inline Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::MatrixXd design(x.rows(), x.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(x.cols()) = x;
    return design.colPivHouseholderQr().solve(y);
}

/// Block-mean binning by explicit loops.
inline std::vector<double> bin_mean(const xfuse::Frame& f, int k) {
    const std::uint32_t w = f.width / std::uint32_t(k), h = f.height / std::uint32_t(k);
    std::vector<double> out(std::size_t(w) * h, 0.0);
    for (std::uint32_t y = 0; y < h * std::uint32_t(k); ++y)
        for (std::uint32_t x = 0; x < w * std::uint32_t(k); ++x)
            out[std::size_t(y / std::uint32_t(k)) * w + x / std::uint32_t(k)] += f.at(x, y);
    for (double& v : out) v /= double(k * k);
    return out;
}

}  // namespace oracle

namespace testutil {

inline xfuse::Frame random_frame(std::uint32_t w, std::uint32_t h, std::uint64_t seed, float lo = 0.f,
                                 float hi = 1.f, std::int64_t index = 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    xfuse::Frame f(w, h, index);
    for (float& p : f.pixels) p = u(rng);
    return f;
}

inline xfuse::Frame constant_frame(std::uint32_t w, std::uint32_t h, float v, std::int64_t index = 0) {
    xfuse::Frame f(w, h, index);
    std::fill(f.pixels.begin(), f.pixels.end(), v);
    return f;
}

/// Attention records for HR keyframes every `spacing` frames: each group holds
/// offsets 0..spacing-1, plus a closing record at the last HR frame. Backward
/// scores decay with offset and forward scores grow, with multiplicative jitter.
inline std::vector<xfuse::attention::AttentionRecord> synthetic_attention(int groups, int spacing,
                                                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.8, 1.2), scale(0.1, 10.0);
    std::vector<xfuse::attention::AttentionRecord> out;
    for (int g = 0; g < groups; ++g) {
        const std::int64_t prev = std::int64_t(g) * spacing, next = prev + spacing;
        const double s = scale(rng);
        const int last = g + 1 == groups ? spacing : spacing - 1;
        for (int o = 0; o <= last; ++o) {
            const double frac = double(o) / spacing;
            out.push_back({prev + o, prev, next, s * (1.0 - 0.7 * frac) * jitter(rng),
                           s * (0.3 + 0.7 * frac) * jitter(rng)});
        }
    }
    return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() / ("xfuse_" + tag + "_" + std::to_string(stamp));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
