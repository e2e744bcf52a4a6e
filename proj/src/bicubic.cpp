#include "xfuse/bicubic.hpp"

#include "xfuse/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace xfuse {

namespace {

struct Taps {
    std::array<std::uint32_t, 4> index;
    std::array<double, 4> weight;
};

std::vector<Taps> axis_taps(std::uint32_t in_len, std::uint32_t out_len, int factor, double a) {
    std::vector<Taps> taps(out_len);
    const auto last = std::int64_t(in_len) - 1;
    for (std::uint32_t o = 0; o < out_len; ++o) {
        const double src = (double(o) + 0.5) / double(factor) - 0.5;
        const double base = std::floor(src);
        const double t = src - base;
        for (int k = 0; k < 4; ++k) {
            const auto i = std::int64_t(base) - 1 + k;
            taps[o].index[std::size_t(k)] = std::uint32_t(std::clamp<std::int64_t>(i, 0, last));
            taps[o].weight[std::size_t(k)] = cubic_kernel(t - double(k - 1), a);
        }
    }
    return taps;
}

}  // namespace

double cubic_kernel(double x, double a) {
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

Frame upsample_bicubic(const Frame& frame, const ResampleConfig& cfg) {
    validate(frame);
    if (cfg.factor < 1) throw ValidationError("up-sampling factor must be >= 1");
    const auto f = std::uint32_t(cfg.factor);
    const std::uint32_t ow = frame.width * f, oh = frame.height * f;
    const auto tx = axis_taps(frame.width, ow, cfg.factor, cfg.kernel_a);
    const auto ty = axis_taps(frame.height, oh, cfg.factor, cfg.kernel_a);

    // Horizontal pass into double rows, then vertical pass.
    std::vector<double> rows(std::size_t(ow) * frame.height);
    for (std::uint32_t y = 0; y < frame.height; ++y)
        for (std::uint32_t x = 0; x < ow; ++x) {
            const Taps& t = tx[x];
            double s = 0.0;
            for (std::size_t k = 0; k < 4; ++k) s += t.weight[k] * frame.at(t.index[k], y);
            rows[std::size_t(y) * ow + x] = s;
        }
    Frame out(ow, oh, frame.frame_index);
    for (std::uint32_t y = 0; y < oh; ++y) {
        const Taps& t = ty[y];
        for (std::uint32_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < 4; ++k) s += t.weight[k] * rows[std::size_t(t.index[k]) * ow + x];
            out.at(x, y) = float(s);
        }
    }
    return out;
}

}  // namespace xfuse
