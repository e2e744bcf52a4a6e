#include "xfuse/degrade.hpp"

#include "xfuse/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace xfuse {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stateless-keyed splitmix64 stream: the n-th draw depends only on (key, n).
class CounterRng {
public:
    using result_type = std::uint64_t;
    explicit CounterRng(std::uint64_t key) : key_(key) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return splitmix64(key_ + 0x9E3779B97F4A7C15ull * ++counter_); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t pixel_key(std::uint64_t seed, std::int64_t frame_index, std::size_t offset) {
    std::uint64_t k = splitmix64(seed);
    k = splitmix64(k ^ static_cast<std::uint64_t>(frame_index));
    return splitmix64(k ^ static_cast<std::uint64_t>(offset));
}

void check_b0(double b0) {
    if (!(b0 > 0.0) || !std::isfinite(b0))
        throw ValidationError("b0 must be positive and finite, got " + std::to_string(b0));
}

double clamped_mean(const Sequence& seq) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const Frame& f : seq.frames) {
        for (float v : f.pixels) sum += std::clamp(double(v), 0.0, 1.0);
        n += f.size();
    }
    return n ? sum / double(n) : 0.0;
}

}  // namespace

Frame bin_spatial(const Frame& frame, int factor) {
    validate(frame);
    if (factor < 2) throw ValidationError("binning factor must be >= 2");
    const auto f = std::uint32_t(factor);
    if (frame.width % f != 0 || frame.height % f != 0)
        throw ValidationError("frame " + std::to_string(frame.width) + "x" +
                              std::to_string(frame.height) + " not divisible by binning factor " +
                              std::to_string(factor));
    Frame out(frame.width / f, frame.height / f, frame.frame_index);
    const double inv = 1.0 / double(f * f);
    for (std::uint32_t y = 0; y < out.height; ++y)
        for (std::uint32_t x = 0; x < out.width; ++x) {
            double s = 0.0;
            for (std::uint32_t dy = 0; dy < f; ++dy)
                for (std::uint32_t dx = 0; dx < f; ++dx) s += frame.at(x * f + dx, y * f + dy);
            out.at(x, y) = float(s * inv);
        }
    return out;
}

double nearest_rank_percentile(std::vector<float> values, double q) {
    if (values.empty()) throw ValidationError("percentile of empty population");
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(q * double(n)));
    const std::size_t pos = rank == 0 ? 0 : std::min(rank - 1, n - 1);
    std::nth_element(values.begin(), values.begin() + std::ptrdiff_t(pos), values.end());
    return values[pos];
}

std::pair<Sequence, NormalizationStats> normalize_sequence(const Sequence& seq) {
    if (seq.empty()) throw ValidationError("cannot normalize an empty sequence");
    validate(seq);
    std::vector<float> pooled;
    pooled.reserve(seq.size() * seq.frames.front().size());
    for (const Frame& f : seq.frames) pooled.insert(pooled.end(), f.pixels.begin(), f.pixels.end());

    NormalizationStats stats;
    stats.p_low = nearest_rank_percentile(pooled, kClipLowQuantile);
    stats.p_high = nearest_rank_percentile(std::move(pooled), kClipHighQuantile);
    if (!(stats.p_low < stats.p_high))
        throw ValidationError("constant sequence: clipping percentiles coincide at " +
                              std::to_string(stats.p_low));

    Sequence out = seq;
    const double scale = 1.0 / (stats.p_high - stats.p_low);
    for (Frame& f : out.frames)
        for (float& v : f.pixels)
            v = float((std::clamp(double(v), stats.p_low, stats.p_high) - stats.p_low) * scale);
    return {std::move(out), stats};
}

Sequence downsample_temporal(const Sequence& seq, int k, bool keep_trailing) {
    if (k < 1) throw ValidationError("temporal down-sampling factor must be >= 1");
    if (seq.empty()) throw ValidationError("cannot down-sample an empty sequence");
    Sequence out;
    out.role = seq.role;
    out.native_step = seq.native_step * k;
    for (std::size_t i = 0; i < seq.size(); i += std::size_t(k)) out.frames.push_back(seq.frames[i]);
    if (keep_trailing && (seq.size() - 1) % std::size_t(k) != 0)
        out.frames.push_back(seq.frames.back());
    return out;
}

Frame add_poisson(const Frame& frame, const NoiseConfig& cfg) {
    check_b0(cfg.b0);
    Frame out = frame;
    for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
        const double mean = cfg.b0 * std::clamp(double(frame.pixels[i]), 0.0, 1.0);
        if (mean <= 0.0) {
            out.pixels[i] = 0.0f;
            continue;
        }
        CounterRng rng(pixel_key(cfg.seed, frame.frame_index, i));
        std::poisson_distribution<std::int64_t> dist(mean);
        out.pixels[i] = float(double(dist(rng)) / cfg.b0);
    }
    return out;
}

double measure_noise_psnr(const Sequence& seq, double b0, std::uint64_t seed,
                          std::size_t min_pixels) {
    check_b0(b0);
    double sse = 0.0;
    std::size_t n = 0;
    for (const Frame& f : seq.frames) {
        const Frame noisy = add_poisson(f, {b0, seed, std::nullopt});
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double d = double(noisy.pixels[i]) - double(f.pixels[i]);
            sse += d * d;
        }
        n += f.size();
        if (n >= min_pixels) break;
    }
    if (n == 0) throw ValidationError("cannot measure noise on an empty sequence");
    if (sse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(double(n) / sse);
}

B0Calibration calibrate_b0(const Sequence& seq, double target_psnr, std::uint64_t seed) {
    if (!(target_psnr >= 10.0 && target_psnr <= 70.0))
        throw ValidationError("target PSNR must lie in [10, 70] dB");
    if (seq.empty()) throw ValidationError("cannot calibrate noise on an empty sequence");
    const double mean = clamped_mean(seq);
    if (!(mean > 0.0)) throw ValidationError("cannot calibrate noise on an all-zero sequence");

    B0Calibration cal;
    cal.closed_form = mean * std::pow(10.0, target_psnr / 10.0);
    if (cal.closed_form < kMinB0 || cal.closed_form > kMaxB0) {
        const double lo = 10.0 * std::log10(kMinB0 / mean);
        const double hi = 10.0 * std::log10(kMaxB0 / mean);
        throw ValidationError("target PSNR " + std::to_string(target_psnr) +
                              " dB unreachable with b0 in [10, 1e7]; achievable range is [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "] dB");
    }
    cal.b0 = cal.closed_form;
    cal.measured_psnr = measure_noise_psnr(seq, cal.b0, seed);
    if (std::abs(cal.measured_psnr - target_psnr) <= 0.5) return cal;

    // Monte Carlo disagrees with the closed form; bisect on log10(b0).
    double lo = std::log10(kMinB0), hi = std::log10(kMaxB0);
    double best = cal.b0, best_err = std::abs(cal.measured_psnr - target_psnr);
    double best_psnr = cal.measured_psnr;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double b0 = std::pow(10.0, mid);
        const double p = measure_noise_psnr(seq, b0, seed);
        if (std::abs(p - target_psnr) < best_err) {
            best = b0;
            best_err = std::abs(p - target_psnr);
            best_psnr = p;
        }
        (p < target_psnr ? lo : hi) = mid;
    }
    cal.b0 = best;
    cal.measured_psnr = best_psnr;
    cal.refined = true;
    return cal;
}

}  // namespace xfuse
