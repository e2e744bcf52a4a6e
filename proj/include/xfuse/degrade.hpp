#pragma once

#include "xfuse/frame.hpp"

#include <cstdint>
#include <optional>

namespace xfuse {

inline constexpr double kClipLowQuantile = 0.0035;
inline constexpr double kClipHighQuantile = 0.9965;
inline constexpr double kMinB0 = 10.0;
inline constexpr double kMaxB0 = 1e7;

struct NoiseConfig {
    double b0 = 1e4;  ///< blank scan factor (photon count scale)
    std::uint64_t seed = 0;
    std::optional<double> target_psnr;
};

struct NormalizationStats {
    double p_low = 0.0;
    double p_high = 1.0;
};

/// Block-mean binning; dimensions must be divisible by `factor`.
Frame bin_spatial(const Frame& frame, int factor);

/// Lower nearest-rank percentile: element at sorted position ceil(q*N)-1.
double nearest_rank_percentile(std::vector<float> values, double q);

/// Clips the pooled population of all frames to the 0.35/99.65 percentiles
/// and maps [p_low, p_high] affinely onto [0, 1].
std::pair<Sequence, NormalizationStats> normalize_sequence(const Sequence& seq);

/// Keeps stored positions 0, k, 2k, ...; `keep_trailing` appends the last
/// frame when it is off the stride grid.
Sequence downsample_temporal(const Sequence& seq, int k, bool keep_trailing);

/// out = Poisson(b0 * clamp(in, 0, 1)) / b0 per pixel. The random stream is
/// keyed by (seed, frame_index, pixel offset) so results do not depend on
/// evaluation order.
Frame add_poisson(const Frame& frame, const NoiseConfig& cfg);

/// PSNR of add_poisson output against its clean input pooled over the first
/// frames of `seq` (at least `min_pixels` pixels when available).
double measure_noise_psnr(const Sequence& seq, double b0, std::uint64_t seed,
                          std::size_t min_pixels = std::size_t(1) << 18);

struct B0Calibration {
    double b0 = 0.0;
    double closed_form = 0.0;
    double measured_psnr = 0.0;
    bool refined = false;  ///< true when bisection replaced the closed form
};

/// Picks b0 so the expected PSNR of noisy vs clean frames equals `target_psnr`.
/// Closed form b0 = mean(I) * 10^(PSNR/10) / MAX^2, checked by one Monte Carlo
/// pass and refined by bisection on log10(b0) when off by more than 0.5 dB.
B0Calibration calibrate_b0(const Sequence& seq, double target_psnr, std::uint64_t seed = 0);

}  // namespace xfuse
