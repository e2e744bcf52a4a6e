#pragma once

#include "xfuse/frame.hpp"

namespace xfuse {

struct ResampleConfig {
    int factor = 4;
    double kernel_a = -0.75;  ///< -0.5 gives the Keys kernel
};

/// Cubic convolution kernel with free parameter `a`, support [-2, 2].
double cubic_kernel(double x, double a);

/// Separable 4x4-tap cubic convolution up-sampling with half-pixel centers
/// (source coordinate (x + 0.5) / factor - 0.5) and clamp-to-edge borders.
Frame upsample_bicubic(const Frame& frame, const ResampleConfig& cfg = {});

}  // namespace xfuse
