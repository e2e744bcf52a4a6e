#pragma once

#include "xfuse/frame.hpp"

#include <cstdint>

namespace xfuse {

/// Synthetic HR ground truth: a smooth textured background, bright disks
/// translating at constant velocity and a dark wedge ("keyhole") hanging from
/// the top edge whose length oscillates over time.
struct PhantomConfig {
    std::uint32_t width = 256;
    std::uint32_t height = 256;
    std::uint32_t n_frames = 450;
    std::uint32_t n_particles = 6;
    double particle_radius = 5.0;
    double particle_speed = 0.4;  ///< pixels/frame; direction sampled per particle
    double keyhole_depth_amplitude = 0.6;
    double background_texture_scale = 12.0;  ///< shortest sinusoid period, pixels
    std::uint64_t seed = 0;
};

void validate(const PhantomConfig& cfg);

Sequence gen_phantom(const PhantomConfig& cfg);

/// Frame t divided pixel-wise by max(frame t-1, epsilon); the first frame is dropped.
Sequence div_prev(const Sequence& seq, double epsilon = 1e-3);

}  // namespace xfuse
