#include "xfuse/phantom.hpp"

#include "xfuse/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace xfuse {

namespace {

constexpr int kTextureTerms = 6;
constexpr double kBackgroundLevel = 0.45;
constexpr double kTextureAmplitude = 0.025;  // per term; six terms span +-0.15
constexpr double kParticleAmplitude = 0.3;
constexpr double kKeyholeHalfWidthFrac = 0.06;
constexpr double kKeyholeBaseDepthFrac = 0.25;
constexpr double kKeyholeSwingFrac = 0.1;
constexpr double kKeyholePeriodFrames = 40.0;

struct Wave {
    double kx, ky, phase;
};

struct Particle {
    double x0, y0, vx, vy;
};

double start_coordinate(double extent, double radius, double travel) {
    const double lo = radius + std::max(0.0, -travel);
    const double hi = extent - 1.0 - radius - std::max(0.0, travel);
    return hi >= lo ? 0.5 * (lo + hi) : 0.5 * (extent - 1.0 - travel);
}

}  // namespace

void validate(const PhantomConfig& cfg) {
    if (cfg.width == 0 || cfg.height == 0 || cfg.n_frames == 0)
        throw ValidationError("phantom width, height and frame count must be positive");
    if (!(cfg.particle_radius > 0.0)) throw ValidationError("particle radius must be positive");
    if (!(cfg.background_texture_scale > 0.0))
        throw ValidationError("background texture scale must be positive");
    if (!(cfg.keyhole_depth_amplitude >= 0.0) || cfg.keyhole_depth_amplitude > 1.0)
        throw ValidationError("keyhole depth amplitude must lie in [0, 1]");
    const double limit = double(std::min(cfg.width, cfg.height)) / double(cfg.n_frames);
    if (!(cfg.particle_speed >= 0.0) || cfg.particle_speed >= limit)
        throw ValidationError("particle speed must lie in [0, " + std::to_string(limit) +
                              ") so motion stays in frame");
}

Sequence gen_phantom(const PhantomConfig& cfg) {
    validate(cfg);
    const double two_pi = 2.0 * std::numbers::pi;

    std::mt19937_64 bg_rng(cfg.seed ^ 0x6A09E667F3BCC908ull);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Wave> waves;
    for (int i = 0; i < kTextureTerms; ++i) {
        const double period = cfg.background_texture_scale * (1.0 + unit(bg_rng));
        const double theta = two_pi * unit(bg_rng);
        waves.push_back({two_pi * std::cos(theta) / period, two_pi * std::sin(theta) / period,
                         two_pi * unit(bg_rng)});
    }

    std::mt19937_64 p_rng(cfg.seed ^ 0xBB67AE8584CAA73Bull);
    const double travel_frames = double(cfg.n_frames - 1);
    std::vector<Particle> particles;
    for (std::uint32_t i = 0; i < cfg.n_particles; ++i) {
        const double theta = two_pi * unit(p_rng);
        const double vx = cfg.particle_speed * std::cos(theta);
        const double vy = cfg.particle_speed * std::sin(theta);
        const double cx = start_coordinate(cfg.width, cfg.particle_radius, vx * travel_frames);
        const double cy = start_coordinate(cfg.height, cfg.particle_radius, vy * travel_frames);
        // Spread starts over the feasible box rather than all at its center.
        const double jx = (unit(p_rng) - 0.5), jy = (unit(p_rng) - 0.5);
        const double free_x = std::max(0.0, double(cfg.width) - 1.0 - 2.0 * cfg.particle_radius -
                                                std::abs(vx) * travel_frames);
        const double free_y = std::max(0.0, double(cfg.height) - 1.0 - 2.0 * cfg.particle_radius -
                                                std::abs(vy) * travel_frames);
        particles.push_back({cx + jx * free_x, cy + jy * free_y, vx, vy});
    }

    const std::uint32_t w = cfg.width, h = cfg.height;
    std::vector<float> background(std::size_t(w) * h);
    for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x) {
            double v = kBackgroundLevel;
            for (const Wave& wv : waves) v += kTextureAmplitude * std::sin(wv.kx * x + wv.ky * y + wv.phase);
            background[std::size_t(y) * w + x] = float(v);
        }

    Sequence seq;
    seq.role = Role::HR;
    seq.native_step = 1;
    seq.frames.reserve(cfg.n_frames);
    const double key_cx = 0.5 * (double(w) - 1.0);
    const double key_hw = std::max(1.0, kKeyholeHalfWidthFrac * w);
    for (std::uint32_t t = 0; t < cfg.n_frames; ++t) {
        Frame f(w, h, std::vector<float>(background), t);
        const double depth =
            double(h) * (kKeyholeBaseDepthFrac +
                         kKeyholeSwingFrac * std::sin(two_pi * double(t) / kKeyholePeriodFrames));
        for (const Particle& p : particles) {
            const double px = p.x0 + p.vx * t, py = p.y0 + p.vy * t;
            const double reach = cfg.particle_radius + 1.0;
            const auto x0 = std::uint32_t(std::clamp(std::floor(px - reach), 0.0, double(w - 1)));
            const auto x1 = std::uint32_t(std::clamp(std::ceil(px + reach), 0.0, double(w - 1)));
            const auto y0 = std::uint32_t(std::clamp(std::floor(py - reach), 0.0, double(h - 1)));
            const auto y1 = std::uint32_t(std::clamp(std::ceil(py + reach), 0.0, double(h - 1)));
            for (std::uint32_t y = y0; y <= y1; ++y)
                for (std::uint32_t x = x0; x <= x1; ++x) {
                    const double d = std::hypot(double(x) - px, double(y) - py);
                    const double cover = std::clamp(cfg.particle_radius + 0.5 - d, 0.0, 1.0);
                    f.at(x, y) += float(kParticleAmplitude * cover);
                }
        }
        for (std::uint32_t y = 0; y < h; ++y)
            for (std::uint32_t x = 0; x < w; ++x) {
                double v = f.at(x, y);
                if (cfg.keyhole_depth_amplitude > 0.0) {
                    const double edge = depth * (1.0 - std::abs(double(x) - key_cx) / key_hw) - double(y);
                    const double cover = std::clamp(edge + 0.5, 0.0, 1.0);
                    v *= 1.0 - cfg.keyhole_depth_amplitude * cover;
                }
                f.at(x, y) = float(std::clamp(v, 0.0, 1.0));
            }
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

Sequence div_prev(const Sequence& seq, double epsilon) {
    if (seq.size() < 2) throw ValidationError("div_prev needs at least two frames");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    validate(seq);
    Sequence out;
    out.role = seq.role;
    out.native_step = seq.native_step;
    for (std::size_t t = 1; t < seq.size(); ++t) {
        const Frame& prev = seq.frames[t - 1];
        Frame f = seq.frames[t];
        for (std::size_t i = 0; i < f.size(); ++i)
            f.pixels[i] = float(double(f.pixels[i]) / std::max(double(prev.pixels[i]), epsilon));
        out.frames.push_back(std::move(f));
    }
    return out;
}

}  // namespace xfuse
