#include "xfuse/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <string>

namespace xfuse::bayes {

namespace {

std::size_t count_distinct(std::span<const Vec3> series, std::size_t cap) {
    std::set<std::array<double, 3>> seen;
    for (const Vec3& v : series) {
        seen.insert({v[0], v[1], v[2]});
        if (seen.size() >= cap) break;
    }
    return seen.size();
}

std::vector<Vec3> kmeanspp_seed(std::span<const Vec3> series, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = series.size();
    std::vector<Vec3> centers;
    centers.reserve(k);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    centers.push_back(series[pick(rng)]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = (series[i] - centers[0]).squaredNorm();
    while (centers.size() < k) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng);
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                r -= d2[i];
                if (r < 0.0 && d2[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
            if (d2[chosen] == 0.0)
                chosen = std::size_t(std::max_element(d2.begin(), d2.end()) - d2.begin());
        }
        centers.push_back(series[chosen]);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], (series[i] - centers.back()).squaredNorm());
    }
    return centers;
}

std::size_t nearest(const std::vector<Vec3>& centers, const Vec3& p) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = (p - centers[c]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

// Assigns every point; returns per-cluster counts.
std::vector<std::size_t> assign_all(std::span<const Vec3> series, const std::vector<Vec3>& centers,
                                    std::vector<std::size_t>& labels) {
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t i = 0; i < series.size(); ++i) {
        labels[i] = nearest(centers, series[i]);
        ++counts[labels[i]];
    }
    return counts;
}

// Moves every empty cluster onto the point farthest from its own centroid.
// Returns true when any cluster was reseeded.
bool reseed_empty(std::span<const Vec3> series, std::vector<Vec3>& centers,
                  std::vector<std::size_t>& labels, std::vector<std::size_t>& counts) {
    bool changed = false;
    for (std::size_t c = 0; c < centers.size(); ++c) {
        if (counts[c] != 0) continue;
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (counts[labels[i]] <= 1) continue;
            const double d = (series[i] - centers[labels[i]]).squaredNorm();
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far_d < 0.0) continue;
        --counts[labels[far]];
        labels[far] = c;
        counts[c] = 1;
        centers[c] = series[far];
        changed = true;
    }
    return changed;
}

}  // namespace

int cluster_count(std::uint32_t lr_width, std::uint32_t lr_height) {
    const double raw = 0.05 * std::sqrt(double(lr_width) * double(lr_height));
    const long k = std::lround(raw);
    if (k < 1)
        throw ValidationError("LR frame " + std::to_string(lr_width) + "x" +
                              std::to_string(lr_height) + " too small for the cluster-count rule");
    return int(std::max(k, 2L));
}

ClusterModel fit_clusters(std::span<const Vec3> series, int k, std::uint64_t seed, double cov_eps) {
    if (k < 1) throw ValidationError("cluster count must be >= 1");
    if (series.size() < std::size_t(k))
        throw ValidationError("need at least " + std::to_string(k) + " series, got " +
                              std::to_string(series.size()));

    ClusterModel model;
    auto kk = std::size_t(k);
    const std::size_t distinct = count_distinct(series, kk);
    if (distinct < kk) {
        kk = distinct;
        model.status = Status::Warning;
    }

    std::mt19937_64 rng(seed);
    std::vector<Vec3> centers = kmeanspp_seed(series, kk, rng);
    std::vector<std::size_t> labels(series.size(), 0);
    std::vector<std::size_t> counts;

    int it = 0;
    for (; it < kMaxLloydIterations; ++it) {
        counts = assign_all(series, centers, labels);
        reseed_empty(series, centers, labels, counts);
        std::vector<Vec3> next(kk, Vec3::Zero());
        for (std::size_t i = 0; i < series.size(); ++i) next[labels[i]] += series[i];
        double shift = 0.0;
        for (std::size_t c = 0; c < kk; ++c) {
            next[c] /= double(counts[c]);
            shift = std::max(shift, (next[c] - centers[c]).norm());
        }
        centers = std::move(next);
        if (shift < kCentroidTolerance) {
            ++it;
            break;
        }
    }
    model.iterations = it;

    // Final labels must leave no cluster empty.
    counts = assign_all(series, centers, labels);
    for (int pass = 0; pass < 16 && reseed_empty(series, centers, labels, counts); ++pass) {
        std::vector<Vec3> next(kk, Vec3::Zero());
        for (std::size_t i = 0; i < series.size(); ++i) next[labels[i]] += series[i];
        for (std::size_t c = 0; c < kk; ++c) centers[c] = next[c] / double(counts[c]);
        counts = assign_all(series, centers, labels);
    }

    model.means.assign(kk, Vec3::Zero());
    model.covariances.assign(kk, Mat3::Zero());
    model.counts = counts;
    for (std::size_t i = 0; i < series.size(); ++i) model.means[labels[i]] += series[i];
    for (std::size_t c = 0; c < kk; ++c)
        model.means[c] = counts[c] ? Vec3(model.means[c] / double(counts[c])) : centers[c];
    for (std::size_t i = 0; i < series.size(); ++i) {
        const Vec3 d = series[i] - model.means[labels[i]];
        model.covariances[labels[i]] += d * d.transpose();
    }
    for (std::size_t c = 0; c < kk; ++c) {
        if (counts[c]) model.covariances[c] /= double(counts[c]);
        model.covariances[c] = 0.5 * (model.covariances[c] + model.covariances[c].transpose()).eval();
        model.covariances[c] += cov_eps * Mat3::Identity();
    }
    return model;
}

std::size_t assign_cluster(const ClusterModel& model, const Vec3& point) {
    return nearest(model.means, point);
}

Conditional condition_mid(const Vec3& mean, const Mat3& cov, double x_prev, double x_next) {
    const double a = cov(0, 0), b = cov(0, 2), d = cov(2, 2);
    const double det = a * d - b * b;
    Conditional out;
    if (!(det > 1e-14 * std::max(a * d, std::numeric_limits<double>::min())) || !std::isfinite(det)) {
        out.mean = mean[1];
        out.variance = std::max(cov(1, 1), 0.0);
        out.status = Status::Warning;
        return out;
    }
    // coef = Sigma_mo * Sigma_oo^{-1}
    const double c0 = (cov(1, 0) * d - cov(1, 2) * b) / det;
    const double c2 = (cov(1, 2) * a - cov(1, 0) * b) / det;
    out.mean = mean[1] + c0 * (x_prev - mean[0]) + c2 * (x_next - mean[2]);
    out.variance = std::max(cov(1, 1) - (c0 * cov(0, 1) + c2 * cov(2, 1)), 0.0);
    return out;
}

BlockDegradationModel calibrate_degradation(std::span<const CalibrationPair> pairs, double ridge) {
    if (pairs.empty()) throw ValidationError("degradation calibration needs at least one pair");
    using Mat16 = Eigen::Matrix<double, kBlockPixels, kBlockPixels>;
    Mat16 xtx = Mat16::Zero();
    BlockVec xty = BlockVec::Zero();
    double yty = 0.0;
    std::size_t n = 0;
    std::vector<BlockVec> xs;
    std::vector<double> ys;

    for (const auto& p : pairs) {
        const Frame& hr = *p.hr;
        const Frame& lr = *p.lr;
        if (hr.width != kBlock * lr.width || hr.height != kBlock * lr.height)
            throw ValidationError("HR frame must be 4x the LR frame in each dimension");
        for (std::uint32_t y = 0; y < lr.height; ++y)
            for (std::uint32_t x = 0; x < lr.width; ++x) {
                BlockVec v;
                for (int dy = 0; dy < kBlock; ++dy)
                    for (int dx = 0; dx < kBlock; ++dx)
                        v[dy * kBlock + dx] = hr.at(x * kBlock + std::uint32_t(dx), y * kBlock + std::uint32_t(dy));
                const double t = lr.at(x, y);
                xtx.selfadjointView<Eigen::Lower>().rankUpdate(v);
                xty += t * v;
                yty += t * t;
                xs.push_back(v);
                ys.push_back(t);
                ++n;
            }
    }
    xtx = xtx.selfadjointView<Eigen::Lower>();

    BlockDegradationModel model;
    const Eigen::SelfAdjointEigenSolver<Mat16> eig(xtx, Eigen::EigenvaluesOnly);
    const double max_ev = eig.eigenvalues().maxCoeff();
    const double min_ev = eig.eigenvalues().minCoeff();
    if (!(max_ev > 0.0) || min_ev <= 1e-12 * max_ev) {
        model.w = BlockVec::Constant(1.0 / kBlockPixels);
        model.status = Status::Warning;
    } else {
        model.w = (xtx + ridge * Mat16::Identity()).ldlt().solve(xty);
    }
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ys[i] - model.w.dot(xs[i]);
        rss += r * r;
    }
    model.sigma_r2 = rss / double(n);
    return model;
}

BlockDegradationModel calibrate_degradation(const Frame& hr, const Frame& lr, double ridge) {
    const CalibrationPair pair{&hr, &lr};
    return calibrate_degradation(std::span<const CalibrationPair>(&pair, 1), ridge);
}

KalmanResult kalman_update(const GaussianBlock& prior, const Eigen::VectorXd& w, double sigma_r2,
                           double y) {
    const auto dim = prior.mean.size();
    if (prior.cov.rows() != dim || prior.cov.cols() != dim || w.size() != dim)
        throw ValidationError("Kalman update dimension mismatch");
    if (sigma_r2 < 0.0) throw ValidationError("observation variance must be non-negative");
    const Eigen::VectorXd pw = prior.cov * w;
    const double s = w.dot(pw) + sigma_r2;
    if (!(s > 0.0) || !std::isfinite(s)) return {prior, Status::Warning};
    const Eigen::VectorXd gain = pw / s;
    KalmanResult out;
    out.posterior.mean = prior.mean + gain * (y - w.dot(prior.mean));
    // (I - g w') P == P - g (P w)' for symmetric P
    out.posterior.cov = prior.cov - gain * pw.transpose();
    out.posterior.cov = 0.5 * (out.posterior.cov + out.posterior.cov.transpose()).eval();
    return out;
}

KalmanResult kalman_update_block(const GaussianBlock& prior, const BlockDegradationModel& model,
                                 double y) {
    return kalman_update(prior, Eigen::VectorXd(model.w), model.sigma_r2, y);
}

std::vector<Vec3> pixel_series(const Frame& lr_prev, const Frame& lr_ref, const Frame& lr_next) {
    if (!lr_prev.same_shape(lr_ref) || !lr_next.same_shape(lr_ref))
        throw ValidationError("LR frames must share dimensions");
    std::vector<Vec3> series(lr_ref.size());
    for (std::size_t i = 0; i < series.size(); ++i)
        series[i] = Vec3(lr_prev.pixels[i], lr_ref.pixels[i], lr_next.pixels[i]);
    return series;
}

Frame fuse_frame(const FuseInputs& in, const ClusterModel& model, const BlockDegradationModel& deg,
                 const FuseOptions& opt, FuseStats* stats) {
    const Frame& ref = in.lr_ref;
    if (!in.lr_prev.same_shape(ref) || !in.lr_next.same_shape(ref))
        throw ValidationError("LR frames must share dimensions");
    if (!in.hr_prev.same_shape(in.hr_next) || in.hr_prev.width != kBlock * ref.width ||
        in.hr_prev.height != kBlock * ref.height)
        throw ValidationError("HR frames must be 4x the LR frame in each dimension");
    if (in.delta_back < 1 || in.delta_fwd < 1)
        throw ValidationError("HR neighbour distances must be >= 1");
    if (model.size() == 0) throw ValidationError("empty cluster model");
    if (deg.sigma_r2 < 0.0) throw ValidationError("observation variance must be non-negative");

    const double wb = 1.0 / in.delta_back, wf = 1.0 / in.delta_fwd;
    const double blend_b = wb / (wb + wf), blend_f = wf / (wb + wf);
    const double drift = opt.drift_rate * std::min(in.delta_back, in.delta_fwd);
    const double wtw = deg.w.squaredNorm();

    FuseStats local;
    Frame out(in.hr_prev.width, in.hr_prev.height, ref.frame_index);
    for (std::uint32_t y = 0; y < ref.height; ++y)
        for (std::uint32_t x = 0; x < ref.width; ++x) {
            const double xp = in.lr_prev.at(x, y), xr = ref.at(x, y), xn = in.lr_next.at(x, y);
            const std::size_t c = assign_cluster(model, Vec3(xp, xr, xn));
            const Conditional cond = condition_mid(model.means[c], model.covariances[c], xp, xn);
            if (cond.status != Status::Ok) ++local.conditioning_fallbacks;

            BlockVec m;
            for (int dy = 0; dy < kBlock; ++dy)
                for (int dx = 0; dx < kBlock; ++dx) {
                    const std::uint32_t hx = x * kBlock + std::uint32_t(dx);
                    const std::uint32_t hy = y * kBlock + std::uint32_t(dy);
                    const double fwd = in.hr_prev.at(hx, hy) + (cond.mean - xp);
                    const double bwd = in.hr_next.at(hx, hy) - (xn - cond.mean);
                    m[dy * kBlock + dx] = blend_b * fwd + blend_f * bwd;
                }

            // Kalman update with the diagonal prior P = s I.
            const double s = cond.variance + drift;
            const double innov_var = s * wtw + deg.sigma_r2;
            if (innov_var > 0.0 && std::isfinite(innov_var)) {
                m += (s / innov_var) * (xr - deg.w.dot(m)) * deg.w;
            } else {
                ++local.degenerate_updates;
            }

            for (int dy = 0; dy < kBlock; ++dy)
                for (int dx = 0; dx < kBlock; ++dx) {
                    double v = m[dy * kBlock + dx];
                    if (opt.clamp_output) v = std::clamp(v, 0.0, 1.0);
                    out.at(x * kBlock + std::uint32_t(dx), y * kBlock + std::uint32_t(dy)) = float(v);
                }
        }
    if (stats) *stats = local;
    return out;
}

Reconstruction reconstruct(const FuseInputs& in, const ReconstructOptions& opt) {
    const int k = opt.clusters.value_or(cluster_count(in.lr_ref.width, in.lr_ref.height));
    const auto series = pixel_series(in.lr_prev, in.lr_ref, in.lr_next);
    Reconstruction r{Frame{}, fit_clusters(series, std::min<int>(k, int(series.size())), opt.seed), {}, {}};
    const CalibrationPair pairs[] = {{&in.hr_prev, &in.lr_prev}, {&in.hr_next, &in.lr_next}};
    r.degradation = calibrate_degradation(pairs);
    r.frame = fuse_frame(in, r.clusters, r.degradation, opt.fuse, &r.stats);
    return r;
}

void write_cluster_csv(std::ostream& out, const ClusterModel& model) {
    out << "cluster,count,mean0,mean1,mean2,cov00,cov01,cov02,cov10,cov11,cov12,cov20,cov21,cov22\n";
    char buf[64];
    for (std::size_t c = 0; c < model.size(); ++c) {
        out << c << ',' << (c < model.counts.size() ? model.counts[c] : 0);
        for (int i = 0; i < 3; ++i) {
            std::snprintf(buf, sizeof buf, ",%.10g", model.means[c][i]);
            out << buf;
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                std::snprintf(buf, sizeof buf, ",%.10g", model.covariances[c](i, j));
                out << buf;
            }
        out << '\n';
    }
}

}  // namespace xfuse::bayes
