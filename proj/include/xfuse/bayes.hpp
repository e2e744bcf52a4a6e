#pragma once

// Bayesian spatio-temporal fusion baseline.
//
// Per-pixel temporal dynamics of the three LR frames are clustered with
// k-means; each cluster is a 3-D Gaussian over (x_prev, x_ref, x_next). The
// HR block under every LR pixel is predicted from the two HR neighbours via
// the cluster's conditional mean of the middle time, then corrected with the
// reference LR pixel through a linear-Gaussian (Kalman) update against a
// calibrated 4x4 -> 1 degradation kernel. Blocks are independent because the
// kernel footprints do not overlap.

#include "xfuse/error.hpp"
#include "xfuse/frame.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace xfuse::bayes {

inline constexpr int kBlock = 4;
inline constexpr int kBlockPixels = kBlock * kBlock;
inline constexpr double kCovEpsilon = 1e-8;
inline constexpr double kRidgeLambda = 1e-6;
inline constexpr double kDriftRate = 1e-4;  ///< prior variance growth per frame of HR distance
inline constexpr int kMaxLloydIterations = 100;
inline constexpr double kCentroidTolerance = 1e-6;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using BlockVec = Eigen::Matrix<double, kBlockPixels, 1>;

/// round(0.05 * sqrt(width * height)), at least 2. Throws when the rule gives < 1.
int cluster_count(std::uint32_t lr_width, std::uint32_t lr_height);

struct ClusterModel {
    std::vector<Vec3> means;
    std::vector<Mat3> covariances;
    std::vector<std::size_t> counts;
    int iterations = 0;
    Status status = Status::Ok;  ///< Warning when fewer distinct points than requested clusters

    std::size_t size() const { return means.size(); }
};

/// k-means++ seeding followed by Lloyd iterations (Euclidean distance, ties to
/// the lowest index). Empty clusters are reseeded at the point farthest from
/// its centroid. Covariances are population covariances plus `cov_eps * I`.
ClusterModel fit_clusters(std::span<const Vec3> series, int k, std::uint64_t seed,
                          double cov_eps = kCovEpsilon);

/// Nearest cluster mean; ties resolve to the lowest index.
std::size_t assign_cluster(const ClusterModel& model, const Vec3& point);

struct Conditional {
    double mean = 0.0;
    double variance = 0.0;
    Status status = Status::Ok;  ///< Warning when the endpoint block was singular
};

/// Gaussian conditional of the middle component given the two endpoints.
Conditional condition_mid(const Vec3& mean, const Mat3& cov, double x_prev, double x_next);

struct BlockDegradationModel {
    BlockVec w = BlockVec::Constant(1.0 / kBlockPixels);
    double sigma_r2 = 0.0;
    Status status = Status::Ok;  ///< Warning when the design was rank deficient
};

struct CalibrationPair {
    const Frame* hr;
    const Frame* lr;
};

/// Ridge least squares of LR pixels on their 4x4 HR blocks, pooled over pairs.
BlockDegradationModel calibrate_degradation(std::span<const CalibrationPair> pairs,
                                            double ridge = kRidgeLambda);
BlockDegradationModel calibrate_degradation(const Frame& hr, const Frame& lr,
                                            double ridge = kRidgeLambda);

/// Gaussian state of arbitrary dimension (16 for an HR block).
struct GaussianBlock {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

struct KalmanResult {
    GaussianBlock posterior;
    Status status = Status::Ok;
};

/// Scalar-observation update y = w'x + e, e ~ N(0, sigma_r2).
KalmanResult kalman_update(const GaussianBlock& prior, const Eigen::VectorXd& w, double sigma_r2,
                           double y);
KalmanResult kalman_update_block(const GaussianBlock& prior, const BlockDegradationModel& model,
                                 double y);

struct FuseInputs {
    const Frame& lr_prev;
    const Frame& lr_ref;
    const Frame& lr_next;
    const Frame& hr_prev;
    const Frame& hr_next;
    int delta_back = 1;  ///< frames from hr_prev to the target
    int delta_fwd = 1;   ///< frames from the target to hr_next
};

struct FuseOptions {
    double drift_rate = kDriftRate;
    bool clamp_output = true;
};

struct FuseStats {
    std::size_t conditioning_fallbacks = 0;
    std::size_t degenerate_updates = 0;
};

/// Reconstructs the HR frame at the reference LR time. `lr_prev` / `lr_next`
/// are the LR frames co-acquired with `hr_prev` / `hr_next`.
Frame fuse_frame(const FuseInputs& in, const ClusterModel& model,
                 const BlockDegradationModel& deg, const FuseOptions& opt = {},
                 FuseStats* stats = nullptr);

/// Stacks (lr_prev, lr_ref, lr_next) per pixel.
std::vector<Vec3> pixel_series(const Frame& lr_prev, const Frame& lr_ref, const Frame& lr_next);

struct ReconstructOptions {
    std::uint64_t seed = 0;
    std::optional<int> clusters;  ///< defaults to cluster_count(lr dims)
    FuseOptions fuse;
};

struct Reconstruction {
    Frame frame;
    ClusterModel clusters;
    BlockDegradationModel degradation;
    FuseStats stats;
};

/// Full baseline for one target: fit clusters on the three LR frames,
/// calibrate the kernel on both co-timed HR/LR pairs, then fuse.
Reconstruction reconstruct(const FuseInputs& in, const ReconstructOptions& opt = {});

/// Diagnostic dump: cluster,count,mean0..2,cov00..cov22
void write_cluster_csv(std::ostream& out, const ClusterModel& model);

}  // namespace xfuse::bayes
