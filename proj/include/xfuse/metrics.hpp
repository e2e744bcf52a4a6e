#pragma once

#include "xfuse/frame.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace xfuse {

struct MetricsConfig {
    double data_range = 1.0;
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double ssim_k1 = 0.01;
    double ssim_k2 = 0.03;
};

/// Returns +infinity for identical frames.
double psnr(const Frame& a, const Frame& b, const MetricsConfig& cfg = {});
double mse(const Frame& a, const Frame& b);
double aad(const Frame& a, const Frame& b);
/// Mean SSIM over all valid (unpadded) window positions.
double ssim(const Frame& a, const Frame& b, const MetricsConfig& cfg = {});

/// Same metrics on row-major double images (no f32 rounding of the inputs).
double psnr(std::span<const double> a, std::span<const double> b, const MetricsConfig& cfg = {});
double mse(std::span<const double> a, std::span<const double> b);
double aad(std::span<const double> a, std::span<const double> b);
double ssim(std::span<const double> a, std::span<const double> b, std::size_t width,
            std::size_t height, const MetricsConfig& cfg = {});

/// Normalized 1-D Gaussian taps of odd length `size`.
std::vector<double> gaussian_window(int size, double sigma);

/// noise_psnr is either "none" or an integer dB level.
struct MetricsRow {
    std::string case_id;
    std::string method;
    int lr_sep = 1;
    int hr_ds = 1;
    std::string noise_psnr = "none";
    std::int64_t frame = 0;
    double psnr_db = 0.0;
    double aad = 0.0;
    double ssim = 0.0;
};

inline constexpr const char* kMetricsCsvHeader =
    "case_id,method,lr_sep,hr_ds,noise_psnr,frame,psnr_db,aad,ssim";

/// Shortest round-trip representation ("inf" for the identical-frame sentinel).
std::string format_number(double v);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

enum class GroupKey { CaseId, Method, LrSep, HrDs, NoisePsnr };

GroupKey parse_group_key(const std::string& name);
std::string group_key_name(GroupKey key);

struct BoxStats {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
    std::size_t count = 0;
};

/// Five-number summary plus mean; quartiles interpolate linearly between
/// closest ranks (position (n-1)q in the sorted values).
BoxStats box_stats(std::vector<double> values);

struct SummaryRow {
    std::vector<std::string> group;  ///< key values in the order of the requested keys
    std::string metric;              ///< psnr_db | aad | ssim
    BoxStats stats;
};

/// Groups rows by `keys` (in first-appearance order) and summarizes every metric.
std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows,
                                  const std::vector<GroupKey>& keys);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows,
                       const std::vector<GroupKey>& keys);

}  // namespace xfuse
