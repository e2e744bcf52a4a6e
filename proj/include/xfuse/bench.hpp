#pragma once

#include "xfuse/frame.hpp"
#include "xfuse/metrics.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace xfuse::bench {

inline constexpr int kAllowedLrSeparations[] = {1, 2, 3};
inline constexpr int kAllowedHrDownsamples[] = {2, 10, 20, 450};
inline constexpr int kAllowedNoiseLevels[] = {20, 30, 40, 50, 60};

/// LR noise level: nullopt means clean LR frames.
using NoiseLevel = std::optional<int>;
std::string noise_label(const NoiseLevel& level);
NoiseLevel parse_noise_level(const std::string& text);

enum class MethodKind { Bicubic, Bayes, External };

struct Method {
    MethodKind kind = MethodKind::Bicubic;
    std::string name;            ///< as written in CSV method column
    std::filesystem::path dir;   ///< external RECON root
};

/// "bicubic", "bayes" or "external:<dir>".
Method parse_method(const std::string& spec);

struct GridConfig {
    std::vector<int> lr_separations{1};
    std::vector<int> hr_downsamples{20};
    std::vector<NoiseLevel> noise_levels{std::nullopt};
    std::vector<std::string> methods{"bicubic", "bayes"};
    std::string case_id = "phantom";
    std::uint64_t seed = 0;
    int spatial_factor = 4;
};

void validate(const GridConfig& grid);

/// Full test matrix: {1,2,3} x {2,10,20,450} x {none,20..60}.
GridConfig full_matrix_grid();

struct GridCell {
    int lr_sep = 1;
    int hr_ds = 1;
    NoiseLevel noise;
};

/// Cells in output order: separation, then down-sampling, then noise.
std::vector<GridCell> enumerate_cells(const GridConfig& grid);

/// Name of the per-cell subdirectory an external method may provide.
std::string cell_dir_name(const GridCell& cell);

struct TargetCondition {
    std::int64_t target = 0;
    std::int64_t lr_prev = 0;
    std::int64_t lr_next = 0;
    std::int64_t hr_prev = 0;
    std::int64_t hr_next = 0;
    bool keyframe = false;  ///< hr_prev == target == hr_next

    int delta_back() const { return int(target - hr_prev); }
    int delta_fwd() const { return int(hr_next - target); }
};

struct ConditionSet {
    std::vector<TargetCondition> conditions;
    std::size_t skipped = 0;  ///< targets lacking an LR or HR neighbour
};

/// Every LR index t with LR frames at t - lr_sep and t + lr_sep and HR frames
/// at or before / at or after t. `lr_indices` and `hr_indices` must be sorted.
ConditionSet build_conditions(const std::vector<std::int64_t>& lr_indices,
                              const std::vector<std::int64_t>& hr_indices, int lr_sep);

/// The trailing frame is retained only when striding would leave one HR frame.
bool hr_keep_trailing(std::size_t n_frames, int hr_ds);

inline constexpr const char* kConditionsCsvHeader =
    "lr_sep,hr_ds,target,lr_prev,lr_next,hr_prev,hr_next,keyframe";

void write_conditions_csv(std::ostream& out, const std::vector<GridCell>& cells,
                          const std::vector<ConditionSet>& sets);

/// Normalized streams derived from one raw HR video.
struct GridData {
    Sequence hr_truth;  ///< clipped + min-max normalized HR frames
    Sequence lr_clean;  ///< binned then normalized LR frames, full frame rate
};

GridData prepare_data(const Sequence& raw_hr, int spatial_factor = 4);

struct NoiseCheckRow {
    std::string noise_psnr;
    double b0 = 0.0;
    std::int64_t frame = 0;
    double lr_psnr_db = 0.0;
};

struct GridResult {
    std::vector<MetricsRow> rows;
    std::vector<SummaryRow> summary;
    std::vector<NoiseCheckRow> noise;
    std::vector<GridCell> cells;
    std::vector<ConditionSet> condition_sets;  ///< parallel to cells
    std::vector<std::string> missing;          ///< external reconstructions not found
};

inline const std::vector<GroupKey> kSummaryKeys{GroupKey::CaseId, GroupKey::Method, GroupKey::LrSep,
                                                GroupKey::HrDs, GroupKey::NoisePsnr};

/// Runs every method over every cell on identical targets and noise realizations.
GridResult run_grid(const GridConfig& grid, const GridData& data);

/// Writes metrics.csv, summary.csv, lr_noise.csv and conditions.csv into `dir`.
void write_grid_outputs(const GridResult& result, const std::filesystem::path& dir);

void write_noise_csv(std::ostream& out, const std::string& case_id,
                     const std::vector<NoiseCheckRow>& rows);

// ---------------------------------------------------------------------------
// Timing

struct TimingReport {
    std::string method;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    int n_runs = 0;
    double median_s = 0.0;
    std::vector<double> runs_s;
};

double median(std::vector<double> values);

/// Times `run` n_runs times; setup and I/O belong outside the callable.
TimingReport time_callable(const std::string& method, std::uint32_t width, std::uint32_t height,
                           int n_runs, const std::function<void()>& run);

/// Inputs for one reconstruction: three LR frames co-timed with the target
/// and its HR neighbours, plus the LR frame at the target.
struct TimingFixture {
    Frame lr_prev, lr_ref, lr_next, hr_prev, hr_next;
    int delta_back = 10;
    int delta_fwd = 10;
};

TimingFixture make_timing_fixture(std::uint32_t hr_width, std::uint32_t hr_height,
                                  std::uint64_t seed = 0);

/// "bicubic", "bayes" or "cmd:<shell command>" (wall time of the command).
TimingReport time_method(const std::string& method, const TimingFixture& fixture, int n_runs);

inline constexpr const char* kTimingCsvHeader = "method,width,height,n_runs,median_s";
void write_timing_csv(std::ostream& out, const std::vector<TimingReport>& reports);

}  // namespace xfuse::bench
