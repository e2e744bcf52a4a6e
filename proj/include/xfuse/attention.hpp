#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

namespace xfuse::attention {

/// One reconstructed frame's spatially averaged attention toward its two HR inputs.
struct AttentionRecord {
    std::int64_t target = 0;
    std::int64_t prev_hr = 0;
    std::int64_t next_hr = 0;
    double backward_raw = 0.0;
    double forward_raw = 0.0;
};

struct NormalizedRecord {
    AttentionRecord raw;
    std::int64_t offset = 0;  ///< target - prev_hr
    double backward_norm = 0.0;
    double forward_norm = 0.0;
};

inline constexpr const char* kAttentionCsvHeader = "target,prev_hr,next_hr,backward_raw,forward_raw";

std::vector<AttentionRecord> read_attention_csv(std::istream& in);
void write_attention_csv(std::ostream& out, const std::vector<AttentionRecord>& records);

/// Throws ValidationError when a record breaks prev_hr <= target <= next_hr
/// or carries a negative score.
void validate(const AttentionRecord& record);

struct NormalizeOptions {
    /// Skip groups whose anchors are missing instead of failing.
    bool drop_incomplete_groups = false;
};

struct NormalizeResult {
    std::vector<NormalizedRecord> records;
    std::vector<std::int64_t> dropped_groups;
};

/// Groups by prev_hr. Backward scores are divided by the group's offset-0
/// record (target == prev_hr); forward scores by the forward score of the
/// record acquired at the succeeding HR time (target == next_hr).
NormalizeResult normalize_scores(const std::vector<AttentionRecord>& records,
                                 const NormalizeOptions& opt = {});

struct HistogramConfig {
    std::int64_t offset_min = 0;
    std::int64_t offset_max = 20;  ///< inclusive
    double score_min = 0.0;
    double score_max = 1.2;
    double score_bin_width = 0.05;
};

struct AttentionHistogram {
    std::int64_t offset_min = 0;
    std::int64_t offset_max = 0;
    double score_min = 0.0;
    double score_bin_width = 0.0;
    std::size_t score_bins = 0;
    std::vector<std::uint64_t> counts;  ///< row-major [offset][score bin]
    std::uint64_t overflow = 0;

    std::size_t offset_bins() const { return std::size_t(offset_max - offset_min + 1); }
    std::uint64_t at(std::int64_t offset, std::size_t bin) const {
        return counts[std::size_t(offset - offset_min) * score_bins + bin];
    }
    std::uint64_t total() const;
};

struct HistogramPair {
    AttentionHistogram backward;
    AttentionHistogram forward;
};

HistogramPair histogram2d(const std::vector<NormalizedRecord>& records, const HistogramConfig& cfg = {});

/// Grid CSV: one row per offset, one column per score bin (lower edge in header).
void write_histogram_csv(std::ostream& out, const AttentionHistogram& hist);

struct Monotonicity {
    double backward = 0.0;  ///< mean fraction of adjacent offsets with non-increasing score
    double forward = 0.0;   ///< mean fraction of adjacent offsets with non-decreasing score
    std::size_t groups = 0;
};

Monotonicity monotonicity_stat(const std::vector<NormalizedRecord>& records);

}  // namespace xfuse::attention
