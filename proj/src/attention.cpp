#include "xfuse/attention.hpp"

#include "xfuse/error.hpp"
#include "xfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

namespace xfuse::attention {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    return out;
}

// Records of each group sorted by offset.
std::map<std::int64_t, std::vector<const NormalizedRecord*>> by_group(
    const std::vector<NormalizedRecord>& records) {
    std::map<std::int64_t, std::vector<const NormalizedRecord*>> groups;
    for (const auto& r : records) groups[r.raw.prev_hr].push_back(&r);
    for (auto& [_, g] : groups)
        std::stable_sort(g.begin(), g.end(), [](auto* a, auto* b) { return a->offset < b->offset; });
    return groups;
}

AttentionHistogram empty_histogram(const HistogramConfig& cfg) {
    if (!(cfg.score_bin_width > 0.0)) throw ValidationError("score bin width must be positive");
    if (!(cfg.score_max > cfg.score_min)) throw ValidationError("score range is empty");
    if (cfg.offset_max < cfg.offset_min) throw ValidationError("offset range is empty");
    AttentionHistogram h;
    h.offset_min = cfg.offset_min;
    h.offset_max = cfg.offset_max;
    h.score_min = cfg.score_min;
    h.score_bin_width = cfg.score_bin_width;
    h.score_bins = std::size_t(std::llround((cfg.score_max - cfg.score_min) / cfg.score_bin_width));
    if (h.score_bins == 0) throw ValidationError("score range narrower than one bin");
    h.counts.assign(h.offset_bins() * h.score_bins, 0);
    return h;
}

void accumulate(AttentionHistogram& h, std::int64_t offset, double score) {
    if (offset < h.offset_min || offset > h.offset_max || !std::isfinite(score)) {
        ++h.overflow;
        return;
    }
    const double pos = (score - h.score_min) / h.score_bin_width;
    // Tolerate representation error at exact bin edges (e.g. 1.0 / 0.05).
    const double snapped = std::abs(pos - std::round(pos)) < 1e-9 ? std::round(pos) : std::floor(pos);
    if (snapped < 0.0 || snapped >= double(h.score_bins)) {
        ++h.overflow;
        return;
    }
    ++h.counts[std::size_t(offset - h.offset_min) * h.score_bins + std::size_t(snapped)];
}

}  // namespace

void validate(const AttentionRecord& r) {
    if (!(r.prev_hr <= r.target && r.target <= r.next_hr))
        throw ValidationError("attention record for target " + std::to_string(r.target) +
                              " violates prev_hr <= target <= next_hr");
    if (!(r.backward_raw >= 0.0) || !(r.forward_raw >= 0.0) || !std::isfinite(r.backward_raw) ||
        !std::isfinite(r.forward_raw))
        throw ValidationError("attention scores must be finite and non-negative (target " +
                              std::to_string(r.target) + ")");
}

std::vector<AttentionRecord> read_attention_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("attention CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kAttentionCsvHeader) throw IoError("unexpected attention CSV header: " + line);
    std::vector<AttentionRecord> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 5)
            throw IoError("attention CSV line " + std::to_string(line_no) + ": expected 5 fields");
        try {
            AttentionRecord r{std::stoll(f[0]), std::stoll(f[1]), std::stoll(f[2]), std::stod(f[3]),
                              std::stod(f[4])};
            validate(r);
            out.push_back(r);
        } catch (const std::logic_error&) {
            throw IoError("attention CSV line " + std::to_string(line_no) + ": malformed field");
        }
    }
    return out;
}

void write_attention_csv(std::ostream& out, const std::vector<AttentionRecord>& records) {
    out << kAttentionCsvHeader << '\n';
    for (const auto& r : records)
        out << r.target << ',' << r.prev_hr << ',' << r.next_hr << ',' << format_number(r.backward_raw)
            << ',' << format_number(r.forward_raw) << '\n';
}

NormalizeResult normalize_scores(const std::vector<AttentionRecord>& records,
                                 const NormalizeOptions& opt) {
    std::map<std::int64_t, std::vector<const AttentionRecord*>> groups;
    std::unordered_map<std::int64_t, const AttentionRecord*> by_target;
    for (const auto& r : records) {
        validate(r);
        groups[r.prev_hr].push_back(&r);
        by_target.emplace(r.target, &r);
    }

    NormalizeResult result;
    for (const auto& [prev_hr, members] : groups) {
        const AttentionRecord* anchor = nullptr;
        for (const auto* r : members)
            if (r->target == prev_hr) anchor = r;
        std::string problem;
        if (!anchor)
            problem = "group prev_hr=" + std::to_string(prev_hr) + " has no offset-0 anchor record";
        else if (!(anchor->backward_raw > 0.0))
            problem = "group prev_hr=" + std::to_string(prev_hr) + " has a zero backward anchor score";

        std::vector<NormalizedRecord> normalized;
        for (const auto* r : members) {
            if (!problem.empty()) break;
            const auto it = by_target.find(r->next_hr);
            if (it == by_target.end()) {
                problem = "group prev_hr=" + std::to_string(prev_hr) +
                          " has no forward anchor record at target " + std::to_string(r->next_hr);
                break;
            }
            if (!(it->second->forward_raw > 0.0)) {
                problem = "group prev_hr=" + std::to_string(prev_hr) +
                          " has a zero forward anchor score at target " + std::to_string(r->next_hr);
                break;
            }
            normalized.push_back({*r, r->target - prev_hr, r->backward_raw / anchor->backward_raw,
                                  r->forward_raw / it->second->forward_raw});
        }
        if (!problem.empty()) {
            if (!opt.drop_incomplete_groups) throw ValidationError(problem);
            result.dropped_groups.push_back(prev_hr);
            continue;
        }
        for (auto& n : normalized) result.records.push_back(n);
    }
    return result;
}

std::uint64_t AttentionHistogram::total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

HistogramPair histogram2d(const std::vector<NormalizedRecord>& records, const HistogramConfig& cfg) {
    HistogramPair out{empty_histogram(cfg), empty_histogram(cfg)};
    for (const auto& r : records) {
        accumulate(out.backward, r.offset, r.backward_norm);
        accumulate(out.forward, r.offset, r.forward_norm);
    }
    return out;
}

void write_histogram_csv(std::ostream& out, const AttentionHistogram& h) {
    char buf[32];
    out << "offset";
    for (std::size_t b = 0; b < h.score_bins; ++b) {
        std::snprintf(buf, sizeof buf, ",%.4g", h.score_min + double(b) * h.score_bin_width);
        out << buf;
    }
    out << '\n';
    for (std::int64_t o = h.offset_min; o <= h.offset_max; ++o) {
        out << o;
        for (std::size_t b = 0; b < h.score_bins; ++b) out << ',' << h.at(o, b);
        out << '\n';
    }
}

Monotonicity monotonicity_stat(const std::vector<NormalizedRecord>& records) {
    Monotonicity m;
    double back_sum = 0.0, fwd_sum = 0.0;
    for (const auto& [_, g] : by_group(records)) {
        if (g.size() < 2) continue;
        std::size_t back_ok = 0, fwd_ok = 0;
        for (std::size_t i = 1; i < g.size(); ++i) {
            if (g[i]->backward_norm <= g[i - 1]->backward_norm) ++back_ok;
            if (g[i]->forward_norm >= g[i - 1]->forward_norm) ++fwd_ok;
        }
        const double pairs = double(g.size() - 1);
        back_sum += double(back_ok) / pairs;
        fwd_sum += double(fwd_ok) / pairs;
        ++m.groups;
    }
    if (m.groups) {
        m.backward = back_sum / double(m.groups);
        m.forward = fwd_sum / double(m.groups);
    }
    return m;
}

}  // namespace xfuse::attention
