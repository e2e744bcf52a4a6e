#include "xfuse/bench.hpp"

#include "xfuse/bayes.hpp"
#include "xfuse/bicubic.hpp"
#include "xfuse/degrade.hpp"
#include "xfuse/error.hpp"
#include "xfuse/phantom.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <tuple>

namespace xfuse::bench {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t noise_seed(std::uint64_t grid_seed, const NoiseLevel& level) {
    return mix(grid_seed ^ mix(std::uint64_t(level.value_or(0)) + 0x51ED27ull));
}

template <class T, std::size_t N>
bool allowed(const T (&set)[N], T v) {
    return std::find(std::begin(set), std::end(set), v) != std::end(set);
}

struct Scores {
    double psnr_db, aad, ssim;
};

Scores score(const Frame& truth, const Frame& recon) {
    return {psnr(recon, truth), aad(recon, truth), ssim(recon, truth)};
}

// External RECON sequences, loaded once per directory.
class ExternalStore {
public:
    const Sequence* lookup(const Method& m, const GridCell& cell) {
        fs::path dir = m.dir / cell_dir_name(cell);
        if (!fs::exists(dir / kManifestName)) dir = m.dir;
        if (!fs::exists(dir / kManifestName)) return nullptr;
        auto it = cache_.find(dir);
        if (it == cache_.end()) it = cache_.emplace(dir, read_manifest(dir)).first;
        return &it->second;
    }

private:
    std::map<fs::path, Sequence> cache_;
};

}  // namespace

std::string noise_label(const NoiseLevel& level) {
    return level ? std::to_string(*level) : std::string("none");
}

NoiseLevel parse_noise_level(const std::string& text) {
    if (text == "none") return std::nullopt;
    try {
        std::size_t pos = 0;
        const int v = std::stoi(text, &pos);
        if (pos == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError("noise level must be 'none' or an integer dB value, got '" + text + "'");
}

Method parse_method(const std::string& spec) {
    if (spec == "bicubic") return {MethodKind::Bicubic, spec, {}};
    if (spec == "bayes") return {MethodKind::Bayes, spec, {}};
    const std::string prefix = "external:";
    if (spec.rfind(prefix, 0) == 0 && spec.size() > prefix.size())
        return {MethodKind::External, spec, fs::path(spec.substr(prefix.size()))};
    throw ValidationError("unknown method '" + spec + "' (expected bicubic, bayes or external:<dir>)");
}

void validate(const GridConfig& grid) {
    if (grid.lr_separations.empty() || grid.hr_downsamples.empty() || grid.noise_levels.empty() ||
        grid.methods.empty())
        throw ValidationError("grid selections must be non-empty");
    for (int d : grid.lr_separations)
        if (!allowed(kAllowedLrSeparations, d))
            throw ValidationError("LR separation " + std::to_string(d) + " not in {1,2,3}");
    for (int k : grid.hr_downsamples)
        if (!allowed(kAllowedHrDownsamples, k))
            throw ValidationError("HR down-sampling " + std::to_string(k) + " not in {2,10,20,450}");
    for (const auto& n : grid.noise_levels)
        if (n && !allowed(kAllowedNoiseLevels, *n))
            throw ValidationError("noise level " + std::to_string(*n) + " not in {20,30,40,50,60}");
    for (const auto& m : grid.methods) {
        const Method parsed = parse_method(m);
        if (parsed.kind == MethodKind::External && !fs::is_directory(parsed.dir))
            throw ValidationError("external method directory not found: " + parsed.dir.string());
    }
    if (grid.spatial_factor != bayes::kBlock)
        throw ValidationError("spatial factor is fixed at 4");
    if (grid.case_id.empty() || grid.case_id.find(',') != std::string::npos)
        throw ValidationError("case id must be non-empty and contain no commas");
}

GridConfig full_matrix_grid() {
    GridConfig g;
    g.lr_separations.assign(std::begin(kAllowedLrSeparations), std::end(kAllowedLrSeparations));
    g.hr_downsamples.assign(std::begin(kAllowedHrDownsamples), std::end(kAllowedHrDownsamples));
    g.noise_levels = {std::nullopt};
    for (int n : kAllowedNoiseLevels) g.noise_levels.push_back(n);
    return g;
}

std::vector<GridCell> enumerate_cells(const GridConfig& grid) {
    std::vector<GridCell> cells;
    for (int d : grid.lr_separations)
        for (int k : grid.hr_downsamples)
            for (const auto& n : grid.noise_levels) cells.push_back({d, k, n});
    return cells;
}

std::string cell_dir_name(const GridCell& cell) {
    return "sep" + std::to_string(cell.lr_sep) + "_ds" + std::to_string(cell.hr_ds) + "_noise" +
           noise_label(cell.noise);
}

ConditionSet build_conditions(const std::vector<std::int64_t>& lr_indices,
                              const std::vector<std::int64_t>& hr_indices, int lr_sep) {
    if (lr_sep < 1) throw ValidationError("LR separation must be >= 1");
    if (!std::is_sorted(lr_indices.begin(), lr_indices.end()) ||
        !std::is_sorted(hr_indices.begin(), hr_indices.end()))
        throw ValidationError("frame indices must be sorted");
    const auto has_lr = [&](std::int64_t i) {
        return std::binary_search(lr_indices.begin(), lr_indices.end(), i);
    };
    ConditionSet out;
    for (std::int64_t t : lr_indices) {
        auto next = std::lower_bound(hr_indices.begin(), hr_indices.end(), t);
        auto prev = std::upper_bound(hr_indices.begin(), hr_indices.end(), t);
        const bool lr_ok = has_lr(t - lr_sep) && has_lr(t + lr_sep);
        const bool hr_ok = next != hr_indices.end() && prev != hr_indices.begin();
        if (!lr_ok || !hr_ok) {
            ++out.skipped;
            continue;
        }
        TargetCondition c;
        c.target = t;
        c.lr_prev = t - lr_sep;
        c.lr_next = t + lr_sep;
        c.hr_prev = *std::prev(prev);
        c.hr_next = *next;
        c.keyframe = c.hr_prev == t && c.hr_next == t;
        out.conditions.push_back(c);
    }
    if (out.conditions.empty())
        throw ValidationError("sequence too short: no target has both LR and HR neighbours");
    return out;
}

bool hr_keep_trailing(std::size_t n_frames, int hr_ds) {
    return std::size_t(hr_ds) >= n_frames;
}

void write_conditions_csv(std::ostream& out, const std::vector<GridCell>& cells,
                          const std::vector<ConditionSet>& sets) {
    out << kConditionsCsvHeader << '\n';
    for (std::size_t i = 0; i < cells.size() && i < sets.size(); ++i)
        for (const auto& c : sets[i].conditions)
            out << cells[i].lr_sep << ',' << cells[i].hr_ds << ',' << c.target << ',' << c.lr_prev
                << ',' << c.lr_next << ',' << c.hr_prev << ',' << c.hr_next << ','
                << (c.keyframe ? 1 : 0) << '\n';
}

GridData prepare_data(const Sequence& raw_hr, int spatial_factor) {
    if (raw_hr.empty()) throw ValidationError("HR source sequence is empty");
    Sequence lr_raw;
    lr_raw.role = Role::LR;
    lr_raw.native_step = raw_hr.native_step;
    for (const Frame& f : raw_hr.frames) lr_raw.frames.push_back(bin_spatial(f, spatial_factor));
    GridData d;
    d.hr_truth = normalize_sequence(raw_hr).first;
    d.hr_truth.role = Role::HR;
    d.lr_clean = normalize_sequence(lr_raw).first;
    return d;
}

GridResult run_grid(const GridConfig& grid, const GridData& data) {
    validate(grid);
    validate(data.hr_truth);
    validate(data.lr_clean);
    if (data.hr_truth.frame_indices() != data.lr_clean.frame_indices())
        throw ValidationError("HR truth and LR streams must share the master timeline");
    if (data.hr_truth.width() != std::uint32_t(grid.spatial_factor) * data.lr_clean.width() ||
        data.hr_truth.height() != std::uint32_t(grid.spatial_factor) * data.lr_clean.height())
        throw ValidationError("HR frames must be 4x the LR frames");

    GridResult result;
    std::vector<Method> methods;
    for (const auto& m : grid.methods) methods.push_back(parse_method(m));

    // One noise realization per level, shared by every cell and method.
    std::map<std::string, Sequence> noisy;
    for (const auto& level : grid.noise_levels) {
        const std::string label = noise_label(level);
        if (noisy.count(label)) continue;
        if (!level) {
            noisy.emplace(label, data.lr_clean);
            continue;
        }
        const std::uint64_t seed = noise_seed(grid.seed, level);
        const auto cal = calibrate_b0(data.lr_clean, double(*level), seed);
        Sequence seq = data.lr_clean;
        for (Frame& f : seq.frames) {
            const Frame clean = f;
            f = add_poisson(clean, {cal.b0, seed, double(*level)});
            result.noise.push_back({label, cal.b0, f.frame_index, psnr(f, clean)});
        }
        noisy.emplace(label, std::move(seq));
    }

    const auto lr_indices = data.lr_clean.frame_indices();
    const std::size_t n_frames = data.hr_truth.size();
    std::map<std::tuple<std::string, std::int64_t>, Scores> bicubic_cache;
    std::map<std::tuple<std::string, int, std::int64_t>, Scores> bayes_cache;
    ExternalStore external;

    result.cells = enumerate_cells(grid);
    for (const GridCell& cell : result.cells) {
        const Sequence hr = downsample_temporal(data.hr_truth, cell.hr_ds,
                                                hr_keep_trailing(n_frames, cell.hr_ds));
        result.condition_sets.push_back(build_conditions(lr_indices, hr.frame_indices(), cell.lr_sep));
        const ConditionSet& cs = result.condition_sets.back();
        const std::string label = noise_label(cell.noise);
        const Sequence& lr = noisy.at(label);

        for (const Method& method : methods) {
            const Sequence* ext = method.kind == MethodKind::External ? external.lookup(method, cell) : nullptr;
            for (const TargetCondition& c : cs.conditions) {
                const Frame& truth = *data.hr_truth.find(c.target);
                Scores s{};
                switch (method.kind) {
                    case MethodKind::Bicubic: {
                        const auto key = std::make_tuple(label, c.target);
                        auto it = bicubic_cache.find(key);
                        if (it == bicubic_cache.end())
                            it = bicubic_cache
                                     .emplace(key, score(truth, upsample_bicubic(*lr.find(c.target))))
                                     .first;
                        s = it->second;
                        break;
                    }
                    case MethodKind::Bayes: {
                        const auto key = std::make_tuple(label, cell.hr_ds, c.target);
                        auto it = bayes_cache.find(key);
                        if (it == bayes_cache.end()) {
                            Frame recon;
                            if (c.keyframe) {
                                recon = *hr.find(c.target);
                            } else {
                                const bayes::FuseInputs in{*lr.find(c.hr_prev), *lr.find(c.target),
                                                           *lr.find(c.hr_next), *hr.find(c.hr_prev),
                                                           *hr.find(c.hr_next), c.delta_back(),
                                                           c.delta_fwd()};
                                bayes::ReconstructOptions opt;
                                opt.seed = grid.seed;
                                recon = bayes::reconstruct(in, opt).frame;
                            }
                            it = bayes_cache.emplace(key, score(truth, recon)).first;
                        }
                        s = it->second;
                        break;
                    }
                    case MethodKind::External: {
                        const Frame* recon = ext ? ext->find(c.target) : nullptr;
                        if (!recon) {
                            result.missing.push_back(method.name + " " + cell_dir_name(cell) +
                                                     " frame " + std::to_string(c.target));
                            continue;
                        }
                        if (!recon->same_shape(truth))
                            throw ValidationError(method.name + ": reconstruction of frame " +
                                                  std::to_string(c.target) + " has wrong dimensions");
                        s = score(truth, *recon);
                        break;
                    }
                }
                result.rows.push_back({grid.case_id, method.name, cell.lr_sep, cell.hr_ds, label,
                                       c.target, s.psnr_db, s.aad, s.ssim});
            }
        }
    }
    if (!result.rows.empty()) result.summary = summarize(result.rows, kSummaryKeys);
    return result;
}

void write_noise_csv(std::ostream& out, const std::string& case_id,
                     const std::vector<NoiseCheckRow>& rows) {
    out << "case_id,noise_psnr,b0,frame,lr_psnr_db\n";
    for (const auto& r : rows)
        out << case_id << ',' << r.noise_psnr << ',' << format_number(r.b0) << ',' << r.frame << ','
            << format_number(r.lr_psnr_db) << '\n';
}

void write_grid_outputs(const GridResult& result, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::trunc);
        if (!f) throw IoError("cannot write " + (dir / name).string());
        return f;
    };
    {
        auto f = open("metrics.csv");
        write_metrics_csv(f, result.rows);
    }
    {
        auto f = open("summary.csv");
        write_summary_csv(f, result.summary, kSummaryKeys);
    }
    {
        auto f = open("lr_noise.csv");
        write_noise_csv(f, result.rows.empty() ? std::string() : result.rows.front().case_id,
                        result.noise);
    }
    {
        auto f = open("conditions.csv");
        write_conditions_csv(f, result.cells, result.condition_sets);
    }
}

double median(std::vector<double> values) {
    if (values.empty()) throw ValidationError("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TimingReport time_callable(const std::string& method, std::uint32_t width, std::uint32_t height,
                           int n_runs, const std::function<void()>& run) {
    if (n_runs < 1) throw ValidationError("timing needs at least one run");
    TimingReport r;
    r.method = method;
    r.width = width;
    r.height = height;
    r.n_runs = n_runs;
    for (int i = 0; i < n_runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        run();
        const auto t1 = std::chrono::steady_clock::now();
        r.runs_s.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    r.median_s = median(r.runs_s);
    return r;
}

TimingFixture make_timing_fixture(std::uint32_t hr_width, std::uint32_t hr_height, std::uint64_t seed) {
    PhantomConfig cfg;
    cfg.width = hr_width;
    cfg.height = hr_height;
    cfg.n_frames = 21;
    cfg.seed = seed;
    cfg.particle_speed = std::min(cfg.particle_speed,
                                  0.5 * double(std::min(hr_width, hr_height)) / cfg.n_frames);
    const GridData d = prepare_data(gen_phantom(cfg));
    return {d.lr_clean.frames[0], d.lr_clean.frames[10], d.lr_clean.frames[20],
            d.hr_truth.frames[0], d.hr_truth.frames[20], 10, 10};
}

TimingReport time_method(const std::string& method, const TimingFixture& fx, int n_runs) {
    const std::uint32_t w = fx.hr_prev.width, h = fx.hr_prev.height;
    if (method == "bicubic")
        return time_callable(method, w, h, n_runs, [&] { (void)upsample_bicubic(fx.lr_ref); });
    if (method == "bayes") {
        const bayes::FuseInputs in{fx.lr_prev, fx.lr_ref, fx.lr_next, fx.hr_prev, fx.hr_next,
                                   fx.delta_back, fx.delta_fwd};
        return time_callable(method, w, h, n_runs, [&] { (void)bayes::reconstruct(in); });
    }
    const std::string prefix = "cmd:";
    if (method.rfind(prefix, 0) == 0 && method.size() > prefix.size()) {
        const std::string cmd = method.substr(prefix.size());
        return time_callable(method, w, h, n_runs, [&] {
            if (std::system(cmd.c_str()) != 0) throw IoError("timed command failed: " + cmd);
        });
    }
    throw ValidationError("unknown timing method '" + method + "'");
}

void write_timing_csv(std::ostream& out, const std::vector<TimingReport>& reports) {
    out << kTimingCsvHeader << '\n';
    for (const auto& r : reports)
        out << r.method << ',' << r.width << ',' << r.height << ',' << r.n_runs << ','
            << format_number(r.median_s) << '\n';
}

}  // namespace xfuse::bench
