// xfuse: command-line front end for the fusion toolkit.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include "xfuse/attention.hpp"
#include "xfuse/bayes.hpp"
#include "xfuse/bench.hpp"
#include "xfuse/bicubic.hpp"
#include "xfuse/degrade.hpp"
#include "xfuse/error.hpp"
#include "xfuse/frame.hpp"
#include "xfuse/metrics.hpp"
#include "xfuse/phantom.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace xfuse;

namespace {

/// `key: value` lines; '#' starts a comment. Keys are long option names of
/// the selected subcommand.
class KeyValueConfig : public CLI::Config {
public:
    std::string section;

    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        std::string out;
        for (const CLI::Option* opt : app->get_options()) {
            if (opt->get_lnames().empty() || opt->get_configurable() == false) continue;
            std::vector<std::string> values = opt->reduced_results();
            if (values.empty() && default_also && !opt->get_default_str().empty())
                values.push_back(opt->get_default_str());
            if (values.empty()) continue;
            out += opt->get_lnames().front() + ": " + CLI::detail::join(values, ",") + "\n";
        }
        return out;
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        std::vector<CLI::ConfigItem> items;
        std::string line;
        while (std::getline(in, line)) {
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            CLI::detail::trim(line);
            if (line.empty()) continue;
            const auto colon = line.find(':');
            if (colon == std::string::npos) throw CLI::ConversionError("config line without ':' -> " + line);
            std::string key = line.substr(0, colon), value = line.substr(colon + 1);
            CLI::detail::trim(key);
            CLI::detail::trim(value);
            CLI::ConfigItem item;
            if (!section.empty()) item.parents = {section};
            item.name = key;
            item.inputs = {value};
            items.push_back(std::move(item));
        }
        return items;
    }
};

std::vector<bench::NoiseLevel> parse_noise_levels(const std::vector<std::string>& text) {
    std::vector<bench::NoiseLevel> out;
    for (const auto& t : text) out.push_back(bench::parse_noise_level(t));
    return out;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    return f;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    return f;
}

// ---------------------------------------------------------------------------

struct PhantomArgs {
    PhantomConfig cfg;
    fs::path out;
};

void add_phantom_options(CLI::App* cmd, PhantomConfig& cfg) {
    cmd->add_option("--width", cfg.width, "HR frame width")->capture_default_str();
    cmd->add_option("--height", cfg.height, "HR frame height")->capture_default_str();
    cmd->add_option("--frames", cfg.n_frames, "number of frames")->capture_default_str();
    cmd->add_option("--particles", cfg.n_particles, "moving particles")->capture_default_str();
    cmd->add_option("--radius", cfg.particle_radius, "particle radius (px)")->capture_default_str();
    cmd->add_option("--speed", cfg.particle_speed, "particle speed (px/frame)")->capture_default_str();
    cmd->add_option("--keyhole", cfg.keyhole_depth_amplitude, "keyhole darkening amplitude")
        ->capture_default_str();
    cmd->add_option("--texture", cfg.background_texture_scale, "background texture period (px)")
        ->capture_default_str();
}

void run_phantom(const PhantomArgs& a) {
    const Sequence seq = gen_phantom(a.cfg);
    write_manifest(seq, a.out);
    std::cout << "wrote " << seq.size() << " frames " << seq.width() << "x" << seq.height() << " to "
              << a.out.string() << "\n";
}

struct DegradeArgs {
    fs::path in, out;
    int factor = 4;
    int hr_ds = 1;
    std::string noise = "none";
    std::uint64_t seed = 0;
};

void run_degrade(const DegradeArgs& a) {
    const Sequence raw = read_manifest(a.in);
    const bench::GridData data = bench::prepare_data(raw, a.factor);
    const Sequence hr = downsample_temporal(data.hr_truth, a.hr_ds,
                                            bench::hr_keep_trailing(data.hr_truth.size(), a.hr_ds));
    Sequence lr = data.lr_clean;
    const bench::NoiseLevel level = bench::parse_noise_level(a.noise);
    if (level) {
        const auto cal = calibrate_b0(data.lr_clean, double(*level), a.seed);
        for (Frame& f : lr.frames) f = add_poisson(f, {cal.b0, a.seed, double(*level)});
        std::cout << "b0: " << format_number(cal.b0) << "\nmeasured_psnr: "
                  << format_number(cal.measured_psnr) << "\n";
    }
    write_manifest(hr, a.out / "hr");
    write_manifest(lr, a.out / "lr");
    write_manifest(data.hr_truth, a.out / "truth");
    std::cout << "hr_frames: " << hr.size() << "\nlr_frames: " << lr.size() << "\n";
}

struct UpsampleArgs {
    fs::path in, out;
    ResampleConfig cfg;
};

void run_upsample(const UpsampleArgs& a) {
    const Sequence lr = read_manifest(a.in);
    Sequence out;
    out.role = Role::RECON;
    out.native_step = lr.native_step;
    for (const Frame& f : lr.frames) out.frames.push_back(upsample_bicubic(f, a.cfg));
    write_manifest(out, a.out);
    std::cout << "upsampled " << out.size() << " frames\n";
}

struct FuseArgs {
    fs::path lr, hr, out, dump_clusters;
    std::vector<std::int64_t> targets;
    std::uint64_t seed = 0;
    int clusters = 0;
};

void run_fuse(const FuseArgs& a) {
    const Sequence lr = read_manifest(a.lr);
    const Sequence hr = read_manifest(a.hr);
    const auto hr_idx = hr.frame_indices();
    std::vector<std::int64_t> targets = a.targets;
    if (targets.empty())
        for (std::int64_t t : lr.frame_indices())
            if (!hr_idx.empty() && t >= hr_idx.front() && t <= hr_idx.back()) targets.push_back(t);
    std::sort(targets.begin(), targets.end());

    Sequence out;
    out.role = Role::RECON;
    std::size_t warnings = 0;
    bool dumped = false;
    for (std::int64_t t : targets) {
        auto next = std::lower_bound(hr_idx.begin(), hr_idx.end(), t);
        auto prev = std::upper_bound(hr_idx.begin(), hr_idx.end(), t);
        if (next == hr_idx.end() || prev == hr_idx.begin())
            throw ValidationError("target " + std::to_string(t) + " has no HR neighbour on both sides");
        const std::int64_t hp = *std::prev(prev), hn = *next;
        if (hp == t && hn == t) {
            out.frames.push_back(*hr.find(t));
            continue;
        }
        const Frame* lp = lr.find(hp);
        const Frame* lt = lr.find(t);
        const Frame* ln = lr.find(hn);
        if (!lp || !lt || !ln)
            throw ValidationError("LR frames at " + std::to_string(hp) + ", " + std::to_string(t) +
                                  ", " + std::to_string(hn) + " are required");
        const bayes::FuseInputs in{*lp, *lt, *ln, *hr.find(hp), *hr.find(hn), int(t - hp), int(hn - t)};
        bayes::ReconstructOptions opt;
        opt.seed = a.seed;
        if (a.clusters > 0) opt.clusters = a.clusters;
        const auto r = bayes::reconstruct(in, opt);
        if (r.clusters.status != Status::Ok || r.degradation.status != Status::Ok) ++warnings;
        if (!a.dump_clusters.empty() && !dumped) {
            auto f = open_out(a.dump_clusters);
            bayes::write_cluster_csv(f, r.clusters);
            dumped = true;
        }
        out.frames.push_back(r.frame);
    }
    if (out.empty()) throw ValidationError("no targets to reconstruct");
    write_manifest(out, a.out);
    std::cout << "fused " << out.size() << " frames";
    if (warnings) std::cout << " (" << warnings << " with degenerate-model warnings)";
    std::cout << "\n";
}

struct MetricsArgs {
    fs::path truth, recon, from, out, summary;
    std::string case_id = "case", method = "method", noise = "none";
    int lr_sep = 1, hr_ds = 1;
    std::vector<std::string> group_by{"case_id", "method", "lr_sep", "hr_ds", "noise_psnr"};
};

void run_metrics(const MetricsArgs& a) {
    std::vector<MetricsRow> rows;
    if (!a.from.empty()) {
        auto in = open_in(a.from);
        rows = read_metrics_csv(in);
    } else {
        if (a.truth.empty() || a.recon.empty())
            throw ValidationError("metrics needs --truth and --recon, or --from");
        const Sequence truth = read_manifest(a.truth);
        const Sequence recon = read_manifest(a.recon);
        for (const Frame& r : recon.frames) {
            const Frame* t = truth.find(r.frame_index);
            if (!t) {
                std::cerr << "no ground truth for frame " << r.frame_index << "\n";
                continue;
            }
            rows.push_back({a.case_id, a.method, a.lr_sep, a.hr_ds, a.noise, r.frame_index,
                            psnr(r, *t), aad(r, *t), ssim(r, *t)});
        }
        if (!a.out.empty()) {
            auto f = open_out(a.out);
            write_metrics_csv(f, rows);
        } else {
            write_metrics_csv(std::cout, rows);
        }
    }
    if (!a.summary.empty()) {
        std::vector<GroupKey> keys;
        for (const auto& k : a.group_by) keys.push_back(parse_group_key(k));
        auto f = open_out(a.summary);
        write_summary_csv(f, summarize(rows, keys), keys);
    }
}

struct AttnArgs {
    fs::path in, out;
    bool drop_incomplete = false;
    attention::HistogramConfig hist;
};

void run_attn(const AttnArgs& a) {
    auto in = open_in(a.in);
    const auto records = attention::read_attention_csv(in);
    const auto norm = attention::normalize_scores(records, {a.drop_incomplete});
    const auto hist = attention::histogram2d(norm.records, a.hist);
    const auto mono = attention::monotonicity_stat(norm.records);

    fs::create_directories(a.out);
    {
        auto f = open_out(a.out / "normalized.csv");
        f << "target,prev_hr,next_hr,offset,backward_norm,forward_norm\n";
        for (const auto& r : norm.records)
            f << r.raw.target << ',' << r.raw.prev_hr << ',' << r.raw.next_hr << ',' << r.offset << ','
              << format_number(r.backward_norm) << ',' << format_number(r.forward_norm) << '\n';
    }
    {
        auto f = open_out(a.out / "backward_hist.csv");
        attention::write_histogram_csv(f, hist.backward);
    }
    {
        auto f = open_out(a.out / "forward_hist.csv");
        attention::write_histogram_csv(f, hist.forward);
    }
    std::cout << "records: " << norm.records.size() << "\n"
              << "dropped_groups: " << norm.dropped_groups.size() << "\n"
              << "backward_overflow: " << hist.backward.overflow << "\n"
              << "forward_overflow: " << hist.forward.overflow << "\n"
              << "backward_monotonicity: " << format_number(mono.backward) << "\n"
              << "forward_monotonicity: " << format_number(mono.forward) << "\n";
}

struct BenchArgs {
    fs::path data, out;
    std::vector<int> lr_sep{1};
    std::vector<int> hr_ds{20};
    std::vector<std::string> noise{"none"};
    std::vector<std::string> methods{"bicubic", "bayes"};
    std::string case_id = "phantom";
    std::uint64_t seed = 0;
    bool full_matrix = false;
    bool conditions_only = false;
    PhantomConfig phantom;
};

void run_bench(const BenchArgs& a) {
    bench::GridConfig grid;
    if (a.full_matrix) grid = bench::full_matrix_grid();
    else {
        grid.lr_separations = a.lr_sep;
        grid.hr_downsamples = a.hr_ds;
        grid.noise_levels = parse_noise_levels(a.noise);
    }
    grid.methods = a.methods;
    grid.case_id = a.case_id;
    grid.seed = a.seed;

    Sequence raw;
    if (a.data.empty()) {
        PhantomConfig cfg = a.phantom;
        cfg.seed = a.seed;
        raw = gen_phantom(cfg);
    } else {
        raw = read_manifest(a.data);
    }
    const bench::GridData data = bench::prepare_data(raw, grid.spatial_factor);

    if (a.conditions_only) {
        bench::validate(grid);
        const auto cells = bench::enumerate_cells(grid);
        std::vector<bench::ConditionSet> sets;
        for (const auto& c : cells) {
            const Sequence hr = downsample_temporal(
                data.hr_truth, c.hr_ds, bench::hr_keep_trailing(data.hr_truth.size(), c.hr_ds));
            sets.push_back(bench::build_conditions(data.lr_clean.frame_indices(), hr.frame_indices(), c.lr_sep));
        }
        auto f = open_out(a.out / "conditions.csv");
        bench::write_conditions_csv(f, cells, sets);
        return;
    }

    const auto result = bench::run_grid(grid, data);
    for (const auto& m : result.missing) std::cerr << "missing reconstruction: " << m << "\n";
    bench::write_grid_outputs(result, a.out);
    std::size_t skipped = 0;
    for (const auto& s : result.condition_sets) skipped += s.skipped;
    std::cout << "cells: " << result.cells.size() << "\nrows: " << result.rows.size()
              << "\nskipped_boundary_targets: " << skipped
              << "\nmissing: " << result.missing.size() << "\n";
}

struct TimeArgs {
    std::vector<std::string> methods{"bicubic", "bayes"};
    int runs = 100;
    std::uint32_t width = 1024, height = 400;
    std::uint64_t seed = 0;
    fs::path out;
};

void run_time(const TimeArgs& a) {
    const auto fixture = bench::make_timing_fixture(a.width, a.height, a.seed);
    std::vector<bench::TimingReport> reports;
    for (const auto& m : a.methods) reports.push_back(bench::time_method(m, fixture, a.runs));
    if (a.out.empty()) {
        bench::write_timing_csv(std::cout, reports);
    } else {
        auto f = open_out(a.out);
        bench::write_timing_csv(f, reports);
    }
}

template <class T>
CLI::Option* add_seed(CLI::App* cmd, T& seed) {
    return cmd->add_option("--seed", seed, "random seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xfuse: spatio-temporal fusion toolkit and benchmark harness"};
    app.require_subcommand(1);
    auto config = std::make_shared<KeyValueConfig>();

    app.config_formatter(config);
    app.set_config("--config", "", "key: value option file; command-line flags take precedence");
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    const auto sub = [&](const char* name, const char* help) { return app.add_subcommand(name, help); };

    PhantomArgs phantom;
    auto* c_phantom = sub("phantom", "generate a synthetic HR ground-truth sequence");
    add_phantom_options(c_phantom, phantom.cfg);
    add_seed(c_phantom, phantom.cfg.seed);
    c_phantom->add_option("--out", phantom.out, "output sequence directory")->required();

    DegradeArgs degrade;
    auto* c_degrade = sub("degrade", "bin, normalize, down-sample and add Poisson noise");
    c_degrade->add_option("--in", degrade.in, "raw HR sequence directory")->required();
    c_degrade->add_option("--out", degrade.out, "output root (hr/, lr/, truth/)")->required();
    c_degrade->add_option("--factor", degrade.factor, "spatial binning factor")->capture_default_str();
    c_degrade->add_option("--hr-ds", degrade.hr_ds, "HR temporal down-sampling")->capture_default_str();
    c_degrade->add_option("--noise-psnr", degrade.noise, "LR noise level (dB) or none")->capture_default_str();
    add_seed(c_degrade, degrade.seed);

    UpsampleArgs upsample;
    auto* c_up = sub("upsample", "bicubic up-sampling of an LR sequence");
    c_up->add_option("--in", upsample.in, "LR sequence directory")->required();
    c_up->add_option("--out", upsample.out, "RECON sequence directory")->required();
    c_up->add_option("--factor", upsample.cfg.factor, "integer scale factor")->capture_default_str();
    c_up->add_option("--kernel-a", upsample.cfg.kernel_a, "cubic kernel parameter")->capture_default_str();

    FuseArgs fuse;
    auto* c_fuse = sub("fuse-bayes", "Bayesian (k-means + Kalman) fusion");
    c_fuse->add_option("--lr", fuse.lr, "LR sequence directory")->required();
    c_fuse->add_option("--hr", fuse.hr, "HR sequence directory")->required();
    c_fuse->add_option("--out", fuse.out, "RECON sequence directory")->required();
    c_fuse->add_option("--targets", fuse.targets, "target frame indices (default: all)")->delimiter(',');
    c_fuse->add_option("--clusters", fuse.clusters, "override the cluster count");
    c_fuse->add_option("--dump-clusters", fuse.dump_clusters, "CSV dump of the first fitted cluster model");
    add_seed(c_fuse, fuse.seed);

    MetricsArgs metrics;
    auto* c_metrics = sub("metrics", "score reconstructions (PSNR, AAD, SSIM) and summarize");
    c_metrics->add_option("--truth", metrics.truth, "ground-truth sequence directory");
    c_metrics->add_option("--recon", metrics.recon, "reconstruction sequence directory");
    c_metrics->add_option("--from", metrics.from, "existing metrics CSV to summarize");
    c_metrics->add_option("--out", metrics.out, "metrics CSV output (default stdout)");
    c_metrics->add_option("--summary", metrics.summary, "box-plot summary CSV output");
    c_metrics->add_option("--group-by", metrics.group_by, "summary group keys")->delimiter(',');
    c_metrics->add_option("--case-id", metrics.case_id)->capture_default_str();
    c_metrics->add_option("--method", metrics.method)->capture_default_str();
    c_metrics->add_option("--lr-sep", metrics.lr_sep)->capture_default_str();
    c_metrics->add_option("--hr-ds", metrics.hr_ds)->capture_default_str();
    c_metrics->add_option("--noise-psnr", metrics.noise)->capture_default_str();

    AttnArgs attn;
    auto* c_attn = sub("attn-stats", "normalize and histogram attention scores");
    c_attn->add_option("--in", attn.in, "attention CSV")->required();
    c_attn->add_option("--out", attn.out, "output directory")->required();
    c_attn->add_flag("--drop-incomplete", attn.drop_incomplete, "skip groups lacking anchors");
    c_attn->add_option("--offset-max", attn.hist.offset_max)->capture_default_str();
    c_attn->add_option("--score-max", attn.hist.score_max)->capture_default_str();
    c_attn->add_option("--bin-width", attn.hist.score_bin_width)->capture_default_str();

    BenchArgs benchargs;
    auto* c_bench = sub("bench", "run the experiment grid");
    c_bench->add_option("--data", benchargs.data, "raw HR sequence (default: generated phantom)");
    c_bench->add_option("--out", benchargs.out, "output directory")->required();
    c_bench->add_option("--lr-sep", benchargs.lr_sep, "LR separations")->delimiter(',')->capture_default_str();
    c_bench->add_option("--hr-ds", benchargs.hr_ds, "HR down-sampling factors")->delimiter(',')->capture_default_str();
    c_bench->add_option("--noise-psnr", benchargs.noise, "noise levels (dB or none)")->delimiter(',')->capture_default_str();
    c_bench->add_option("--methods", benchargs.methods, "bicubic, bayes, external:<dir>")->delimiter(',')->capture_default_str();
    c_bench->add_option("--case-id", benchargs.case_id)->capture_default_str();
    c_bench->add_flag("--full-matrix", benchargs.full_matrix, "all 72 test conditions");
    c_bench->add_flag("--conditions-only", benchargs.conditions_only, "only write conditions.csv");
    add_phantom_options(c_bench, benchargs.phantom);
    add_seed(c_bench, benchargs.seed);

    TimeArgs timeargs;
    auto* c_time = sub("time", "median wall time of single-frame reconstructions");
    c_time->add_option("--methods", timeargs.methods, "bicubic, bayes, cmd:<command>")->delimiter(',')->capture_default_str();
    c_time->add_option("--runs", timeargs.runs)->capture_default_str();
    c_time->add_option("--width", timeargs.width, "HR output width")->capture_default_str();
    c_time->add_option("--height", timeargs.height, "HR output height")->capture_default_str();
    c_time->add_option("--out", timeargs.out, "timing CSV (default stdout)");
    add_seed(c_time, timeargs.seed);

    for (int i = 1; i < argc; ++i)
        if (app.get_subcommand_no_throw(argv[i])) {
            config->section = argv[i];
            break;
        }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::FileError& e) {
        app.exit(e);
        return 2;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*c_phantom) run_phantom(phantom);
        else if (*c_degrade) run_degrade(degrade);
        else if (*c_up) run_upsample(upsample);
        else if (*c_fuse) run_fuse(fuse);
        else if (*c_metrics) run_metrics(metrics);
        else if (*c_attn) run_attn(attn);
        else if (*c_bench) run_bench(benchargs);
        else if (*c_time) run_time(timeargs);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
