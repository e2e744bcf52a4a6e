#include "xfuse/attention.hpp"
#include "xfuse/bayes.hpp"
#include "xfuse/bench.hpp"
#include "xfuse/bicubic.hpp"
#include "xfuse/degrade.hpp"
#include "xfuse/error.hpp"
#include "xfuse/frame.hpp"
#include "xfuse/metrics.hpp"
#include "xfuse/phantom.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstring>

namespace py = pybind11;
using namespace xfuse;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;

Frame to_frame(const F32& a, std::int64_t index = 0) {
    if (a.ndim() != 2) throw ValidationError("expected a 2-D array (height, width)");
    const auto h = std::uint32_t(a.shape(0)), w = std::uint32_t(a.shape(1));
    return Frame(w, h, std::vector<float>(a.data(), a.data() + a.size()), index);
}

F32 to_array(const Frame& f) {
    F32 out({py::ssize_t(f.height), py::ssize_t(f.width)});
    std::copy(f.pixels.begin(), f.pixels.end(), out.mutable_data());
    return out;
}

// (n, height, width) stack plus optional frame indices (default 0..n-1)
Sequence to_sequence(const F32& stack, std::optional<std::vector<std::int64_t>> indices, Role role,
                     std::int64_t native_step) {
    if (stack.ndim() != 3) throw ValidationError("expected a 3-D array (frames, height, width)");
    const auto n = std::size_t(stack.shape(0));
    const auto h = std::uint32_t(stack.shape(1)), w = std::uint32_t(stack.shape(2));
    if (indices && indices->size() != n) throw ValidationError("one frame index per frame is required");
    Sequence s;
    s.role = role;
    s.native_step = native_step;
    const std::size_t px = std::size_t(w) * h;
    for (std::size_t i = 0; i < n; ++i)
        s.frames.emplace_back(w, h, std::vector<float>(stack.data() + i * px, stack.data() + (i + 1) * px),
                              indices ? (*indices)[i] : std::int64_t(i));
    validate(s);
    return s;
}

F32 to_stack(const Sequence& s) {
    F32 out({py::ssize_t(s.size()), py::ssize_t(s.height()), py::ssize_t(s.width())});
    float* dst = out.mutable_data();
    for (const Frame& f : s.frames) dst = std::copy(f.pixels.begin(), f.pixels.end(), dst);
    return out;
}

std::span<const double> view(const F64& a) { return {a.data(), std::size_t(a.size())}; }

void require_same(const F64& a, const F64& b) {
    if (a.ndim() != b.ndim()) throw ValidationError("arrays differ in shape");
    for (py::ssize_t i = 0; i < a.ndim(); ++i)
        if (a.shape(i) != b.shape(i)) throw ValidationError("arrays differ in shape");
}

py::dict metrics_row(const MetricsRow& r) {
    py::dict d;
    d["case_id"] = r.case_id;
    d["method"] = r.method;
    d["lr_sep"] = r.lr_sep;
    d["hr_ds"] = r.hr_ds;
    d["noise_psnr"] = r.noise_psnr;
    d["frame"] = r.frame;
    d["psnr_db"] = r.psnr_db;
    d["aad"] = r.aad;
    d["ssim"] = r.ssim;
    return d;
}

}  // namespace

PYBIND11_MODULE(_xfuse, m) {
    m.doc() = "Spatio-temporal fusion toolkit: degradation, baselines, Bayesian fusion and metrics.";

    static py::exception<ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
    static py::exception<IoError> io_error(m, "IoError", PyExc_OSError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            py::set_error(validation_error, e.what());
        } catch (const IoError& e) {
            py::set_error(io_error, e.what());
        }
    });

    // metrics
    m.def("psnr", [](const F64& a, const F64& b, double data_range) {
        require_same(a, b);
        return psnr(view(a), view(b), {.data_range = data_range});
    }, py::arg("a"), py::arg("b"), py::arg("data_range") = 1.0);
    m.def("mse", [](const F64& a, const F64& b) {
        require_same(a, b);
        return mse(view(a), view(b));
    }, py::arg("a"), py::arg("b"));
    m.def("aad", [](const F64& a, const F64& b) {
        require_same(a, b);
        return aad(view(a), view(b));
    }, py::arg("a"), py::arg("b"));
    m.def("ssim", [](const F64& a, const F64& b, double data_range) {
        require_same(a, b);
        if (a.ndim() != 2) throw ValidationError("ssim expects 2-D arrays");
        return ssim(view(a), view(b), std::size_t(a.shape(1)), std::size_t(a.shape(0)),
                    {.data_range = data_range});
    }, py::arg("a"), py::arg("b"), py::arg("data_range") = 1.0);

    // degradation
    m.def("bin_spatial", [](const F32& a, int factor) { return to_array(bin_spatial(to_frame(a), factor)); },
          py::arg("image"), py::arg("factor") = 4);
    m.def("normalize_sequence", [](const F32& stack) {
        const auto [out, st] = normalize_sequence(to_sequence(stack, std::nullopt, Role::HR, 1));
        return py::make_tuple(to_stack(out), st.p_low, st.p_high);
    }, py::arg("frames"), "Clip to the 0.35/99.65 percentiles of all pixels and rescale to [0, 1].");
    m.def("nearest_rank_percentile", &nearest_rank_percentile, py::arg("values"), py::arg("q"));
    m.def("add_poisson", [](const F32& a, double b0, std::uint64_t seed, std::int64_t frame_index) {
        return to_array(add_poisson(to_frame(a, frame_index), {b0, seed, std::nullopt}));
    }, py::arg("image"), py::arg("b0"), py::arg("seed") = 0, py::arg("frame_index") = 0);
    m.def("calibrate_b0", [](const F32& stack, double target_psnr, std::uint64_t seed) {
        const auto c = calibrate_b0(to_sequence(stack, std::nullopt, Role::LR, 1), target_psnr, seed);
        py::dict d;
        d["b0"] = c.b0;
        d["closed_form"] = c.closed_form;
        d["measured_psnr"] = c.measured_psnr;
        d["refined"] = c.refined;
        return d;
    }, py::arg("frames"), py::arg("target_psnr"), py::arg("seed") = 0);

    // baselines and fusion
    m.def("upsample_bicubic", [](const F32& a, int factor, double kernel_a) {
        return to_array(upsample_bicubic(to_frame(a), {factor, kernel_a}));
    }, py::arg("image"), py::arg("factor") = 4, py::arg("kernel_a") = -0.75);
    m.def("bayes_reconstruct",
          [](const F32& lr_prev, const F32& lr_ref, const F32& lr_next, const F32& hr_prev, const F32& hr_next,
             int delta_back, int delta_fwd, std::uint64_t seed, std::optional<int> clusters) {
              const Frame lp = to_frame(lr_prev), lt = to_frame(lr_ref), ln = to_frame(lr_next);
              const Frame hp = to_frame(hr_prev), hn = to_frame(hr_next);
              bayes::ReconstructOptions opt;
              opt.seed = seed;
              opt.clusters = clusters;
              py::gil_scoped_release release;
              const auto r = bayes::reconstruct({lp, lt, ln, hp, hn, delta_back, delta_fwd}, opt);
              py::gil_scoped_acquire acquire;
              return to_array(r.frame);
          },
          py::arg("lr_prev"), py::arg("lr_ref"), py::arg("lr_next"), py::arg("hr_prev"), py::arg("hr_next"),
          py::arg("delta_back"), py::arg("delta_fwd"), py::arg("seed") = 0, py::arg("clusters") = py::none(),
          "Reconstruct the HR frame co-timed with lr_ref; lr_prev/lr_next are co-timed with hr_prev/hr_next.");
    m.def("condition_mid", [](const F64& mean, const F64& cov, double x_prev, double x_next) {
        if (mean.size() != 3 || cov.size() != 9) throw ValidationError("expected a 3-vector and a 3x3 matrix");
        const bayes::Vec3 mu(mean.data()[0], mean.data()[1], mean.data()[2]);
        bayes::Mat3 c;
        for (int i = 0; i < 9; ++i) c(i / 3, i % 3) = cov.data()[i];
        const auto r = bayes::condition_mid(mu, c, x_prev, x_next);
        return py::make_tuple(r.mean, r.variance);
    }, py::arg("mean"), py::arg("cov"), py::arg("x_prev"), py::arg("x_next"));

    // synthetic data
    m.def("gen_phantom",
          [](std::uint32_t width, std::uint32_t height, std::uint32_t n_frames, std::uint32_t n_particles,
             double radius, double speed, double keyhole, double texture, std::uint64_t seed) {
              PhantomConfig c{width, height, n_frames, n_particles, radius, speed, keyhole, texture, seed};
              return to_stack(gen_phantom(c));
          },
          py::arg("width") = 256, py::arg("height") = 256, py::arg("n_frames") = 450, py::arg("n_particles") = 6,
          py::arg("particle_radius") = 5.0, py::arg("particle_speed") = 0.4,
          py::arg("keyhole_depth_amplitude") = 0.6, py::arg("background_texture_scale") = 12.0,
          py::arg("seed") = 0);

    // sequences on disk
    m.def("read_sequence", [](const std::filesystem::path& dir) {
        const Sequence s = read_manifest(dir);
        return py::make_tuple(to_stack(s), s.frame_indices(), std::string(role_name(s.role)), s.native_step);
    }, py::arg("directory"), "Returns (frames, indices, role, native_step).");
    m.def("write_sequence",
          [](const std::filesystem::path& dir, const F32& frames, std::optional<std::vector<std::int64_t>> indices,
             const std::string& role, std::int64_t native_step) {
              write_manifest(to_sequence(frames, indices, parse_role(role), native_step), dir);
          },
          py::arg("directory"), py::arg("frames"), py::arg("indices") = py::none(), py::arg("role") = "HR",
          py::arg("native_step") = 1);

    // attention analytics
    m.def("normalize_attention",
          [](const std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t, double, double>>& records,
             bool drop_incomplete) {
              std::vector<attention::AttentionRecord> in;
              for (const auto& [t, p, n, b, f] : records) in.push_back({t, p, n, b, f});
              const auto res = attention::normalize_scores(in, {drop_incomplete});
              std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t, double, double>> out;
              for (const auto& r : res.records)
                  out.emplace_back(r.raw.target, r.raw.prev_hr, r.raw.next_hr, r.offset, r.backward_norm,
                                   r.forward_norm);
              return py::make_tuple(out, res.dropped_groups);
          },
          py::arg("records"), py::arg("drop_incomplete") = false,
          "records: (target, prev_hr, next_hr, backward_raw, forward_raw). Returns (normalized, dropped groups)"
          " with normalized rows (target, prev_hr, next_hr, offset, backward_norm, forward_norm).");

    // benchmark grid
    m.def("run_grid",
          [](const F32& raw_hr, std::vector<int> lr_sep, std::vector<int> hr_ds, std::vector<std::string> noise,
             std::vector<std::string> methods, std::string case_id, std::uint64_t seed,
             std::optional<std::filesystem::path> out_dir) {
              bench::GridConfig g;
              g.lr_separations = std::move(lr_sep);
              g.hr_downsamples = std::move(hr_ds);
              g.noise_levels.clear();
              for (const auto& n : noise) g.noise_levels.push_back(bench::parse_noise_level(n));
              g.methods = std::move(methods);
              g.case_id = std::move(case_id);
              g.seed = seed;
              const Sequence raw = to_sequence(raw_hr, std::nullopt, Role::HR, 1);
              bench::GridResult res;
              {
                  py::gil_scoped_release release;
                  res = bench::run_grid(g, bench::prepare_data(raw, g.spatial_factor));
                  if (out_dir) bench::write_grid_outputs(res, *out_dir);
              }
              py::list rows;
              for (const auto& r : res.rows) rows.append(metrics_row(r));
              return rows;
          },
          py::arg("raw_hr"), py::arg("lr_sep") = std::vector<int>{1}, py::arg("hr_ds") = std::vector<int>{20},
          py::arg("noise_psnr") = std::vector<std::string>{"none"},
          py::arg("methods") = std::vector<std::string>{"bicubic", "bayes"}, py::arg("case_id") = "phantom",
          py::arg("seed") = 0, py::arg("out_dir") = py::none(),
          "Run every method over the grid on raw HR frames (frames, height, width); returns metric rows.");
}
