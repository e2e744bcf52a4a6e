#include "oracles.hpp"

#include "xfuse/bicubic.hpp"
#include "xfuse/bench.hpp"
#include "xfuse/error.hpp"
#include "xfuse/phantom.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace xfuse;
using namespace xfuse::bench;

namespace {
GridData small_data() {
    PhantomConfig c;
    c.width = 64;
    c.height = 64;
    c.n_frames = 41;
    c.particle_speed = 0.5;
    return prepare_data(gen_phantom(c));
}
}  // namespace

TEST_CASE("noise labels and methods") {
    CHECK(noise_label(std::nullopt) == "none");
    CHECK(noise_label(30) == "30");
    CHECK(parse_noise_level("none") == std::nullopt);
    CHECK(parse_noise_level("40") == 40);
    CHECK_THROWS_AS(parse_noise_level("40dB"), ValidationError);
    CHECK(parse_method("bayes").kind == MethodKind::Bayes);
    const Method ext = parse_method("external:/tmp/recon");
    CHECK(ext.kind == MethodKind::External);
    CHECK(ext.dir == "/tmp/recon");
    CHECK(ext.name == "external:/tmp/recon");
    CHECK_THROWS_AS(parse_method("nearest"), ValidationError);
}

TEST_CASE("grid validation and enumeration") {
    GridConfig g;
    CHECK_NOTHROW(validate(g));
    g.lr_separations = {4};
    CHECK_THROWS_AS(validate(g), ValidationError);
    g = GridConfig{};
    g.hr_downsamples = {5};
    CHECK_THROWS_AS(validate(g), ValidationError);
    g = GridConfig{};
    g.noise_levels = {25};
    CHECK_THROWS_AS(validate(g), ValidationError);
    g = GridConfig{};
    g.methods = {};
    CHECK_THROWS_AS(validate(g), ValidationError);

    const auto cells = enumerate_cells(full_matrix_grid());
    CHECK(cells.size() == 72);
    std::set<std::string> names;
    for (const auto& c : cells) names.insert(cell_dir_name(c));
    CHECK(names.size() == 72);
    CHECK(cell_dir_name(cells.front()) == "sep1_ds2_noisenone");
    CHECK(cell_dir_name(cells.back()) == "sep3_ds450_noise60");
    CHECK(cells[1].noise == 20);
}

TEST_CASE("target conditions") {
    const std::vector<std::int64_t> lr{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const std::vector<std::int64_t> hr{0, 5, 10};
    const auto cs = build_conditions(lr, hr, 2);
    // targets 2..8 have LR neighbours at +-2
    REQUIRE(cs.conditions.size() == 7);
    CHECK(cs.skipped == 4);
    const auto& c = cs.conditions[1];  // t = 3
    CHECK(c.target == 3);
    CHECK(c.lr_prev == 1);
    CHECK(c.lr_next == 5);
    CHECK(c.hr_prev == 0);
    CHECK(c.hr_next == 5);
    CHECK(c.delta_back() == 3);
    CHECK(c.delta_fwd() == 2);
    CHECK_FALSE(c.keyframe);
    CHECK(cs.conditions[3].keyframe);  // t = 5
    CHECK_THROWS_AS(build_conditions(lr, {20}, 1), ValidationError);
    CHECK_THROWS_AS(build_conditions(lr, hr, 0), ValidationError);

    CHECK(hr_keep_trailing(450, 450));
    CHECK_FALSE(hr_keep_trailing(450, 20));

    std::stringstream ss;
    write_conditions_csv(ss, {GridCell{2, 5, std::nullopt}}, {cs});
    std::string header, first;
    std::getline(ss, header);
    std::getline(ss, first);
    CHECK(header == kConditionsCsvHeader);
    CHECK(first == "2,5,2,0,4,0,5,0");
}

TEST_CASE("run_grid scores every method on the same targets") {
    const GridData data = small_data();
    testutil::TempDir tmp("ext");
    // an external method that is really bicubic must score identically
    Sequence recon;
    recon.role = Role::RECON;
    for (const Frame& f : data.lr_clean.frames) recon.frames.push_back(upsample_bicubic(f));
    write_manifest(recon, tmp.path() / "sep1_ds20_noisenone");

    GridConfig g;
    g.methods = {"bicubic", "bayes", "external:" + tmp.path().string()};
    const auto res = run_grid(g, data);
    CHECK(res.missing.empty());
    REQUIRE(res.cells.size() == 1);
    const std::size_t n = res.condition_sets[0].conditions.size();
    CHECK(n == 39);
    REQUIRE(res.rows.size() == 3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(res.rows[i].method == "bicubic");
        CHECK(res.rows[2 * n + i].frame == res.rows[i].frame);
        CHECK(res.rows[2 * n + i].psnr_db == res.rows[i].psnr_db);
        CHECK(res.rows[n + i].frame == res.rows[i].frame);
    }
    CHECK(res.summary.size() == 9);
    CHECK(res.noise.empty());

    // keyframe rows reproduce the HR frame
    for (std::size_t i = 0; i < n; ++i)
        if (res.condition_sets[0].conditions[i].keyframe) CHECK(std::isinf(res.rows[n + i].psnr_db));

    testutil::TempDir out("grid");
    write_grid_outputs(res, out.path());
    for (const char* f : {"metrics.csv", "summary.csv", "lr_noise.csv", "conditions.csv"})
        CHECK(std::filesystem::exists(out.path() / f));
}

TEST_CASE("run_grid reports missing external reconstructions") {
    testutil::TempDir empty("ext_empty");
    GridConfig g;
    g.methods = {"external:" + empty.path().string()};
    const auto res = run_grid(g, small_data());
    CHECK(res.rows.empty());
    CHECK(res.missing.size() == 39);
    g.methods = {"external:/nonexistent/xfuse"};
    CHECK_THROWS_AS(run_grid(g, small_data()), ValidationError);
}

TEST_CASE("noise realizations are calibrated and shared") {
    GridConfig g;
    g.methods = {"bicubic"};
    g.noise_levels = {30};
    g.hr_downsamples = {10, 20};
    const auto res = run_grid(g, small_data());
    REQUIRE(res.noise.size() == 41);
    double mean = 0;
    for (const auto& r : res.noise) mean += r.lr_psnr_db;
    CHECK(mean / 41 == doctest::Approx(30.0).epsilon(0.02));
    // identical LR input in both cells -> identical bicubic rows for shared targets
    std::map<std::int64_t, double> first;
    for (const auto& r : res.rows)
        if (r.hr_ds == 10) first[r.frame] = r.psnr_db;
    for (const auto& r : res.rows)
        if (r.hr_ds == 20 && first.count(r.frame)) CHECK(first[r.frame] == r.psnr_db);
}

TEST_CASE("timing helpers") {
    CHECK(median({3, 1, 2}) == 2);
    CHECK(median({4, 1, 2, 3}) == 2.5);
    int calls = 0;
    const auto rep = time_callable("x", 4, 4, 5, [&] { ++calls; });
    CHECK(calls == 5);
    CHECK(rep.runs_s.size() == 5);
    CHECK(rep.median_s >= 0);
    CHECK_THROWS_AS(time_callable("x", 4, 4, 0, [] {}), ValidationError);

    const auto fx = make_timing_fixture(128, 64);
    CHECK(fx.hr_prev.width == 128);
    CHECK(fx.lr_ref.width == 32);
    const auto b = time_method("bayes", fx, 2);
    CHECK(b.n_runs == 2);
    CHECK_THROWS_AS(time_method("nearest", fx, 1), ValidationError);

    std::stringstream ss;
    write_timing_csv(ss, {b});
    std::string header;
    std::getline(ss, header);
    CHECK(header == kTimingCsvHeader);
}
