#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "gzm/harness.hpp"
#include "gzm/svg.hpp"

using namespace gzm;

namespace {

Dataset mini_dataset() {
    SynthConfig cfg;
    cfg.subjects = 5;
    cfg.grasps_per_object = 1;
    cfg.seed = 12;
    return build_dataset(cfg);
}

HarnessConfig mini_harness() {
    HarnessConfig hc;
    hc.vqvae.codebook_size = 16;
    hc.vqvae.embed_dim = 8;
    hc.vqvae.hidden_channels = 24;
    hc.vqvae.epochs = 25;
    hc.generator.model_dim = 24;
    hc.generator.gaze_dim = 6;
    hc.generator.heads = 4;
    hc.generator.layers = 1;
    hc.generator.epochs = 12;
    hc.jobs = 2;
    return hc;
}

GridConfig mini_grid() {
    GridConfig grid;
    grid.input_frames = {8, 24};
    grid.folds = {0};
    grid.seeds = {12};
    return grid;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("grid validation rejects misaligned frames and bad folds") {
    GridConfig grid;
    grid.input_frames = {6};
    CHECK_THROWS_AS(grid.validate(4), config_error);
    grid = GridConfig{};
    grid.folds = {7};
    CHECK_THROWS_AS(grid.validate(4), config_error);
    grid = GridConfig{};
    grid.noise_levels = {-0.1};
    CHECK_THROWS_AS(grid.validate(4), config_error);
    GridConfig{}.validate(4);
}

TEST_CASE("run_grid produces a full, sorted, reproducible report") {
    const Dataset ds = mini_dataset();
    const HarnessConfig hc = mini_harness();
    const GridConfig grid = mini_grid();

    const MetricReport report = run_grid(grid, ds, hc);
    // 3 modes x 2 gaze x 2 frame counts x 3 metrics = 36 rows,
    // plus 3 modes x 3 floor rows = 9.
    int metric_rows = 0, floor_rows = 0;
    for (const auto& row : report.rows) {
        if (row.metric.rfind("vqvae_floor", 0) == 0) ++floor_rows;
        else if (row.metric != kMetricError) ++metric_rows;
    }
    CHECK(metric_rows == 36);
    CHECK(floor_rows == 9);
    CHECK(report.failed_cells == 0);

    // canonical order already applied
    MetricReport sorted = report;
    sorted.sort_canonical();
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        CHECK(report.rows[i].metric == sorted.rows[i].metric);
        CHECK(report.rows[i].value == sorted.rows[i].value);
    }

    // bitwise reproducibility
    const MetricReport again = run_grid(grid, ds, hc);
    REQUIRE(again.rows.size() == report.rows.size());
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        CHECK(again.rows[i].value == report.rows[i].value);
    }
}

TEST_CASE("reports round-trip through CSV exactly") {
    const Dataset ds = mini_dataset();
    GridConfig grid = mini_grid();
    grid.input_frames = {8};
    const MetricReport report = run_grid(grid, ds, mini_harness());
    const std::string path = "/tmp/gzm_harness_report.csv";
    write_report_csv(report, path);
    const MetricReport back = read_report_csv(path);
    REQUIRE(back.rows.size() == report.rows.size());
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        CHECK(back.rows[i].validation == report.rows[i].validation);
        CHECK(back.rows[i].value == report.rows[i].value);  // bitwise via shortest round trip
        CHECK(back.rows[i].noise_e == report.rows[i].noise_e);
    }
    const std::string path2 = "/tmp/gzm_harness_report2.csv";
    write_report_csv(back, path2);
    std::ifstream f1(path), f2(path2);
    std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("noise cells corrupt gaze and no-gaze runs identically") {
    // The corruption depends only on (sample, level, unit seed), never on the
    // model variant under test.
    const Dataset ds = mini_dataset();
    Rng a = Rng(0x6e6f69 ^ 12).fork(7);
    Rng b = Rng(0x6e6f69 ^ 12).fork(7);
    const MotionSequence n1 = add_joint_noise(ds.samples[7].hands, 0.4, a);
    const MotionSequence n2 = add_joint_noise(ds.samples[7].hands, 0.4, b);
    CHECK(n1.frames.v == n2.frames.v);

    // the corruption reaches the tokens the generator consumes
    {
        HarnessConfig hc = mini_harness();
        const Split split = split_cs_cm_csm(ds, 0, SplitMode::CS);
        const VqVae vq = train_vqvae(ds, split.train, hc.vqvae);
        Rng noise_rng = Rng(0x6e6f69 ^ 12).fork(static_cast<std::uint64_t>(split.test[0]));
        const auto& sample = ds.samples[static_cast<std::size_t>(split.test[0])];
        const MotionSequence noisy = add_joint_noise(sample.hands, 0.4, noise_rng);
        CHECK(vq.tokenize(sample.hands) != vq.tokenize(noisy));
    }

    // and the grid carries noise columns through to the report
    GridConfig grid = mini_grid();
    grid.input_frames = {8};
    grid.gaze_flags = {true};
    grid.modes = {SplitMode::CS};
    grid.noise_levels = {0.0, 0.4};
    const MetricReport report = run_grid(grid, ds, mini_harness());
    bool saw_noise = false, saw_clean = false;
    for (const auto& row : report.rows) {
        if (row.metric != kMetricEndPose) continue;
        if (row.noise_e == 0.4) {
            saw_noise = true;
            CHECK(std::isfinite(row.value));
        }
        if (row.noise_e == 0.0) saw_clean = true;
    }
    CHECK(saw_noise);
    CHECK(saw_clean);
}

TEST_CASE("training failures become error rows, not aborts") {
    const Dataset ds = mini_dataset();
    HarnessConfig hc = mini_harness();
    hc.vqvae.codebook_size = 16;
    hc.generator.max_tokens = 2;  // too small for 12-token sequences
    GridConfig grid = mini_grid();
    grid.modes = {SplitMode::CS};
    const MetricReport report = run_grid(grid, ds, hc);
    CHECK(report.failed_cells > 0);
    bool saw_error = false;
    for (const auto& row : report.rows) saw_error = saw_error || row.metric == kMetricError;
    CHECK(saw_error);
}

TEST_CASE("floor dominance checker flags synthetic violations") {
    MetricReport report;
    MetricRow floor;
    floor.validation = "CS";
    floor.fold = 0;
    floor.fusion = "none";
    floor.metric = kMetricFloorEnd;
    floor.value = 0.05;
    floor.units = "m";
    report.rows.push_back(floor);
    MetricRow cell;
    cell.validation = "CS";
    cell.fold = 0;
    cell.fusion = "linear";
    cell.gaze = true;
    cell.input_frames = 8;
    cell.metric = kMetricEndPose;
    cell.value = 0.2;
    cell.units = "m";
    report.rows.push_back(cell);
    CHECK(check_floor_dominance(report).ok);
    report.rows[1].value = 0.01;  // below the floor
    const InvariantCheck check = check_floor_dominance(report);
    CHECK(!check.ok);
    REQUIRE(check.violations.size() == 1);
}

TEST_CASE("split soundness checker passes on generated data") {
    CHECK(check_split_soundness(mini_dataset()).ok);
}

TEST_CASE("aggregation means over folds and seeds") {
    MetricReport report;
    for (int fold = 0; fold < 2; ++fold) {
        MetricRow row;
        row.validation = "CS";
        row.fold = fold;
        row.fusion = "linear";
        row.gaze = true;
        row.input_frames = 8;
        row.metric = kMetricEndPose;
        row.value = fold == 0 ? 0.2 : 0.4;
        row.units = "m";
        row.seed = 1;
        report.rows.push_back(row);
    }
    const MetricReport mean = aggregate_mean(report);
    REQUIRE(mean.rows.size() == 1);
    CHECK(mean.rows[0].value == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(mean.rows[0].fold == -1);
}

TEST_CASE("ablation table and report charts render from grid output") {
    const Dataset ds = mini_dataset();
    GridConfig grid = mini_grid();
    grid.input_frames = {8};
    grid.fusions = {FusionMode::linear, FusionMode::summation};
    grid.gaze_flags = {true};
    grid.modes = {SplitMode::CS};
    const MetricReport report = run_grid(grid, ds, mini_harness());

    const std::string table_path = "/tmp/gzm_harness_table.csv";
    write_ablation_table(report, table_path);
    std::ifstream table(table_path);
    std::string header;
    std::getline(table, header);
    CHECK(header == "validation,fusion,8");
    int lines = 0;
    for (std::string line; std::getline(table, line);) lines += !line.empty();
    CHECK(lines == 2);  // one per fusion
    std::remove(table_path.c_str());

    std::filesystem::create_directories("/tmp/gzm_harness_plots");
    const auto charts = write_report_charts(report, "/tmp/gzm_harness_plots");
    CHECK(!charts.empty());
    std::ifstream svg(charts.front());
    std::string content((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
    CHECK(content.find("<svg") != std::string::npos);
    CHECK(content.find("stroke-dasharray") != std::string::npos);  // dashed floor series
    std::filesystem::remove_all("/tmp/gzm_harness_plots");
}

TEST_SUITE_END();
