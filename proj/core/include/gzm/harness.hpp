#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gzm/generator.hpp"
#include "gzm/synth.hpp"
#include "gzm/vqvae.hpp"

namespace gzm {

/// Experimental grid: every combination of the listed axes is one cell.
/// Noise levels above zero corrupt only the test-time input frames.
struct GridConfig {
    std::vector<int> input_frames{8, 12, 16, 20, 24, 28, 32, 36, 40, 44};
    std::vector<FusionMode> fusions{FusionMode::linear};
    std::vector<bool> gaze_flags{true, false};
    std::vector<double> noise_levels{0.0};
    std::vector<SplitMode> modes{SplitMode::CS, SplitMode::CM, SplitMode::CSM};
    std::vector<int> folds{0, 1, 2, 3, 4};
    std::vector<std::uint64_t> seeds{1};

    void validate(int downsample) const;
};

// Metric names used in report rows.
inline constexpr const char* kMetricAvgPosition = "avg_position";
inline constexpr const char* kMetricEndPose = "end_pose";
inline constexpr const char* kMetricKeyPoseAngle = "key_pose_angle";
// The reconstruction floor is reported once per base metric; a single
// "vqvae_floor" label cannot carry all three panels of the plots.
inline constexpr const char* kMetricFloorAvg = "vqvae_floor_avg_position";
inline constexpr const char* kMetricFloorEnd = "vqvae_floor_end_pose";
inline constexpr const char* kMetricFloorAngle = "vqvae_floor_key_pose_angle";
inline constexpr const char* kMetricError = "error";

struct MetricRow {
    std::string validation;  // CS | CM | CSM
    int fold = 0;
    std::string fusion;  // linear | convolution | summation | none (floor rows)
    bool gaze = false;
    int input_frames = 0;
    double noise_e = 0.0;
    std::string metric;
    double value = 0.0;
    std::string units;        // m | rad | -
    std::uint64_t seed = 1;   // kept in memory; not a CSV column
};

struct MetricReport {
    std::vector<MetricRow> rows;
    int degenerate_angle_skips = 0;
    int failed_cells = 0;

    void sort_canonical();
    void append(const MetricReport& other);
};

struct HarnessConfig {
    VqVaeConfig vqvae;
    GeneratorConfig generator;
    int jobs = 1;
    std::string checkpoint_dir;  // reuse trained units across runs when set
};

/// Train (or load) one VQ-VAE and one generator per trained unit, roll every
/// test sample out from each input length, and emit one row per
/// (cell, metric) plus reconstruction-floor rows. Cells whose training fails
/// produce an `error` row instead of aborting the grid.
MetricReport run_grid(const GridConfig& grid, const Dataset& dataset, const HarnessConfig& cfg);

/// Reconstruction error of encode->quantize->decode on a test set; the floor
/// any generator sharing the decoder can reach.
double vqvae_floor(const VqVae& vqvae, const Dataset& dataset, std::span<const int> test_idx,
                   const std::string& metric, int* degenerate_skips = nullptr);

/// Mean over folds and seeds per configuration; aggregated rows carry
/// fold = -1.
MetricReport aggregate_mean(const MetricReport& report);

struct InvariantCheck {
    bool ok = true;
    std::vector<std::string> violations;
    std::vector<std::string> notes;  // informational, not failures
};

/// Floor dominance: generator error >= the matching VQ-VAE floor, compared
/// on fold/seed aggregates per configuration (the relation the fold-averaged
/// error curves plot). Cells converge onto the floor at long inputs, so
/// small-sample runs can graze it by a few percent; crossings below 85% of
/// the floor are violations, everything milder lands in `notes`.
InvariantCheck check_floor_dominance(const MetricReport& report);

/// Split soundness over every mode and fold of this dataset.
InvariantCheck check_split_soundness(const Dataset& dataset);

void write_report_csv(const MetricReport& report, const std::string& path);
void write_report_jsonl(const MetricReport& report, const std::string& path);
MetricReport read_report_csv(const std::string& path);

/// Fusion-ablation table: one line per (validation, fusion), end-pose error
/// columns per input frame count (Table-shaped CSV).
void write_ablation_table(const MetricReport& report, const std::string& path);

}  // namespace gzm
