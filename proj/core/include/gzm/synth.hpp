#pragma once

#include <cstdint>
#include <vector>

#include "gzm/data.hpp"
#include "gzm/rng.hpp"

namespace gzm {

struct SynthConfig {
    int subjects = 15;
    int grasps_per_object = 5;
    int frames = 48;
    int fps = 30;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Per-subject kinematic style, drawn once per subject.
struct SubjectStyle {
    double reach_end;       // fraction of the sequence when the reach completes
    double curve_amp;       // lateral path curvature (m)
    double lift_amp;        // mid-reach lift above the table (m)
    double hand_scale;      // skeleton scale factor
    Vec3 rest_offset;       // resting hand placement shift
    double saccade_start;   // gaze saccade onset, fraction of sequence
    double saccade_dur;     // saccade duration, fraction of sequence
    double right_pref;      // probability of grasping with the right hand
};

SubjectStyle subject_style(std::uint64_t dataset_seed, int subject);

/// Smoothstep of minimum-jerk reaching: 10u^3 - 15u^4 + 6u^5 on [0,1].
double min_jerk_blend(double u);

/// Random object layout for one motion: target plus 1-2 distractors at
/// non-overlapping table positions; the target index is randomized so object
/// order carries no intent information.
SceneSpec generate_scene(Rng& rng, Motion motion, int subject, const SubjectStyle& style);

/// Synthesize the eye-hand trajectory for a scene. The active wrist follows
/// a minimum-jerk path from rest to the grasp point with subject-dependent
/// curvature; fingers close over the final quarter of the path; gaze
/// saccades to the target early and fixates. T >= 16.
TrajectorySample synth_trajectory(const SceneSpec& scene, int t_frames, int fps, Rng& rng,
                                  const SubjectStyle& style);

/// Per-joint Gaussian displacement with per-axis sigma = e*sqrt(pi/8), drawn
/// independently for every joint of every frame, so the mean displacement
/// norm equals e. e >= 0.
MotionSequence add_joint_noise(const MotionSequence& motion, double mean_error, Rng& rng);

double noise_sigma(double mean_error);

/// Full corpus: per subject, grasps_per_object repetitions of each
/// single-object motion plus one bimanual write-on-paper sample.
Dataset build_dataset(const SynthConfig& config);

enum class SplitMode { CS, CM, CSM };

std::string split_mode_name(SplitMode m);
SplitMode split_mode_from_name(const std::string& s);

struct Split {
    std::vector<int> train;  // sample indices
    std::vector<int> test;
};

/// Cross-subject / cross-motion / cross-subject-and-motion splits.
/// Held-out motions never appear in any training set. fold in [0,5).
Split split_cs_cm_csm(const Dataset& dataset, int fold, SplitMode mode);

constexpr int kNumFolds = 5;

}  // namespace gzm
