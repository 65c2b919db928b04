#pragma once

#include <span>
#include <vector>

#include "gzm/data.hpp"

namespace gzm {

/// Palm centre: mean of the wrist and the five metacarpal joints.
Vec3 palm_position(const MotionSequence& motion, int frame, Hand hand);

/// Per-frame palm positions of the active hand(s); bimanual motions average
/// the two palms.
std::vector<Vec3> palm_track(const MotionSequence& motion, Handedness handedness);

/// Mean Euclidean distance between paired positions.
double avg_position_error(std::span<const Vec3> gt, std::span<const Vec3> pred);

/// Euclidean distance between the final positions only.
double end_pose_error(std::span<const Vec3> gt, std::span<const Vec3> pred);

/// Angle (radians) between start->gt_end and start->pred_end. Degenerate
/// zero-length vectors raise param_error; callers skip and count such rows.
double key_pose_angle_error(const Vec3& start, const Vec3& gt_end, const Vec3& pred_end);

}  // namespace gzm
