#include "gzm/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace gzm {

Vec3 palm_position(const MotionSequence& motion, int frame, Hand hand) {
    Vec3 acc{};
    for (int j : kPalmJoints) acc = acc + motion.joint(frame, hand, j);
    return acc * (1.0 / static_cast<double>(kPalmJoints.size()));
}

std::vector<Vec3> palm_track(const MotionSequence& motion, Handedness handedness) {
    std::vector<Vec3> track(static_cast<std::size_t>(motion.length()));
    for (int t = 0; t < motion.length(); ++t) {
        switch (handedness) {
            case Handedness::left:
                track[static_cast<std::size_t>(t)] = palm_position(motion, t, Hand::left);
                break;
            case Handedness::right:
                track[static_cast<std::size_t>(t)] = palm_position(motion, t, Hand::right);
                break;
            case Handedness::both:
                track[static_cast<std::size_t>(t)] =
                    (palm_position(motion, t, Hand::left) + palm_position(motion, t, Hand::right)) *
                    0.5;
                break;
        }
    }
    return track;
}

double avg_position_error(std::span<const Vec3> gt, std::span<const Vec3> pred) {
    if (gt.size() != pred.size()) {
        throw shape_error("avg_position_error: track lengths " + std::to_string(gt.size()) +
                          " vs " + std::to_string(pred.size()));
    }
    if (gt.empty()) throw shape_error("avg_position_error: empty tracks");
    double acc = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) acc += (gt[i] - pred[i]).norm();
    return acc / static_cast<double>(gt.size());
}

double end_pose_error(std::span<const Vec3> gt, std::span<const Vec3> pred) {
    if (gt.empty() || pred.empty()) throw shape_error("end_pose_error: empty tracks");
    return (gt.back() - pred.back()).norm();
}

double key_pose_angle_error(const Vec3& start, const Vec3& gt_end, const Vec3& pred_end) {
    const Vec3 a = gt_end - start;
    const Vec3 b = pred_end - start;
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        throw param_error("key_pose_angle_error: zero-length direction, angle undefined");
    }
    // Identical endpoints are exactly zero; acos would amplify rounding noise.
    if (gt_end.x == pred_end.x && gt_end.y == pred_end.y && gt_end.z == pred_end.z) return 0.0;
    const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
    return std::acos(c);
}

}  // namespace gzm
