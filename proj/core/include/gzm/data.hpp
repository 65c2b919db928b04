#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "gzm/error.hpp"
#include "gzm/tensor.hpp"

namespace gzm {

// Hand layout: two hands of 21 joints each (wrist + 5 fingers x 4 joints,
// MediaPipe ordering), xyz per joint. Left hand occupies pose dims [0,63),
// right hand [63,126).
constexpr int kJointsPerHand = 21;
constexpr int kHands = 2;
constexpr int kPoseDim = kHands * kJointsPerHand * 3;  // 126
constexpr int kWristJoint = 0;

// Wrist plus the five metacarpal joints; their mean is the palm position
// used by the position metrics.
constexpr std::array<int, 6> kPalmJoints{0, 1, 5, 9, 13, 17};

enum class Hand { left = 0, right = 1 };

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

/// Per-frame hand poses, [T,126] in meters, world frame.
struct MotionSequence {
    Tensor frames;
    int fps = 30;

    MotionSequence() = default;
    MotionSequence(int t, int fps_) : frames({t, kPoseDim}), fps(fps_) {}

    int length() const { return frames.rank() == 2 ? frames.dim(0) : 0; }

    Vec3 joint(int frame, Hand hand, int j) const {
        const int base = static_cast<int>(hand) * kJointsPerHand * 3 + j * 3;
        return {frames.at(frame, base), frames.at(frame, base + 1), frames.at(frame, base + 2)};
    }
    void set_joint(int frame, Hand hand, int j, const Vec3& p) {
        const int base = static_cast<int>(hand) * kJointsPerHand * 3 + j * 3;
        frames.at(frame, base) = p.x;
        frames.at(frame, base + 1) = p.y;
        frames.at(frame, base + 2) = p.z;
    }
};

/// 3D gaze fixation points, [T,3] in meters, world frame.
struct GazeSequence {
    Tensor points;

    GazeSequence() = default;
    explicit GazeSequence(int t) : points({t, 3}) {}

    int length() const { return points.rank() == 2 ? points.dim(0) : 0; }
    Vec3 at(int frame) const {
        return {points.at(frame, 0), points.at(frame, 1), points.at(frame, 2)};
    }
    void set(int frame, const Vec3& p) {
        points.at(frame, 0) = p.x;
        points.at(frame, 1) = p.y;
        points.at(frame, 2) = p.z;
    }
};

enum class ObjectKind { bottle, paper, book, phone, pen, earphone };
enum class Motion {
    pick_bottle,
    move_paper,
    pick_book,
    pick_phone,
    pick_pen,
    pick_earphone,
    write_on_paper
};
enum class Handedness { left, right, both };

std::string object_kind_name(ObjectKind k);
ObjectKind object_kind_from_name(const std::string& s);
std::string motion_name(Motion m);
Motion motion_from_name(const std::string& s);

/// Motions excluded from every training set (cross-motion evaluation).
bool is_held_out_motion(Motion m);

constexpr int kMaxObjectPoints = 4;
constexpr int kObjectCode = kMaxObjectPoints * 3;  // o_k in R^12
constexpr int kMaxObjects = 3;

struct SceneObject {
    ObjectKind kind = ObjectKind::bottle;
    std::vector<Vec3> points;  // 1..4 anchor points

    /// Flattened 12-dim code; unused trailing slots stay zero.
    std::array<double, kObjectCode> code() const;
    Vec3 centroid() const;
};

struct ObjectSet {
    std::vector<SceneObject> objects;
    int target = 0;

    const SceneObject& target_object() const { return objects.at(static_cast<std::size_t>(target)); }
    void validate() const;
};

struct TableFrame {
    Vec3 origin{0, 0, 0};
    double half_x = 0.6;
    double half_y = 0.35;
};

struct SceneSpec {
    int subject = 0;
    Motion motion = Motion::pick_bottle;
    ObjectSet objects;
    Handedness handedness = Handedness::right;
    TableFrame table;
    Vec3 grasp_left;   // goal of the left wrist (valid when left/both)
    Vec3 grasp_right;  // goal of the right wrist (valid when right/both)
};

struct TrajectorySample {
    MotionSequence hands;
    GazeSequence gaze;
    SceneSpec scene;

    int length() const { return hands.length(); }
    int fps() const { return hands.fps; }
};

struct Dataset {
    std::vector<TrajectorySample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

}  // namespace gzm
