#include "gzm/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace gzm {

namespace {

constexpr double kPi = std::numbers::pi;

// Right-hand joint offsets in the local frame (x right, y forward, z up),
// palm down on the table, fingers pointing +y, thumb on the -x side.
// MediaPipe order: wrist, thumb x4, index x4, middle x4, ring x4, pinky x4.
constexpr std::array<Vec3, kJointsPerHand> kFlatHand{{
    {0.000, 0.000, 0.000},   // wrist
    {-0.030, 0.022, 0.000},  // thumb cmc
    {-0.052, 0.042, 0.000},  // thumb mcp
    {-0.064, 0.058, 0.000},  // thumb ip
    {-0.072, 0.072, 0.000},  // thumb tip
    {-0.022, 0.088, 0.000},  // index mcp
    {-0.024, 0.124, 0.000},  // index pip
    {-0.025, 0.148, 0.000},  // index dip
    {-0.026, 0.168, 0.000},  // index tip
    {0.000, 0.092, 0.000},   // middle mcp
    {0.000, 0.132, 0.000},   // middle pip
    {0.000, 0.158, 0.000},   // middle dip
    {0.000, 0.180, 0.000},   // middle tip
    {0.021, 0.088, 0.000},   // ring mcp
    {0.022, 0.124, 0.000},   // ring pip
    {0.023, 0.148, 0.000},   // ring dip
    {0.024, 0.166, 0.000},   // ring tip
    {0.041, 0.080, 0.000},   // pinky mcp
    {0.044, 0.108, 0.000},   // pinky pip
    {0.046, 0.126, 0.000},   // pinky dip
    {0.048, 0.142, 0.000},   // pinky tip
}};

struct GraspShape {
    double curl;   // finger flexion amount
    double pinch;  // thumb opposition amount
};

// Grasp types A-D by object kind; schematic closure parameters.
GraspShape grasp_shape(ObjectKind kind) {
    switch (kind) {
        case ObjectKind::bottle: return {0.55, 0.30};  // power grasp
        case ObjectKind::paper: return {0.25, 0.70};   // flat pinch
        case ObjectKind::book: return {0.45, 0.40};
        case ObjectKind::phone: return {0.45, 0.40};
        case ObjectKind::pen: return {0.70, 0.90};  // precision pinch
        case ObjectKind::earphone: return {0.70, 0.90};
    }
    return {0.5, 0.5};
}

// Closed-hand pose from the flat table: each finger chain bends downward by
// curl-scaled segment angles, the thumb folds toward the palm by pinch.
std::array<Vec3, kJointsPerHand> closed_hand(const GraspShape& shape) {
    std::array<Vec3, kJointsPerHand> out = kFlatHand;
    const double bend[3] = {0.9, 1.0, 1.1};  // radians at full curl per segment
    for (int finger = 0; finger < 5; ++finger) {
        const int base = 1 + finger * 4;  // first joint of this finger
        if (finger == 0) {
            // Thumb: rotate the chain toward the palm centre (+x for a right
            // hand), with a mild inward fold.
            const double yaw = shape.pinch * 0.9;
            for (int j = 0; j < 4; ++j) {
                Vec3 rel = kFlatHand[static_cast<std::size_t>(base + j)] - kFlatHand[1];
                Vec3 rot{rel.x * std::cos(yaw) + rel.y * std::sin(yaw) * 0.6, rel.y * std::cos(yaw),
                         rel.z};
                out[static_cast<std::size_t>(base + j)] = kFlatHand[1] + rot;
            }
            continue;
        }
        Vec3 prev = kFlatHand[static_cast<std::size_t>(base)];
        double angle = 0.0;
        for (int seg = 0; seg < 3; ++seg) {
            const Vec3 a = kFlatHand[static_cast<std::size_t>(base + seg)];
            const Vec3 b = kFlatHand[static_cast<std::size_t>(base + seg + 1)];
            const double len = (b - a).norm();
            Vec3 dir = b - a;
            const double planar = std::max(1e-9, std::hypot(dir.x, dir.y));
            dir = {dir.x / planar, dir.y / planar, 0.0};
            angle += shape.curl * bend[seg];
            Vec3 next = prev + dir * (len * std::cos(angle));
            next.z = prev.z - len * std::sin(angle);
            out[static_cast<std::size_t>(base + seg + 1)] = next;
            prev = next;
        }
    }
    return out;
}

Vec3 rotate_z(const Vec3& p, double yaw) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {p.x * c + p.y * s, -p.x * s + p.y * c, p.z};
}

Vec3 mirror_for_hand(const Vec3& p, Hand hand) {
    return hand == Hand::right ? p : Vec3{-p.x, p.y, p.z};
}

// Fixation jitter: isotropic Gaussian with 5 mm per-axis sigma, clamped to a
// 9 mm radius so fixations always stay within 1 cm of the target.
Vec3 fixation_jitter(Rng& rng) {
    Vec3 j{rng.normal(0.0, 0.005), rng.normal(0.0, 0.005), rng.normal(0.0, 0.005)};
    const double n = j.norm();
    if (n > 0.009) j = j * (0.009 / n);
    return j;
}

ObjectKind target_kind(Motion m) {
    switch (m) {
        case Motion::pick_bottle: return ObjectKind::bottle;
        case Motion::move_paper: return ObjectKind::paper;
        case Motion::pick_book: return ObjectKind::book;
        case Motion::pick_phone: return ObjectKind::phone;
        case Motion::pick_pen: return ObjectKind::pen;
        case Motion::pick_earphone: return ObjectKind::earphone;
        case Motion::write_on_paper: return ObjectKind::pen;
    }
    return ObjectKind::bottle;
}

SceneObject make_object(ObjectKind kind, const Vec3& at, Rng& rng, bool paired_earphones) {
    SceneObject obj;
    obj.kind = kind;
    const double yaw = rng.uniform(0.0, kPi);
    auto rect = [&](double hx, double hy, double z) {
        const std::array<Vec3, 4> corners{Vec3{hx, hy, 0}, Vec3{-hx, hy, 0}, Vec3{-hx, -hy, 0},
                                          Vec3{hx, -hy, 0}};
        for (const Vec3& c : corners) {
            Vec3 r = rotate_z(c, yaw);
            obj.points.push_back({at.x + r.x, at.y + r.y, z});
        }
    };
    switch (kind) {
        case ObjectKind::bottle:
            obj.points.push_back({at.x, at.y, 0.0});   // base
            obj.points.push_back({at.x, at.y, 0.22});  // cap
            break;
        case ObjectKind::paper:
            rect(0.074, 0.105, 0.0);  // A5 sheet
            break;
        case ObjectKind::book:
            rect(0.065, 0.098, 0.025);
            break;
        case ObjectKind::phone:
            rect(0.035, 0.075, 0.008);
            break;
        case ObjectKind::pen: {
            const Vec3 tip = rotate_z({0.0, 0.07, 0.0}, yaw);
            obj.points.push_back({at.x + tip.x, at.y + tip.y, 0.008});  // tip
            obj.points.push_back({at.x - tip.x, at.y - tip.y, 0.008});  // bottom
            break;
        }
        case ObjectKind::earphone:
            obj.points.push_back({at.x, at.y, 0.01});
            if (paired_earphones) {
                const Vec3 off = rotate_z({0.055, 0.0, 0.0}, yaw);
                obj.points.push_back({at.x + off.x, at.y + off.y, 0.01});
            }
            break;
    }
    return obj;
}

// Where a hand aims when grasping an object.
Vec3 grasp_point(const SceneObject& obj) {
    switch (obj.kind) {
        case ObjectKind::bottle:
            return (obj.points[0] + obj.points[1]) * 0.5;  // around the body
        case ObjectKind::paper:
        case ObjectKind::book: {
            // Midpoint of the edge nearest the subject (smallest-y corners).
            std::vector<Vec3> pts = obj.points;
            std::sort(pts.begin(), pts.end(), [](const Vec3& a, const Vec3& b) { return a.y < b.y; });
            return (pts[0] + pts[1]) * 0.5;
        }
        case ObjectKind::phone:
            return obj.centroid();
        case ObjectKind::pen:
            return (obj.points[0] + obj.points[1]) * 0.5;
        case ObjectKind::earphone:
            return obj.points[0];
    }
    return obj.centroid();
}

ObjectKind random_kind(Rng& rng) {
    constexpr std::array<ObjectKind, 6> kinds{ObjectKind::bottle, ObjectKind::paper,
                                              ObjectKind::book, ObjectKind::phone, ObjectKind::pen,
                                              ObjectKind::earphone};
    return kinds[static_cast<std::size_t>(rng.uniform_int(6))];
}

Vec3 place_nonoverlapping(Rng& rng, const std::vector<Vec3>& taken) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        Vec3 p{rng.uniform(-0.45, 0.45), rng.uniform(0.02, 0.30), 0.0};
        bool ok = true;
        for (const Vec3& q : taken) {
            if ((p - q).norm() < 0.16) {
                ok = false;
                break;
            }
        }
        if (ok) return p;
    }
    return {rng.uniform(-0.45, 0.45), rng.uniform(0.02, 0.30), 0.0};
}

Vec3 rest_wrist(Hand hand, const SubjectStyle& style) {
    const Vec3 base = hand == Hand::right ? Vec3{0.16, -0.27, 0.015} : Vec3{-0.16, -0.27, 0.015};
    return base + style.rest_offset;
}

}  // namespace

void SynthConfig::validate() const {
    if (subjects < 0) throw param_error("synth: subjects must be >= 0");
    if (grasps_per_object < 1) throw param_error("synth: grasps_per_object must be >= 1");
    if (frames < 16) throw param_error("synth: frames must be >= 16");
    if (fps < 1) throw param_error("synth: fps must be >= 1");
}

SubjectStyle subject_style(std::uint64_t dataset_seed, int subject) {
    Rng rng = Rng(dataset_seed).fork(0x537459 + static_cast<std::uint64_t>(subject));
    SubjectStyle s;
    s.reach_end = rng.uniform(0.86, 0.97);
    s.curve_amp = rng.uniform(0.0, 0.05);
    s.lift_amp = rng.uniform(0.03, 0.09);
    s.hand_scale = rng.uniform(0.92, 1.08);
    s.rest_offset = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 0.0};
    s.saccade_start = rng.uniform(0.02, 0.06);
    s.saccade_dur = rng.uniform(0.07, 0.14);
    s.right_pref = rng.uniform(0.55, 0.95);
    return s;
}

double min_jerk_blend(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

SceneSpec generate_scene(Rng& rng, Motion motion, int subject, const SubjectStyle& style) {
    SceneSpec scene;
    scene.subject = subject;
    scene.motion = motion;

    const bool writing = motion == Motion::write_on_paper;
    bool paired = false;
    if (motion == Motion::pick_earphone) paired = rng.uniform() < 0.5;

    std::vector<Vec3> taken;
    std::vector<SceneObject> objects;

    // Involved objects first: the grasp target, plus the paper when writing.
    const Vec3 target_at = place_nonoverlapping(rng, taken);
    taken.push_back(target_at);
    SceneObject target_obj = make_object(target_kind(motion), target_at, rng, paired);
    int paper_index = -1;
    if (writing) {
        const Vec3 paper_at = place_nonoverlapping(rng, taken);
        taken.push_back(paper_at);
        objects.push_back(make_object(ObjectKind::paper, paper_at, rng, false));
        paper_index = 0;
    }
    objects.push_back(target_obj);
    int target_index = static_cast<int>(objects.size()) - 1;

    const int distractors = writing ? rng.uniform_int(2) : 1 + rng.uniform_int(2);
    for (int i = 0; i < distractors && static_cast<int>(objects.size()) < kMaxObjects; ++i) {
        const Vec3 at = place_nonoverlapping(rng, taken);
        taken.push_back(at);
        objects.push_back(make_object(random_kind(rng), at, rng, false));
    }

    // Shuffle so position in the object list carries no intent information.
    std::vector<int> order(objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    scene.objects.objects.resize(objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        scene.objects.objects[i] = objects[static_cast<std::size_t>(order[i])];
        if (order[i] == target_index) scene.objects.target = static_cast<int>(i);
        if (order[i] == paper_index) paper_index = static_cast<int>(i);
    }

    // Handedness and wrist goals.
    const SceneObject& tgt = scene.objects.target_object();
    if (writing) {
        scene.handedness = Handedness::both;
        scene.grasp_right = grasp_point(tgt);  // pen
        scene.grasp_left = grasp_point(scene.objects.objects[static_cast<std::size_t>(paper_index)]);
    } else if (paired && tgt.points.size() == 2) {
        scene.handedness = Handedness::both;
        const Vec3& a = tgt.points[0];
        const Vec3& b = tgt.points[1];
        scene.grasp_left = a.x <= b.x ? a : b;
        scene.grasp_right = a.x <= b.x ? b : a;
    } else {
        const bool right = rng.uniform() < style.right_pref;
        scene.handedness = right ? Handedness::right : Handedness::left;
        (right ? scene.grasp_right : scene.grasp_left) = grasp_point(tgt);
    }
    return scene;
}

TrajectorySample synth_trajectory(const SceneSpec& scene, int t_frames, int fps, Rng& rng,
                                  const SubjectStyle& style) {
    if (t_frames < 16) throw param_error("synth_trajectory: need at least 16 frames");
    const auto reachable = [&](const Vec3& p) {
        return std::abs(p.x) <= scene.table.half_x + 0.05 &&
               std::abs(p.y) <= scene.table.half_y + 0.05;
    };
    if (scene.handedness != Handedness::left && !reachable(scene.grasp_right)) {
        throw param_error("synth_trajectory: unreachable target (outside table extents)");
    }
    if (scene.handedness != Handedness::right && !reachable(scene.grasp_left)) {
        throw param_error("synth_trajectory: unreachable target (outside table extents)");
    }

    TrajectorySample sample;
    sample.scene = scene;
    sample.hands = MotionSequence(t_frames, fps);
    sample.gaze = GazeSequence(t_frames);

    struct HandPlan {
        bool active = false;
        Vec3 rest;
        Vec3 goal;
        double reach_end = 0.9;
        double curve_sign = 1.0;
        std::array<Vec3, kJointsPerHand> closed;
    };
    const GraspShape shape = grasp_shape(scene.objects.target_object().kind);
    std::array<HandPlan, 2> plans;  // [left, right]
    for (Hand hand : {Hand::left, Hand::right}) {
        HandPlan& plan = plans[static_cast<std::size_t>(hand)];
        plan.active = scene.handedness == Handedness::both ||
                      (hand == Hand::right) == (scene.handedness == Handedness::right);
        plan.rest = rest_wrist(hand, style);
        plan.goal = hand == Hand::right ? scene.grasp_right : scene.grasp_left;
        plan.reach_end = std::clamp(style.reach_end + rng.normal(0.0, 0.015), 0.82, 0.995);
        plan.curve_sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        GraspShape hand_shape = shape;
        if (scene.motion == Motion::write_on_paper && hand == Hand::left) {
            hand_shape = grasp_shape(ObjectKind::paper);  // the holding hand
        }
        plan.closed = closed_hand(hand_shape);
    }

    const Vec3 gaze_rest = (plans[0].rest + plans[1].rest) * 0.5 + Vec3{0.0, 0.08, 0.0};
    const Vec3 gaze_target = scene.objects.target_object().centroid();
    const double ss = style.saccade_start;
    const double sd = style.saccade_dur;

    for (int t = 0; t < t_frames; ++t) {
        const double u = static_cast<double>(t) / (t_frames - 1);
        for (Hand hand : {Hand::left, Hand::right}) {
            const HandPlan& plan = plans[static_cast<std::size_t>(hand)];
            Vec3 wrist = plan.rest;
            double closure = 0.0;
            double yaw = 0.0;
            if (plan.active) {
                const double sv = min_jerk_blend(u / plan.reach_end);
                const Vec3 dir = plan.goal - plan.rest;
                const double horiz = std::max(1e-9, std::hypot(dir.x, dir.y));
                const Vec3 perp{-dir.y / horiz, dir.x / horiz, 0.0};
                wrist = plan.rest + dir * sv +
                        perp * (plan.curve_sign * style.curve_amp * std::sin(kPi * sv)) +
                        Vec3{0.0, 0.0, style.lift_amp * std::sin(kPi * sv)};
                closure = std::clamp((sv - 0.75) / 0.25, 0.0, 1.0);
                yaw = std::atan2(dir.x, dir.y) * sv;
            }
            for (int j = 0; j < kJointsPerHand; ++j) {
                const Vec3 flat = kFlatHand[static_cast<std::size_t>(j)];
                const Vec3 closed = plan.closed[static_cast<std::size_t>(j)];
                Vec3 local = flat + (closed - flat) * closure;
                local = mirror_for_hand(local * style.hand_scale, hand);
                Vec3 world = wrist + rotate_z(local, yaw);
                if (!plan.active) {
                    world = world + Vec3{rng.normal(0.0, 0.001), rng.normal(0.0, 0.001),
                                         rng.normal(0.0, 0.001)};
                }
                sample.hands.set_joint(t, hand, j, world);
            }
        }

        // Gaze: fixate near the hands, saccade to the target, then hold.
        Vec3 gaze;
        if (u < ss) {
            gaze = gaze_rest + fixation_jitter(rng);
        } else if (u < ss + sd) {
            gaze = gaze_rest + (gaze_target - gaze_rest) * min_jerk_blend((u - ss) / sd);
        } else {
            gaze = gaze_target + fixation_jitter(rng);
        }
        sample.gaze.set(t, gaze);
    }
    return sample;
}

double noise_sigma(double mean_error) { return mean_error * std::sqrt(kPi / 8.0); }

MotionSequence add_joint_noise(const MotionSequence& motion, double mean_error, Rng& rng) {
    if (mean_error < 0.0) throw param_error("add_joint_noise: mean error must be >= 0");
    MotionSequence noisy = motion;
    if (mean_error == 0.0) return noisy;
    const double sigma = noise_sigma(mean_error);
    for (double& x : noisy.frames.v) x += rng.normal(0.0, sigma);
    return noisy;
}

Dataset build_dataset(const SynthConfig& config) {
    config.validate();
    constexpr std::array<Motion, 6> kSingles{Motion::pick_bottle, Motion::move_paper,
                                             Motion::pick_book, Motion::pick_phone,
                                             Motion::pick_pen, Motion::pick_earphone};
    Dataset ds;
    const Rng root(config.seed);
    std::uint64_t counter = 0;
    for (int subject = 0; subject < config.subjects; ++subject) {
        const SubjectStyle style = subject_style(config.seed, subject);
        auto emit = [&](Motion motion) {
            Rng rng = root.fork(counter++);
            const SceneSpec scene = generate_scene(rng, motion, subject, style);
            ds.samples.push_back(synth_trajectory(scene, config.frames, config.fps, rng, style));
        };
        for (Motion motion : kSingles) {
            for (int rep = 0; rep < config.grasps_per_object; ++rep) emit(motion);
        }
        emit(Motion::write_on_paper);
    }
    return ds;
}

std::string split_mode_name(SplitMode m) {
    switch (m) {
        case SplitMode::CS: return "CS";
        case SplitMode::CM: return "CM";
        case SplitMode::CSM: return "CSM";
    }
    return "?";
}

SplitMode split_mode_from_name(const std::string& s) {
    if (s == "CS") return SplitMode::CS;
    if (s == "CM") return SplitMode::CM;
    if (s == "CSM") return SplitMode::CSM;
    throw config_error("unknown validation mode '" + s + "' (expected CS, CM, or CSM)");
}

Split split_cs_cm_csm(const Dataset& dataset, int fold, SplitMode mode) {
    if (fold < 0 || fold >= kNumFolds) {
        throw param_error("split: fold " + std::to_string(fold) + " outside [0," +
                          std::to_string(kNumFolds) + ")");
    }
    std::vector<int> subjects;
    bool any_held_out = false;
    for (const auto& s : dataset.samples) {
        subjects.push_back(s.scene.subject);
        any_held_out = any_held_out || is_held_out_motion(s.scene.motion);
    }
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
    if (static_cast<int>(subjects.size()) < kNumFolds) {
        throw param_error("split: need at least " + std::to_string(kNumFolds) + " subjects, have " +
                          std::to_string(subjects.size()));
    }
    if (!any_held_out) throw param_error("split: dataset contains no held-out motions");

    auto subject_rank = [&](int subject) {
        return static_cast<int>(std::lower_bound(subjects.begin(), subjects.end(), subject) -
                                subjects.begin());
    };

    Split split;
    for (int i = 0; i < static_cast<int>(dataset.samples.size()); ++i) {
        const auto& s = dataset.samples[static_cast<std::size_t>(i)];
        const bool held = is_held_out_motion(s.scene.motion);
        const bool test_subject = subject_rank(s.scene.subject) % kNumFolds == fold;
        bool in_train = false, in_test = false;
        switch (mode) {
            case SplitMode::CS:
                in_train = !test_subject && !held;
                in_test = test_subject && !held;
                break;
            case SplitMode::CM:
                in_train = !held;
                in_test = held;
                break;
            case SplitMode::CSM:
                in_train = !test_subject && !held;
                in_test = test_subject && held;
                break;
        }
        if (in_train) split.train.push_back(i);
        if (in_test) split.test.push_back(i);
    }
    return split;
}

}  // namespace gzm
