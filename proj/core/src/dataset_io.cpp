#include "gzm/dataset_io.hpp"

#include <json.hpp>

#include <fstream>

namespace gzm {

namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

[[noreturn]] void fail(int line_no, const std::string& what) {
    throw data_error("dataset line " + std::to_string(line_no) + ": " + what);
}

void expect_keys(const json& j, std::initializer_list<const char*> keys, int line_no,
                 const char* ctx) {
    for (const char* k : keys) {
        if (!j.contains(k)) fail(line_no, std::string(ctx) + ": missing field '" + k + "'");
    }
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || key == k;
        if (!known) fail(line_no, std::string(ctx) + ": unknown field '" + key + "'");
    }
}

// From data alone: a hand is active if its wrist travelled more than 6 cm.
Handedness infer_handedness(const MotionSequence& hands) {
    const int last = hands.length() - 1;
    const double dl = (hands.joint(last, Hand::left, kWristJoint) -
                       hands.joint(0, Hand::left, kWristJoint))
                          .norm();
    const double dr = (hands.joint(last, Hand::right, kWristJoint) -
                       hands.joint(0, Hand::right, kWristJoint))
                          .norm();
    const bool left = dl > 0.06, right = dr > 0.06;
    if (left && right) return Handedness::both;
    if (left) return Handedness::left;
    return Handedness::right;
}

}  // namespace

std::string sample_to_json_line(const TrajectorySample& sample) {
    if (!sample.hands.frames.all_finite() || !sample.gaze.points.all_finite()) {
        throw data_error("sample holds non-finite values, refusing to serialize");
    }
    if (sample.hands.length() != sample.gaze.length()) {
        throw data_error("hand and gaze sequences have different lengths");
    }
    ojson j;
    j["v"] = 1;
    j["subject"] = sample.scene.subject;
    j["motion"] = motion_name(sample.scene.motion);
    j["fps"] = sample.fps();
    ojson frames = ojson::array();
    for (int t = 0; t < sample.hands.length(); ++t) {
        ojson row = ojson::array();
        for (int d = 0; d < kPoseDim; ++d) row.push_back(sample.hands.frames.at(t, d));
        frames.push_back(std::move(row));
    }
    j["frames"] = std::move(frames);
    ojson gaze = ojson::array();
    for (int t = 0; t < sample.gaze.length(); ++t) {
        const Vec3 g = sample.gaze.at(t);
        gaze.push_back(ojson::array({g.x, g.y, g.z}));
    }
    j["gaze"] = std::move(gaze);
    ojson objects = ojson::array();
    for (const auto& obj : sample.scene.objects.objects) {
        ojson o;
        o["kind"] = object_kind_name(obj.kind);
        ojson pts = ojson::array();
        for (const Vec3& p : obj.points) pts.push_back(ojson::array({p.x, p.y, p.z}));
        o["points"] = std::move(pts);
        objects.push_back(std::move(o));
    }
    j["objects"] = std::move(objects);
    j["target"] = sample.scene.objects.target;
    return j.dump();
}

TrajectorySample sample_from_json_line(const std::string& line, int line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        fail(line_no, std::string("parse error: ") + e.what());
    }
    if (!j.is_object()) fail(line_no, "record is not a JSON object");
    expect_keys(j, {"v", "subject", "motion", "fps", "frames", "gaze", "objects", "target"},
                line_no, "sample");
    try {
        if (j["v"].get<int>() != 1) {
            fail(line_no, "unsupported dataset version " + j["v"].dump() + " (expected 1)");
        }
        TrajectorySample sample;
        sample.scene.subject = j["subject"].get<int>();
        if (sample.scene.subject < 0) fail(line_no, "negative subject id");
        sample.scene.motion = motion_from_name(j["motion"].get<std::string>());
        const int fps = j["fps"].get<int>();
        if (fps < 1) fail(line_no, "fps must be >= 1");

        const auto& frames = j["frames"];
        if (!frames.is_array() || frames.empty()) fail(line_no, "'frames' must be a non-empty array");
        const int t_len = static_cast<int>(frames.size());
        sample.hands = MotionSequence(t_len, fps);
        for (int t = 0; t < t_len; ++t) {
            const auto& row = frames[static_cast<std::size_t>(t)];
            if (!row.is_array() || static_cast<int>(row.size()) != kPoseDim) {
                fail(line_no, "frame " + std::to_string(t) + " must hold " +
                                  std::to_string(kPoseDim) + " floats");
            }
            for (int d = 0; d < kPoseDim; ++d) {
                sample.hands.frames.at(t, d) = row[static_cast<std::size_t>(d)].get<double>();
            }
        }
        const auto& gaze = j["gaze"];
        if (!gaze.is_array() || static_cast<int>(gaze.size()) != t_len) {
            fail(line_no, "'gaze' must match the frame count");
        }
        sample.gaze = GazeSequence(t_len);
        for (int t = 0; t < t_len; ++t) {
            const auto& row = gaze[static_cast<std::size_t>(t)];
            if (!row.is_array() || row.size() != 3) fail(line_no, "gaze rows must hold 3 floats");
            sample.gaze.set(t, {row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
        }
        const auto& objects = j["objects"];
        if (!objects.is_array() || objects.empty() ||
            static_cast<int>(objects.size()) > kMaxObjects) {
            fail(line_no, "'objects' must hold 1.." + std::to_string(kMaxObjects) + " entries");
        }
        for (const auto& jo : objects) {
            expect_keys(jo, {"kind", "points"}, line_no, "object");
            SceneObject obj;
            obj.kind = object_kind_from_name(jo["kind"].get<std::string>());
            const auto& pts = jo["points"];
            if (!pts.is_array() || pts.empty() ||
                static_cast<int>(pts.size()) > kMaxObjectPoints) {
                fail(line_no, "object needs 1.." + std::to_string(kMaxObjectPoints) + " points");
            }
            for (const auto& p : pts) {
                if (!p.is_array() || p.size() != 3) fail(line_no, "object points must hold 3 floats");
                obj.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
            }
            sample.scene.objects.objects.push_back(std::move(obj));
        }
        sample.scene.objects.target = j["target"].get<int>();
        if (sample.scene.objects.target < 0 ||
            sample.scene.objects.target >= static_cast<int>(objects.size())) {
            fail(line_no, "target index out of range");
        }
        if (!sample.hands.frames.all_finite() || !sample.gaze.points.all_finite()) {
            fail(line_no, "non-finite values");
        }
        sample.scene.handedness = infer_handedness(sample.hands);
        return sample;
    } catch (const json::exception& e) {
        fail(line_no, std::string("bad field type: ") + e.what());
    }
}

void write_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    for (const auto& sample : dataset.samples) {
        out << sample_to_json_line(sample) << '\n';
    }
    if (!out) throw data_error("write to '" + path + "' failed");
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "' for reading");
    Dataset ds;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ds.samples.push_back(sample_from_json_line(line, line_no));
    }
    return ds;
}

}  // namespace gzm
