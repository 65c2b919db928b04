#include "gzm/data.hpp"

namespace gzm {

std::string object_kind_name(ObjectKind k) {
    switch (k) {
        case ObjectKind::bottle: return "bottle";
        case ObjectKind::paper: return "paper";
        case ObjectKind::book: return "book";
        case ObjectKind::phone: return "phone";
        case ObjectKind::pen: return "pen";
        case ObjectKind::earphone: return "earphone";
    }
    return "?";
}

ObjectKind object_kind_from_name(const std::string& s) {
    if (s == "bottle") return ObjectKind::bottle;
    if (s == "paper") return ObjectKind::paper;
    if (s == "book") return ObjectKind::book;
    if (s == "phone") return ObjectKind::phone;
    if (s == "pen") return ObjectKind::pen;
    if (s == "earphone") return ObjectKind::earphone;
    throw data_error("unknown object kind '" + s + "'");
}

std::string motion_name(Motion m) {
    switch (m) {
        case Motion::pick_bottle: return "pick_bottle";
        case Motion::move_paper: return "move_paper";
        case Motion::pick_book: return "pick_book";
        case Motion::pick_phone: return "pick_phone";
        case Motion::pick_pen: return "pick_pen";
        case Motion::pick_earphone: return "pick_earphone";
        case Motion::write_on_paper: return "write_on_paper";
    }
    return "?";
}

Motion motion_from_name(const std::string& s) {
    if (s == "pick_bottle") return Motion::pick_bottle;
    if (s == "move_paper") return Motion::move_paper;
    if (s == "pick_book") return Motion::pick_book;
    if (s == "pick_phone") return Motion::pick_phone;
    if (s == "pick_pen") return Motion::pick_pen;
    if (s == "pick_earphone") return Motion::pick_earphone;
    if (s == "write_on_paper") return Motion::write_on_paper;
    throw data_error("unknown motion '" + s + "'");
}

bool is_held_out_motion(Motion m) {
    return m == Motion::pick_book || m == Motion::write_on_paper;
}

std::array<double, kObjectCode> SceneObject::code() const {
    std::array<double, kObjectCode> c{};
    for (std::size_t i = 0; i < points.size() && i < kMaxObjectPoints; ++i) {
        c[i * 3 + 0] = points[i].x;
        c[i * 3 + 1] = points[i].y;
        c[i * 3 + 2] = points[i].z;
    }
    return c;
}

Vec3 SceneObject::centroid() const {
    Vec3 c{};
    if (points.empty()) return c;
    for (const Vec3& p : points) c = c + p;
    return c * (1.0 / static_cast<double>(points.size()));
}

void ObjectSet::validate() const {
    if (static_cast<int>(objects.size()) > kMaxObjects) {
        throw config_error("object set holds " + std::to_string(objects.size()) + " objects, max " +
                           std::to_string(kMaxObjects));
    }
    for (const auto& o : objects) {
        if (o.points.empty() || static_cast<int>(o.points.size()) > kMaxObjectPoints) {
            throw config_error("object '" + object_kind_name(o.kind) + "' needs 1.." +
                               std::to_string(kMaxObjectPoints) + " anchor points");
        }
    }
    if (!objects.empty() && (target < 0 || target >= static_cast<int>(objects.size()))) {
        throw index_error("object target index " + std::to_string(target) + " out of range");
    }
}

}  // namespace gzm
