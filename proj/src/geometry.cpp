#include "plate_align/geometry.hpp"

namespace plate_align {

double normalize_angle(double a) {
    a = std::fmod(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

Pose2 compose(const Pose2& a, const Pose2& b) {
    const Vec2 t = a.translation() + a.rotation() * b.translation();
    return {t.x(), t.y(), normalize_angle(a.yaw + b.yaw)};
}

Pose2 inverse(const Pose2& p) {
    const Vec2 t = -(p.rotation().transpose() * p.translation());
    return {t.x(), t.y(), normalize_angle(-p.yaw)};
}

Vec2 transform_point(const Pose2& p, const Vec2& local) {
    return p.translation() + p.rotation() * local;
}

std::array<Vec2, 4> PlateGeometry::corners() const {
    const double hl = length / 2.0, hw = width / 2.0;
    return {Vec2{hl, hw}, Vec2{-hl, hw}, Vec2{-hl, -hw}, Vec2{hl, -hw}};
}

std::vector<GapSegment> HolderGeometry::default_gap_layout() {
    return {{0, 0.35, 0.65}, {1, 0.35, 0.65}};
}

bool HolderGeometry::wall_present(int edge, double along_coord) const {
    const double len = (edge <= 1) ? groove_interior_length : groove_interior_width;
    const double frac = (along_coord + len / 2.0) / len;
    for (const auto& g : gap_segments) {
        if (g.edge == edge && frac > g.start_frac && frac < g.end_frac) return false;
    }
    return true;
}

bool plate_inside_groove(const Pose2& plate_pose, const PlateGeometry& plate,
                         const Pose2& holder_pose, const HolderGeometry& holder) {
    const Pose2 rel = compose(inverse(holder_pose), plate_pose);
    for (const auto& c : plate.corners()) {
        const Vec2 p = transform_point(rel, c);
        if (!(std::abs(p.x()) < holder.half_length() &&
              std::abs(p.y()) < holder.half_width()))
            return false;
    }
    return true;
}

} // namespace plate_align
