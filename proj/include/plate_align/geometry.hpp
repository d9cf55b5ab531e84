#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <vector>

namespace plate_align {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

/// Planar rigid transform. Units: mm for translation, radians for yaw.
struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double yaw = 0.0;

    static Pose2 identity() { return {}; }

    Vec2 translation() const { return {x, y}; }
    Eigen::Matrix2d rotation() const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        Eigen::Matrix2d r;
        r << c, -s, s, c;
        return r;
    }
};

Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& p);
Vec2 transform_point(const Pose2& p, const Vec2& local);

/// Rectangular well-plate, local frame at the center, long axis along +x.
struct PlateGeometry {
    double width = 85.3;   // mm, short edge
    double length = 127.4; // mm, long edge

    /// Corners in the plate frame, CCW starting at (+x, +y).
    std::array<Vec2, 4> corners() const;
};

/// Span along one interior edge where the raised groove is absent.
struct GapSegment {
    int edge = 0;          // 0:+y long edge, 1:-y long edge, 2:+x short edge, 3:-x short edge
    double start_frac = 0; // fraction of edge length, measured along the edge axis
    double end_frac = 0;
};

/// Holder with a raised groove around a recessed interior rectangle.
/// Local frame at the interior center, long axis along +x.
struct HolderGeometry {
    double groove_interior_width = 86.2;   // mm
    double groove_interior_length = 128.2; // mm
    double groove_wall_width = 2.0;        // mm
    double groove_height = 1.4;            // mm
    std::vector<GapSegment> gap_segments = default_gap_layout();

    /// One gap per long edge, centered, 30% of edge length.
    static std::vector<GapSegment> default_gap_layout();

    double half_width() const { return groove_interior_width / 2.0; }
    double half_length() const { return groove_interior_length / 2.0; }

    /// True if the wall is present at the given holder-frame point's edge
    /// station (i.e. the point does not fall in a gap of that edge).
    bool wall_present(int edge, double along_coord) const;
};

/// True iff all four plate corners lie strictly inside the groove interior.
bool plate_inside_groove(const Pose2& plate_pose, const PlateGeometry& plate,
                         const Pose2& holder_pose, const HolderGeometry& holder);

} // namespace plate_align
