#pragma once

#include "plate_align/geometry.hpp"

namespace plate_align {

/// Control constants of the sliding force controller.
struct Gains {
    double k_force = 2.0;                 // mm/(s*N)
    double k_rotation = 0.8;              // 1/s
    Vec3 desired_force{0.0, 0.0, 0.0};    // N, target F/T reading
    double corner_force_threshold = 2.5;  // N, windowed-mean reaction along the ram

    void validate() const; // throws std::invalid_argument on a bad configuration
};

/// Proportional force-velocity law: v = k_F * (measured - desired). mm/s.
Vec3 force_velocity_law(const Vec3& measured_force, const Gains& g);

/// Proportional axis-alignment law: omega = k_R * (current x target), z component.
/// Degenerate (antiparallel axes) inputs return zero.
double angular_alignment_law(const Vec3& axis_current, const Vec3& axis_target, const Gains& g);

/// Force-velocity law plus a feed-forward term cancelling the contact-point
/// velocity induced by the commanded angular velocity:
/// v = k_F * (F_m - F_des) - omega x (R * p_c).
Vec3 feedforward_velocity(const Vec3& measured_force, const Gains& g, double omega_z,
                          const Eigen::Matrix2d& rotation, const Vec2& contact_point);

/// Componentwise clamp keeping the sliding laws inside the plant's envelope.
Vec3 clamp_speed(const Vec3& v, double limit = 20.0);

} // namespace plate_align
