#include "plate_align/control.hpp"

#include <stdexcept>

namespace plate_align {

void Gains::validate() const {
    if (k_force <= 0.0 || k_rotation <= 0.0)
        throw std::invalid_argument("Gains: control constants must be positive");
    if (corner_force_threshold <= desired_force.head<2>().norm())
        throw std::invalid_argument("Gains: corner threshold must exceed the in-plane desired force");
}

Vec3 force_velocity_law(const Vec3& measured_force, const Gains& g) {
    return g.k_force * (measured_force - g.desired_force);
}

double angular_alignment_law(const Vec3& axis_current, const Vec3& axis_target, const Gains& g) {
    return g.k_rotation * axis_current.cross(axis_target).z();
}

Vec3 feedforward_velocity(const Vec3& measured_force, const Gains& g, double omega_z,
                          const Eigen::Matrix2d& rotation, const Vec2& contact_point) {
    Vec3 v = force_velocity_law(measured_force, g);
    const Vec2 pc_world = rotation * contact_point;
    // omega x r with omega = omega_z * z_hat
    v.x() -= -omega_z * pc_world.y();
    v.y() -= omega_z * pc_world.x();
    return v;
}

Vec3 clamp_speed(const Vec3& v, double limit) {
    Vec3 out = v;
    for (int i = 0; i < 3; ++i) out[i] = std::clamp(out[i], -limit, limit);
    return out;
}

} // namespace plate_align
