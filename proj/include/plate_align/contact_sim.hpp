#pragma once

#include "plate_align/geometry.hpp"
#include "plate_align/tactile_pose.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace plate_align {

enum class ContactKind { Surface, GrooveWall, GrooveTop };

struct Contact {
    ContactKind kind = ContactKind::Surface;
    Vec2 point{0, 0};       // mm, world
    Vec2 normal{0, 0};      // unit, in-plane (zero for vertical contacts)
    double penetration = 0; // mm
    double force = 0;       // N
};

using ContactSet = std::vector<Contact>;

/// Quantized, rate-limited F/T observation (forces N, torques N*m).
struct WrenchReading {
    Vec3 force{0, 0, 0};
    Vec3 torque{0, 0, 0};
    double time = 0.0;
};

/// End-effector twist command for one 5 ms step. The planar twist carries the
/// sliding laws; the tilt rates serve the pose-adjust and lowering phases.
struct TwistCommand {
    Vec3 linear{0, 0, 0}; // mm/s, world (z up)
    double yaw_rate = 0;  // rad/s
    double pitch_rate = 0;
    double roll_rate = 0;
};

struct SimParams {
    double wall_stiffness = 80.0;     // N/mm
    double surface_stiffness = 500.0; // N/mm
    double mu_plate_holder = 0.3;
    double mu_holder_desk = 0.4;
    double holder_mass = 0.25; // kg
    double spring_k_horizontal = 0.067; // N/mm per finger
    double spring_k_vertical = 0.074;   // N/mm per finger
    double spring_travel = 5.0;         // mm
    bool springs_enabled = true;
    double ft_noise_sigma = 0.1; // N
    double dt = 0.005;           // s, matches the 200 Hz F/T rate
    double holder_rot_radius = 40.0;     // mm, effective rotational friction radius
    double grip_pitch_stiffness = 500.0; // N*mm/rad, gel+grip compliance
    double fingertip_overload_force = 20.0; // N, sensor survival limit
    double ft_quantum = 500.0 / 2000.0;     // N, +-500 N range at 1/2000 resolution
    double torque_quantum = 4.0 / 2000.0;   // N*m

    double holder_slip_force() const { return mu_holder_desk * holder_mass * 9.81; }
    double holder_slip_torque() const { return holder_slip_force() * holder_rot_radius; }
};

/// Rigid plate-in-gripper attachment. The tilt errors are the unobserved part
/// of the grasp; tactile estimation recovers them, open-loop phases do not.
struct GraspState {
    bool attached = false;
    Pose2 plate_in_gripper{};
    double roll_error = 0.0;  // radians
    double pitch_error = 0.0; // radians
};

/// Full simulation state. World z = 0 is the holder interior surface; the
/// groove walls top out at groove_height above it.
struct WorldState {
    Pose2 gripper{};
    double gripper_z = 100.0;
    double gripper_pitch = 0.0;
    double gripper_roll = 0.0;

    Pose2 plate{};
    double plate_z = 0.0;
    double plate_pitch = 0.0;
    double plate_roll = 0.0;

    Pose2 holder_a{};
    Pose2 holder_b{};

    GraspState grasp{};
    FingerDisplacement finger_left{};
    FingerDisplacement finger_right{};
    ContactSet contacts{};
    double time = 0.0;

    PlateGeometry plate_geom{};
    HolderGeometry holder_geom{};

    double vertical_contact_force = 0.0; // N, total on the plate
    double grip_pitch_shift = 0.0;       // rad, signed compliance rotation seen by the sensors
    bool fingertip_overload = false;
    bool released = false;
    bool resting_on_groove = false; // set by release() when the plate cannot seat
    bool escaped_holder = false;    // set by release() when a corner left the wall band

    uint64_t noise_seed = 0;
    uint64_t step_count = 0;
};

/// Advance one 5 ms step: integrate the commanded twist, resolve contacts
/// quasi-statically (penalty springs + Coulomb friction), slip holder B when
/// the in-plane load exceeds the desk friction, and emit the F/T reading.
/// NaN commands are rejected (state unchanged).
WrenchReading step(WorldState& w, const TwistCommand& cmd, const SimParams& p);

/// Biased marker observation. The bias is drawn once per (seed, holder) and
/// is constant within a trial; bounds model the residual error left after the
/// 200-image low-pass filter.
struct MarkerNoiseModel {
    bool enabled = true;
    double translation_bound = 0.4; // mm per axis
    double yaw_bound = 0.2 * M_PI / 180.0;
};

struct MarkerInjection {
    double dx = 0, dy = 0; // mm
    double dyaw = 0;       // radians
};

Pose2 detect_marker(const WorldState& w, int holder_id, const MarkerNoiseModel& noise,
                    const std::optional<MarkerInjection>& injected, uint64_t seed);

/// Current spring compressions {left, right}; vertical compression is the
/// per-finger vertical load divided by the spring constant, clamped to the
/// 5 mm travel (clamp flagged).
std::pair<FingerDisplacement, FingerDisplacement> read_finger_springs(const WorldState& w);

/// Attach the plate to the gripper with the given (unobserved) grasp errors.
void attach_plate(WorldState& w, const Pose2& plate_in_gripper, double roll_error,
                  double pitch_error);

/// Open the gripper and settle the plate: elastic wall penetrations relax
/// inward and the plate drops flat about its supporting edge; points caught
/// on a wall top leave the plate resting on the groove; points past the wall
/// band (or through a gap) mean the plate escaped the holder.
void release_plate(WorldState& w, const SimParams& p);

} // namespace plate_align
