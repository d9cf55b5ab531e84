#include "plate_align/contact_sim.hpp"

#include <algorithm>
#include <cmath>

namespace plate_align {

namespace {

struct ContactPoint {
    Vec2 world{0, 0};
    Vec2 local{0, 0}; // plate frame, before tilt foreshortening
    double z = 0.0;
};

/// Height of a plate point relative to the plate's planar reference z.
double point_rel_z(const WorldState& w, const Vec2& local) {
    return -local.x() * std::sin(w.plate_pitch) + local.y() * std::sin(w.plate_roll);
}

/// Plate sample points (4 corners + 4 edge midpoints) projected to the plane
/// with tilt foreshortening, plus their heights.
std::array<ContactPoint, 8> plate_contact_points(const WorldState& w) {
    const double hl = w.plate_geom.length / 2.0, hw = w.plate_geom.width / 2.0;
    const std::array<Vec2, 8> locals = {Vec2(hl, hw),  Vec2(-hl, hw), Vec2(-hl, -hw),
                                        Vec2(hl, -hw), Vec2(hl, 0),   Vec2(-hl, 0),
                                        Vec2(0, hw),   Vec2(0, -hw)};
    const double cp = std::cos(w.plate_pitch), cr = std::cos(w.plate_roll);
    std::array<ContactPoint, 8> out;
    for (size_t i = 0; i < 8; ++i) {
        out[i].local = locals[i];
        const Vec2 fore(locals[i].x() * cp, locals[i].y() * cr);
        out[i].world = transform_point(w.plate, fore);
        out[i].z = w.plate_z + point_rel_z(w, locals[i]);
    }
    return out;
}

/// Height of whatever supports a point at this planar location: the groove
/// wall top over a present wall band, the surface otherwise.
double support_height(const WorldState& w, const Vec2& world_xy) {
    const Vec2 p = transform_point(inverse(w.holder_b), world_xy);
    const HolderGeometry& h = w.holder_geom;
    const double ox = std::abs(p.x()) - h.half_length();
    const double oy = std::abs(p.y()) - h.half_width();
    if (ox <= 0 && oy <= 0) return 0.0; // interior
    if (oy > 0 && oy < h.groove_wall_width && ox < h.groove_wall_width) {
        const int edge = p.y() > 0 ? 0 : 1;
        if (h.wall_present(edge, p.x())) return h.groove_height;
    }
    if (ox > 0 && ox < h.groove_wall_width && oy < h.groove_wall_width) {
        const int edge = p.x() > 0 ? 2 : 3;
        if (h.wall_present(edge, p.y())) return h.groove_height;
    }
    return 0.0;
}

struct WallHit {
    Vec2 normal_world{0, 0}; // pushes the plate back toward the interior
    double penetration = 0;
};

/// Wall penetrations for one plate point, holder-B frame logic. A point above
/// the wall top passes over; a point beyond the wall band has escaped.
std::vector<WallHit> wall_hits(const WorldState& w, const ContactPoint& c) {
    std::vector<WallHit> hits;
    // points at (or nearly at) the wall top rest on it instead of hitting it
    if (c.z >= w.holder_geom.groove_height - 0.05) return hits;
    const HolderGeometry& h = w.holder_geom;
    const Vec2 p = transform_point(inverse(w.holder_b), c.world);
    const Eigen::Matrix2d rot = w.holder_b.rotation();
    const double oy = std::abs(p.y()) - h.half_width();
    if (oy > 0 && oy < h.groove_wall_width) {
        const int edge = p.y() > 0 ? 0 : 1;
        if (h.wall_present(edge, p.x())) {
            const Vec2 n_local(0.0, p.y() > 0 ? -1.0 : 1.0);
            hits.push_back({rot * n_local, oy});
        }
    }
    const double ox = std::abs(p.x()) - h.half_length();
    if (ox > 0 && ox < h.groove_wall_width) {
        const int edge = p.x() > 0 ? 2 : 3;
        if (h.wall_present(edge, p.y())) {
            const Vec2 n_local(p.x() > 0 ? -1.0 : 1.0, 0.0);
            hits.push_back({rot * n_local, ox});
        }
    }
    return hits;
}

struct PlanarLoad {
    Vec2 force_on_plate{0, 0};
    double torque_on_holder = 0; // N*mm about the holder center, z
    ContactSet contacts;
};

PlanarLoad planar_contact_forces(const WorldState& w, const Vec2& plate_velocity,
                                 const SimParams& p, double vertical_force) {
    PlanarLoad load;
    const auto points = plate_contact_points(w);
    int surface_points = 0;
    for (const auto& c : points)
        if (c.z <= 1e-6 && support_height(w, c.world) == 0.0) ++surface_points;

    const Vec2 holder_center = w.holder_b.translation();
    auto add_holder_reaction = [&](const Vec2& point, const Vec2& force_on_plate) {
        const Vec2 r = point - holder_center;
        const Vec2 f = -force_on_plate;
        load.torque_on_holder += r.x() * f.y() - r.y() * f.x();
    };

    for (const auto& c : points) {
        for (const auto& hit : wall_hits(w, c)) {
            const double fn = p.wall_stiffness * hit.penetration;
            Vec2 f = fn * hit.normal_world;
            // Coulomb friction along the wall, opposing the tangential slip
            const Vec2 tangent(-hit.normal_world.y(), hit.normal_world.x());
            const double slip = plate_velocity.dot(tangent);
            if (std::abs(slip) > 1e-9) f -= p.mu_plate_holder * fn * (slip > 0 ? 1.0 : -1.0) * tangent;
            load.force_on_plate += f;
            add_holder_reaction(c.world, f);
            load.contacts.push_back({ContactKind::GrooveWall, c.world, hit.normal_world,
                                     hit.penetration, fn});
        }
        const double sup = support_height(w, c.world);
        if (sup == 0.0 && c.z <= 1e-6 && vertical_force > 0 && surface_points > 0) {
            // sliding friction from the vertical preload, split across points
            const double fv = vertical_force / surface_points;
            const double speed = plate_velocity.norm();
            Vec2 f = Vec2::Zero();
            if (speed > 1e-9) f = -p.mu_plate_holder * fv * plate_velocity / speed;
            load.force_on_plate += f;
            add_holder_reaction(c.world, f);
            load.contacts.push_back({ContactKind::Surface, c.world, Vec2::Zero(), 0.0, fv});
        } else if (sup > 0.0 && c.z <= sup + 1e-6) {
            load.contacts.push_back({ContactKind::GrooveTop, c.world, Vec2::Zero(), 0.0, 0.0});
        }
    }
    return load;
}

/// Resting height of the plate given its planar pose and tilt. A point that
/// overlaps a wall band while sitting below the wall top (pressed laterally
/// into the wall) is not supported by the wall top; only points arriving from
/// above rest on it. The previous step's height disambiguates the two.
double plate_rest_height(const WorldState& w) {
    const auto points = plate_contact_points(w);
    double rest = -1e9;
    for (const auto& c : points) {
        double sup = support_height(w, c.world);
        if (sup > 0.0 && c.z < sup - 0.05) sup = 0.0;
        rest = std::max(rest, sup - point_rel_z(w, c.local));
    }
    return rest;
}

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a * 0x9e3779b97f4a7c15ULL + b;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    return x;
}

} // namespace

WrenchReading step(WorldState& w, const TwistCommand& cmd, const SimParams& p) {
    WrenchReading reading;
    reading.time = w.time;
    const bool bad = !cmd.linear.allFinite() || !std::isfinite(cmd.yaw_rate) ||
                     !std::isfinite(cmd.pitch_rate) || !std::isfinite(cmd.roll_rate);
    if (bad) return reading; // rejected, state unchanged

    Vec3 v = cmd.linear;
    for (int i = 0; i < 3; ++i) v[i] = std::clamp(v[i], -100.0, 100.0);
    const double yaw_rate = std::clamp(cmd.yaw_rate, -1.0, 1.0);
    const double pitch_rate = std::clamp(cmd.pitch_rate, -1.0, 1.0);
    const double roll_rate = std::clamp(cmd.roll_rate, -1.0, 1.0);

    w.gripper.x += v.x() * p.dt;
    w.gripper.y += v.y() * p.dt;
    w.gripper.yaw = normalize_angle(w.gripper.yaw + yaw_rate * p.dt);
    w.gripper_z += v.z() * p.dt;
    w.gripper_pitch += pitch_rate * p.dt;
    w.gripper_roll += roll_rate * p.dt;

    w.contacts.clear();
    w.vertical_contact_force = 0.0;
    w.grip_pitch_shift = 0.0;

    if (w.grasp.attached) {
        w.plate = compose(w.gripper, w.grasp.plate_in_gripper);
        w.plate_pitch = w.gripper_pitch + w.grasp.pitch_error;
        w.plate_roll = w.gripper_roll + w.grasp.roll_error;

        // vertical: finger springs in series with the penalty surface
        const double commanded_z = w.gripper_z;
        const double rest = plate_rest_height(w);
        const double deficit = rest - commanded_z;
        double spring_comp = 0.0, penetration = 0.0;
        if (deficit > 0) {
            if (p.springs_enabled) {
                spring_comp = std::min(deficit, p.spring_travel);
                penetration = deficit - spring_comp;
            } else {
                penetration = deficit;
            }
            w.vertical_contact_force =
                2.0 * p.spring_k_vertical * spring_comp + p.surface_stiffness * penetration;
        }
        w.plate_z = commanded_z + spring_comp;
        w.finger_left.vertical = spring_comp;
        w.finger_right.vertical = spring_comp;
        w.finger_left.clamped = w.finger_right.clamped =
            p.springs_enabled && spring_comp >= p.spring_travel - 1e-12;
        if (w.vertical_contact_force > p.fingertip_overload_force) w.fingertip_overload = true;

        // gel/grip compliance rotation observed by the tactile sensors;
        // the surface reaction rotates the plate against its commanded pitch
        if (w.vertical_contact_force > 0) {
            const double lever = (w.plate_geom.length / 2.0) * std::cos(w.plate_pitch);
            const double mag = w.vertical_contact_force * lever / p.grip_pitch_stiffness;
            w.grip_pitch_shift = (w.plate_pitch >= 0 ? -1.0 : 1.0) * mag;
        }
    }

    std::mt19937_64 rng(mix(w.noise_seed, w.step_count));
    std::normal_distribution<double> noise(0.0, p.ft_noise_sigma);

    PlanarLoad load;
    if (w.grasp.attached) {
        load = planar_contact_forces(w, Vec2(v.x(), v.y()), p, w.vertical_contact_force);
        w.contacts = load.contacts;

        Vec3 force(load.force_on_plate.x(), load.force_on_plate.y(), w.vertical_contact_force);
        Vec3 torque = Vec3::Zero();
        for (const auto& c : w.contacts) {
            const Vec3 r(c.point.x() - w.plate.x, c.point.y() - w.plate.y, 0.0);
            Vec3 f3 = Vec3::Zero();
            if (c.kind == ContactKind::GrooveWall) {
                f3.head<2>() = c.force * c.normal;
            } else if (c.kind == ContactKind::Surface) {
                f3.z() = c.force;
            }
            torque += r.cross(f3) * 1e-3; // N*mm -> N*m
        }
        if (p.ft_noise_sigma > 0) {
            for (int i = 0; i < 3; ++i) force[i] += noise(rng);
            for (int i = 0; i < 3; ++i) torque[i] += 0.01 * noise(rng);
        }
        for (int i = 0; i < 3; ++i) {
            force[i] = std::clamp(p.ft_quantum * std::round(force[i] / p.ft_quantum), -500.0, 500.0);
            torque[i] = std::clamp(p.torque_quantum * std::round(torque[i] / p.torque_quantum), -4.0, 4.0);
        }
        reading.force = force;
        reading.torque = torque;
    } else {
        Vec3 force = Vec3::Zero();
        if (p.ft_noise_sigma > 0)
            for (int i = 0; i < 3; ++i) force[i] += noise(rng);
        for (int i = 0; i < 3; ++i)
            force[i] = p.ft_quantum * std::round(force[i] / p.ft_quantum);
        reading.force = force;
    }

    // holder B slips once the in-plane load beats desk friction; the F/T
    // reading above is taken before the slip relaxes the penetration
    if (w.grasp.attached && !load.contacts.empty()) {
        const double cap = p.holder_slip_force();
        const double tcap = p.holder_slip_torque();
        for (int iter = 0; iter < 20; ++iter) {
            const PlanarLoad l = planar_contact_forces(w, Vec2(v.x(), v.y()), p,
                                                       w.vertical_contact_force);
            const Vec2 f_holder = -l.force_on_plate;
            const double fmag = f_holder.norm();
            const double tmag = std::abs(l.torque_on_holder);
            bool moved = false;
            if (fmag > cap) {
                const Vec2 dir = f_holder / fmag;
                const double shift = (fmag - cap) / p.wall_stiffness;
                w.holder_b.x += dir.x() * shift;
                w.holder_b.y += dir.y() * shift;
                moved = true;
            }
            if (tmag > tcap) {
                const double k_rot = p.wall_stiffness * p.holder_rot_radius * p.holder_rot_radius;
                const double dyaw = (tmag - tcap) / k_rot;
                w.holder_b.yaw = normalize_angle(
                    w.holder_b.yaw + (l.torque_on_holder > 0 ? dyaw : -dyaw));
                moved = true;
            }
            if (!moved) break;
        }
    }

    w.time += p.dt;
    ++w.step_count;
    reading.time = w.time;
    return reading;
}

Pose2 detect_marker(const WorldState& w, int holder_id, const MarkerNoiseModel& noise,
                    const std::optional<MarkerInjection>& injected, uint64_t seed) {
    const Pose2& truth = holder_id == 0 ? w.holder_a : w.holder_b;
    Pose2 offset{};
    if (noise.enabled) {
        std::mt19937_64 rng(mix(seed, 0x6d61726bULL + holder_id));
        std::uniform_real_distribution<double> ut(-noise.translation_bound, noise.translation_bound);
        std::uniform_real_distribution<double> uy(-noise.yaw_bound, noise.yaw_bound);
        offset.x = ut(rng);
        offset.y = ut(rng);
        offset.yaw = uy(rng);
    }
    Pose2 observed = compose(truth, offset);
    if (injected) observed = compose(observed, Pose2{injected->dx, injected->dy, injected->dyaw});
    return observed;
}

std::pair<FingerDisplacement, FingerDisplacement> read_finger_springs(const WorldState& w) {
    auto clampf = [](FingerDisplacement d) {
        if (std::abs(d.vertical) > 5.0 || std::abs(d.horizontal) > 5.0) d.clamped = true;
        d.vertical = std::clamp(d.vertical, -5.0, 5.0);
        d.horizontal = std::clamp(d.horizontal, -5.0, 5.0);
        return d;
    };
    return {clampf(w.finger_left), clampf(w.finger_right)};
}

void attach_plate(WorldState& w, const Pose2& plate_in_gripper, double roll_error,
                  double pitch_error) {
    w.grasp.attached = true;
    w.grasp.plate_in_gripper = plate_in_gripper;
    w.grasp.roll_error = roll_error;
    w.grasp.pitch_error = pitch_error;
    w.released = false;
}

void release_plate(WorldState& w, const SimParams& p) {
    (void)p;
    w.grasp.attached = false;
    w.released = true;
    w.finger_left = {};
    w.finger_right = {};

    // Decide where each plate point ends up once the gripper lets go.
    const auto points = plate_contact_points(w);
    const HolderGeometry& h = w.holder_geom;
    const Pose2 inv = inverse(w.holder_b);
    Vec2 relax_local = Vec2::Zero(); // holder-frame inward correction
    constexpr double relax_limit = 0.3; // mm; elastic penetrations stay well below
    constexpr double slack = 0.05;      // mm separation after elastic relaxing
    for (const auto& c : points) {
        const Vec2 pl = transform_point(inv, c.world);
        const double ox = std::abs(pl.x()) - h.half_length();
        const double oy = std::abs(pl.y()) - h.half_width();
        if (ox <= 0 && oy <= 0) continue; // over the interior: settles to the floor
        const double sup = support_height(w, c.world);
        const bool over_band = ox < h.groove_wall_width && oy < h.groove_wall_width;
        if (over_band && sup > 0) {
            if (c.z >= sup - 0.2) {
                w.resting_on_groove = true; // lands on the wall top
            } else if (std::max(ox, oy) <= relax_limit) {
                // elastic wall penetration: relaxes back inside
                if (oy > 0) {
                    const double need = (oy + slack) * (pl.y() > 0 ? 1.0 : -1.0);
                    if (std::abs(need) > std::abs(relax_local.y())) relax_local.y() = need;
                }
                if (ox > 0) {
                    const double need = (ox + slack) * (pl.x() > 0 ? 1.0 : -1.0);
                    if (std::abs(need) > std::abs(relax_local.x())) relax_local.x() = need;
                }
            } else {
                w.escaped_holder = true; // deep over a wall but below its top
            }
        } else {
            w.escaped_holder = true; // past the wall band or through a gap
        }
    }
    if (w.resting_on_groove) {
        w.plate_z = h.groove_height / 2.0;
        return;
    }
    if (w.escaped_holder) return;

    // Settle flat: relax elastic penetrations, then drop the tilt about the
    // supporting (low) edges so the high side swings down in place.
    const Vec2 shift_world = w.holder_b.rotation() * (-relax_local);
    w.plate.x += shift_world.x();
    w.plate.y += shift_world.y();
    const double roll_pivot = (1.0 - std::cos(w.plate_roll)) * (w.plate_geom.width / 2.0);
    const double pitch_pivot = (1.0 - std::cos(w.plate_pitch)) * (w.plate_geom.length / 2.0);
    Vec2 pivot_local(w.plate_pitch >= 0 ? pitch_pivot : -pitch_pivot,
                     w.plate_roll >= 0 ? -roll_pivot : roll_pivot);
    const Vec2 pivot_world = w.plate.rotation() * pivot_local;
    w.plate.x += pivot_world.x();
    w.plate.y += pivot_world.y();
    w.plate_roll = 0.0;
    w.plate_pitch = 0.0;
    w.plate_z = 0.0;
}

} // namespace plate_align
