#include "plate_align/skill.hpp"

#include "plate_align/tactile_pose.hpp"
#include "plate_align/tactile_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

namespace plate_align {

namespace {

constexpr double deg2rad(double d) { return d * M_PI / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / M_PI; }

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a * 0x9e3779b97f4a7c15ULL + b;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    return x;
}

Vec2 heading(double yaw) { return {std::cos(yaw), std::sin(yaw)}; }

double angle_between(const Vec2& from, const Vec2& to) {
    return std::atan2(from.x() * to.y() - from.y() * to.x(), from.dot(to));
}

/// Synthesize both fingertip images from the grasp state and run the full
/// image pipeline on them. Only pitch/roll of the plate relative to the
/// gripper (plus the grip compliance rotation and the spring compressions)
/// are observable through the gel.
PlatePoseEstimate observe_tactile(const WorldState& w, bool use_finger_info,
                                  uint64_t frame_seed) {
    const double pitch_rel = w.grasp.pitch_error + w.grip_pitch_shift;
    const double roll_rel = w.grasp.roll_error;
    const GripperCalibration calib;

    auto render = [&](const SensorPose& sp, double finger_lift, int idx) {
        GraspContact g;
        g.edge_angle_in_image = pitch_rel;
        // plate edge height in the (displaced) sensor frame -> image offset
        const double z_in_sensor = sp.position.y() * std::tan(roll_rel) - finger_lift;
        g.edge_offset = -z_in_sensor / (sp.mm_per_px * std::cos(pitch_rel));
        g.press_depth = 0.5;
        SensorModel model;
        model.seed = mix(frame_seed, static_cast<uint64_t>(idx));
        return render_depth_map(g, model);
    };
    const DepthMap dl = render(calib.left, w.finger_left.vertical, 0);
    const DepthMap dr = render(calib.right, w.finger_right.vertical, 1);

    SensorPose poseL = calib.left, poseR = calib.right;
    if (use_finger_info) {
        auto [fl, fr] = read_finger_springs(w);
        FingerDisplacement dispL{0.0, fl.vertical, false};
        FingerDisplacement dispR{0.0, fr.vertical, false};
        poseL = compensate_finger_displacement(poseL, dispL);
        poseR = compensate_finger_displacement(poseR, dispR);
    }
    return estimate_plate_pose(dl, dr, poseL, poseR);
}

/// Plate corner heights + world positions with tilt foreshortening, matching
/// the simulator's footprint model.
struct CornerSample {
    Vec2 world{0, 0};
    double z = 0.0;
};

std::array<CornerSample, 4> plate_corner_samples(const WorldState& w) {
    const double hl = w.plate_geom.length / 2.0, hw = w.plate_geom.width / 2.0;
    const double cp = std::cos(w.plate_pitch), cr = std::cos(w.plate_roll);
    std::array<CornerSample, 4> out;
    int i = 0;
    for (const Vec2& c : w.plate_geom.corners()) {
        out[i].world = transform_point(w.plate, Vec2(c.x() * cp, c.y() * cr));
        out[i].z = w.plate_z - c.x() * std::sin(w.plate_pitch) + c.y() * std::sin(w.plate_roll);
        ++i;
    }
    return out;
}

/// A low corner planar-beyond the wall band means the plate slid out of the
/// holder; corners held high by the insertion tilt are ignored.
bool corner_escaped(const WorldState& w) {
    const HolderGeometry& h = w.holder_geom;
    const Pose2 inv = inverse(w.holder_b);
    for (const auto& c : plate_corner_samples(w)) {
        if (c.z >= h.groove_height + 3.5) continue;
        const Vec2 p = transform_point(inv, c.world);
        const double ox = std::abs(p.x()) - h.half_length();
        const double oy = std::abs(p.y()) - h.half_width();
        if (ox > h.groove_wall_width + 0.5 || oy > h.groove_wall_width + 0.5) return true;
    }
    return false;
}

/// True when a leading corner is pressed near the holder's far end while the
/// plate is still rotated away from the groove axis.
bool near_end_misaligned(const WorldState& w) {
    const HolderGeometry& h = w.holder_geom;
    const Pose2 inv = inverse(w.holder_b);
    double max_x = -1e9;
    for (const auto& c : plate_corner_samples(w)) {
        if (c.z >= h.groove_height) continue;
        max_x = std::max(max_x, transform_point(inv, c.world).x());
    }
    const double yaw_err = std::abs(normalize_angle(w.plate.yaw - w.holder_b.yaw));
    return max_x > h.half_length() - 6.0 && yaw_err > deg2rad(5.0);
}

struct TrialRunner {
    WorldState& w;
    SimParams sim;
    const SkillConfig& cfg;
    uint64_t seed;
    bool record_trace;

    TrialResult res;
    Pose2 holder_b_start{};
    WrenchReading last{};
    bool failed = false;
    uint64_t tactile_frames = 0;
    GrooveEstimate groove{};
    bool have_groove = false;

    TrialRunner(WorldState& world, const SimParams& p, const SkillConfig& c, uint64_t s,
                bool trace)
        : w(world), sim(p), cfg(c), seed(s), record_trace(trace) {
        sim.springs_enabled = cfg.ablations.adaptive_finger;
        w.noise_seed = mix(seed, 0x5EEDULL);
        holder_b_start = w.holder_b;
    }

    void log(Phase p, const std::string& trigger) {
        res.phase_trace.push_back({p, w.time, trigger});
    }

    void fail(FailureReason r, const std::string& why) {
        failed = true;
        res.success = false;
        res.reason = r;
        res.final_phase = Phase::Failed;
        log(Phase::Failed, why);
    }

    void fail_timeout(const std::string& phase) {
        if (near_end_misaligned(w))
            fail(FailureReason::EndOfHolder, phase + ": stalled at the holder end");
        else
            fail(FailureReason::Timeout, phase + ": timed out");
    }

    void record_row(Phase phase) {
        TraceRow row;
        row.t = w.time;
        row.gripper = w.gripper;
        row.gripper_z = w.gripper_z;
        row.gripper_pitch = w.gripper_pitch;
        row.gripper_roll = w.gripper_roll;
        row.plate = w.plate;
        row.plate_z = w.plate_z;
        row.force = last.force;
        row.phase = phase;
        if (have_groove) {
            row.est_dir_deg = rad2deg(std::atan2(groove.direction.y(), groove.direction.x()));
            row.est_residual = groove.residual_rms;
        } else {
            row.est_dir_deg = std::nan("");
            row.est_residual = std::nan("");
        }
        res.trace.push_back(row);
    }

    /// One 5 ms step; false aborts the phase (overload).
    bool do_step(const TwistCommand& cmd, Phase phase) {
        last = step(w, cmd, sim);
        if (record_trace && w.step_count % static_cast<uint64_t>(cfg.tactile_period_steps) == 0)
            record_row(phase);
        if (w.fingertip_overload) {
            fail(FailureReason::SensorOverload, "fingertip force limit exceeded");
            return false;
        }
        return true;
    }

    PlatePoseEstimate observe() {
        return observe_tactile(w, cfg.ablations.finger_displacement_info,
                               mix(seed, 0x7AC70000ULL + tactile_frames++));
    }

    void finalize() {
        res.duration = w.time;
        res.overload = w.fingertip_overload;
        res.holder_translation =
            (w.holder_b.translation() - holder_b_start.translation()).norm();
        res.holder_rotation_deg =
            std::abs(rad2deg(normalize_angle(w.holder_b.yaw - holder_b_start.yaw)));
        res.final_yaw_error_deg =
            std::abs(rad2deg(normalize_angle(w.plate.yaw - w.holder_b.yaw)));
    }

    /// Release + outcome classification shared by both skills.
    void release_and_classify() {
        release_plate(w, sim);
        res.final_phase = Phase::Done;
        if (w.resting_on_groove) {
            res.success = false;
            res.reason = FailureReason::GrooveTop;
            log(Phase::Done, "released: plate caught on the groove wall");
        } else if (w.escaped_holder) {
            res.success = false;
            res.reason = FailureReason::Outside;
            log(Phase::Done, "released: plate left the holder interior");
        } else if (plate_inside_groove(w.plate, w.plate_geom, w.holder_b, w.holder_geom)) {
            res.success = true;
            res.reason = FailureReason::None;
            log(Phase::Done, "released: plate seated in the groove");
        } else {
            res.success = false;
            res.reason = FailureReason::Misplaced;
            log(Phase::Done, "released: plate flat but outside tolerance");
        }
    }
};

} // namespace

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::DetectMarkers: return "detect_markers";
        case Phase::MoveToA: return "move_to_a";
        case Phase::Grasp: return "grasp";
        case Phase::MoveAboveB: return "move_above_b";
        case Phase::TactilePoseAdjust: return "tactile_pose_adjust";
        case Phase::Descend: return "descend";
        case Phase::StraightSlide: return "straight_slide";
        case Phase::EstimateContactPoint: return "estimate_contact_point";
        case Phase::AlignedSlide: return "aligned_slide";
        case Phase::CornerStop: return "corner_stop";
        case Phase::LowerPlate: return "lower_plate";
        case Phase::Done: return "done";
        case Phase::Failed: return "failed";
    }
    return "unknown";
}

const char* failure_name(FailureReason r) {
    switch (r) {
        case FailureReason::None: return "none";
        case FailureReason::GrooveTop: return "groove_top";
        case FailureReason::Outside: return "outside";
        case FailureReason::EndOfHolder: return "end_of_holder";
        case FailureReason::SensorOverload: return "sensor_overload";
        case FailureReason::Timeout: return "timeout";
        case FailureReason::BadGrasp: return "bad_grasp";
        case FailureReason::InvalidCommand: return "invalid_command";
        case FailureReason::Misplaced: return "misplaced";
    }
    return "unknown";
}

void SkillConfig::validate() const {
    gains.validate();
    if (!(tilt_pitch_deg > 0.0))
        throw std::invalid_argument("insertion pitch tilt must be positive");
    if (tilt_yaw_deg == 0.0)
        throw std::invalid_argument("insertion yaw tilt must be nonzero");
    if (!(descend_speed > 0.0) || !(simple_descend_speed > 0.0) || !(ram_speed > 0.0))
        throw std::invalid_argument("speeds must be positive");
    if (!(approach_height > 0.0))
        throw std::invalid_argument("approach height must be positive");
    if (tactile_period_steps < 1)
        throw std::invalid_argument("tactile period must be at least one step");
    if (!(timeouts.descend > 0.0) || !(timeouts.straight_slide > 0.0) ||
        !(timeouts.aligned_slide > 0.0) || !(timeouts.corner_stop > 0.0) ||
        !(timeouts.lower_plate > 0.0))
        throw std::invalid_argument("phase timeouts must be positive");
    if (!(min_travel > 0.0) || !(residual_threshold > 0.0))
        throw std::invalid_argument("direction-fit gates must be positive");
    if (!(grasp_error.roll_min_deg <= grasp_error.roll_max_deg))
        throw std::invalid_argument("grasp roll error range is inverted");
}

SurfaceContactDetector::SurfaceContactDetector(double pitch_shift_threshold_rad,
                                               double force_threshold, int debounce)
    : shift_threshold_(pitch_shift_threshold_rad), force_threshold_(force_threshold),
      debounce_(debounce) {}

void SurfaceContactDetector::set_baseline(double pitch_rad) {
    baseline_ = pitch_rad;
    have_baseline_ = true;
}

bool SurfaceContactDetector::update(std::optional<double> tactile_pitch_rad,
                                    double vertical_force) {
    if (tactile_pitch_rad && have_baseline_ &&
        std::abs(*tactile_pitch_rad - baseline_) > shift_threshold_)
        return true;
    if (vertical_force >= force_threshold_) {
        if (++force_count_ >= debounce_) return true;
    } else {
        force_count_ = 0;
    }
    return false;
}

CornerArrivalDetector::CornerArrivalDetector(int window)
    : window_(static_cast<size_t>(window), 0.0) {}

bool CornerArrivalDetector::update(const WrenchReading& wrench, const Vec2& slide_direction,
                                   const Gains& g) {
    const double along = wrench.force.head<2>().dot(slide_direction);
    window_[next_] = along;
    next_ = (next_ + 1) % window_.size();
    filled_ = std::min(filled_ + 1, window_.size());
    if (filled_ < window_.size()) return false;
    double mean = 0.0;
    for (double v : window_) mean += v;
    mean /= static_cast<double>(window_.size());
    return mean < -g.corner_force_threshold;
}

TrialResult run_placing(WorldState& w, const SimParams& sim, const SkillConfig& cfg,
                        uint64_t seed, bool record_trace) {
    cfg.validate();
    TrialRunner run(w, sim, cfg, seed, record_trace);
    const double dt = run.sim.dt;
    const double s = cfg.tilt_yaw_deg > 0 ? 1.0 : -1.0;
    const double hl = w.plate_geom.length / 2.0;
    const double hw = w.plate_geom.width / 2.0;

    std::mt19937_64 rng(mix(seed, 0xABCDULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    auto coin = [&]() { return unit(rng) < 0.5 ? -1.0 : 1.0; };

    // --- detect markers -----------------------------------------------------
    run.log(Phase::DetectMarkers, "start");
    std::optional<MarkerInjection> injection;
    if (cfg.ablations.marker_injection)
        injection = MarkerInjection{3.0 * coin(), 3.0 * coin(), deg2rad(1.5) * coin()};
    const Pose2 obs_a = detect_marker(w, 0, cfg.marker_noise, std::nullopt, seed);
    const Pose2 obs_b = detect_marker(w, 1, cfg.marker_noise, injection, seed);
    (void)obs_a;

    // --- grasp with unobserved errors ---------------------------------------
    run.log(Phase::MoveToA, "marker observed");
    const GraspErrorModel& ge = cfg.grasp_error;
    const Pose2 grasp_offset{uniform(-ge.xy_bound, ge.xy_bound),
                             uniform(-ge.xy_bound, ge.xy_bound),
                             deg2rad(uniform(-ge.yaw_bound_deg, ge.yaw_bound_deg))};
    const double roll_err = coin() * deg2rad(uniform(ge.roll_min_deg, ge.roll_max_deg));
    const double pitch_err = deg2rad(uniform(-ge.pitch_bound_deg, ge.pitch_bound_deg));

    run.log(Phase::Grasp, "gripper closed");
    {
        const Pose2 g = compose(w.plate, inverse(grasp_offset));
        w.gripper = g;
        w.gripper_z = w.plate_z;
        w.gripper_pitch = 0.0;
        w.gripper_roll = 0.0;
        attach_plate(w, grasp_offset, roll_err, pitch_err);
    }

    // --- tactile grasp estimate (in the air, lifted off holder A) -----------
    w.gripper_z = cfg.approach_height;
    double pitch_corr = 0.0, roll_corr = 0.0, tactile_baseline = 0.0;
    run.log(Phase::TactilePoseAdjust, "lifted");
    try {
        const PlatePoseEstimate est = run.observe();
        // the plate-vs-gripper pitch is unaffected by the pose correction, so
        // the contact-detection baseline is the raw relative reading either way
        tactile_baseline = est.pitch;
        if (cfg.ablations.tactile_pose_estimation) {
            pitch_corr = est.pitch;
            roll_corr = est.roll;
        }
    } catch (const std::runtime_error&) {
        run.fail(FailureReason::BadGrasp, "tactile grasp estimate failed");
        run.finalize();
        return run.res;
    }

    // --- move above holder B with the insertion tilt -------------------------
    run.log(Phase::MoveAboveB, "grasp estimated");
    const double tilt_pitch = deg2rad(cfg.tilt_pitch_deg);
    const double tilt_yaw = deg2rad(cfg.tilt_yaw_deg);
    {
        // leading-edge center lands at landing_long_offset along the observed
        // groove axis, leading edge centered across the groove
        const double pitch_cmd = tilt_pitch - pitch_corr;
        const Vec2 axis_h = heading(tilt_yaw); // plate axis in the observed holder frame
        // the lateral standoff pulls the leading corner toward the holder
        // center so a biased marker cannot drop it outside the tracked wall;
        // the lateral seek walks the standoff back off before the slide
        const Vec2 center_h =
            Vec2(cfg.landing_long_offset, -s * cfg.landing_lateral_standoff) -
            hl * std::cos(tilt_pitch) * axis_h;
        Pose2 plate_target;
        const Vec2 center_w = transform_point(obs_b, center_h);
        plate_target.x = center_w.x();
        plate_target.y = center_w.y();
        plate_target.yaw = normalize_angle(obs_b.yaw + tilt_yaw);
        const Pose2 gripper_target = compose(plate_target, inverse(w.grasp.plate_in_gripper));
        w.gripper = gripper_target;
        w.gripper_pitch = pitch_cmd;
        w.gripper_roll = -roll_corr;
        w.gripper_z = w.holder_geom.groove_height + 6.0 + hl * std::sin(tilt_pitch + deg2rad(1.5)) +
                      hw * std::sin(deg2rad(3.5));
        w.plate = compose(w.gripper, w.grasp.plate_in_gripper);
        w.plate_z = w.gripper_z;
        w.plate_pitch = w.gripper_pitch + w.grasp.pitch_error;
        w.plate_roll = w.gripper_roll + w.grasp.roll_error;
    }

    // --- monitored descent ----------------------------------------------------
    run.log(Phase::Descend, "above holder");
    SurfaceContactDetector contact(deg2rad(cfg.surface_pitch_shift_deg),
                                   cfg.surface_force_threshold);
    contact.set_baseline(tactile_baseline);
    {
        const double t0 = w.time;
        bool touched = false;
        while (!touched) {
            if (w.time - t0 > cfg.timeouts.descend) {
                run.fail(FailureReason::Timeout, "descend: no surface contact");
                break;
            }
            TwistCommand cmd;
            cmd.linear = Vec3(0, 0, -cfg.descend_speed);
            if (!run.do_step(cmd, Phase::Descend)) break;
            std::optional<double> tact;
            if (w.step_count % static_cast<uint64_t>(cfg.tactile_period_steps) == 0) {
                try {
                    tact = run.observe().pitch;
                } catch (const std::runtime_error&) {
                    tact.reset();
                }
            }
            touched = contact.update(tact, run.last.force.z());
        }
    }
    if (run.failed) {
        run.finalize();
        return run.res;
    }
    run.log(Phase::StraightSlide, "surface contact");

    // --- straight slide along the groove wall --------------------------------
    SampleBuffer path_buf(800); // end-effector path: 4 s of history covers the
                                // minimum fit travel at the force-law slide speed
    SampleBuffer pc_buf(600);   // pose samples for the contact-point fit
    const Vec2 lat_dir = obs_b.rotation() * Vec2(0.0, s); // toward the tracked wall
    const Vec2 d_marker = heading(obs_b.yaw);             // observed groove axis
    const double along_press = cfg.gains.desired_force.x();
    const double vert_press = cfg.gains.desired_force.z();
    Gains law = cfg.gains;

    {
        const double t0 = w.time;
        bool wall_contact = false;
        int lat_count = 0;
        int steps = 0;
        while (true) {
            if (w.time - t0 > cfg.timeouts.straight_slide) {
                run.fail_timeout("straight_slide");
                break;
            }
            Vec3 f_des;
            if (!cfg.ablations.groove_estimation) {
                // no wall tracking: open-loop push along the marker axis
                f_des = Vec3(-along_press * d_marker.x(), -along_press * d_marker.y(),
                             vert_press);
            } else if (!wall_contact) {
                // lateral seek until the tracked wall reacts
                const Vec2 lat = along_press * std::abs(std::sin(tilt_yaw)) * lat_dir;
                f_des = Vec3(-lat.x(), -lat.y(), vert_press);
            } else {
                const Vec2 d_push = heading(w.gripper.yaw); // plate long axis
                f_des = Vec3(-along_press * d_push.x(), -along_press * d_push.y(),
                             vert_press);
            }
            law.desired_force = f_des;
            TwistCommand cmd;
            cmd.linear = clamp_speed(force_velocity_law(run.last.force, law));
            if (!run.do_step(cmd, Phase::StraightSlide)) break;
            ++steps;

            const double lat_f = run.last.force.head<2>().dot(lat_dir);
            if (cfg.ablations.groove_estimation) {
                if (lat_f < -0.5) {
                    if (++lat_count >= 10) wall_contact = true;
                } else if (!wall_contact) {
                    lat_count = 0;
                }
                if (wall_contact && lat_f < -0.4) {
                    const PoseSample sample{w.gripper.translation(), w.gripper.yaw, w.time};
                    path_buf.push(sample);
                    pc_buf.push(sample);
                }
            }
            if (steps % 10 == 0 && corner_escaped(w)) {
                run.fail(FailureReason::Outside, "straight_slide: plate left the holder");
                break;
            }
            if (cfg.ablations.groove_estimation && steps % 10 == 0 &&
                path_buf.travel() >= cfg.min_travel) {
                try {
                    const GrooveEstimate est = regress_groove_direction(path_buf, cfg.min_travel);
                    run.groove = est;
                    run.have_groove = true;
                    if (est.residual_rms < cfg.residual_threshold) break;
                } catch (const std::runtime_error&) {
                    // not enough spread yet; keep sliding
                }
            }
        }
    }
    if (run.failed) {
        run.finalize();
        return run.res;
    }

    // --- contact point from the buffered poses --------------------------------
    run.log(Phase::EstimateContactPoint, "groove direction fitted");
    Vec2 x_est = run.groove.direction;
    if (x_est.dot(heading(w.gripper.yaw)) < 0) x_est = -x_est;
    Vec2 n_est = run.groove.normal;
    if (n_est.dot(lat_dir) < 0) n_est = -n_est; // points toward the tracked wall
    const Vec2 pc_prior(hl * std::cos(tilt_pitch), s * hw);
    Vec2 pc_est = pc_prior;
    {
        const ContactPointEstimate est =
            regress_contact_point(pc_buf, n_est, pc_prior, cfg.contact_prior_weight);
        pc_est = est.contact_point;
    }

    // --- rotate about the tracked corner until aligned ------------------------
    run.log(Phase::AlignedSlide, "contact point estimated");
    path_buf.clear(); // from here the corner path, not the EE path, is straight
    {
        const double t0 = w.time;
        int steps = 0;
        while (true) {
            if (w.time - t0 > cfg.timeouts.aligned_slide) {
                run.fail_timeout("aligned_slide");
                break;
            }
            const Vec2 axis = heading(w.gripper.yaw);
            const double ang = angle_between(x_est, axis);
            if (std::abs(ang) < deg2rad(cfg.align_enter_corner_deg)) break;

            const double omega = std::clamp(
                angular_alignment_law(Vec3(axis.x(), axis.y(), 0.0),
                                      Vec3(x_est.x(), x_est.y(), 0.0), cfg.gains),
                -0.6, 0.6);
            law.desired_force = Vec3(-along_press * x_est.x() - cfg.lateral_track_press * n_est.x(),
                                     -along_press * x_est.y() - cfg.lateral_track_press * n_est.y(),
                                     vert_press);
            TwistCommand cmd;
            cmd.linear = clamp_speed(
                feedforward_velocity(run.last.force, law, omega, w.gripper.rotation(), pc_est));
            cmd.yaw_rate = omega;
            if (!run.do_step(cmd, Phase::AlignedSlide)) break;
            ++steps;

            const double lat_f = run.last.force.head<2>().dot(n_est);
            if (lat_f < -0.3) {
                const PoseSample sample{w.gripper.translation(), w.gripper.yaw, w.time};
                pc_buf.push(sample);
                path_buf.push(
                    {w.gripper.translation() + w.gripper.rotation() * pc_est, w.gripper.yaw,
                     w.time});
            }
            if (steps % 25 == 0) {
                const ContactPointEstimate est =
                    regress_contact_point(pc_buf, n_est, pc_prior, cfg.contact_prior_weight);
                if (!est.rank_deficient) pc_est = est.contact_point;
                if (path_buf.travel() >= cfg.min_travel) {
                    try {
                        const GrooveEstimate est2 =
                            regress_groove_direction(path_buf, cfg.min_travel);
                        if (est2.residual_rms >= 0.25 * cfg.residual_threshold)
                            throw std::runtime_error("corner path still curved");
                        run.groove = est2;
                        x_est = est2.direction;
                        if (x_est.dot(heading(w.gripper.yaw)) < 0) x_est = -x_est;
                        n_est = est2.normal;
                        if (n_est.dot(lat_dir) < 0) n_est = -n_est;
                    } catch (const std::runtime_error&) {
                    }
                }
            }
            if (steps % 10 == 0 && corner_escaped(w)) {
                run.fail(FailureReason::Outside, "aligned_slide: plate left the holder");
                break;
            }
        }
    }
    if (run.failed) {
        run.finalize();
        return run.res;
    }

    // --- push to the end wall, then square against it --------------------------
    run.log(Phase::CornerStop, "aligned with the groove axis");
    {
        const double t0 = w.time;
        CornerArrivalDetector corner;
        bool detected = false;
        double detect_time = 0.0;
        std::array<double, 40> torque_win{};
        size_t torque_i = 0, torque_n = 0;
        int steps = 0;
        while (true) {
            if (w.time - t0 > cfg.timeouts.corner_stop) {
                run.fail_timeout("corner_stop");
                break;
            }
            const Vec2 axis = heading(w.gripper.yaw);
            const double ang = angle_between(x_est, axis);
            double omega;
            if (detected && std::abs(ang) < deg2rad(cfg.square_window_deg)) {
                omega = cfg.square_torque_gain * run.last.torque.z();
            } else {
                omega = angular_alignment_law(Vec3(axis.x(), axis.y(), 0.0),
                                              Vec3(x_est.x(), x_est.y(), 0.0), cfg.gains);
            }
            omega = std::clamp(omega, -0.5, 0.5);

            TwistCommand cmd;
            cmd.yaw_rate = omega;
            if (!detected) {
                const double lat_f = run.last.force.head<2>().dot(n_est);
                const double vz = law.k_force * (run.last.force.z() - vert_press);
                // cap the toward-wall speed: over a groove gap there is no
                // reaction and an uncapped seek would walk the corner outward
                const double lat_v = std::min(
                    law.k_force * (lat_f + cfg.lower_lateral_press), 0.2);
                cmd.linear = clamp_speed(
                    Vec3(cfg.ram_speed * x_est.x(), cfg.ram_speed * x_est.y(), vz) +
                    Vec3(n_est.x(), n_est.y(), 0.0) * lat_v);
            } else {
                const double press = (w.time - detect_time < cfg.squaring_time)
                                         ? cfg.squaring_press
                                         : cfg.hold_forward_press;
                law.desired_force =
                    Vec3(-press * x_est.x() - cfg.lower_lateral_press * n_est.x(),
                         -press * x_est.y() - cfg.lower_lateral_press * n_est.y(), vert_press);
                cmd.linear = clamp_speed(force_velocity_law(run.last.force, law));
            }
            if (!run.do_step(cmd, Phase::CornerStop)) break;
            ++steps;

            torque_win[torque_i] = std::abs(run.last.torque.z());
            torque_i = (torque_i + 1) % torque_win.size();
            torque_n = std::min(torque_n + 1, torque_win.size());

            if (!detected && corner.update(run.last, x_est, cfg.gains)) {
                detected = true;
                detect_time = w.time;
                run.log(Phase::CornerStop, "end wall reached");
            }
            if (steps % 10 == 0 && corner_escaped(w)) {
                run.fail(FailureReason::Outside, "corner_stop: plate left the holder");
                break;
            }
            if (detected && w.time - detect_time > cfg.squaring_time &&
                torque_n == torque_win.size() &&
                std::abs(angle_between(x_est, heading(w.gripper.yaw))) <
                    deg2rad(cfg.square_window_deg)) {
                double mean_t = 0.0;
                for (double t : torque_win) mean_t += t;
                mean_t /= static_cast<double>(torque_win.size());
                if (mean_t < cfg.square_torque_exit) break;
            }
        }
    }
    if (run.failed) {
        run.finalize();
        return run.res;
    }

    // --- lower the trailing edge and release -----------------------------------
    run.log(Phase::LowerPlate, "squared against the end wall");
    {
        const double t0 = w.time;
        const double pitch_target = -pitch_corr; // plate pitch back to level
        const double rate_cap = deg2rad(cfg.lower_pitch_rate_deg);
        int settled = 0;
        while (true) {
            if (w.time - t0 > cfg.timeouts.lower_plate) {
                run.fail(FailureReason::Timeout, "lower_plate: timed out");
                break;
            }
            const double dp = pitch_target - w.gripper_pitch;
            TwistCommand cmd;
            cmd.pitch_rate = std::clamp(dp / dt, -rate_cap, rate_cap);
            const Vec2 axis = heading(w.gripper.yaw);
            const double ang = angle_between(x_est, axis);
            if (std::abs(ang) < deg2rad(cfg.square_window_deg))
                cmd.yaw_rate = std::clamp(cfg.square_torque_gain * run.last.torque.z(), -0.3, 0.3);
            // hold the end wall, drift off the tracked wall, keep the preload
            // keep the vertical preload within the finger-spring range so the
            // touch-down at level pitch lands on compliance, not the stiff floor
            law.desired_force =
                Vec3(-cfg.hold_forward_press * x_est.x() + cfg.lower_lateral_press * n_est.x(),
                     -cfg.hold_forward_press * x_est.y() + cfg.lower_lateral_press * n_est.y(),
                     cfg.lower_vert_press);
            cmd.linear = clamp_speed(force_velocity_law(run.last.force, law));
            // pitching about the plate center lifts the leading edge; descend
            // with it so the edge keeps its floor contact at the end wall.
            // Taper the feedforward over the last couple of degrees: by then
            // the trailing edge is landing and the force law takes over.
            const double pitch_hat = w.gripper_pitch + pitch_corr;
            const double taper = std::clamp(std::abs(pitch_hat) / deg2rad(2.0), 0.0, 1.0);
            cmd.linear.z() +=
                taper * (w.plate_geom.length / 2.0) * std::cos(pitch_hat) * cmd.pitch_rate;
            if (!run.do_step(cmd, Phase::LowerPlate)) break;
            if (std::abs(dp) < 1e-4) {
                if (++settled >= 200) break; // 1 s settle at level pitch
            } else {
                settled = 0;
            }
        }
    }
    if (run.failed) {
        run.finalize();
        return run.res;
    }

    run.release_and_classify();
    run.finalize();
    return run.res;
}

TrialResult simple_place(WorldState& w, const SimParams& sim, const SkillConfig& cfg,
                         uint64_t seed, bool record_trace) {
    cfg.validate();
    TrialRunner run(w, sim, cfg, seed, record_trace);
    const double hw = w.plate_geom.width / 2.0;

    std::mt19937_64 rng(mix(seed, 0xABCDULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    auto coin = [&]() { return unit(rng) < 0.5 ? -1.0 : 1.0; };

    run.log(Phase::DetectMarkers, "start");
    std::optional<MarkerInjection> injection;
    if (cfg.ablations.marker_injection)
        injection = MarkerInjection{3.0 * coin(), 3.0 * coin(), deg2rad(1.5) * coin()};
    const Pose2 obs_b = detect_marker(w, 1, cfg.marker_noise, injection, seed);

    run.log(Phase::MoveToA, "marker observed");
    const GraspErrorModel& ge = cfg.grasp_error;
    const Pose2 grasp_offset{uniform(-ge.xy_bound, ge.xy_bound),
                             uniform(-ge.xy_bound, ge.xy_bound),
                             deg2rad(uniform(-ge.yaw_bound_deg, ge.yaw_bound_deg))};
    const double roll_err = coin() * deg2rad(uniform(ge.roll_min_deg, ge.roll_max_deg));
    const double pitch_err = deg2rad(uniform(-ge.pitch_bound_deg, ge.pitch_bound_deg));

    run.log(Phase::Grasp, "gripper closed");
    w.gripper = compose(w.plate, inverse(grasp_offset));
    w.gripper_z = w.plate_z;
    w.gripper_pitch = 0.0;
    w.gripper_roll = 0.0;
    attach_plate(w, grasp_offset, roll_err, pitch_err);

    // straight over the observed pose, no tilt, no correction
    run.log(Phase::MoveAboveB, "moving over the marker");
    w.gripper = compose(Pose2{obs_b.x, obs_b.y, obs_b.yaw}, inverse(w.grasp.plate_in_gripper));
    w.gripper_z = w.holder_geom.groove_height + 3.0 + hw * std::sin(deg2rad(3.5));
    w.plate = compose(w.gripper, w.grasp.plate_in_gripper);
    w.plate_z = w.gripper_z;
    w.plate_pitch = w.grasp.pitch_error;
    w.plate_roll = w.grasp.roll_error;

    run.log(Phase::Descend, "guarded descent");
    {
        const double t0 = w.time;
        int count = 0;
        while (true) {
            if (w.time - t0 > cfg.timeouts.descend) {
                run.fail(FailureReason::Timeout, "descend: no surface contact");
                break;
            }
            TwistCommand cmd;
            cmd.linear = Vec3(0, 0, -cfg.simple_descend_speed);
            if (!run.do_step(cmd, Phase::Descend)) break;
            if (run.last.force.z() >= cfg.surface_force_threshold) {
                if (++count >= 5) break;
            } else {
                count = 0;
            }
        }
    }
    if (run.failed) {
        run.finalize();
        return run.res;
    }

    run.release_and_classify();
    run.finalize();
    return run.res;
}

TrialResult run_trial(WorldState& w, const SimParams& sim, const SkillConfig& cfg,
                      uint64_t seed, bool record_trace) {
    if (cfg.ablations.simple_placing) return simple_place(w, sim, cfg, seed, record_trace);
    return run_placing(w, sim, cfg, seed, record_trace);
}

} // namespace plate_align
