#include "plate_align/harness.hpp"
#include "plate_align/skill.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace plate_align;

namespace {
constexpr double deg = M_PI / 180.0;

WrenchReading along_x(double fx) {
    WrenchReading r;
    r.force = Vec3(fx, 0.0, 0.0);
    return r;
}
} // namespace

TEST_CASE("surface contact: tactile pitch shift fires immediately") {
    SurfaceContactDetector det(0.3 * deg, 1.5);
    det.set_baseline(1.0 * deg);
    CHECK(!det.update(1.2 * deg, 0.0)); // within the threshold
    CHECK(det.update(1.4 * deg, 0.0)); // one decisive tactile frame is enough
}

TEST_CASE("surface contact: without a baseline only the force path works") {
    SurfaceContactDetector det(0.3 * deg, 1.5, 3);
    CHECK(!det.update(5.0 * deg, 0.0)); // no baseline: shift is meaningless
    CHECK(!det.update(std::nullopt, 2.0));
    CHECK(!det.update(std::nullopt, 2.0));
    CHECK(det.update(std::nullopt, 2.0)); // third consecutive sample
}

TEST_CASE("surface contact: force debounce resets on a dip") {
    SurfaceContactDetector det(0.3 * deg, 1.5, 3);
    CHECK(!det.update(std::nullopt, 2.0));
    CHECK(!det.update(std::nullopt, 2.0));
    CHECK(!det.update(std::nullopt, 0.5)); // dip: count resets
    CHECK(!det.update(std::nullopt, 2.0));
    CHECK(!det.update(std::nullopt, 2.0));
    CHECK(det.update(std::nullopt, 2.0));
}

TEST_CASE("corner arrival uses a windowed mean, not consecutive samples") {
    Gains g;
    g.corner_force_threshold = 2.5;
    const Vec2 slide(1.0, 0.0);

    SUBCASE("rippling reaction still registers once the mean is strong") {
        // alternating -1 / -10 N: no run of strong samples, mean -5.5 N
        CornerArrivalDetector det(4);
        CHECK(!det.update(along_x(-1.0), slide, g));
        CHECK(!det.update(along_x(-10.0), slide, g));
        CHECK(!det.update(along_x(-1.0), slide, g));
        CHECK(det.update(along_x(-10.0), slide, g)); // window full, mean -5.5
    }
    SUBCASE("a weak mean never fires") {
        CornerArrivalDetector det(4);
        for (int i = 0; i < 20; ++i)
            CHECK(!det.update(along_x(i % 2 ? -3.0 : -1.0), slide, g)); // mean -2
    }
    SUBCASE("no decision before the window fills") {
        CornerArrivalDetector det(6);
        for (int i = 0; i < 5; ++i) CHECK(!det.update(along_x(-50.0), slide, g));
        CHECK(det.update(along_x(-50.0), slide, g));
    }
    SUBCASE("only the component along the slide counts") {
        CornerArrivalDetector det(2);
        WrenchReading sideways;
        sideways.force = Vec3(0.0, -50.0, 0.0);
        CHECK(!det.update(sideways, slide, g));
        CHECK(!det.update(sideways, slide, g));
        CHECK(!det.update(sideways, slide, g));
    }
}

TEST_CASE("SkillConfig::validate rejects broken configurations") {
    SkillConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    SUBCASE("flat insertion pitch") {
        cfg.tilt_pitch_deg = 0.0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("zero yaw tilt") {
        cfg.tilt_yaw_deg = 0.0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("non-positive speed") {
        cfg.ram_speed = -1.0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("zero timeout") {
        cfg.timeouts.corner_stop = 0.0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("zero direction-fit gate") {
        cfg.min_travel = 0.0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("inverted grasp roll range") {
        cfg.grasp_error.roll_min_deg = 3.0;
        cfg.grasp_error.roll_max_deg = 1.0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
    SUBCASE("invalid gains propagate") {
        cfg.gains.k_force = 0.0;
        CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    }
}

TEST_CASE("phase and failure names are stable identifiers") {
    CHECK(std::string(phase_name(Phase::StraightSlide)) == "straight_slide");
    CHECK(std::string(phase_name(Phase::Done)) == "done");
    CHECK(std::string(failure_name(FailureReason::None)) == "none");
    CHECK(std::string(failure_name(FailureReason::EndOfHolder)) == "end_of_holder");
    CHECK(std::string(failure_name(FailureReason::SensorOverload)) == "sensor_overload");
}

TEST_CASE("run_trial is deterministic for a fixed seed") {
    ExperimentConfig ecfg;
    const uint64_t seed = trial_seed(1, "a", 3);
    WorldState w1 = make_trial_world(seed, ecfg);
    WorldState w2 = make_trial_world(seed, ecfg);
    CHECK(w1.holder_b.x == w2.holder_b.x);
    CHECK(w1.holder_b.yaw == w2.holder_b.yaw);

    const TrialResult r1 = run_trial(w1, ecfg.sim, ecfg.skill, seed, true);
    const TrialResult r2 = run_trial(w2, ecfg.sim, ecfg.skill, seed, true);

    CHECK(r1.success == r2.success);
    CHECK(r1.reason == r2.reason);
    CHECK(r1.duration == r2.duration);
    CHECK(r1.holder_translation == r2.holder_translation);
    CHECK(r1.final_yaw_error_deg == r2.final_yaw_error_deg);
    REQUIRE(r1.trace.size() == r2.trace.size());
    REQUIRE(!r1.trace.empty());
    for (size_t i = 0; i < r1.trace.size(); ++i) {
        CHECK(r1.trace[i].t == r2.trace[i].t);
        CHECK(r1.trace[i].gripper.x == r2.trace[i].gripper.x);
        CHECK(r1.trace[i].plate.yaw == r2.trace[i].plate.yaw);
        CHECK(r1.trace[i].force == r2.trace[i].force);
    }
    CHECK(w1.plate.x == w2.plate.x);
    CHECK(w1.holder_b.x == w2.holder_b.x);
}

TEST_CASE("the full skill seats the plate on a benign seed") {
    ExperimentConfig ecfg;
    const uint64_t seed = trial_seed(1, "a", 1);
    WorldState w = make_trial_world(seed, ecfg);
    const Pose2 holder0 = w.holder_b;

    const TrialResult r = run_trial(w, ecfg.sim, ecfg.skill, seed, false);
    CHECK(r.success);
    CHECK(r.reason == FailureReason::None);
    CHECK(r.final_phase == Phase::Done);
    CHECK(w.released);
    CHECK(plate_inside_groove(w.plate, w.plate_geom, w.holder_b, w.holder_geom));

    // cross-check the recorded displacement against the world state
    const TrialMetrics m = evaluate_trial(w, holder0);
    CHECK(m.success == r.success);
    CHECK(m.holder_translation == doctest::Approx(r.holder_translation));
}

TEST_CASE("the open-loop baseline succeeds with exact marker poses") {
    ExperimentConfig ecfg;
    SkillConfig cfg = ecfg.skill;
    cfg.ablations.simple_placing = true;
    cfg.ablations.tactile_pose_estimation = false;
    cfg.ablations.groove_estimation = false;
    cfg.marker_noise.enabled = false; // perfect observation: no bias to absorb

    int successes = 0;
    for (int trial = 0; trial < 5; ++trial) {
        const uint64_t seed = trial_seed(1, "exact_marker", trial);
        WorldState w = make_trial_world(seed, ecfg);
        const TrialResult r = run_trial(w, ecfg.sim, cfg, seed, false);
        if (r.success) ++successes;
    }
    // residual grasp error (<= 0.15 mm, 0.1 deg) fits inside the clearance
    CHECK(successes >= 4);
}
