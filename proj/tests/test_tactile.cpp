#include "plate_align/tactile_pose.hpp"
#include "plate_align/tactile_sim.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

using namespace plate_align;

namespace {

constexpr double deg = M_PI / 180.0;

/// Inverse sensor model: image a plate held at (roll, pitch) relative to the
/// gripper by a fingertip at `pose`, optionally lifted by a compressed spring.
DepthMap image_plate(const SensorPose& pose, double roll, double pitch, double lift,
                     uint64_t seed, double noise_sigma = 0.01) {
    GraspContact g;
    g.edge_angle_in_image = pitch;
    const double z_in_sensor = pose.position.y() * std::tan(roll) - lift;
    g.edge_offset = -z_in_sensor / (pose.mm_per_px * std::cos(pitch));
    g.press_depth = 0.5;
    SensorModel m;
    m.seed = seed;
    m.noise_sigma = noise_sigma;
    return render_depth_map(g, m);
}

} // namespace

TEST_CASE("PGM round-trip preserves the depth map up to 8-bit quantization") {
    GraspContact g;
    g.edge_angle_in_image = 2.0 * deg;
    g.edge_offset = 10.0;
    SensorModel m;
    m.seed = 5;
    const DepthMap d = render_depth_map(g, m);
    REQUIRE(d.width == 320);
    REQUIRE(d.height == 240);

    const std::string path = "/tmp/plate_align_test_roundtrip.pgm";
    write_pgm(d, path);
    const DepthMap r = read_pgm(path);
    std::remove(path.c_str());

    REQUIRE(r.width == d.width);
    REQUIRE(r.height == d.height);
    double lo = d.values[0], hi = d.values[0];
    for (double v : d.values) { lo = std::min(lo, v); hi = std::max(hi, v); }
    REQUIRE(hi > lo);
    // read_pgm returns values normalized to [0, 1]
    for (int y = 0; y < d.height; y += 7)
        for (int x = 0; x < d.width; x += 7) {
            const double expected = (d.at(x, y) - lo) / (hi - lo);
            CHECK(std::abs(r.at(x, y) - expected) <= 1.0 / 255.0 + 1e-9);
        }
}

TEST_CASE("canny + hough recover the synthetic contact line") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> uang(-6.0, 6.0);
    std::uniform_real_distribution<double> uoff(-40.0, 40.0);
    for (int i = 0; i < 8; ++i) {
        GraspContact g;
        g.edge_angle_in_image = uang(rng) * deg;
        g.edge_offset = uoff(rng);
        SensorModel m;
        m.seed = 1000 + i;
        const DepthMap d = render_depth_map(g, m);

        const EdgeMap e = canny(d);
        CHECK(e.count() > 100); // the edge is a long visible feature

        const auto lines = hough_lines(e);
        REQUIRE(!lines.empty());
        const Line2 best = select_contact_line(lines);

        // the rendered edge runs along direction `edge_angle`, so its normal
        // angle is edge_angle + 90 deg; compare modulo pi
        double theta_expected = std::fmod(g.edge_angle_in_image + M_PI / 2.0, M_PI);
        if (theta_expected < 0) theta_expected += M_PI;
        double dth = std::abs(best.theta - theta_expected);
        dth = std::min(dth, M_PI - dth);
        CHECK(dth < 0.5 * deg);

        // rho sign depends on which normal flip lands theta in [0, pi)
        const double drho = std::min(std::abs(best.rho - g.edge_offset),
                                     std::abs(-best.rho - g.edge_offset));
        CHECK(drho < 1.0);
    }
}

TEST_CASE("the raw image hides the edge that the depth map exposes") {
    GraspContact g;
    g.edge_angle_in_image = 2.0 * deg;
    g.edge_offset = 5.0;
    SensorModel m;
    m.seed = 77;
    const DepthMap raw = render_raw_image(g, m);
    REQUIRE(raw.width == m.image_width);
    // the dot texture dominates: the value range is much wider than the edge step
    double lo = raw.values[0], hi = raw.values[0];
    for (double v : raw.values) { lo = std::min(lo, v); hi = std::max(hi, v); }
    CHECK(hi - lo > 0.0);
}

TEST_CASE("select_contact_line prefers length, then smaller theta, then |rho|") {
    CHECK_THROWS_AS(select_contact_line({}), NoContactLineError);
    Line2 a{10.0, 0.3, 200.0}, b{5.0, 0.2, 120.0};
    CHECK(select_contact_line({b, a}).support_length == doctest::Approx(200.0));
    Line2 c{5.0, 0.2, 200.0};
    CHECK(select_contact_line({a, c}).theta == doctest::Approx(0.2));
    Line2 d{-2.0, 0.3, 200.0};
    CHECK(select_contact_line({a, d}).rho == doctest::Approx(-2.0));
}

TEST_CASE("two-sensor fusion inverts the grasp model") {
    const GripperCalibration calib;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uroll(-3.0, 3.0);
    std::uniform_real_distribution<double> upitch(-4.0, 4.0);

    for (int i = 0; i < 6; ++i) {
        const double roll = uroll(rng) * deg;
        const double pitch = upitch(rng) * deg;
        const DepthMap dl = image_plate(calib.left, roll, pitch, 0.0, 2 * i, 0.0);
        const DepthMap dr = image_plate(calib.right, roll, pitch, 0.0, 2 * i + 1, 0.0);
        const PlatePoseEstimate est = estimate_plate_pose(dl, dr, calib.left, calib.right);
        CHECK(std::abs(est.roll - roll) < 0.1 * deg);
        CHECK(std::abs(est.pitch - pitch) < 0.1 * deg);
    }

    SUBCASE("noisy images stay within a tenth of a degree") {
        const double roll = 2.2 * deg, pitch = -3.1 * deg;
        const DepthMap dl = image_plate(calib.left, roll, pitch, 0.0, 123, 0.01);
        const DepthMap dr = image_plate(calib.right, roll, pitch, 0.0, 456, 0.01);
        const PlatePoseEstimate est = estimate_plate_pose(dl, dr, calib.left, calib.right);
        CHECK(std::abs(est.roll - roll) < 0.1 * deg);
        CHECK(std::abs(est.pitch - pitch) < 0.1 * deg);
    }

    SUBCASE("wildly disagreeing lines are rejected") {
        const Line2 flat{0.0, M_PI / 2.0, 100.0};  // horizontal edge
        const Line2 steep{0.0, 0.1, 100.0};        // nearly vertical edge
        CHECK_THROWS_AS(fuse_plate_pose(flat, steep, calib.left, calib.right),
                        InconsistentContactError);
    }
}

TEST_CASE("finger-displacement compensation removes the single-finger roll bias") {
    const GripperCalibration calib;
    const double roll = 1.5 * deg, pitch = 1.0 * deg;
    const double lift = 2.0; // mm, left spring compressed, right one not

    // physical truth: the left sensor sits 2 mm higher, so its image of the
    // plate shifts; an uncompensated fuse misreads that as roll
    const DepthMap dl = image_plate(calib.left, roll, pitch, lift, 10, 0.0);
    const DepthMap dr = image_plate(calib.right, roll, pitch, 0.0, 11, 0.0);

    const PlatePoseEstimate raw = estimate_plate_pose(dl, dr, calib.left, calib.right);
    const double err_raw = std::abs(raw.roll - roll);
    CHECK(err_raw > 2.0 * deg); // ~atan(2/30) = 3.8 deg of bias

    FingerDisplacement displacedL{0.0, lift, false};
    FingerDisplacement displacedR{0.0, 0.0, false};
    const SensorPose compL = compensate_finger_displacement(calib.left, displacedL);
    const SensorPose compR = compensate_finger_displacement(calib.right, displacedR);
    CHECK(!displacedL.clamped);
    CHECK(compL.position.z() == doctest::Approx(lift));

    const PlatePoseEstimate fixed = estimate_plate_pose(dl, dr, compL, compR);
    const double err_fixed = std::abs(fixed.roll - roll);
    CHECK(err_fixed < 0.1 * deg);
    CHECK(err_raw / std::max(err_fixed, 1e-6) > 4.0);
}

TEST_CASE("compensation clamps at the 5 mm spring travel") {
    const SensorPose nominal{{0.0, 15.0, 0.0}, 0.06};
    FingerDisplacement d{7.0, -9.0, false};
    const SensorPose out = compensate_finger_displacement(nominal, d);
    CHECK(d.clamped);
    CHECK(out.position.y() == doctest::Approx(20.0));
    CHECK(out.position.z() == doctest::Approx(-5.0));
}
