#pragma once

#include "plate_align/geometry.hpp"
#include "plate_align/tactile_sim.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace plate_align {

struct NoContactLineError : std::runtime_error {
    NoContactLineError() : std::runtime_error("no contact line detected") {}
};
struct InconsistentContactError : std::runtime_error {
    InconsistentContactError() : std::runtime_error("contact lines disagree by more than 20 deg") {}
};

struct EdgeMap {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> mask; // row-major, 0/1

    bool at(int x, int y) const { return mask[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { mask[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
    size_t count() const;
};

/// Line in image coordinates relative to the image center:
/// points p with p.x*cos(theta) + p.y*sin(theta) = rho.
struct Line2 {
    double rho = 0.0;           // px, signed distance from image center
    double theta = 0.0;         // radians, in [0, pi)
    double support_length = 0;  // px, extent of inlier pixels along the line
};

/// Canny edge detection: Gaussian smooth (sigma 1.4), Sobel gradients,
/// non-maximum suppression, hysteresis. Thresholds are fractions of the
/// 99th-percentile gradient magnitude.
EdgeMap canny(const DepthMap& d, double low_frac = 0.25, double high_frac = 0.60);

/// Hough accumulator peaks above min_votes, each refined by a total
/// least-squares fit over its inlier pixels (within 2 px of the line),
/// sorted by support_length descending.
std::vector<Line2> hough_lines(const EdgeMap& e, double theta_res = 0.5 * M_PI / 180.0,
                               double rho_res = 1.0, int min_votes = 30);

/// Longest line; ties broken by smaller theta, then smaller |rho|.
/// Throws NoContactLineError on an empty list.
Line2 select_contact_line(const std::vector<Line2>& lines);

/// Passive fingertip displacement, mm per finger. Travel limit is 5 mm.
struct FingerDisplacement {
    double horizontal = 0.0;
    double vertical = 0.0;
    bool clamped = false;
};

/// Sensor pose in the gripper frame. The sensor image maps into the gripper
/// frame as: image x -> gripper +x (mm_per_px), image y -> gripper -z.
struct SensorPose {
    Vec3 position{0.0, 0.0, 0.0}; // mm, gripper frame
    double mm_per_px = 0.06;
};

/// Two-sensor mounting calibration; defaults place the sensors 30 mm apart.
struct GripperCalibration {
    SensorPose left{{0.0, 15.0, 0.0}, 0.06};
    SensorPose right{{0.0, -15.0, 0.0}, 0.06};
    double separation() const { return left.position.y() - right.position.y(); }
};

struct PlatePoseEstimate {
    double roll = 0.0;     // radians, about the long axis
    double pitch = 0.0;    // radians, about the short axis
    Vec3 midpoint{0, 0, 0}; // mm, gripper frame
    Vec3 axis_long{1, 0, 0};
    Vec3 axis_short{0, 1, 0};
};

/// Shift a nominal sensor pose by the measured finger displacement
/// (horizontal -> gripper y, vertical -> gripper z). Displacements beyond the
/// 5 mm travel are clamped and flagged on the returned copy's source.
SensorPose compensate_finger_displacement(const SensorPose& nominal, FingerDisplacement& d);

/// Map the two per-sensor contact lines into the gripper frame and fuse them
/// into the plate pose: averaged (sign-aligned) line directions give the long
/// axis, the plane through both lines gives roll and pitch, the midpoint is
/// the mean of the per-line center points.
PlatePoseEstimate fuse_plate_pose(const Line2& lineL, const Line2& lineR,
                                  const SensorPose& fingertipL, const SensorPose& fingertipR);

/// Full per-sensor pipeline (canny -> hough -> longest line) plus fusion.
PlatePoseEstimate estimate_plate_pose(const DepthMap& depthL, const DepthMap& depthR,
                                      const SensorPose& fingertipL, const SensorPose& fingertipR);

} // namespace plate_align
