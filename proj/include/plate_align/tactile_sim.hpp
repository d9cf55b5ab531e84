#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace plate_align {

/// Camera-embedded gel fingertip model. Field of view defaults to the
/// 320x240 px, 0.06 mm/px sensor (about 19.2 x 14.4 mm).
struct SensorModel {
    int image_width = 320;
    int image_height = 240;
    double mm_per_px = 0.06;
    double indentation_gain = 1.0; // depth units per mm of press
    double noise_sigma = 0.01;     // depth units
    int dot_density = 120;         // dots per image (raw image synthesis)
    int dot_radius = 3;            // px
    uint64_t seed = 0;
};

/// Row-major scalar grid, also reused for grayscale raw images.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
    double& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
};

/// Pose of the grasped plate edge relative to the sensor image.
/// The edge line passes at signed distance `edge_offset` (px) from the image
/// center with direction `edge_angle_in_image`; the plate side of the line
/// (left of the direction vector) is pressed into the gel by `press_depth`.
struct GraspContact {
    double edge_angle_in_image = 0.0; // radians
    double edge_offset = 0.0;         // px
    double press_depth = 0.5;         // mm
};

DepthMap render_depth_map(const GraspContact& g, const SensorModel& s);

/// Dot-textured grayscale image where the plate edge appears only as a
/// low-contrast step (<= 10% of the dot contrast).
DepthMap render_raw_image(const GraspContact& g, const SensorModel& s);

/// 8-bit PGM (P5), values scaled to the map's [min, max] range.
void write_pgm(const DepthMap& m, const std::string& path);
DepthMap read_pgm(const std::string& path);

} // namespace plate_align
