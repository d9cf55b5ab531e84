#include "plate_align/tactile_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace plate_align {

namespace {
DepthMap make_map(const SensorModel& s) {
    DepthMap m;
    m.width = s.image_width;
    m.height = s.image_height;
    m.values.assign(static_cast<size_t>(s.image_width) * s.image_height, 0.0);
    return m;
}
} // namespace

DepthMap render_depth_map(const GraspContact& g, const SensorModel& s) {
    if (s.image_width <= 0 || s.image_height <= 0)
        throw std::invalid_argument("render_depth_map: non-positive image dims");
    DepthMap m = make_map(s);
    const double cx = (s.image_width - 1) / 2.0;
    const double cy = (s.image_height - 1) / 2.0;
    const double nx = -std::sin(g.edge_angle_in_image);
    const double ny = std::cos(g.edge_angle_in_image);
    const double plateau = s.indentation_gain * g.press_depth;
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> noise(0.0, s.noise_sigma);
    for (int y = 0; y < s.image_height; ++y) {
        for (int x = 0; x < s.image_width; ++x) {
            const double sd = nx * (x - cx) + ny * (y - cy) - g.edge_offset;
            // 3-px soft shoulder centered on the edge line
            const double f = std::clamp(sd / 3.0 + 0.5, 0.0, 1.0);
            double v = plateau * f;
            if (s.noise_sigma > 0.0) v += noise(rng);
            m.at(x, y) = v;
        }
    }
    return m;
}

DepthMap render_raw_image(const GraspContact& g, const SensorModel& s) {
    DepthMap m = make_map(s);
    const double background = 0.8;
    const double dot_value = 0.1;
    const double edge_contrast = 0.05; // well below dot contrast
    const double cx = (s.image_width - 1) / 2.0;
    const double cy = (s.image_height - 1) / 2.0;
    const double nx = -std::sin(g.edge_angle_in_image);
    const double ny = std::cos(g.edge_angle_in_image);
    for (auto& v : m.values) v = background;
    if (g.press_depth > 0.0) {
        for (int y = 0; y < s.image_height; ++y)
            for (int x = 0; x < s.image_width; ++x) {
                const double sd = nx * (x - cx) + ny * (y - cy) - g.edge_offset;
                if (sd > 0) m.at(x, y) -= edge_contrast;
            }
    }
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> ux(0.0, s.image_width);
    std::uniform_real_distribution<double> uy(0.0, s.image_height);
    for (int i = 0; i < s.dot_density; ++i) {
        const double dx = ux(rng), dy = uy(rng);
        const int r = s.dot_radius;
        for (int y = std::max(0, int(dy) - r - 1); y <= std::min(s.image_height - 1, int(dy) + r + 1); ++y)
            for (int x = std::max(0, int(dx) - r - 1); x <= std::min(s.image_width - 1, int(dx) + r + 1); ++x) {
                const double d = std::hypot(x - dx, y - dy);
                if (d <= r) m.at(x, y) = dot_value;
            }
    }
    return m;
}

void write_pgm(const DepthMap& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
    double lo = m.values.empty() ? 0.0 : m.values[0], hi = lo;
    for (double v : m.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = (hi > lo) ? hi - lo : 1.0;
    f << "P5\n" << m.width << " " << m.height << "\n255\n";
    for (double v : m.values) {
        const int b = static_cast<int>(std::lround((v - lo) / span * 255.0));
        f.put(static_cast<char>(std::clamp(b, 0, 255)));
    }
}

DepthMap read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pgm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw std::runtime_error("read_pgm: unsupported format in " + path);
    f.get();
    DepthMap m;
    m.width = w;
    m.height = h;
    m.values.resize(static_cast<size_t>(w) * h);
    for (auto& v : m.values) {
        const int b = f.get();
        if (b < 0) throw std::runtime_error("read_pgm: truncated file " + path);
        v = static_cast<double>(b) / maxval;
    }
    return m;
}

} // namespace plate_align
