#include "plate_align/tactile_pose.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace plate_align {

size_t EdgeMap::count() const {
    return static_cast<size_t>(std::count(mask.begin(), mask.end(), uint8_t{1}));
}

namespace {

std::vector<double> gaussian_kernel(double sigma, int radius) {
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

std::vector<double> blur(const DepthMap& d, double sigma) {
    const int radius = 4;
    const auto k = gaussian_kernel(sigma, radius);
    const int w = d.width, h = d.height;
    std::vector<double> tmp(d.values.size()), out(d.values.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int xi = std::clamp(x + i, 0, w - 1);
                acc += k[i + radius] * d.at(xi, y);
            }
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int yi = std::clamp(y + i, 0, h - 1);
                acc += k[i + radius] * tmp[static_cast<size_t>(yi) * w + x];
            }
            out[static_cast<size_t>(y) * w + x] = acc;
        }
    return out;
}

} // namespace

EdgeMap canny(const DepthMap& d, double low_frac, double high_frac) {
    if (!(low_frac > 0.0 && low_frac < high_frac && high_frac <= 1.0))
        throw std::invalid_argument("canny: require 0 < low_frac < high_frac <= 1");
    const int w = d.width, h = d.height;
    EdgeMap e;
    e.width = w;
    e.height = h;
    e.mask.assign(static_cast<size_t>(w) * h, 0);
    if (w < 3 || h < 3) return e;

    const auto sm = blur(d, 1.4);
    auto S = [&](int x, int y) {
        return sm[static_cast<size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
    };
    std::vector<double> mag(static_cast<size_t>(w) * h, 0.0);
    std::vector<double> gxv(mag.size()), gyv(mag.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = (S(x + 1, y - 1) + 2 * S(x + 1, y) + S(x + 1, y + 1)) -
                              (S(x - 1, y - 1) + 2 * S(x - 1, y) + S(x - 1, y + 1));
            const double gy = (S(x - 1, y + 1) + 2 * S(x, y + 1) + S(x + 1, y + 1)) -
                              (S(x - 1, y - 1) + 2 * S(x, y - 1) + S(x + 1, y - 1));
            const size_t i = static_cast<size_t>(y) * w + x;
            gxv[i] = gx;
            gyv[i] = gy;
            mag[i] = std::hypot(gx, gy);
        }

    std::vector<double> sorted(mag);
    const size_t p99 = static_cast<size_t>(0.99 * (sorted.size() - 1));
    std::nth_element(sorted.begin(), sorted.begin() + p99, sorted.end());
    const double ref = sorted[p99];
    if (ref <= 0.0) return e; // flat input, no edges
    const double high = high_frac * ref;
    const double low = low_frac * ref;

    // non-maximum suppression along the quantized gradient direction
    std::vector<uint8_t> state(mag.size(), 0); // 0 none, 1 weak, 2 strong
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const double m = mag[i];
            if (m < low) continue;
            double angle = std::atan2(gyv[i], gxv[i]);
            if (angle < 0) angle += M_PI;
            int dx = 1, dy = 0;
            if (angle < M_PI / 8 || angle >= 7 * M_PI / 8) {
                dx = 1; dy = 0;
            } else if (angle < 3 * M_PI / 8) {
                dx = 1; dy = 1;
            } else if (angle < 5 * M_PI / 8) {
                dx = 0; dy = 1;
            } else {
                dx = -1; dy = 1;
            }
            const double m1 = mag[static_cast<size_t>(y + dy) * w + (x + dx)];
            const double m2 = mag[static_cast<size_t>(y - dy) * w + (x - dx)];
            if (m >= m1 && m >= m2) state[i] = (m >= high) ? 2 : 1;
        }

    // hysteresis: keep weak pixels 8-connected to a strong one
    std::deque<std::pair<int, int>> q;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (state[static_cast<size_t>(y) * w + x] == 2) {
                e.set(x, y, true);
                q.emplace_back(x, y);
            }
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                const size_t i = static_cast<size_t>(ny) * w + nx;
                if (state[i] == 1 && !e.at(nx, ny)) {
                    e.set(nx, ny, true);
                    q.emplace_back(nx, ny);
                }
            }
    }
    return e;
}

std::vector<Line2> hough_lines(const EdgeMap& e, double theta_res, double rho_res, int min_votes) {
    if (theta_res <= 0.0 || rho_res <= 0.0)
        throw std::invalid_argument("hough_lines: resolutions must be positive");
    std::vector<Line2> result;
    const int w = e.width, h = e.height;
    std::vector<Vec2> pts;
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (e.at(x, y)) pts.emplace_back(x - cx, y - cy);
    if (pts.empty()) return result;

    const int n_theta = std::max(1, static_cast<int>(std::ceil(M_PI / theta_res)));
    const double max_rho = std::hypot(w / 2.0, h / 2.0) + 2.0;
    const int n_rho_half = static_cast<int>(std::ceil(max_rho / rho_res));
    const int n_rho = 2 * n_rho_half + 1;
    std::vector<int> acc(static_cast<size_t>(n_theta) * n_rho, 0);
    std::vector<double> cs(n_theta), sn(n_theta);
    for (int t = 0; t < n_theta; ++t) {
        cs[t] = std::cos(t * theta_res);
        sn[t] = std::sin(t * theta_res);
    }
    for (const auto& p : pts)
        for (int t = 0; t < n_theta; ++t) {
            const double rho = p.x() * cs[t] + p.y() * sn[t];
            const int r = static_cast<int>(std::lround(rho / rho_res)) + n_rho_half;
            if (r >= 0 && r < n_rho) ++acc[static_cast<size_t>(t) * n_rho + r];
        }

    struct Cell {
        int t, r, votes;
    };
    std::vector<Cell> peaks;
    for (int t = 0; t < n_theta; ++t)
        for (int r = 0; r < n_rho; ++r) {
            const int v = acc[static_cast<size_t>(t) * n_rho + r];
            if (v < min_votes) continue;
            bool is_max = true;
            for (int dt = -1; dt <= 1 && is_max; ++dt)
                for (int dr = -1; dr <= 1; ++dr) {
                    const int tt = t + dt, rr = r + dr;
                    if (tt < 0 || tt >= n_theta || rr < 0 || rr >= n_rho) continue;
                    const int nv = acc[static_cast<size_t>(tt) * n_rho + rr];
                    if (nv > v || (nv == v && (dt < 0 || (dt == 0 && dr < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) peaks.push_back({t, r, v});
        }
    std::sort(peaks.begin(), peaks.end(), [](const Cell& a, const Cell& b) { return a.votes > b.votes; });

    // greedy suppression of near-duplicate peaks
    const int t_win = 6, r_win = static_cast<int>(std::ceil(4.0 / rho_res));
    std::vector<Cell> kept;
    for (const auto& c : peaks) {
        bool close = false;
        for (const auto& k : kept) {
            const int dt = std::min(std::abs(c.t - k.t), n_theta - std::abs(c.t - k.t));
            if (dt <= t_win && std::abs(c.r - k.r) <= r_win) {
                close = true;
                break;
            }
        }
        if (!close) kept.push_back(c);
    }

    for (const auto& c : kept) {
        const double theta0 = c.t * theta_res;
        const double rho0 = (c.r - n_rho_half) * rho_res;
        const double n0x = std::cos(theta0), n0y = std::sin(theta0);
        std::vector<Vec2> inliers;
        for (const auto& p : pts)
            if (std::abs(p.x() * n0x + p.y() * n0y - rho0) <= 2.0) inliers.push_back(p);
        if (inliers.size() < 2) continue;

        // TLS refit over the inlier pixels for sub-bin accuracy
        Vec2 mean = Vec2::Zero();
        for (const auto& p : inliers) mean += p;
        mean /= static_cast<double>(inliers.size());
        double sxx = 0, sxy = 0, syy = 0;
        for (const auto& p : inliers) {
            const Vec2 q = p - mean;
            sxx += q.x() * q.x();
            sxy += q.x() * q.y();
            syy += q.y() * q.y();
        }
        const double ang = 0.5 * std::atan2(2.0 * sxy, sxx - syy); // principal direction
        double theta = ang + M_PI / 2.0;                           // line normal
        double rho = mean.x() * std::cos(theta) + mean.y() * std::sin(theta);
        if (theta >= M_PI) {
            theta -= M_PI;
            rho = -rho;
        }
        if (theta < 0) {
            theta += M_PI;
            rho = -rho;
        }
        const Vec2 dir(-std::sin(theta), std::cos(theta));
        double lo = 1e30, hi = -1e30;
        for (const auto& p : inliers) {
            const double s = p.dot(dir);
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        result.push_back({rho, theta, hi - lo});
    }
    std::sort(result.begin(), result.end(),
              [](const Line2& a, const Line2& b) { return a.support_length > b.support_length; });
    return result;
}

Line2 select_contact_line(const std::vector<Line2>& lines) {
    if (lines.empty()) throw NoContactLineError{};
    auto better = [](const Line2& a, const Line2& b) {
        if (std::abs(a.support_length - b.support_length) > 1e-9)
            return a.support_length > b.support_length;
        if (std::abs(a.theta - b.theta) > 1e-12) return a.theta < b.theta;
        return std::abs(a.rho) < std::abs(b.rho);
    };
    return *std::min_element(lines.begin(), lines.end(),
                             [&](const Line2& a, const Line2& b) { return better(a, b); });
}

SensorPose compensate_finger_displacement(const SensorPose& nominal, FingerDisplacement& d) {
    constexpr double travel = 5.0;
    double hd = d.horizontal, vd = d.vertical;
    if (std::abs(hd) > travel || std::abs(vd) > travel) {
        hd = std::clamp(hd, -travel, travel);
        vd = std::clamp(vd, -travel, travel);
        d.clamped = true;
    }
    SensorPose out = nominal;
    out.position += Vec3(0.0, hd, vd);
    return out;
}

namespace {

struct GripperLine {
    Vec3 dir;    // unit, gripper frame
    Vec3 center; // point closest to the image center, gripper frame
};

GripperLine to_gripper(const Line2& l, const SensorPose& s) {
    const double c = std::cos(l.theta), sn = std::sin(l.theta);
    // pixel (u, v) relative to image center -> gripper frame: u along +x, v along -z
    const Vec3 p0 = s.position + s.mm_per_px * Vec3(l.rho * c, 0.0, -l.rho * sn);
    Vec3 d(-sn, 0.0, -c);
    if (d.x() < 0 || (d.x() == 0.0 && d.z() < 0)) d = -d;
    return {d, p0};
}

} // namespace

PlatePoseEstimate fuse_plate_pose(const Line2& lineL, const Line2& lineR,
                                  const SensorPose& fingertipL, const SensorPose& fingertipR) {
    GripperLine gl = to_gripper(lineL, fingertipL);
    GripperLine gr = to_gripper(lineR, fingertipR);
    if (gl.dir.dot(gr.dir) < 0) gr.dir = -gr.dir;
    const double spread = std::acos(std::clamp(gl.dir.dot(gr.dir), -1.0, 1.0));
    if (spread > 20.0 * M_PI / 180.0) throw InconsistentContactError{};

    PlatePoseEstimate est;
    est.axis_long = (gl.dir + gr.dir).normalized();
    est.midpoint = 0.5 * (gl.center + gr.center);
    est.pitch = std::atan2(-est.axis_long.z(), est.axis_long.x());
    const Vec3 span = gl.center - gr.center;
    est.roll = std::atan2(span.z(), span.y());
    Vec3 normal = est.axis_long.cross(span);
    if (normal.norm() < 1e-12) normal = Vec3(0, 0, 1);
    normal.normalize();
    if (normal.z() < 0) normal = -normal;
    est.axis_short = normal.cross(est.axis_long).normalized();
    return est;
}

PlatePoseEstimate estimate_plate_pose(const DepthMap& depthL, const DepthMap& depthR,
                                      const SensorPose& fingertipL, const SensorPose& fingertipR) {
    const Line2 ll = select_contact_line(hough_lines(canny(depthL)));
    const Line2 lr = select_contact_line(hough_lines(canny(depthR)));
    return fuse_plate_pose(ll, lr, fingertipL, fingertipR);
}

} // namespace plate_align
