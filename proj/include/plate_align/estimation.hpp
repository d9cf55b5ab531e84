#pragma once

#include "plate_align/geometry.hpp"

#include <stdexcept>

namespace plate_align {

struct InsufficientTravelError : std::runtime_error {
    InsufficientTravelError() : std::runtime_error("sample buffer spans less than min_travel") {}
};
struct DegenerateFitError : std::runtime_error {
    DegenerateFitError() : std::runtime_error("samples coincide, line fit is degenerate") {}
};

/// One end-effector observation inside the 200 Hz loop.
struct PoseSample {
    Vec2 position{0, 0}; // mm, world
    double yaw = 0.0;    // radians, world
    double time = 0.0;   // s
};

/// Time-ordered ring buffer with O(1) insertion and windowed moment sums,
/// sized for 1 s of history at the 200 Hz loop rate.
class SampleBuffer {
public:
    explicit SampleBuffer(size_t capacity = 200);

    void push(const PoseSample& s);
    void clear();
    size_t size() const { return count_; }
    size_t capacity() const { return data_.size(); }
    const PoseSample& oldest() const;
    const PoseSample& newest() const;
    const PoseSample& at(size_t i) const; // 0 = oldest

    /// Euclidean distance between the newest and oldest positions, mm.
    double travel() const;
    /// Max - min yaw across the window, radians.
    double yaw_spread() const;

    // windowed position moments, maintained incrementally
    double sum_x() const { return sx_; }
    double sum_y() const { return sy_; }
    double sum_xx() const { return sxx_; }
    double sum_xy() const { return sxy_; }
    double sum_yy() const { return syy_; }

private:
    std::vector<PoseSample> data_;
    size_t head_ = 0; // next write slot
    size_t count_ = 0;
    double sx_ = 0, sy_ = 0, sxx_ = 0, sxy_ = 0, syy_ = 0;
};

struct GrooveEstimate {
    Vec2 direction{1, 0};    // unit, sign-aligned with the net displacement
    Vec2 normal{0, 1};       // unit, perpendicular to direction
    double offset_c = 0.0;   // mm, line equation normal . x = c
    double residual_rms = 0; // mm
};

/// Total-least-squares line fit over the buffered positions.
/// Throws InsufficientTravelError / DegenerateFitError.
GrooveEstimate regress_groove_direction(const SampleBuffer& buf, double min_travel = 8.0);

struct ContactPointEstimate {
    Vec2 contact_point{0, 0}; // mm, end-effector frame
    double offset_c = 0.0;    // mm
    bool rank_deficient = false;
};

/// Regularized least squares on n . (p + R(yaw) p_c) = c over the buffer,
/// with a Tikhonov pull of weight prior_weight toward prior_pc. When the yaw
/// spread across the buffer is below 0.5 deg the system is rank deficient in
/// p_c and the prior is returned flagged.
ContactPointEstimate regress_contact_point(const SampleBuffer& buf, const Vec2& groove_normal,
                                           const Vec2& prior_pc, double prior_weight);

} // namespace plate_align
