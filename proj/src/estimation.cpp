#include "plate_align/estimation.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace plate_align {

SampleBuffer::SampleBuffer(size_t capacity) : data_(std::max<size_t>(capacity, 2)) {}

void SampleBuffer::push(const PoseSample& s) {
    if (count_ == data_.size()) {
        const PoseSample& old = data_[head_]; // head is also the oldest slot when full
        sx_ -= old.position.x();
        sy_ -= old.position.y();
        sxx_ -= old.position.x() * old.position.x();
        sxy_ -= old.position.x() * old.position.y();
        syy_ -= old.position.y() * old.position.y();
        --count_;
    }
    data_[head_] = s;
    head_ = (head_ + 1) % data_.size();
    ++count_;
    sx_ += s.position.x();
    sy_ += s.position.y();
    sxx_ += s.position.x() * s.position.x();
    sxy_ += s.position.x() * s.position.y();
    syy_ += s.position.y() * s.position.y();
}

void SampleBuffer::clear() {
    head_ = 0;
    count_ = 0;
    sx_ = sy_ = sxx_ = sxy_ = syy_ = 0.0;
}

const PoseSample& SampleBuffer::at(size_t i) const {
    const size_t oldest = (head_ + data_.size() - count_) % data_.size();
    return data_[(oldest + i) % data_.size()];
}

const PoseSample& SampleBuffer::oldest() const { return at(0); }
const PoseSample& SampleBuffer::newest() const { return at(count_ - 1); }

double SampleBuffer::travel() const {
    if (count_ < 2) return 0.0;
    return (newest().position - oldest().position).norm();
}

double SampleBuffer::yaw_spread() const {
    if (count_ < 2) return 0.0;
    double lo = at(0).yaw, hi = lo;
    for (size_t i = 1; i < count_; ++i) {
        lo = std::min(lo, at(i).yaw);
        hi = std::max(hi, at(i).yaw);
    }
    return hi - lo;
}

GrooveEstimate regress_groove_direction(const SampleBuffer& buf, double min_travel) {
    if (buf.travel() < min_travel) throw InsufficientTravelError{};
    const double n = static_cast<double>(buf.size());
    const double mx = buf.sum_x() / n, my = buf.sum_y() / n;
    const double cxx = buf.sum_xx() / n - mx * mx;
    const double cxy = buf.sum_xy() / n - mx * my;
    const double cyy = buf.sum_yy() / n - my * my;
    const double trace = cxx + cyy;
    if (trace < 1e-12) throw DegenerateFitError{};

    const double ang = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
    GrooveEstimate est;
    est.direction = Vec2(std::cos(ang), std::sin(ang));
    const Vec2 net = buf.newest().position - buf.oldest().position;
    if (est.direction.dot(net) < 0) est.direction = -est.direction;
    est.normal = Vec2(-est.direction.y(), est.direction.x());
    est.offset_c = est.normal.dot(Vec2(mx, my));
    // smaller covariance eigenvalue = mean squared perpendicular residual
    const double disc = std::sqrt(std::max(0.0, (cxx - cyy) * (cxx - cyy) + 4.0 * cxy * cxy));
    est.residual_rms = std::sqrt(std::max(0.0, 0.5 * (trace - disc)));
    return est;
}

ContactPointEstimate regress_contact_point(const SampleBuffer& buf, const Vec2& groove_normal,
                                           const Vec2& prior_pc, double prior_weight) {
    ContactPointEstimate est;
    est.contact_point = prior_pc;
    if (buf.size() < 10 || buf.yaw_spread() < 0.5 * M_PI / 180.0) {
        est.rank_deficient = true;
        if (buf.size() > 0) {
            // best available offset from the prior contact point
            const auto& s = buf.newest();
            Eigen::Rotation2Dd r(s.yaw);
            est.offset_c = groove_normal.dot(s.position + r * prior_pc);
        }
        return est;
    }

    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Vec3 atb = Vec3::Zero();
    for (size_t i = 0; i < buf.size(); ++i) {
        const auto& s = buf.at(i);
        const Eigen::Matrix2d r = Eigen::Rotation2Dd(s.yaw).toRotationMatrix();
        const Vec2 rn = r.transpose() * groove_normal;
        const Vec3 a(rn.x(), rn.y(), -1.0);
        const double b = -groove_normal.dot(s.position);
        ata += a * a.transpose();
        atb += a * b;
    }
    Eigen::Matrix3d reg = Eigen::Matrix3d::Zero();
    reg(0, 0) = reg(1, 1) = prior_weight;
    const Vec3 u0(prior_pc.x(), prior_pc.y(), 0.0);
    const Vec3 u = (ata + reg).ldlt().solve(atb + reg * u0);
    est.contact_point = Vec2(u.x(), u.y());
    est.offset_c = u.z();
    est.rank_deficient = false;
    return est;
}

} // namespace plate_align
