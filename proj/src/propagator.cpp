#include "specop/propagator.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

namespace specop {

namespace {

const double gauss_offset = std::sqrt(3.0) / 6.0;

} // namespace

Propagator::Propagator(const OperatorSpec& spec, cplx z)
    : spec_(spec), c_(derived_constants(spec)), z_(z) {
    s_ = std::max({1.0, std::pow(std::abs(z - c_.h_p), 0.25), std::sqrt(2.0 * std::abs(c_.h_a))});
    a_ = Mat4c::Zero();
    a_(0, 1) = a_(1, 2) = a_(2, 3) = s_;
    a_(3, 0) = (z - c_.h_p) / (s_ * s_ * s_);
    a_(3, 2) = 2.0 * c_.h_a / s_;
}

Mat4c Propagator::generator(const std::array<double, 3>& r) const {
    Mat4c m = a_;
    m(3, 0) += r[0] / (s_ * s_ * s_);
    m(3, 1) += r[1] / (s_ * s_);
    m(3, 2) += r[2] / s_;
    return m;
}

Mat4c Propagator::generator(double x) const { return generator(perturbation_row(x, spec_)); }

std::array<double, 2> Propagator::gauss_points(double x, double dx) {
    return {x + (0.5 - gauss_offset) * dx, x + (0.5 + gauss_offset) * dx};
}

Mat4c Propagator::step(double x, double dx) const {
    auto g = gauss_points(x, dx);
    return step(perturbation_row(g[0], spec_), perturbation_row(g[1], spec_), dx);
}

Mat4c Propagator::omega(const std::array<double, 3>& r1, const std::array<double, 3>& r2, double dx) const {
    Mat4c m1 = generator(r1);
    Mat4c m2 = generator(r2);
    return 0.5 * dx * (m1 + m2) + (std::sqrt(3.0) / 12.0) * dx * dx * (m2 * m1 - m1 * m2);
}

Mat4c Propagator::step(const std::array<double, 3>& r1, const std::array<double, 3>& r2, double dx) const {
    return omega(r1, r2, dx).exp();
}

Mat4c Propagator::free_step(double dx) const { return Mat4c(dx * a_).exp(); }

bool Propagator::negligible_B(double x) const {
    auto r = perturbation_row(x, spec_);
    double b = std::abs(r[0]) / (s_ * s_ * s_) + std::abs(r[1]) / (s_ * s_) + std::abs(r[2]) / s_;
    return b <= 1e-17 * a_.cwiseAbs().maxCoeff();
}

Vec4c Propagator::to_scaled(const Vec4c& y) const {
    Vec4c t = y;
    double f = 1.0;
    for (int j = 1; j < 4; ++j) {
        f *= s_;
        t(j) /= f;
    }
    return t;
}

Vec4c Propagator::from_scaled(const Vec4c& yt) const {
    Vec4c y = yt;
    double f = 1.0;
    for (int j = 1; j < 4; ++j) {
        f *= s_;
        y(j) *= f;
    }
    return y;
}

LogVec LogVec::from(const Vec4c& y) {
    LogVec r{y, 0.0};
    r.normalize();
    return r;
}

void LogVec::normalize() {
    double n = v.norm();
    if (n > 0.0 && std::isfinite(n)) {
        v /= n;
        log_scale += std::log(n);
    }
}

LogVec propagate(const Propagator& p, LogVec y, double x0, double x1, const AdaptiveOptions& opt, double& hint) {
    if (x0 == x1) return y;
    double dir = x1 > x0 ? 1.0 : -1.0;
    double h = std::clamp(hint > 0 ? hint : 0.01, opt.min_step, opt.max_step);
    Vec4c v = p.to_scaled(y.v);
    double ls = y.log_scale;
    double x = x0;
    auto renorm = [&] {
        double n = v.norm();
        v /= n;
        ls += std::log(n);
    };
    renorm();
    while (dir * (x1 - x) > 0.0) {
        double remaining = std::abs(x1 - x);
        bool last = h >= remaining;
        double dx = dir * (last ? remaining : h);
        Vec4c full = p.step(x, dx) * v;
        // error of the single step against two half steps, order 4
        Vec4c two = p.step(x + dx / 2, dx / 2) * (p.step(x, dx / 2) * v);
        double err = (full - two).norm() / std::max(two.norm(), 1e-300);
        if (err <= opt.tol || (last && remaining <= opt.min_step)) {
            v = two + (two - full) / 15.0;
            x = last ? x1 : x + dx;
            renorm();
            double grow = err > 0 ? 0.9 * std::pow(opt.tol / err, 0.2) : 2.0;
            h = std::min({opt.max_step, std::abs(dx) * std::clamp(grow, 0.2, 2.0)});
            if (!last) hint = h;
        } else {
            h = std::abs(dx) * std::clamp(0.9 * std::pow(opt.tol / err, 0.2), 0.1, 0.5);
            if (h < opt.min_step) {
                std::ostringstream os;
                os << "step below " << opt.min_step << " near x = " << x << " for z = " << p.z();
                fail(ErrorKind::step_size_underflow, os.str());
            }
        }
    }
    Vec4c phys = p.from_scaled(v);
    LogVec out{phys, ls};
    out.normalize();
    return out;
}

} // namespace specop
