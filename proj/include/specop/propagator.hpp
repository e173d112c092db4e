#pragma once

#include "specop/core.hpp"
#include "specop/problem.hpp"

namespace specop {

// Fourth-order Magnus integrator for y' = (A(z) + B(x)) y in the scaled
// coordinates y = T ytilde, T = diag(1, s, s^2, s^3), s = max(1, |z - h_p|^{1/4}),
// which keeps the generator entries of comparable size for large |z|.
class Propagator {
public:
    Propagator(const OperatorSpec& spec, cplx z);

    const OperatorSpec& spec() const noexcept { return spec_; }
    cplx z() const noexcept { return z_; }
    double scale() const noexcept { return s_; }

    Mat4c generator(double x) const;
    Mat4c generator(const std::array<double, 3>& row) const;
    // exp(Omega) mapping scaled state at x to x + dx (dx of either sign).
    Mat4c step(double x, double dx) const;
    // Same step from perturbation rows already evaluated at the two Gauss points.
    Mat4c step(const std::array<double, 3>& r1, const std::array<double, 3>& r2, double dx) const;
    // Magnus exponent of that step; exp(-omega) is the exact reverse step.
    Mat4c omega(const std::array<double, 3>& r1, const std::array<double, 3>& r2, double dx) const;
    static std::array<double, 2> gauss_points(double x, double dx);

    Vec4c to_scaled(const Vec4c& y) const;
    Vec4c from_scaled(const Vec4c& yt) const;
    // Flat-coefficient propagator exp(dx * Atilde); exact where B vanishes.
    Mat4c free_step(double dx) const;
    // True when |B(x)| is below roundoff relative to the free generator.
    bool negligible_B(double x) const;

private:
    OperatorSpec spec_;
    DerivedConstants c_;
    cplx z_;
    double s_;
    Mat4c a_;
};

// Complex 4-vector times exp(log_scale); v is kept at unit norm.
struct LogVec {
    Vec4c v = Vec4c::Zero();
    double log_scale = 0.0;

    static LogVec from(const Vec4c& y);
    Vec4c value() const { return v * std::exp(log_scale); }
    void normalize();
};

struct AdaptiveOptions {
    double tol = 1e-10;
    double min_step = 1e-10;
    double max_step = 0.25;
};

// Advances a physical state from x0 to x1 by step-doubling error control on the
// Magnus step. `hint` carries the last accepted step between calls.
LogVec propagate(const Propagator& p, LogVec y, double x0, double x1, const AdaptiveOptions& opt, double& hint);

} // namespace specop
