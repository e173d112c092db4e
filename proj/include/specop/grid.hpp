#pragma once

#include "specop/core.hpp"

#include <cmath>
#include <span>

namespace specop {

// Interior nodes of a Dirichlet box [-X, X]: x_i = -X + (i+1) h, h = 2X/(N+1).
struct Grid {
    double half_width = 20.0;
    int points = 1600;

    double step() const noexcept { return 2.0 * half_width / (points + 1); }
    double x(int i) const noexcept { return -half_width + (i + 1) * step(); }
    RVec nodes() const {
        RVec v(points);
        for (int i = 0; i < points; ++i) v[i] = x(i);
        return v;
    }
    int nearest(double xv) const noexcept {
        long i = std::lround((xv + half_width) / step()) - 1;
        return static_cast<int>(std::clamp<long>(i, 0, points - 1));
    }
};

inline double dot(std::span<const double> a, std::span<const double> b, double h) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return h * s;
}

inline double norm(std::span<const double> a, double h) { return std::sqrt(dot(a, a, h)); }

inline double distance(std::span<const double> a, std::span<const double> b, double h) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(h * s);
}

template <class F>
RVec sample(const Grid& g, F&& f) {
    RVec v(g.points);
    for (int i = 0; i < g.points; ++i) v[i] = f(g.x(i));
    return v;
}

} // namespace specop
