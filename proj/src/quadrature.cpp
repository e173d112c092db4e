#include "specop/quadrature.hpp"

#include <cmath>

namespace specop {

GaussRule gauss_legendre(int n) {
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double t = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-16) break;
        }
        r.nodes[i] = -t;
        r.nodes[n - 1 - i] = t;
        r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    return r;
}

RVec lagrange_basis(const RVec& nodes, double t) {
    std::size_t n = nodes.size();
    RVec l(n, 1.0);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t j = 0; j < n; ++j)
            if (j != m) l[m] *= (t - nodes[j]) / (nodes[m] - nodes[j]);
    return l;
}

} // namespace specop
