#include "specop/characteristic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace specop {

cplx p_char(cplx mu, const DerivedConstants& c) noexcept {
    cplx m2 = mu * mu;
    return m2 * m2 + 2.0 * c.h_a * m2 + c.h_p;
}

cplx p_char_prime(cplx mu, const DerivedConstants& c) noexcept {
    return 4.0 * mu * (mu * mu + c.h_a);
}

ThetaNu theta_nu(double lambda, const DerivedConstants& c) {
    if (lambda < c.h_p) {
        std::ostringstream os;
        os << "lambda = " << lambda << " below h_p = " << c.h_p;
        fail(ErrorKind::domain, os.str());
    }
    double s = std::sqrt(lambda + c.h_a * c.h_a - c.h_p);
    double theta = std::sqrt(s + c.h_a);
    // s - h_a without cancellation near the branch point
    double nu = std::sqrt((lambda - c.h_p) / (s + c.h_a));
    return {theta, nu};
}

VandermondePair vandermonde(const std::array<cplx, 4>& mu) {
    double dmin = INFINITY;
    for (int j = 0; j < 4; ++j)
        for (int k = j + 1; k < 4; ++k) dmin = std::min(dmin, std::abs(mu[j] - mu[k]));
    if (dmin < 1e-8) {
        std::ostringstream os;
        os << "roots too close (min distance " << dmin << ")";
        fail(ErrorKind::singular_pi, os.str());
    }
    VandermondePair vp;
    std::array<cplx, 4> a;
    for (int k = 0; k < 4; ++k) a[k] = I * mu[k];
    for (int k = 0; k < 4; ++k) {
        cplx p = 1.0;
        for (int j = 0; j < 4; ++j) {
            vp.Pi(j, k) = p;
            p *= a[k];
        }
    }
    for (int k = 0; k < 4; ++k) {
        std::array<cplx, 3> o;
        int n = 0;
        cplx den = 1.0;
        for (int m = 0; m < 4; ++m) {
            if (m == k) continue;
            o[n++] = a[m];
            den *= a[k] - a[m];
        }
        cplx e1 = o[0] + o[1] + o[2];
        cplx e2 = o[0] * o[1] + o[0] * o[2] + o[1] * o[2];
        cplx e3 = o[0] * o[1] * o[2];
        vp.PiInv(k, 0) = -e3 / den;
        vp.PiInv(k, 1) = e2 / den;
        vp.PiInv(k, 2) = -e1 / den;
        vp.PiInv(k, 3) = 1.0 / den;
    }
    return vp;
}

namespace {

void attach_pi(RootSystem& rs) {
    auto vp = vandermonde(rs.mu);
    rs.Pi = vp.Pi;
    rs.PiInv = vp.PiInv;
}

} // namespace

RootSystem order_roots(cplx z, const DerivedConstants& c) {
    double scale = std::max(1.0, std::abs(z));
    if (std::abs(z - c.h_m) <= 1e-14 * scale || std::abs(z - c.h_p) <= 1e-14 * scale) {
        std::ostringstream os;
        os << "z = " << z << " is a branch point";
        fail(ErrorKind::degenerate_roots, os.str());
    }
    // w = mu^2 solves w^2 + 2 h_a w + h_p - z = 0
    cplx disc = std::sqrt(cplx(c.h_a * c.h_a - c.h_p) + z);
    cplx w_big = -c.h_a - disc;
    if (std::abs(-c.h_a + disc) > std::abs(w_big)) w_big = -c.h_a + disc;
    cplx w_small = (c.h_p - z) / w_big;
    cplx r1 = std::sqrt(w_big), r2 = std::sqrt(w_small);
    std::array<cplx, 4> mu{r1, -r1, r2, -r2};
    std::sort(mu.begin(), mu.end(), [](cplx a, cplx b) {
        if (a.imag() != b.imag()) return a.imag() > b.imag();
        return a.real() > b.real();
    });
    if (!(mu[1].imag() > 0.0 && mu[2].imag() < 0.0)) {
        std::ostringstream os;
        os << "z = " << z << " has real roots; use the real-axis branch";
        fail(ErrorKind::degenerate_ordering, os.str());
    }
    RootSystem rs;
    rs.z = z;
    rs.mu = mu;
    rs.regime = Regime::complex_z;
    attach_pi(rs);
    return rs;
}

RootSystem real_roots(double lambda, const DerivedConstants& c, Side side) {
    auto [theta, nu] = theta_nu(lambda, c);
    RootSystem rs;
    rs.z = lambda;
    rs.theta = theta;
    rs.nu = nu;
    double s = side == Side::plus ? 1.0 : -1.0;
    rs.mu = {I * theta, s * nu, -s * nu, -I * theta};
    if (nu == 0.0) {
        rs.regime = Regime::branch_point;
        rs.Pi = Mat4c::Zero();
        rs.PiInv = Mat4c::Zero();
        for (int k = 0; k < 4; ++k) {
            cplx p = 1.0;
            for (int j = 0; j < 4; ++j) {
                rs.Pi(j, k) = p;
                p *= I * rs.mu[k];
            }
        }
        return rs;
    }
    rs.regime = Regime::real_above_hp;
    attach_pi(rs);
    return rs;
}

RootSystem roots_for(cplx z, const DerivedConstants& c, Side side) {
    if (z.imag() == 0.0 && z.real() > c.h_p) return real_roots(z.real(), c, side);
    return order_roots(z, c);
}

BranchMatrix branch_psi(double x, double lambda, double lambda_s, const DerivedConstants& c) {
    double slack = 1e-12 * std::max(1.0, std::abs(lambda));
    if (lambda < c.h_p - slack || lambda > lambda_s + slack) {
        std::ostringstream os;
        os << "lambda = " << lambda << " outside [" << c.h_p << ", " << lambda_s << "]";
        fail(ErrorKind::domain, os.str());
    }
    lambda = std::max(lambda, c.h_p);
    auto [theta, nu] = theta_nu(lambda, c);
    auto column = [](cplx mu) {
        Vec4c p;
        cplx a = I * mu, v = 1.0;
        for (int j = 0; j < 4; ++j) {
            p(j) = v;
            v *= a;
        }
        return p;
    };
    BranchMatrix bm;
    bm.x = x;
    bm.lambda = lambda;
    bm.Psi.col(0) = column(I * theta);
    bm.Psi.col(1) = column(nu);
    bm.Psi.col(3) = column(-I * theta);
    Vec4c third;
    if (nu > nu_switch) {
        third = I * (column(-nu) - std::exp(2.0 * I * nu * x) * column(nu)) / (2.0 * nu);
    } else {
        // i/2 * sum_{n=1..3} f_n nu^{n-1}, f(nu) = p(-nu) - e^{2 i nu x} p(nu),
        // with component r of p(nu) equal to (i nu)^r.
        third.setZero();
        cplx ix2 = 2.0 * I * x;
        for (int r = 0; r < 4; ++r) {
            cplx acc = 0.0;
            double nup = 1.0;
            for (int n = 1; n <= 3; ++n) {
                cplx fn = 0.0;
                if (n == r) fn += std::pow(-I, r);
                if (n >= r) fn -= std::pow(I, r) * std::pow(ix2, n - r) / std::tgamma(n - r + 1.0);
                acc += fn * nup;
                nup *= nu;
            }
            third(r) = 0.5 * I * acc;
        }
    }
    bm.Psi.col(2) = third;
    bm.PsiInv = bm.Psi.inverse();
    return bm;
}

double branch_det(double lambda, const DerivedConstants& c) {
    auto [theta, nu] = theta_nu(lambda, c);
    double s = theta * theta + nu * nu;
    return 2.0 * theta * s * s;
}

} // namespace specop
