#pragma once

#include "specop/core.hpp"
#include "specop/problem.hpp"

#include <optional>

namespace specop {

cplx p_char(cplx mu, const DerivedConstants& c) noexcept;
cplx p_char_prime(cplx mu, const DerivedConstants& c) noexcept;

struct ThetaNu {
    double theta;
    double nu;
};

// Branches of p_c(mu) = lambda for lambda >= h_p: roots are +-i theta, +-nu.
ThetaNu theta_nu(double lambda, const DerivedConstants& c);

// Inverse of nu(lambda): lambda = p_c(nu).
inline double lambda_of_nu(double nu, const DerivedConstants& c) noexcept {
    double n2 = nu * nu;
    return n2 * n2 + 2.0 * c.h_a * n2 + c.h_p;
}

enum class Regime { complex_z, real_above_hp, branch_point };

struct RootSystem {
    cplx z;
    std::array<cplx, 4> mu;
    std::optional<double> theta;
    std::optional<double> nu;
    Mat4c Pi;
    Mat4c PiInv;
    Regime regime = Regime::complex_z;
};

// Roots ordered Im mu1 >= Im mu2 > 0 > Im mu3 >= Im mu4, ties broken by Re
// descending. Valid for nonreal z and for real z < h_p away from h_m.
// Pi/PiInv are filled when the roots are simple.
RootSystem order_roots(cplx z, const DerivedConstants& c);

// Real-axis roots for lambda >= h_p as the limit from the upper (plus) or
// lower (minus) half-plane: plus gives (i theta, nu, -nu, -i theta).
RootSystem real_roots(double lambda, const DerivedConstants& c, Side side = Side::plus);

// Roots for a spectral parameter that is either off the real axis, real below
// h_p, or a boundary value lambda +- i0 above h_p.
RootSystem roots_for(cplx z, const DerivedConstants& c, Side side = Side::plus);

struct VandermondePair {
    Mat4c Pi;
    Mat4c PiInv;
};

// Pi_{jk} = (i mu_k)^{j-1} and its inverse in closed form.
VandermondePair vandermonde(const std::array<cplx, 4>& mu);

struct BranchMatrix {
    double x;
    double lambda;
    Mat4c Psi;
    Mat4c PsiInv;
};

inline constexpr double nu_switch = 1e-4;

// Columns p1, p2, i (p3 - e^{2 i nu x} p2) / (2 nu), p4; the third column
// tends to x e1 + e2 as nu -> 0 and Psi(x) D(x) solves y' = A y.
BranchMatrix branch_psi(double x, double lambda, double lambda_s, const DerivedConstants& c);

// det Psi = 2 theta (theta^2 + nu^2)^2, independent of x.
double branch_det(double lambda, const DerivedConstants& c);

} // namespace specop
