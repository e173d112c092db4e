#include "specop/characteristic.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace specop;

namespace {

const DerivedConstants ref{1.5, 2.0, -0.25, std::sqrt(3.0)};

// Roots of mu^4 + 2 h_a mu^2 + h_p - z from the eigenvalues of the companion matrix.
std::vector<cplx> companion_roots(cplx z) {
    Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
    m(1, 0) = m(2, 1) = m(3, 2) = 1.0;
    m(0, 3) = -(ref.h_p - z);
    m(2, 3) = -2.0 * ref.h_a;
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(m);
    std::vector<cplx> r(es.eigenvalues().data(), es.eigenvalues().data() + 4);
    return r;
}

double multiset_distance(std::vector<cplx> a, std::vector<cplx> b) {
    double worst = 0.0;
    for (cplx x : a) {
        auto it = std::min_element(b.begin(), b.end(), [x](cplx p, cplx q) { return std::abs(p - x) < std::abs(q - x); });
        worst = std::max(worst, std::abs(*it - x));
        b.erase(it);
    }
    return worst;
}

Vec4c power_column(cplx mu) {
    Vec4c p;
    cplx v = 1.0;
    for (int j = 0; j < 4; ++j, v *= I * mu) p(j) = v;
    return p;
}

} // namespace

TEST(PChar, IntegerValues) {
    EXPECT_EQ(p_char(0.0, ref), cplx(2.0));
    EXPECT_EQ(p_char(1.0, ref), cplx(6.0));
    EXPECT_LT(std::abs(p_char(I, ref)), 1e-15);
    EXPECT_EQ(p_char_prime(1.0, ref), cplx(10.0));
}

TEST(ThetaNu, BranchPoint) {
    auto [t, n] = theta_nu(2.0, ref);
    EXPECT_NEAR(t, std::sqrt(3.0), 1e-15);
    EXPECT_EQ(n, 0.0);
}

TEST(ThetaNu, ExactAtSix) {
    auto [t, n] = theta_nu(6.0, ref);
    EXPECT_NEAR(t, 2.0, 1e-15);
    EXPECT_NEAR(n, 1.0, 1e-15);
}

TEST(ThetaNu, ResidualAtLargerLambda) {
    auto [t, n] = theta_nu(38.25, ref);
    EXPECT_LE(std::abs(p_char(n, ref) - 38.25), 1e-12 * 38.25);
    EXPECT_LE(std::abs(p_char(I * t, ref) - 38.25), 1e-12 * 38.25);
    EXPECT_LE(multiset_distance({n, -n, I * t, -I * t}, companion_roots(38.25)), 1e-10);
}

TEST(ThetaNu, BelowBranchPointIsDomainError) {
    try {
        theta_nu(1.9, ref);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::domain);
    }
}

TEST(ThetaNu, MonotoneAndOrdered) {
    double pt = 0, pn = 0;
    for (double l = 2.0; l < 500.0; l *= 1.07) {
        auto [t, n] = theta_nu(l, ref);
        EXPECT_GE(t, ref.theta0 - 1e-15);
        EXPECT_LE(n / t, 1.0);
        EXPECT_GE(t, pt);
        EXPECT_GE(n, pn);
        pt = t;
        pn = n;
    }
}

TEST(OrderRoots, RealAboveBranchPoint) {
    auto rs = real_roots(6.0, ref);
    std::array<cplx, 4> expect{2.0 * I, 1.0, -1.0, -2.0 * I};
    for (int k = 0; k < 4; ++k) EXPECT_LT(std::abs(rs.mu[k] - expect[k]), 1e-15);
    EXPECT_EQ(rs.regime, Regime::real_above_hp);
    auto lower = real_roots(6.0, ref, Side::minus);
    EXPECT_LT(std::abs(lower.mu[1] + 1.0), 1e-15);
}

TEST(OrderRoots, RealParameterRejectedAsComplex) {
    try {
        order_roots(6.0, ref);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_ordering);
    }
}

TEST(OrderRoots, BranchPointsAreDegenerate) {
    for (double z : {ref.h_m, ref.h_p}) {
        try {
            order_roots(z, ref);
            FAIL() << z;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::degenerate_roots);
        }
    }
}

TEST(OrderRoots, ComplexParameterMatchesCompanionEigenvalues) {
    cplx z(2.0, 1.0);
    auto rs = order_roots(z, ref);
    EXPECT_LE(multiset_distance({rs.mu.begin(), rs.mu.end()}, companion_roots(z)), 1e-12);
    for (cplx m : rs.mu) EXPECT_LE(std::abs(p_char(m, ref) - z), 1e-12 * std::abs(z));
    EXPECT_GE(rs.mu[0].imag(), rs.mu[1].imag());
    EXPECT_GT(rs.mu[1].imag(), 0.0);
    EXPECT_LT(rs.mu[2].imag(), 0.0);
    EXPECT_GE(rs.mu[2].imag(), rs.mu[3].imag());
}

TEST(OrderRoots, RealBelowBranchPoint) {
    for (double z : {-3.0, -1.0, 0.0, 1.5}) {
        auto rs = order_roots(z, ref);
        EXPECT_LE(multiset_distance({rs.mu.begin(), rs.mu.end()}, companion_roots(z)), 1e-12);
        EXPECT_GT(rs.mu[1].imag(), 0.0);
        EXPECT_LT(rs.mu[2].imag(), 0.0);
    }
}

TEST(OrderRoots, ConjugateSymmetry) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-40.0, 40.0);
    for (int i = 0; i < 50; ++i) {
        cplx z(u(rng), u(rng));
        auto a = order_roots(z, ref), b = order_roots(std::conj(z), ref);
        std::vector<cplx> ca;
        for (cplx m : a.mu) ca.push_back(std::conj(m));
        EXPECT_LE(multiset_distance(ca, {b.mu.begin(), b.mu.end()}), 1e-12 * std::max(1.0, std::abs(z)));
    }
}

TEST(Vandermonde, EntriesAtSix) {
    auto rs = real_roots(6.0, ref);
    EXPECT_LT(std::abs(rs.PiInv(1, 3) - I / 10.0), 1e-15);
    Vec4c col(1.0, -2.0, 4.0, -8.0);
    EXPECT_LT((rs.Pi.col(0) - col).norm(), 1e-15);
    EXPECT_LT(std::abs(rs.Pi.determinant() - cplx(0.0, -200.0)), 1e-12);
    for (int k = 0; k < 4; ++k) EXPECT_LT(std::abs(rs.PiInv(k, 3) - I / p_char_prime(rs.mu[k], ref)), 1e-14);
}

TEST(Vandermonde, InverseOnLargeCircle) {
    for (int i = 0; i < 24; ++i) {
        cplx z = std::polar(50.0, 2 * pi * (i + 0.3) / 24);
        auto rs = order_roots(z, ref);
        Mat4c direct = rs.Pi.inverse();
        EXPECT_LE((rs.PiInv - direct).norm(), 1e-10);
        EXPECT_LE((rs.Pi * rs.PiInv - Mat4c::Identity()).norm(), 1e-10);
        for (int k = 0; k < 4; ++k) EXPECT_LE(std::abs(rs.PiInv(k, 3) - I / p_char_prime(rs.mu[k], ref)), 1e-10);
    }
}

TEST(Vandermonde, CoalescingRootsAreSingular) {
    try {
        vandermonde({1.0, 1.0 + 1e-9, -1.0, 2.0 * I});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::singular_pi);
    }
}

TEST(BranchPsi, ThirdColumnAtBranchPoint) {
    auto bm = branch_psi(0.0, 2.0, 100.0, ref);
    EXPECT_LT((bm.Psi.col(2) - Vec4c(0.0, 1.0, 0.0, 0.0)).norm(), 1e-15);
}

TEST(BranchPsi, ThirdColumnAtSix) {
    auto bm = branch_psi(0.0, 6.0, 100.0, ref);
    // i (p3 - p2) / 2 with p2 = (1, i, -1, -i), p3 = (1, -i, -1, i)
    Vec4c p2 = power_column(1.0), p3 = power_column(-1.0);
    EXPECT_LT((bm.Psi.col(2) - I * (p3 - p2) / 2.0).norm(), 1e-15);
    EXPECT_LT((bm.Psi.col(2) - Vec4c(0.0, 1.0, 0.0, -1.0)).norm(), 1e-15);
}

TEST(BranchPsi, DeterminantClosedForm) {
    for (double l : {2.0, 2.0 + 1e-9, 2.5, 6.0, 40.0}) {
        for (double x : {-3.0, 0.0, 1.7}) {
            auto bm = branch_psi(x, l, 100.0, ref);
            double expect = branch_det(l, ref);
            EXPECT_LE(std::abs(bm.Psi.determinant() - expect), 1e-10 * expect) << l << " " << x;
            EXPECT_LE((bm.Psi * bm.PsiInv - Mat4c::Identity()).norm(), 1e-10);
        }
    }
    EXPECT_NEAR(branch_det(6.0, ref), 100.0, 1e-12);
    EXPECT_GE(branch_det(2.0, ref), 2 * std::pow(ref.theta0, 5) * (1 - 1e-14));
}

TEST(BranchPsi, ApproachesLimitLinearlyInNu) {
    for (double d : {1e-6, 1e-8}) {
        double nu = theta_nu(2.0 + d, ref).nu;
        for (double x : {-1.0, 1.0, 2.5}) {
            auto bm = branch_psi(x, 2.0 + d, 100.0, ref);
            EXPECT_LE((bm.Psi.col(2) - Vec4c(x, 1.0, 0.0, 0.0)).norm(), 2 * nu * (1 + x * x)) << d << " " << x;
        }
    }
}

// Long-double evaluation of i (p3 - e^{2 i nu x} p2) / (2 nu) as an oracle on both sides of the switch.
TEST(BranchPsi, SeriesAndFormulaMatchExtendedPrecision) {
    using cl = std::complex<long double>;
    for (double nu : {0.5e-4, 0.999e-4, 1.001e-4, 3e-4}) {
        double l = lambda_of_nu(nu, ref);
        long double n = theta_nu(l, ref).nu;
        for (double x : {-2.0, 0.5, 3.0}) {
            auto bm = branch_psi(x, l, 100.0, ref);
            cl e = std::exp(cl(0, 2 * n * x));
            cl p2 = 1, p3 = 1;
            for (int j = 0; j < 4; ++j) {
                cl v = cl(0, 1) * (p3 - e * p2) / (2 * n);
                EXPECT_LE(std::abs(bm.Psi(j, 2) - cplx(double(v.real()), double(v.imag()))), 1e-9) << nu << " " << x << " " << j;
                p2 *= cl(0, n);
                p3 *= cl(0, -n);
            }
        }
    }
}

TEST(BranchPsi, ColumnsSolveFreeSystem) {
    auto A = [&](double l) {
        Mat4c a = Mat4c::Zero();
        a(0, 1) = a(1, 2) = a(2, 3) = 1.0;
        a(3, 0) = l - ref.h_p;
        a(3, 2) = 2 * ref.h_a;
        return a;
    };
    for (double l : {2.0, 2.0 + 1e-9, 3.0, 6.0}) {
        auto [t, n] = theta_nu(l, ref);
        auto Y = [&](double x) {
            Mat4c d = Mat4c::Zero();
            d(0, 0) = std::exp(-t * x);
            d(1, 1) = std::exp(I * n * x);
            d(2, 2) = std::exp(-I * n * x);
            d(3, 3) = std::exp(t * x);
            return Mat4c(branch_psi(x, l, 100.0, ref).Psi * d);
        };
        double x = 0.8, h = 1e-4;
        Mat4c dY = (Y(x + h) - Y(x - h)) / (2 * h);
        EXPECT_LE((dY - A(l) * Y(x)).norm(), 1e-6 * Y(x).norm()) << l;
    }
}

TEST(BranchPsi, LinearGrowthBound) {
    double c0 = 0.0;
    for (double l : {2.0, 2.3, 5.0, 20.0})
        for (double x = -30; x <= 30; x += 0.5) {
            auto bm = branch_psi(x, l, 100.0, ref);
            c0 = std::max({c0, bm.Psi.norm() / (1 + std::abs(x)), bm.PsiInv.norm() / (1 + std::abs(x))});
        }
    EXPECT_LT(c0, 100.0);
}

TEST(BranchPsi, OutsideWindowIsDomainError) {
    EXPECT_THROW(branch_psi(0.0, 1.5, 100.0, ref), Error);
    EXPECT_THROW(branch_psi(0.0, 101.0, 100.0, ref), Error);
}
