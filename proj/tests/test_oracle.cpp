#include "specop/oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace specop;

namespace {

OperatorSpec free_pair() { return {Potential::zero(), Potential::zero(), 1.0, 2.0}; }
OperatorSpec p2_pair() { return {Potential::poschl_teller(2.0), Potential::poschl_teller(-2.0), 1.0, 2.0}; }

RVec gaussian(const Grid& g, double shift = 0.0) {
    return sample(g, [&](double x) { return std::exp(-(x - shift) * (x - shift) / 2); });
}

// Dirichlet sine basis: -D^2_h sin(k pi (i+1)/(N+1)) = (4/h^2) sin^2(k pi / (2(N+1))) sin(...)
double fd_laplacian_eigenvalue(const Grid& g, int k) {
    double s = std::sin(k * pi / (2.0 * (g.points + 1)));
    return 4.0 / (g.step() * g.step()) * s * s;
}

} // namespace

TEST(Discretize, FreeSpectrumMatchesSineBasis) {
    auto go = discretize(free_pair(), 10.0, 300);
    RVec expect;
    for (int k = 1; k <= 300; ++k) {
        double kap = fd_laplacian_eigenvalue(go.grid(), k);
        expect.push_back((kap + 1.0) * (kap + 2.0));
    }
    std::sort(expect.begin(), expect.end());
    double scale = expect.back();
    for (int k = 0; k < 300; ++k) EXPECT_LE(std::abs(go.lambda_values()[k] - expect[k]), 1e-12 * scale);
    EXPECT_GE(go.d2_values().front(), 2.0);
    EXPECT_LE(go.d2_values().back(), 2.0 + 4.0 / (go.grid().step() * go.grid().step()));
}

TEST(Discretize, SimilarityIdentity) {
    for (const auto& spec : {free_pair(), p2_pair()}) {
        auto go = discretize(spec, 20.0, 400);
        EXPECT_LE(similarity_residual(go), 1e-12);
        EXPECT_LE(adjoint_residual(go), 1e-12);
    }
}

TEST(Discretize, RejectsTinyGrid) { EXPECT_THROW(discretize(free_pair(), 20.0, 100), Error); }

TEST(Discretize, NonPositiveD2) {
    OperatorSpec s{Potential::zero(), Potential::gaussian(-5.0, 1.0), 1.0, 2.0};
    try {
        discretize(s, 20.0, 400);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::non_positive_d2);
    }
}

TEST(OracleSpectrum, RealAndSimilar) {
    auto go = discretize(p2_pair(), 20.0, 400);
    auto sp = oracle_spectrum(go);
    EXPECT_LE(sp.max_imag, 1e-8 * sp.norm_L);
    EXPECT_LE(sp.max_rel_deviation, 1e-8);
    EXPECT_LE(std::abs(sp.eig_L.front()), 1e-2);
}

TEST(OracleSpectrum, P2KernelDetected) {
    auto go = discretize(p2_pair(), 20.0, 1600);
    EXPECT_LE(std::abs(go.lambda_values().front()), 1e-4);
    EXPECT_EQ(near_kernel_dimension(go), 1);
    EXPECT_LE(outer_mass(go, 0), 1e-6);
}

TEST(Resolvent, FreeSineBasisClosedForm) {
    auto go = discretize(free_pair(), 10.0, 300);
    const auto& g = go.grid();
    RVec f = gaussian(g, 0.3);
    cplx z = -1.0;
    auto r = oracle_resolvent(go, z, std::span<const double>(f));
    int n = g.points;
    CVec expect(n, 0.0);
    for (int k = 1; k <= n; ++k) {
        double nrm = 2.0 / (n + 1), c = 0.0;
        for (int i = 0; i < n; ++i) c += f[i] * std::sin(k * pi * (i + 1) / (n + 1));
        double kap = fd_laplacian_eigenvalue(g, k);
        cplx m = nrm * c / ((kap + 1.0) * (kap + 2.0) - z);
        for (int i = 0; i < n; ++i) expect[i] += m * std::sin(k * pi * (i + 1) / (n + 1));
    }
    double err = 0.0, ref = 0.0;
    for (int i = 0; i < n; ++i) {
        err = std::max(err, std::abs(r[i] - expect[i]));
        ref = std::max(ref, std::abs(expect[i]));
    }
    EXPECT_LE(err, 1e-8 * ref);
}

TEST(Resolvent, SimilarityIdentity) {
    auto go = discretize(p2_pair(), 20.0, 400);
    RVec f = gaussian(go.grid(), -0.5);
    for (cplx z : {cplx(-1.0, 0.0), cplx(3.0, 1.0), cplx(10.0, -0.2)}) {
        auto a = oracle_resolvent(go, z, std::span<const double>(f));
        auto b = resolvent_by_similarity(go, z, f);
        double num = 0, den = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            num += std::norm(a[i] - b[i]);
            den += std::norm(b[i]);
        }
        EXPECT_LE(std::sqrt(num / den), 1e-10) << z;
    }
}

TEST(Resolvent, NearSpectrumRejected) {
    auto go = discretize(p2_pair(), 20.0, 300);
    RVec f = gaussian(go.grid());
    try {
        oracle_resolvent(go, go.lambda_values()[3], std::span<const double>(f));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::near_spectrum);
    }
}

TEST(Projection, WholeLineAndComplement) {
    auto go = discretize(p2_pair(), 20.0, 400);
    const auto& g = go.grid();
    RVec f = gaussian(g, 0.7);
    double h = g.step();
    auto all = oracle_projection(go, IntervalUnion::single(-1e30, 1e30), f);
    EXPECT_LE(distance(all, f, h), 1e-10 * norm(f, h));
    auto b = IntervalUnion({{3.0, 7.0}, {20.0, 30.0}});
    auto pb = oracle_projection(go, b, f);
    auto pc = oracle_projection(go, b.complement(-1e30, 1e30), f);
    RVec sum(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) sum[i] = pb[i] + pc[i];
    EXPECT_LE(distance(sum, f, h), 1e-10 * norm(f, h));
    auto twice = oracle_projection(go, b, pb);
    EXPECT_LE(distance(twice, pb, h), 1e-10 * norm(f, h));
    auto commuted = go.apply_L(pb);
    auto other = oracle_projection(go, b, go.apply_L(f));
    EXPECT_LE(distance(commuted, other, h), 1e-9 * norm(go.apply_L(f), h));
}

TEST(Projection, P2KernelIsRankOneSechDirection) {
    auto go = discretize(p2_pair(), 20.0, 800);
    const auto& g = go.grid();
    auto b = IntervalUnion::single(-0.5, 0.5);
    int rank = 0;
    for (double v : go.lambda_values()) rank += b.contains(v);
    EXPECT_EQ(rank, 1);
    RVec f = gaussian(g, 0.4);
    auto p = oracle_projection(go, b, f);
    RVec sech = sample(g, [](double x) { return 1.0 / std::cosh(x); });
    double cosine = dot(p, sech, g.step()) / (norm(p, g.step()) * norm(sech, g.step()));
    EXPECT_GE(std::abs(cosine), 0.999);
}

TEST(Stone, FreeIntervalMatchesSmoothedProjection) {
    auto go = discretize(free_pair(), 20.0, 400);
    const auto& g = go.grid();
    RVec f = gaussian(g);
    RVec eps{1e-1, 1e-2, 1e-3};
    auto rep = stone_check(go, 3.0, 7.0, eps, f);
    EXPECT_TRUE(rep.decreasing);
    auto exact = oracle_projection(go, IntervalUnion::single(3.0, 7.0), f);
    for (const auto& r : rep.rows) {
        EXPECT_LE(r.quadrature_error, 1e-6 * rep.f_norm);
        // the remaining error is the eps-smoothing itself
        auto smooth = stone_closed_form(go, 3.0, 7.0, r.eps, f);
        EXPECT_NEAR(r.error, distance(smooth, exact, g.step()), 1e-6 * rep.f_norm);
    }
}

TEST(Stone, P2IntervalConverges) {
    auto go = discretize(p2_pair(), 20.0, 800);
    RVec f = gaussian(go.grid());
    RVec eps{1e-1, 1e-2, 1e-3};
    auto rep = stone_check(go, 3.0, 7.0, eps, f);
    EXPECT_TRUE(rep.decreasing);
    EXPECT_LE(rep.rows.back().error, 1e-2 * rep.f_norm);
}

TEST(Stone, IntervalOffSpectrumVanishes) {
    auto go = discretize(free_pair(), 20.0, 400);
    RVec f = gaussian(go.grid());
    RVec eps{1e-2, 1e-3};
    auto rep = stone_check(go, -0.9, 0.5, eps, f);
    for (const auto& r : rep.rows) EXPECT_LE(r.error, 2e-3 * rep.f_norm);
}

TEST(Stone, SingleModeArctanProfile) {
    auto go = discretize(p2_pair(), 20.0, 300);
    int k = 0;
    while (go.lambda_values()[k] < 4.0) ++k;
    double lk = go.lambda_values()[k];
    int n = go.grid().points;
    RVec psi(n);
    for (int i = 0; i < n; ++i) psi[i] = go.lambda_vectors()(i, k);
    RVec f = go.apply_S(psi);
    double a = 3.0, b = 7.0;
    for (double eps : {1e-1, 1e-2}) {
        auto out = stone_closed_form(go, a, b, eps, f);
        double w = (std::atan((b - lk) / eps) - std::atan((a - lk) / eps)) / pi;
        for (int i = 0; i < n; ++i) EXPECT_NEAR(out[i], w * f[i], 1e-9);
    }
    RVec eps{1e-1, 1e-2, 1e-3};
    auto rep = stone_check(go, a, b, eps, f);
    EXPECT_TRUE(rep.decreasing);
    EXPECT_LE(rep.rows.back().error, 1e-3 * rep.f_norm);
}

TEST(QuasiSelfadjoint, FreeBound) {
    auto go = discretize(free_pair(), 20.0, 300);
    auto rep = quasi_selfadjoint_diag(go, 50, 11);
    EXPECT_NEAR(rep.cond_S, std::sqrt(go.d2_values().back() / go.d2_values().front()), 1e-12);
    EXPECT_TRUE(rep.bound_holds);
    EXPECT_EQ(rep.off_spectrum_norm, 0.0);
    // commuting D1, D2: every B(b) is an orthogonal projector
    EXPECT_NEAR(rep.max_norm, 1.0, 1e-8);
}

TEST(QuasiSelfadjoint, P2Bound) {
    auto go = discretize(p2_pair(), 20.0, 300);
    auto rep = quasi_selfadjoint_diag(go, 50, 12);
    EXPECT_TRUE(rep.bound_holds);
    EXPECT_GE(rep.max_norm, 1.0 - 1e-10);
}

TEST(GridConvergence, SmallestEigenvalueSecondOrder) {
    double e1 = nearest_eigenvalue(p2_pair(), 20.0, 200);
    double e2 = nearest_eigenvalue(p2_pair(), 20.0, 401);
    double e3 = nearest_eigenvalue(p2_pair(), 20.0, 803);
    double order = std::log2((e1 - e2) / (e2 - e3));
    EXPECT_NEAR(order, 2.0, 0.25);
    auto go = discretize(p2_pair(), 20.0, 803);
    // the dense solver carries an absolute error of order eps * ||Lambda_h||
    EXPECT_NEAR(e3, go.lambda_values().front(), 1e-8);
}

TEST(GridConvergence, LowModesSecondOrder) {
    std::array<RVec, 3> vals;
    int ns[3] = {200, 401, 803};
    for (int i = 0; i < 3; ++i) vals[i] = discretize(p2_pair(), 10.0, ns[i]).lambda_values();
    for (int k = 0; k < 5; ++k) {
        double ratio = (vals[0][k] - vals[1][k]) / (vals[1][k] - vals[2][k]);
        EXPECT_GT(ratio, 3.5) << k;
        EXPECT_LT(ratio, 4.5) << k;
    }
}

TEST(MinEigenvalueD2, FreeClosedForm) {
    Grid g{20.0, 500};
    double expect = 2.0 + fd_laplacian_eigenvalue(g, 1);
    EXPECT_NEAR(min_eigenvalue_d2(free_pair(), 20.0, 500), expect, 1e-10);
}
