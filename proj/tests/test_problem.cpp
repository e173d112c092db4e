#include "specop/problem.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace specop;

namespace {

OperatorSpec free_pair() { return {Potential::zero(), Potential::zero(), 1.0, 2.0}; }
OperatorSpec p2_pair() { return {Potential::poschl_teller(2.0), Potential::poschl_teller(-2.0), 1.0, 2.0}; }

// Richardson-extrapolated central differences, used as an independent derivative oracle.
template <class F>
double fd1(F f, double x, double h = 1e-3) {
    auto d = [&](double s) { return (f(x + s) - f(x - s)) / (2 * s); };
    return (4 * d(h / 2) - d(h)) / 3;
}
template <class F>
double fd2(F f, double x, double h = 1e-3) {
    auto d = [&](double s) { return (f(x + s) - 2 * f(x) + f(x - s)) / (s * s); };
    return (4 * d(h / 2) - d(h)) / 3;
}

} // namespace

TEST(DerivedConstants, ReferencePair) {
    auto c = derived_constants(free_pair());
    EXPECT_DOUBLE_EQ(c.h_a, 1.5);
    EXPECT_DOUBLE_EQ(c.h_p, 2.0);
    EXPECT_DOUBLE_EQ(c.h_m, -0.25);
    EXPECT_NEAR(c.theta0, 1.7320508075688772, 1e-15);
}

TEST(DerivedConstants, NearlyEqualConstants) {
    double eps = 1e-3;
    OperatorSpec s{Potential::zero(), Potential::zero(), 1.0, 1.0 + eps};
    EXPECT_NEAR(derived_constants(s).h_m, -eps * eps / 4, 1e-18);
}

TEST(DerivedConstants, PureAndRepeatable) {
    auto a = derived_constants(p2_pair());
    auto b = derived_constants(p2_pair());
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
}

TEST(Validate, RejectsBadConstants) {
    OperatorSpec s = free_pair();
    s.h2 = 1.0;
    EXPECT_THROW(validate(s), Error);
    s.h1 = -1.0;
    s.h2 = 2.0;
    EXPECT_THROW(validate(s), Error);
    EXPECT_NO_THROW(validate(free_pair()));
}

TEST(Potential, DerivativesMatchFiniteDifferences) {
    for (const auto& q : {Potential::poschl_teller(2.0), Potential::poschl_teller(-3.5), Potential::gaussian(-5.0, 1.0),
                          Potential::gaussian(0.7, 2.5)}) {
        for (double x : {-3.0, -0.4, 0.0, 0.9, 2.2}) {
            auto v = [&](double s) { return q.value(s); };
            auto d = [&](double s) { return q.d1(s); };
            EXPECT_NEAR(q.d1(x), fd1(v, x), 1e-8) << q.name() << " x=" << x;
            EXPECT_NEAR(q.d2(x), fd1(d, x), 1e-8) << q.name() << " x=" << x;
            EXPECT_NEAR(q.d2(x), fd2(v, x, 1e-2), 1e-6) << q.name() << " x=" << x;
        }
    }
}

TEST(Potential, FiniteDifferenceErrorIsSecondOrder) {
    for (const auto& q : {Potential::poschl_teller(2.0), Potential::gaussian(-5.0, 1.0)}) {
        auto err = [&](double h) {
            double m = 0.0;
            for (double x = -5.0; x <= 5.0; x += 0.1) m = std::max(m, std::abs((q.value(x + h) - q.value(x - h)) / (2 * h) - q.d1(x)));
            return m;
        };
        double ratio = err(0.02) / err(0.01);
        EXPECT_GT(ratio, 3.5);
        EXPECT_LT(ratio, 4.5);
    }
}

TEST(Potential, ExponentialDecayEnvelope) {
    for (const auto& q : {Potential::poschl_teller(2.0), Potential::poschl_teller(-2.0), Potential::gaussian(-5.0, 1.0)}) {
        for (double x = -30.0; x <= 30.0; x += 0.25) {
            double env = q.decay_constant() * std::exp(-q.decay_rate() * std::abs(x));
            EXPECT_LE(std::abs(q.value(x)), env);
            EXPECT_LE(std::abs(q.d1(x)), env);
            EXPECT_LE(std::abs(q.d2(x)), env);
        }
    }
}

TEST(Potential, MomentTailBoundDominatesQuadrature) {
    auto q = Potential::poschl_teller(2.0);
    double X = 8.0, tail = 0.0, h = 1e-3;
    for (double x = X; x < 60.0; x += h) tail += h * (1 + x * x * x) * std::abs(q.d2(x + h / 2));
    EXPECT_LE(2 * tail, q.moment_tail_bound(X));
}

TEST(PrintedB, FreePairHasConstantEntries) {
    for (double x : {-4.0, 0.0, 3.0}) {
        auto B = eval_B_printed(x, free_pair());
        EXPECT_DOUBLE_EQ(B(3, 0).real(), -2.0);
        EXPECT_DOUBLE_EQ(B(3, 1).real(), 0.0);
        EXPECT_DOUBLE_EQ(B(3, 2).real(), 3.0);
        EXPECT_EQ((B.topRows(3)).norm(), 0.0);
    }
}

TEST(PrintedB, P2AtOrigin) {
    auto spec = p2_pair();
    auto q2 = [](double x) { return 2.0 / (std::cosh(x) * std::cosh(x)); };
    double q2pp = fd2(q2, 0.0);
    auto B = eval_B_printed(0.0, spec);
    EXPECT_NEAR(B(3, 0).real(), q2pp - (1.0 - 2.0) * (2.0 + 2.0), 1e-7);
    EXPECT_NEAR(B(3, 1).real(), 0.0, 1e-12);
    EXPECT_NEAR(B(3, 2).real(), 3.0, 1e-12);
}

TEST(PrintedB, P2ApproachesFreeValue) {
    auto d = eval_B_printed(30.0, p2_pair()) - eval_B_printed(30.0, free_pair());
    EXPECT_LE(d.norm(), 1e-10);
}

TEST(Perturbation, DecaysAtBoxEdge) {
    for (double x : {-25.0, 25.0}) EXPECT_LE(perturbation_B(x, p2_pair()).norm(), 1e-8);
    EXPECT_EQ(perturbation_B(1.3, free_pair()).norm(), 0.0);
}

TEST(Perturbation, P2Entries) {
    double x = 0.6, s = 1.0 / std::cosh(x), t = std::tanh(x);
    auto r = perturbation_row(x, p2_pair());
    EXPECT_NEAR(r[0], -6 * s * s + 16 * s * s * s * s, 1e-13);
    EXPECT_NEAR(r[1], 8 * s * s * t, 1e-13);
    EXPECT_NEAR(r[2], 0.0, 1e-15);
}

// Row 4 of (A + B) y must equal u'''' - (L - z) u, with L u = D2 (D1 u) worked out
// by nested differentiation of a test function.
TEST(CompanionSystem, ReproducesNestedOperator) {
    auto spec = OperatorSpec{Potential::poschl_teller(1.3), Potential::gaussian(0.8, 1.4), 0.7, 2.1};
    auto c = derived_constants(spec);
    cplx z(3.0, 0.4);
    for (double x : {-1.1, 0.0, 0.35, 2.0}) {
        double e = std::exp(-x * x);
        double u0 = e, u1 = -2 * x * e, u2 = (4 * x * x - 2) * e, u3 = (-8 * x * x * x + 12 * x) * e;
        double u4 = (16 * x * x * x * x - 48 * x * x + 12) * e;
        double a = spec.q1.value(x) + spec.h1, a1 = spec.q1.d1(x), a2 = spec.q1.d2(x);
        double b = spec.q2.value(x) + spec.h2;
        double v = -u2 + a * u0;
        double v2 = -u4 + a2 * u0 + 2 * a1 * u1 + a * u2;
        double Lu = -v2 + b * v;
        Vec4c y(u0, u1, u2, u3);
        cplx row4 = ((companion_A(z, c) + perturbation_B(x, spec)) * y)(3);
        EXPECT_NEAR(std::abs(row4 - (u4 - (Lu - z * u0))), 0.0, 1e-12);
    }
}

TEST(ParseProblem, RoundTrip) {
    std::string text = R"({"h1":1,"h2":2,"q1":{"preset":"poschl_teller","params":[2]},
        "q2":{"preset":"poschl_teller","params":[-2]},"grid":{"half_width":18,"points":900},
        "tolerances":{"tol_ode":1e-9}})";
    auto p = parse_problem(text);
    EXPECT_EQ(p.op.q1.preset(), Preset::poschl_teller);
    EXPECT_DOUBLE_EQ(p.op.q2.param(0), -2.0);
    EXPECT_DOUBLE_EQ(p.grid.half_width, 18.0);
    EXPECT_EQ(p.grid.points, 900);
    EXPECT_DOUBLE_EQ(p.tol("tol_ode", 0.0), 1e-9);
    auto again = parse_problem(dump_problem(p));
    EXPECT_EQ(dump_problem(again), dump_problem(p));
}

TEST(ParseProblem, ErrorsCarryFieldPath) {
    auto expect_path = [](const std::string& text, const std::string& path) {
        try {
            parse_problem(text);
            FAIL() << "accepted " << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::spec_invalid);
            EXPECT_NE(std::string(e.what()).find(path), std::string::npos) << e.what();
        }
    };
    expect_path(R"({"h1":1,"h2":2,"q1":{"preset":"zero"}})", "q2");
    expect_path(R"({"h1":1,"h2":2,"q1":{"preset":"nope"},"q2":{"preset":"zero"}})", "q1.preset");
    expect_path(R"({"h1":"a","h2":2,"q1":{"preset":"zero"},"q2":{"preset":"zero"}})", "h1");
    expect_path(R"({"h1":1,"h2":2,"q1":{"preset":"gaussian","params":[1]},"q2":{"preset":"zero"}})", "q1.params");
    expect_path(R"({"h1":1,"h2":2,)", "JSON");
}

TEST(Hypotheses, FreePair) {
    auto rep = check_hypotheses(free_pair(), 20.0, 801);
    for (const auto& m : rep.moments)
        for (double v : m) EXPECT_EQ(v, 0.0);
    EXPECT_NEAR(rep.min_eig_d2, 2.0, 1e-2);
    EXPECT_TRUE(rep.positive_definite);
    EXPECT_TRUE(rep.exponential_decay);
}

TEST(Hypotheses, P2IsPositiveDefinite) {
    auto rep = check_hypotheses(p2_pair(), 20.0, 801);
    EXPECT_TRUE(rep.positive_definite);
    EXPECT_GE(rep.min_eig_d2, 2.0);
    EXPECT_GT(rep.moments[0][0], 0.0);
}

TEST(Hypotheses, DeepGaussianWellViolatesPositivity) {
    OperatorSpec s{Potential::zero(), Potential::gaussian(-5.0, 1.0), 1.0, 2.0};
    try {
        check_hypotheses(s, 20.0, 801);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::non_positive_d2);
        EXPECT_TRUE(e.is_input_error());
    }
}
