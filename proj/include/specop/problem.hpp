#pragma once

#include "specop/core.hpp"

#include <map>
#include <string>

namespace specop {

enum class Preset { zero, poschl_teller, gaussian };

// Closed-form potential with exact first and second derivatives.
//   zero                      q = 0
//   poschl_teller(depth)      q = -depth * sech^2(x)
//   gaussian(amplitude, w)    q = amplitude * exp(-x^2 / (2 w^2))
class Potential {
public:
    Potential() = default;
    static Potential zero() { return {}; }
    static Potential poschl_teller(double depth);
    static Potential gaussian(double amplitude, double width);

    Preset preset() const noexcept { return preset_; }
    double param(int i) const noexcept { return params_[i]; }
    bool is_zero() const noexcept;
    std::string name() const;

    double value(double x) const noexcept;
    double d1(double x) const noexcept;
    double d2(double x) const noexcept;

    // |q^(k)(x)| <= decay_constant() * exp(-decay_rate() * |x|) for k = 0,1,2.
    double decay_constant() const noexcept;
    double decay_rate() const noexcept;
    // Analytic bound on int_{|x|>X} (1+|x|^3) |q^(k)(x)| dx, k = 0,1,2.
    double moment_tail_bound(double X) const noexcept;
    // Bound on int_{|x|>X} |q^(k)(x)| dx.
    double tail_bound(double X) const noexcept;

private:
    Preset preset_ = Preset::zero;
    std::array<double, 2> params_{0.0, 0.0};
};

struct DerivedConstants {
    double h_a;
    double h_p;
    double h_m;
    double theta0;
};

struct OperatorSpec {
    Potential q1;
    Potential q2;
    double h1 = 1.0;
    double h2 = 2.0;

    // Formal adjoint D1 D2, written in the same D2' D1' shape (roles swapped).
    OperatorSpec adjoint() const { return {q2, q1, h2, h1}; }
    bool is_free() const noexcept { return q1.is_zero() && q2.is_zero(); }
};

// Throws spec_invalid unless h2 > h1 > 0.
void validate(const OperatorSpec& spec);

DerivedConstants derived_constants(const OperatorSpec& spec) noexcept;

struct GridSpec {
    double half_width = 20.0;
    int points = 1600;
};

struct ProblemSpec {
    OperatorSpec op;
    GridSpec grid;
    std::map<std::string, double> tolerances;

    double tol(const std::string& key, double fallback) const {
        auto it = tolerances.find(key);
        return it == tolerances.end() ? fallback : it->second;
    }
};

// Parses the JSON problem document. Errors carry the offending field path.
ProblemSpec parse_problem(const std::string& json_text);
std::string dump_problem(const ProblemSpec& spec);
// FNV-1a of the canonical dump, printed as 16 hex digits.
std::string spec_hash(const ProblemSpec& spec);

// Free system matrix for D2 D1 u = z u in companion form y = (u, u', u'', u''').
// Its characteristic polynomial in mu (eigenvalue i mu) is p_c(mu) - z.
Mat4c companion_A(cplx z, const DerivedConstants& c) noexcept;

// Decaying part of the variable coefficients, nonzero only in row 4.
// Returns (B41, B42, B43).
std::array<double, 3> perturbation_row(double x, const OperatorSpec& spec) noexcept;
Mat4c perturbation_B(double x, const OperatorSpec& spec) noexcept;

// The matrix B with entries exactly as printed in the source formula
// (derivative terms in q2, constants kept inside B).
Mat4c eval_B_printed(double x, const OperatorSpec& spec) noexcept;

struct HypothesisReport {
    // moments[i][k] = truncated int_{-X}^{X} (1+|x|^3) |q_i^(k)| dx
    std::array<std::array<double, 3>, 2> moments{};
    std::array<double, 2> tail_bounds{};
    // int |q_i''|^2 over the window
    std::array<double, 2> q2_square{};
    double min_eig_d2 = 0.0;
    bool positive_definite = false;
    bool exponential_decay = false;
};

// Throws non_positive_d2 if the grid operator for D2 has a nonpositive eigenvalue.
HypothesisReport check_hypotheses(const OperatorSpec& spec, double half_width, int quadrature_points);

} // namespace specop
