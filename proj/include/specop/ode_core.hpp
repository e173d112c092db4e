#pragma once

#include "specop/characteristic.hpp"
#include "specop/core.hpp"
#include "specop/problem.hpp"
#include "specop/propagator.hpp"

#include <filesystem>
#include <optional>

namespace specop {

// Half-line on which a Jost-type solution is normalized: right solutions
// behave like e^{i mu_k x} p_k as x -> +inf, left ones as x -> -inf.
enum class End { right, left };

struct PicardOptions {
    double half_width = 20.0;
    double tol = 1e-10;
    int max_iterations = 60;
};

// Jost-type solution on one half-line, stored without its exponential:
// the physical 4-vector (u, u', u'', u''') is e^{i mu_k x} y[i].
struct HalfLineSolution {
    int k = 1;                 // 1..4
    cplx z;
    Side side = Side::plus;
    End end = End::right;
    std::array<cplx, 4> mu{};
    double anchor = 0.0;       // |x0| for the contraction start
    RVec x;                    // ascending
    std::vector<Vec4c> y;
    CVec coefficients_at_anchor;  // w(x0), components 1..4
    CVec remainder;            // r_k (right) or s_k (left)
    int iterations = 0;
    RVec ratios;
    double residual = 0.0;     // sup |T w - w| at the fixed point
    double certificate = 0.0;  // kappa, an upper bound on every ratio
    double tail = 0.0;         // truncation bound beyond X

    Vec4c physical(std::size_t i) const { return std::exp(I * mu[k - 1] * x[i]) * y[i]; }
};

// Contraction bound kappa = int max_j |P^{-1}_{j4}| |row(B) P|_1 over the half-line
// beyond x0, with P = Pi (high regime) or Psi (branch regime).
double contraction_certificate(const OperatorSpec& spec, cplx z, Side side, End end, double x0, double half_width,
                               std::optional<double> branch_lambda_s = std::nullopt);

// Successive approximations with the constant Vandermonde frame. Valid for
// nonreal z and for real lambda above the contraction threshold.
HalfLineSolution picard_high(const OperatorSpec& spec, int k, cplx z, End end, const PicardOptions& opt,
                             Side side = Side::plus);

// Successive approximations with the branch frame Psi for lambda in [h_p, lambda_s].
// The anchor x0 is raised until kappa <= 1/2; [0, x0] is filled by integration.
HalfLineSolution picard_branch(const OperatorSpec& spec, int k, double lambda, double lambda_s, End end,
                               const PicardOptions& opt);

struct LambdaSChoice {
    double lambda_s = 0.0;
    double certificate = 0.0;
    RVec lambdas;
    RVec certificates;
};

// Smallest lambda on the ladder h_p + 0.5 * 2^{m/2} with kappa <= 1/4 for both
// the operator and its adjoint on both half-lines.
LambdaSChoice select_lambda_s(const OperatorSpec& spec, double half_width);

// Samples of a solution on a sorted grid, with per-point log scales.
struct SampledSolution {
    std::vector<Vec4c> v;  // unit-norm directions
    RVec log_scale;
    Vec4c at(std::size_t i) const { return v[i] * std::exp(log_scale[i]); }
};

// Continues a half-line solution across the whole grid by adaptive Magnus
// integration away from its normalization end.
SampledSolution extend_full_line(const OperatorSpec& spec, const HalfLineSolution& half, const RVec& x_grid,
                                 double tol_ode = 1e-10);

struct SolutionFamily {
    cplx z;
    Side side = Side::plus;
    RVec x;
    std::array<SampledSolution, 4> phi;  // right-normalized
    std::array<SampledSolution, 4> chi;  // left-normalized
    std::array<CVec, 4> r;               // on the right half-line nodes of phi
    std::array<CVec, 4> s;
    std::array<RVec, 4> r_nodes;
    std::array<RVec, 4> s_nodes;
    int iterations = 0;
    RVec ratios;
    double residual = 0.0;
    bool branch = false;
    double scale = 1.0;  // propagator scale s, used to balance derivative rows
    // Exact 4-vectors at the matching stencil {0, 0.37}.
    std::array<std::array<Vec4c, 4>, 2> phi_match{};
    std::array<std::array<Vec4c, 4>, 2> chi_match{};
};

inline constexpr std::array<double, 2> match_points{0.0, 0.37};

// Builds phi_k and chi_k for k = 1..4 at lambda +- i0 (or complex z) on x_grid.
// lambda_s selects the high or branch regime for real parameters.
SolutionFamily solve_family(const OperatorSpec& spec, cplx z, Side side, const RVec& x_grid, double lambda_s,
                            const PicardOptions& opt, double tol_ode = 1e-10);

struct ConnectionMatrix {
    cplx z;
    Mat4c C;
    double conditioning = 0.0;
    double residual = 0.0;  // relative least-squares misfit on the stencil
};

// chi_k = sum_j C_{jk} phi_j by least squares over the matching stencil.
ConnectionMatrix connection(const SolutionFamily& fam);

// Versioned binary cache: header then row-major little-endian doubles.
void save_family(const std::filesystem::path& path, const SolutionFamily& fam, const std::string& key);
std::optional<SolutionFamily> load_family(const std::filesystem::path& path, const std::string& key);
std::string family_key(const std::string& spec_hash, cplx z, Side side, double half_width, double tol);

} // namespace specop
