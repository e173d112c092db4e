#pragma once

#include "specop/core.hpp"
#include "specop/grid.hpp"
#include "specop/intervals.hpp"
#include "specop/problem.hpp"

#include <cstdint>
#include <span>

namespace specop {

// Symmetric tridiagonal matrix with a constant off-diagonal.
struct Tridiagonal {
    RVec diag;
    double off = 0.0;

    RVec apply(std::span<const double> v) const;
    Eigen::MatrixXd dense() const;
};

// Second-order finite-difference surrogate of the operator pair on a
// Dirichlet box, with the similarity S = D2^{1/2} and Lambda = S D1 S.
class GridOperator {
public:
    static GridOperator build(const OperatorSpec& spec, double half_width, int points);

    const OperatorSpec& spec() const noexcept { return spec_; }
    const Grid& grid() const noexcept { return grid_; }
    const Tridiagonal& d1() const noexcept { return d1_; }
    const Tridiagonal& d2() const noexcept { return d2_; }

    Eigen::MatrixXd dense_L() const;
    Eigen::MatrixXd dense_Lstar() const;
    const Eigen::MatrixXd& S() const noexcept { return s_; }
    const Eigen::MatrixXd& S_inv() const noexcept { return s_inv_; }
    const Eigen::MatrixXd& Lambda() const noexcept { return lambda_; }
    // Ascending eigenvalues of Lambda_h and orthonormal eigenvectors (columns).
    const RVec& lambda_values() const noexcept { return lambda_values_; }
    const Eigen::MatrixXd& lambda_vectors() const noexcept { return lambda_vectors_; }
    const RVec& d2_values() const noexcept { return d2_values_; }
    double cond_S() const noexcept;

    RVec apply_L(std::span<const double> f) const;
    RVec apply_Lstar(std::span<const double> f) const;
    RVec apply_S(std::span<const double> f) const;
    RVec apply_S_inv(std::span<const double> f) const;

    // Five diagonals of L_h (offsets -2..2), row-indexed.
    std::array<RVec, 5> band_L() const;

private:
    OperatorSpec spec_;
    Grid grid_;
    Tridiagonal d1_, d2_;
    Eigen::MatrixXd s_, s_inv_, lambda_, lambda_vectors_;
    RVec lambda_values_, d2_values_;
};

inline GridOperator discretize(const OperatorSpec& spec, double half_width, int points) {
    return GridOperator::build(spec, half_width, points);
}

struct OracleSpectrum {
    std::vector<cplx> eig_L;   // sorted by real part
    RVec eig_Lambda;           // ascending
    double norm_L = 0.0;       // Frobenius
    double max_imag = 0.0;
    double max_rel_deviation = 0.0;
};

OracleSpectrum oracle_spectrum(const GridOperator& go);

// ||L_h - S Lambda_h S^{-1}||_F / ||L_h||_F.
double similarity_residual(const GridOperator& go);
// ||Lstar_h - L_h^T||_F / ||L_h||_F.
double adjoint_residual(const GridOperator& go);

// (L_h - z)^{-1} f by a banded solve. Throws near_spectrum within 1e-6 of eig(L_h).
CVec oracle_resolvent(const GridOperator& go, cplx z, std::span<const cplx> f);
CVec oracle_resolvent(const GridOperator& go, cplx z, std::span<const double> f);
// S (Lambda_h - z)^{-1} S^{-1} f through the eigen-decomposition.
CVec resolvent_by_similarity(const GridOperator& go, cplx z, std::span<const double> f);

// B(b) f = S E_Lambda(b) S^{-1} f.
RVec oracle_projection(const GridOperator& go, const IntervalUnion& b, std::span<const double> f);
// Spectral norm of B(b).
double projection_norm(const GridOperator& go, const IntervalUnion& b);

struct StoneRow {
    double eps;
    double error;             // vs B([a,b]) f
    double quadrature_error;  // vs closed-form arctan profile at this eps
    int nodes;
};

struct StoneReport {
    double a = 0.0, b = 0.0;
    double f_norm = 0.0;
    std::vector<StoneRow> rows;
    bool decreasing = false;
};

StoneReport stone_check(const GridOperator& go, double a, double b, std::span<const double> eps_list,
                        std::span<const double> f);
// Exact eps-smoothed projection: eigenvalue weights (atan((b-l)/eps) - atan((a-l)/eps)) / pi.
RVec stone_closed_form(const GridOperator& go, double a, double b, double eps, std::span<const double> f);

struct QuasiSelfadjointReport {
    double cond_S = 0.0;
    double max_norm = 0.0;
    int samples = 0;
    bool bound_holds = false;
    double off_spectrum_norm = 0.0;
};

QuasiSelfadjointReport quasi_selfadjoint_diag(const GridOperator& go, int samples, std::uint64_t seed);

// Fraction of eigenvector mass of Lambda_h mode k in the outer 10% of the box.
double outer_mass(const GridOperator& go, int k);

// Number of D1_h eigenvalues within the near-kernel threshold.
int near_kernel_dimension(const GridOperator& go);

// Smallest eigenvalue of the tridiagonal D2_h, without building dense matrices.
double min_eigenvalue_d2(const OperatorSpec& spec, double half_width, int points);

// Eigenvalue of L_h closest to `shift` by inverse iteration with banded solves,
// refined by the Rayleigh quotient of the symmetric pencil (D1, D2^{-1}).
double nearest_eigenvalue(const OperatorSpec& spec, double half_width, int points, double shift = 0.0);

} // namespace specop
