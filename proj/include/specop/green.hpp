#pragma once

#include "specop/characteristic.hpp"
#include "specop/core.hpp"
#include "specop/grid.hpp"
#include "specop/ode_core.hpp"
#include "specop/problem.hpp"

#include <span>

namespace specop {

// Perturbation rows at the two Gauss points of every grid interval; independent
// of the spectral parameter, so one table serves a whole sweep.
struct StepTable {
    Grid grid;
    std::vector<std::array<double, 3>> r1, r2;

    static StepTable build(const OperatorSpec& spec, const Grid& grid);
};

// Green data of L - z on the grid, from orthonormal frames of the solutions
// decaying to the right (phi_1, phi_2) and to the left (chi_3, chi_4).
// For real z > h_p the boundary value from the `side` half-plane is used.
class GreenData {
public:
    static GreenData build(const OperatorSpec& spec, cplx z, Side side, const Grid& grid,
                           const StepTable* table = nullptr);

    cplx z() const noexcept { return z_; }
    Side side() const noexcept { return side_; }
    const Grid& grid() const noexcept { return grid_; }
    const std::array<cplx, 4>& mu() const noexcept { return mu_; }
    double scale() const noexcept { return s_; }

    // det [phi_1 phi_2 chi_3 chi_4](x_i) / det Pi; equals 1 for the free pair.
    // The frames fix only the spans of (phi_1, phi_2) and (chi_3, chi_4).
    cplx W_at(int i) const;
    cplx W() const { return W_at(grid_.points / 2); }

    // G(x_m, x_n) for every m.
    CVec column(int n) const;
    // (G, dG/dx, d2G/dx2, d3G/dx3)(x_m, x_n) for every m.
    std::vector<Vec4c> column_vectors(int n) const;
    cplx kernel(int m, int n) const;
    // h sum_n G(x_m, x_n) f_n in O(N).
    CVec apply(std::span<const cplx> f) const;

    // Columns below this |W| are refused with near_singular_w.
    double w_floor = 1e-8;

private:
    void require_regular() const;

    OperatorSpec spec_;
    Grid grid_;
    cplx z_;
    Side side_ = Side::plus;
    std::array<cplx, 4> mu_{};
    cplx det_pi_;
    double s_ = 1.0;
    // Orthonormal scaled frames per node. Right: Q_i R_i = E_i^{-1} Q_{i+1};
    // left: Q_i R_i = E_{i-1} Q_{i-1}.
    std::vector<Mat42c> q_right_, q_left_;
    std::vector<Mat2c> r_right_, r_left_;
    std::vector<cplx> logdet_right_, logdet_left_;
    // Frame coefficients of the Green column at its own source node.
    std::vector<Vec2c> jump_c_, jump_d_;
};

GreenData fundamental_matrix(const OperatorSpec& spec, cplx z, Side side, const Grid& grid);
// Theta(0) in [phi_1 phi_2 chi_3 chi_4](0) = Pi (I + Theta(0)), from the Picard
// family; a leftward sweep cannot separate phi_2 from the faster phi_1.
// Meaningful in the high regime; branch-regime families are normalized by Psi.
Mat4c theta_at_origin(const OperatorSpec& spec, cplx z, Side side, double lambda_s);
cplx W_value(const OperatorSpec& spec, cplx z, Side side, const Grid& grid);
cplx green_kernel(const OperatorSpec& spec, cplx z, int m, int n, const Grid& grid);

// Real-axis membership in M_n: lambda > h_p and |W_+-| > 1/(2n).
bool in_M(double lambda, cplx w_plus, cplx w_minus, int n, const DerivedConstants& c);

// G_+ - G_- at grid nodes (m, n). Throws excluded_lambda outside M_n.
cplx jump_kernel(const OperatorSpec& spec, double lambda, int m, int n, const Grid& grid, int n_index = 4);

// Jump from G(lambda +- i eps) at eps = 1e-2, 1e-3, 1e-4 with linear Richardson
// extrapolation; a cross-check of the real-axis construction.
struct EpsJump {
    std::array<cplx, 3> by_eps;
    cplx extrapolated;
};
EpsJump jump_kernel_eps(const OperatorSpec& spec, double lambda, int m, int n, const Grid& grid);

struct JumpFactorization {
    double lambda = 0.0;
    // K = (G_+ - G_-) / (2 pi i) = sum_j phi_j(x) phi_star_j(tau), real for real potentials.
    std::array<RVec, 2> phi, phi_star;
    RVec sigma;                // singular values of the core 2x2 block
    double rank3_ratio = 0.0;  // third / first singular value of the sampled columns
    cplx w_plus, w_minus;
    // Expansion of phi_j in phi_1..phi_4 (alpha) and chi_1..chi_4 (beta); the
    // unbounded entries (phi_4, chi_1) are kept for inspection.
    std::array<Vec4c, 2> alpha, beta, alpha_star, beta_star;
    bool has_coefficients = false;
};

struct JumpOptions {
    int n_index = 4;
    bool coefficients = false;
    double lambda_s = 0.0;  // required when coefficients are requested
};

// Rank-2 factorization of the jump kernel on the grid, built from six sampled
// columns (operator L) and six sampled rows (adjoint L*, K_L(x, t) = K_L*(t, x)).
class JumpSolver {
public:
    JumpSolver(const OperatorSpec& spec, const Grid& grid);

    const OperatorSpec& spec() const noexcept { return spec_; }
    const Grid& grid() const noexcept { return grid_; }
    const std::vector<int>& sample_nodes() const noexcept { return samples_; }

    JumpFactorization factor(double lambda, const JumpOptions& opt = {}) const;
    // Full K(x_m, x_n) column from the operator frames, for validation.
    RVec kernel_column(double lambda, int n) const;

private:
    OperatorSpec spec_;
    Grid grid_;
    StepTable table_, table_star_;
    std::vector<int> samples_;
};

struct WSample {
    double lambda;
    cplx w_plus, w_minus;
    bool in_M;
};

std::vector<WSample> W_sweep(const OperatorSpec& spec, const RVec& lambdas, const Grid& grid, int n_index);

} // namespace specop
