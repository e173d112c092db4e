#pragma once

#include "specop/green.hpp"
#include "specop/intervals.hpp"
#include "specop/oracle.hpp"

#include <limits>
#include <span>

namespace specop {

enum class EigenSource { w_root, oracle, both };
std::string_view to_string(EigenSource s);

struct Eigenpair {
    double lambda = 0.0;  // W root when available, else the grid value
    double grid_lambda = std::numeric_limits<double>::quiet_NaN();
    double w_root = std::numeric_limits<double>::quiet_NaN();
    int multiplicity = 0;
    // Biorthonormal families: (xi_a, xi_star_b)_h = delta_ab.
    std::vector<RVec> xi, xi_star;
    double residual = 0.0;  // max relative ||L_h xi - l xi||, ||L_h^T xi* - l xi*||
    EigenSource source = EigenSource::oracle;
    bool confirmed = false;
};

struct SweepOptions {
    int n_index = 4;
    int initial_points = 40;
    int max_depth = 12;
    double variation = 0.1;     // allowed |W_{k+1} - W_k| / max(|W|, 1/(2n))
    double edge_offset = 1e-3;  // first sample at nu (or sqrt(h_p - lambda)) = edge_offset
};

// W_+- on [lo, hi], sampled uniformly in sqrt(h_p - lambda) below the branch point
// and in nu above it, then bisected until adjacent samples satisfy the variation rule.
// Throws sweep_too_coarse when max_depth does not suffice.
std::vector<WSample> adaptive_W_sweep(const OperatorSpec& spec, double lo, double hi, const Grid& grid,
                                      const SweepOptions& opt = {});

// Real zeros of W below h_p bracketed by sign changes in the sweep, refined to `tol`.
RVec W_roots(const OperatorSpec& spec, const std::vector<WSample>& sweep, const Grid& grid, double tol = 1e-10);

struct EigenOptions {
    double outer_mass_limit = 1e-6;
    double cluster_width = 1e-6;
    double reconcile = 1e-3;
};

// Point spectrum in [lo, hi] from the grid oracle (modes of Lambda_h below h_p
// passing the boundary guard) reconciled with the zeros of W.
std::vector<Eigenpair> find_eigenvalues(const GridOperator& go, double lo, double hi, std::span<const double> w_roots,
                                        const EigenOptions& opt = {});

// max |(xi_a, xi*_b) - delta_ab| over all pairs of all eigenpairs.
double biorthonormality_residual(const std::vector<Eigenpair>& eigs, double h);

// sum (f, xi*) xi over confirmed and unconfirmed eigenpairs alike.
RVec point_projection(std::span<const double> f, const std::vector<Eigenpair>& eigs, double h);

struct SpectralPartition {
    int n = 4;
    double lambda_s = 0.0;
    double lambda_0 = 0.0;
    double lambda_max = 0.0;
    IntervalUnion N_n;   // closed
    IntervalUnion M_n;   // closures of the open pieces of sigma(L) \ N_n up to lambda_max
    RVec zeros;          // eigenvalues placed in N_n
    RVec guards;         // accumulation guards (h_p, and h_m when eigenvalues crowd it)
    std::vector<Interval> dips;  // sweep intervals above h_p with |W+-| <= 1/(2n)
};

// lambda_0 = min(h_m, smallest eigenvalue) - 1.
double choose_lambda_0(const DerivedConstants& c, double smallest_eigenvalue);

SpectralPartition partition(const OperatorSpec& spec, int n, const std::vector<WSample>& sweep,
                            const std::vector<Eigenpair>& eigs, double lambda_s, double lambda_max,
                            double variation = 0.1);

} // namespace specop
