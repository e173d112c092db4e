#pragma once

#include "specop/green.hpp"
#include "specop/spectrum.hpp"

#include <cstdint>
#include <span>

namespace specop {

struct BasisOptions {
    int n_index = 4;
    double panel_width = 0.25;  // in nu
    int order = 12;             // Gauss-Legendre points per panel
};

// A lambda-quadrature node; `weight` already carries the Jacobian p_c'(nu).
struct LambdaNode {
    double nu;
    double lambda;
    double weight;
    int panel;
};

struct Panel {
    double nu_lo, nu_hi;
    int first;  // index of the first node
};

// Jump factors phi_j, phi*_j at Gauss nodes covering M_n, together with the
// eigenpairs that make up the point part over N_n.
class SpectralBasis {
public:
    static SpectralBasis build(const OperatorSpec& spec, const Grid& grid, const SpectralPartition& part,
                               std::vector<Eigenpair> eigs, const BasisOptions& opt = {});

    const OperatorSpec& spec() const noexcept { return spec_; }
    const Grid& grid() const noexcept { return grid_; }
    const SpectralPartition& partition() const noexcept { return partition_; }
    const std::vector<Eigenpair>& eigenpairs() const noexcept { return eigs_; }
    const std::vector<LambdaNode>& nodes() const noexcept { return nodes_; }
    const std::vector<Panel>& panels() const noexcept { return panels_; }
    const JumpFactorization& factor(std::size_t k) const { return factors_[k]; }
    const BasisOptions& options() const noexcept { return opt_; }

    // Node weights for the continuous part of b: panels cut by b get the exact
    // integrals of their Lagrange basis over the cut piece.
    RVec weights(const IntervalUnion& b) const;
    const RVec& full_weights() const noexcept { return full_weights_; }

private:
    OperatorSpec spec_;
    Grid grid_;
    SpectralPartition partition_;
    std::vector<Eigenpair> eigs_;
    BasisOptions opt_;
    std::vector<LambdaNode> nodes_;
    std::vector<Panel> panels_;
    std::vector<JumpFactorization> factors_;
    RVec full_weights_;
};

struct AnalyzeOptions {
    double edge_tol = 1e-8;  // largest |f| allowed at the two box edges
    bool check_edges = true;
};

// T_j f = int f phi*_j and S_j f = int f phi_j at every node. The factors are
// real, so the transforms of real f are real.
struct TransformData {
    int n = 4;
    double lambda_max = 0.0;
    std::vector<LambdaNode> nodes;
    std::array<RVec, 2> T, S;
    // ||sum_j phi_j T_j f||(lambda) <= c_fit lambda^{-7/4} fitted on the last panel,
    // so the part beyond lambda_max is at most (4/3) c_fit lambda_max^{-3/4}.
    double c_fit = 0.0;
    double tail_bound = 0.0;
    double last_decade = 0.0;  // quadrature of the same norm over [lambda_max/10, lambda_max]
};

TransformData analyze(const SpectralBasis& basis, std::span<const double> f, const AnalyzeOptions& opt = {});

// int_{M_n} sum_j phi_j T_j f dlambda with the full node weights, or with `weights`.
RVec synthesize(const SpectralBasis& basis, const TransformData& td);
RVec synthesize(const SpectralBasis& basis, const TransformData& td, std::span<const double> weights);
// The starred counterpart int sum_j phi*_j S_j f.
RVec synthesize_star(const SpectralBasis& basis, const TransformData& td, std::span<const double> weights);

// B(N_n) f + synthesize(analyze(f)); the point part is sum (f, xi*) xi.
RVec reconstruct(const SpectralBasis& basis, std::span<const double> f);

struct ParsevalReport {
    double inner = 0.0;       // (f, g)
    double point = 0.0;       // (B(N_n) f, g)
    double point_dual = 0.0;  // (f, B(N_n)* g)
    double continuous = 0.0;  // int sum_j T_j f S_j g
    double residual = 0.0;
    double dual_residual = 0.0;
};

ParsevalReport parseval_residual(const SpectralBasis& basis, std::span<const double> f, std::span<const double> g);

// E(b) f: eigenvalues of b by point projection, M_n cap b by the cut-weight synthesis.
RVec spectral_projection(const SpectralBasis& basis, const IntervalUnion& b, std::span<const double> f,
                         const AnalyzeOptions& opt = {});
// E(b)* g from the starred pipeline.
RVec spectral_projection_star(const SpectralBasis& basis, const IntervalUnion& b, std::span<const double> g,
                              const AnalyzeOptions& opt = {});

// L f by 8th-order differences with the exact potentials; f is taken as zero outside the box.
RVec apply_L_direct(const OperatorSpec& spec, const Grid& grid, std::span<const double> f);

struct SpectralApplication {
    RVec spectral;
    RVec direct;
    double relative_deviation = 0.0;
    double tail_bound = 0.0;
};

// int lambda dE f over M_n up to lambda_max plus sum lambda_e (f, xi*) xi.
SpectralApplication apply_L_spectrally(const SpectralBasis& basis, std::span<const double> f);

enum class ResolventSource { oracle, green };

struct IntertwineReport {
    double residual = 0.0;  // ||T(R f) - T(f) / (lambda - z)|| over the nodes
    double relative = 0.0;  // residual / ||T(R f)||
};

// The oracle source needs the grid operator on the same grid.
IntertwineReport intertwine_residual(const SpectralBasis& basis, std::span<const double> f, cplx z,
                                     ResolventSource source = ResolventSource::oracle,
                                     const GridOperator* oracle = nullptr);

struct SurveyReport {
    int samples = 0;
    double max_ratio = 0.0;     // max ||E(b) f|| / ||f||
    double median_ratio = 0.0;
    double intersection = 0.0;  // max ||E(b1 cap b2) f - E(b1) E(b2) f|| / ||f||
    double idempotency = 0.0;   // max ||E(b) E(b) f - E(b) f|| / ||f||
    double disjoint = 0.0;      // max ||E(b1) E(b2) f|| / ||f|| with b1 cap b2 empty
    double commutation = 0.0;   // max ||E(b) L f - L E(b) f|| / ||L f||, 8 edge nodes dropped
};

SurveyReport projection_survey(const SpectralBasis& basis, int samples, std::uint64_t seed);

// Weighted l2 norm of the transform pair over the nodes.
double transform_norm(const TransformData& td);

} // namespace specop
