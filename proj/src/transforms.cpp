#include "specop/transforms.hpp"

#include "specop/characteristic.hpp"
#include "specop/parallel.hpp"
#include "specop/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace specop {

namespace {

double nu_of(double lambda, const DerivedConstants& c) { return lambda <= c.h_p ? 0.0 : theta_nu(lambda, c).nu; }

double jacobian(double nu, const DerivedConstants& c) { return 4.0 * nu * nu * nu + 4.0 * c.h_a * nu; }

void axpy(double a, std::span<const double> x, RVec& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// Lambda-weighted synthesis: sum_k weights_k scale_k sum_j phi_j T_j.
RVec combine(const SpectralBasis& basis, const std::array<RVec, 2>& coef, std::span<const double> weights,
             bool star, bool times_lambda = false) {
    RVec out(basis.grid().points, 0.0);
    for (std::size_t k = 0; k < basis.nodes().size(); ++k) {
        if (weights[k] == 0.0) continue;
        double w = weights[k] * (times_lambda ? basis.nodes()[k].lambda : 1.0);
        const auto& fac = basis.factor(k);
        for (int j = 0; j < 2; ++j) axpy(w * coef[j][k], star ? fac.phi_star[j] : fac.phi[j], out);
    }
    return out;
}

RVec point_part(const std::vector<Eigenpair>& eigs, const IntervalUnion* b, std::span<const double> f, double h,
                bool star, bool times_lambda = false) {
    RVec out(f.size(), 0.0);
    for (const auto& e : eigs) {
        if (b && !b->contains(e.lambda)) continue;
        for (std::size_t a = 0; a < e.xi.size(); ++a) {
            const auto& left = star ? e.xi : e.xi_star;
            const auto& right = star ? e.xi_star : e.xi;
            axpy(dot(f, left[a], h) * (times_lambda ? e.lambda : 1.0), right[a], out);
        }
    }
    return out;
}

// E(b) f need not vanish at the box edges, where the zero-padded stencils of
// apply_L_direct are wrong; compare away from them.
double interior_distance(std::span<const double> a, std::span<const double> b, double h) {
    constexpr std::size_t edge = 8;
    return distance(a.subspan(edge, a.size() - 2 * edge), b.subspan(edge, b.size() - 2 * edge), h);
}

bool continuum_touched(const SpectralBasis& basis, const IntervalUnion& b) {
    return !b.intersect(basis.partition().M_n).empty();
}

} // namespace

SpectralBasis SpectralBasis::build(const OperatorSpec& spec, const Grid& grid, const SpectralPartition& part,
                                   std::vector<Eigenpair> eigs, const BasisOptions& opt) {
    auto c = derived_constants(spec);
    SpectralBasis b;
    b.spec_ = spec;
    b.grid_ = grid;
    b.partition_ = part;
    b.eigs_ = std::move(eigs);
    b.opt_ = opt;
    GaussRule rule = gauss_legendre(opt.order);
    for (const auto& iv : part.M_n.parts()) {
        double n0 = nu_of(std::max(iv.lo, c.h_p), c), n1 = nu_of(iv.hi, c);
        if (!(n1 > n0)) continue;
        int count = std::max(1, static_cast<int>(std::ceil((n1 - n0) / opt.panel_width)));
        double width = (n1 - n0) / count;
        for (int p = 0; p < count; ++p) {
            Panel pan{n0 + p * width, n0 + (p + 1) * width, static_cast<int>(b.nodes_.size())};
            double mid = 0.5 * (pan.nu_lo + pan.nu_hi), half = 0.5 * width;
            for (int k = 0; k < opt.order; ++k) {
                double nu = mid + half * rule.nodes[k];
                b.nodes_.push_back({nu, lambda_of_nu(nu, c), half * rule.weights[k] * jacobian(nu, c),
                                    static_cast<int>(b.panels_.size())});
            }
            b.panels_.push_back(pan);
        }
    }
    JumpSolver solver(spec, grid);
    JumpOptions jopt;
    jopt.n_index = opt.n_index;
    b.factors_.resize(b.nodes_.size());
    parallel_for(b.nodes_.size(), [&](std::size_t k) { b.factors_[k] = solver.factor(b.nodes_[k].lambda, jopt); });
    b.full_weights_.resize(b.nodes_.size());
    for (std::size_t k = 0; k < b.nodes_.size(); ++k) b.full_weights_[k] = b.nodes_[k].weight;
    return b;
}

RVec SpectralBasis::weights(const IntervalUnion& b) const {
    auto c = derived_constants(spec_);
    GaussRule rule = gauss_legendre(opt_.order);
    RVec out(nodes_.size(), 0.0);
    for (const auto& pan : panels_) {
        double lo = lambda_of_nu(pan.nu_lo, c), hi = lambda_of_nu(pan.nu_hi, c);
        auto pieces = b.intersect(IntervalUnion::single(lo, hi));
        double mid = 0.5 * (pan.nu_lo + pan.nu_hi), half = 0.5 * (pan.nu_hi - pan.nu_lo);
        for (const auto& piece : pieces.parts()) {
            if (piece.lo == lo && piece.hi == hi) {
                for (int k = 0; k < opt_.order; ++k) out[pan.first + k] += nodes_[pan.first + k].weight;
                continue;
            }
            // integrals of the panel's Lagrange basis over the cut piece, in local t
            double t0 = (nu_of(piece.lo, c) - mid) / half, t1 = (nu_of(piece.hi, c) - mid) / half;
            t0 = std::clamp(t0, -1.0, 1.0);
            t1 = std::clamp(t1, -1.0, 1.0);
            if (!(t1 > t0)) continue;
            RVec integral(opt_.order, 0.0);
            for (int q = 0; q < opt_.order; ++q) {
                double t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * rule.nodes[q];
                RVec l = lagrange_basis(rule.nodes, t);
                for (int k = 0; k < opt_.order; ++k) integral[k] += 0.5 * (t1 - t0) * rule.weights[q] * l[k];
            }
            for (int k = 0; k < opt_.order; ++k)
                out[pan.first + k] += half * integral[k] * jacobian(nodes_[pan.first + k].nu, c);
        }
    }
    return out;
}

TransformData analyze(const SpectralBasis& basis, std::span<const double> f, const AnalyzeOptions& opt) {
    const Grid& g = basis.grid();
    if (opt.check_edges && (std::abs(f.front()) > opt.edge_tol || std::abs(f.back()) > opt.edge_tol)) {
        std::ostringstream os;
        os << "|f| at the box edges is " << std::abs(f.front()) << ", " << std::abs(f.back()) << " > "
           << opt.edge_tol;
        fail(ErrorKind::domain_truncation, os.str());
    }
    const double h = g.step();
    const auto& nodes = basis.nodes();
    TransformData td;
    td.n = basis.partition().n;
    td.lambda_max = basis.partition().lambda_max;
    td.nodes = nodes;
    for (int j = 0; j < 2; ++j) {
        td.T[j].assign(nodes.size(), 0.0);
        td.S[j].assign(nodes.size(), 0.0);
    }
    RVec density(nodes.size(), 0.0);
    parallel_for(nodes.size(), [&](std::size_t k) {
        const auto& fac = basis.factor(k);
        for (int j = 0; j < 2; ++j) {
            td.T[j][k] = dot(f, fac.phi_star[j], h);
            td.S[j][k] = dot(f, fac.phi[j], h);
        }
        RVec v(g.points, 0.0);
        for (int j = 0; j < 2; ++j) axpy(td.T[j][k], fac.phi[j], v);
        density[k] = norm(v, h);
    });
    const int last_panel = nodes.empty() ? 0 : nodes.back().panel;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (nodes[k].panel == last_panel) td.c_fit = std::max(td.c_fit, density[k] * std::pow(nodes[k].lambda, 1.75));
        if (nodes[k].lambda >= td.lambda_max / 10) td.last_decade += nodes[k].weight * density[k];
    }
    td.tail_bound = 4.0 / 3.0 * td.c_fit * std::pow(td.lambda_max, -0.75);
    return td;
}

RVec synthesize(const SpectralBasis& basis, const TransformData& td) {
    return combine(basis, td.T, basis.full_weights(), false);
}

RVec synthesize(const SpectralBasis& basis, const TransformData& td, std::span<const double> weights) {
    return combine(basis, td.T, weights, false);
}

RVec synthesize_star(const SpectralBasis& basis, const TransformData& td, std::span<const double> weights) {
    return combine(basis, td.S, weights, true);
}

RVec reconstruct(const SpectralBasis& basis, std::span<const double> f) {
    RVec out = point_part(basis.eigenpairs(), nullptr, f, basis.grid().step(), false);
    RVec g = synthesize(basis, analyze(basis, f));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
    return out;
}

ParsevalReport parseval_residual(const SpectralBasis& basis, std::span<const double> f, std::span<const double> g) {
    const double h = basis.grid().step();
    auto tf = analyze(basis, f);
    auto tg = analyze(basis, g);
    ParsevalReport r;
    r.inner = dot(f, g, h);
    r.point = dot(point_part(basis.eigenpairs(), nullptr, f, h, false), g, h);
    r.point_dual = dot(f, point_part(basis.eigenpairs(), nullptr, g, h, true), h);
    for (std::size_t k = 0; k < tf.nodes.size(); ++k)
        for (int j = 0; j < 2; ++j) r.continuous += tf.nodes[k].weight * tf.T[j][k] * tg.S[j][k];
    double continuous_dual = dot(f, synthesize_star(basis, tg, basis.full_weights()), h);
    r.residual = std::abs(r.inner - r.point - r.continuous);
    r.dual_residual = std::abs(r.inner - r.point_dual - continuous_dual);
    return r;
}

RVec spectral_projection(const SpectralBasis& basis, const IntervalUnion& b, std::span<const double> f,
                         const AnalyzeOptions& opt) {
    RVec out = point_part(basis.eigenpairs(), &b, f, basis.grid().step(), false);
    if (continuum_touched(basis, b)) {
        RVec g = synthesize(basis, analyze(basis, f, opt), basis.weights(b));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
    }
    return out;
}

RVec spectral_projection_star(const SpectralBasis& basis, const IntervalUnion& b, std::span<const double> g,
                              const AnalyzeOptions& opt) {
    RVec out = point_part(basis.eigenpairs(), &b, g, basis.grid().step(), true);
    if (continuum_touched(basis, b)) {
        RVec s = synthesize_star(basis, analyze(basis, g, opt), basis.weights(b));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += s[i];
    }
    return out;
}

RVec apply_L_direct(const OperatorSpec& spec, const Grid& grid, std::span<const double> f) {
    static constexpr std::array<double, 5> stencil{-205.0 / 72, 8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560};
    const int n = grid.points;
    const double h2 = grid.step() * grid.step();
    auto apply_D = [&](const Potential& q, double shift, std::span<const double> u) {
        RVec out(n);
        for (int i = 0; i < n; ++i) {
            double d2 = stencil[0] * u[i];
            for (int k = 1; k < 5; ++k) {
                double left = i - k >= 0 ? u[i - k] : 0.0;
                double right = i + k < n ? u[i + k] : 0.0;
                d2 += stencil[k] * (left + right);
            }
            out[i] = -d2 / h2 + (q.value(grid.x(i)) + shift) * u[i];
        }
        return out;
    };
    RVec d1f = apply_D(spec.q1, spec.h1, f);
    return apply_D(spec.q2, spec.h2, d1f);
}

SpectralApplication apply_L_spectrally(const SpectralBasis& basis, std::span<const double> f) {
    const double h = basis.grid().step();
    auto td = analyze(basis, f);
    SpectralApplication out;
    out.spectral = combine(basis, td.T, basis.full_weights(), false, true);
    RVec pts = point_part(basis.eigenpairs(), nullptr, f, h, false, true);
    for (std::size_t i = 0; i < pts.size(); ++i) out.spectral[i] += pts[i];
    out.direct = apply_L_direct(basis.spec(), basis.grid(), f);
    out.relative_deviation = distance(out.spectral, out.direct, h) / norm(out.direct, h);
    out.tail_bound = td.tail_bound / norm(f, h);
    return out;
}

double transform_norm(const TransformData& td) {
    double s = 0.0;
    for (std::size_t k = 0; k < td.nodes.size(); ++k)
        for (int j = 0; j < 2; ++j) s += td.nodes[k].weight * td.T[j][k] * td.T[j][k];
    return std::sqrt(s);
}

IntertwineReport intertwine_residual(const SpectralBasis& basis, std::span<const double> f, cplx z,
                                     ResolventSource source, const GridOperator* oracle) {
    CVec rf;
    if (source == ResolventSource::oracle) {
        if (!oracle) fail(ErrorKind::domain, "oracle resolvent requested without a grid operator");
        rf = oracle_resolvent(*oracle, z, f);
    } else {
        CVec fc(f.begin(), f.end());
        rf = GreenData::build(basis.spec(), z, Side::plus, basis.grid()).apply(fc);
    }
    RVec re(rf.size()), im(rf.size());
    for (std::size_t i = 0; i < rf.size(); ++i) {
        re[i] = rf[i].real();
        im[i] = rf[i].imag();
    }
    auto tf = analyze(basis, f);
    auto tr = analyze(basis, re);
    auto ti = analyze(basis, im);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < tf.nodes.size(); ++k) {
        double w = tf.nodes[k].weight;
        for (int j = 0; j < 2; ++j) {
            cplx lhs(tr.T[j][k], ti.T[j][k]);
            cplx rhs = tf.T[j][k] / (tf.nodes[k].lambda - z);
            num += w * std::norm(lhs - rhs);
            den += w * std::norm(lhs);
        }
    }
    IntertwineReport r;
    r.residual = std::sqrt(num);
    r.relative = den > 0 ? std::sqrt(num / den) : 0.0;
    return r;
}

SurveyReport projection_survey(const SpectralBasis& basis, int samples, std::uint64_t seed) {
    const Grid& g = basis.grid();
    const double h = g.step();
    const auto& part = basis.partition();
    auto c = derived_constants(basis.spec());
    const double nu_max = nu_of(part.lambda_max, c);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto random_set = [&] {
        int count = 1 + static_cast<int>(rng() % 3);
        std::vector<Interval> parts;
        for (int i = 0; i < count; ++i) {
            double a = lambda_of_nu(nu_max * unit(rng), c), b = lambda_of_nu(nu_max * unit(rng), c);
            if (unit(rng) < 0.25) a = part.lambda_0;
            parts.push_back({std::min(a, b), std::max(a, b)});
        }
        return IntervalUnion(parts);
    };
    auto random_function = [&] {
        double centre = -2.0 + 4.0 * unit(rng), width = 0.6 + 0.9 * unit(rng);
        double a = 2.0 * unit(rng) - 1.0, b = 2.0 * unit(rng) - 1.0;
        RVec f(g.points);
        for (int i = 0; i < g.points; ++i) {
            double t = (g.x(i) - centre) / width;
            f[i] = (a + b * t) * std::exp(-0.5 * t * t);
        }
        double nf = norm(f, h);
        for (auto& v : f) v /= nf;
        return f;
    };
    AnalyzeOptions loose;
    loose.check_edges = false;
    auto E = [&](const IntervalUnion& b, std::span<const double> f) { return spectral_projection(basis, b, f, loose); };

    SurveyReport r;
    r.samples = samples;
    RVec ratios;
    for (int s = 0; s < samples; ++s) {
        IntervalUnion b1 = random_set(), b2 = random_set();
        RVec f = random_function();
        RVec e1 = E(b1, f);
        ratios.push_back(norm(e1, h));
        r.idempotency = std::max(r.idempotency, distance(E(b1, e1), e1, h));
        RVec e2 = E(b2, f);
        r.intersection = std::max(r.intersection, distance(E(b1.intersect(b2), f), E(b1, e2), h));
        double cut = lambda_of_nu(nu_max * unit(rng), c);
        IntervalUnion lower = b1.intersect(IntervalUnion::single(part.lambda_0 - 1.0, cut));
        IntervalUnion upper = b1.intersect(IntervalUnion::single(std::nextafter(cut, INFINITY), part.lambda_max));
        r.disjoint = std::max(r.disjoint, norm(E(lower, E(upper, f)), h));
        RVec lf = apply_L_direct(basis.spec(), g, f);
        RVec lhs = E(b1, lf);
        RVec rhs = apply_L_direct(basis.spec(), g, e1);
        r.commutation = std::max(r.commutation, interior_distance(lhs, rhs, h) / norm(lf, h));
    }
    std::sort(ratios.begin(), ratios.end());
    r.max_ratio = ratios.back();
    r.median_ratio = ratios[ratios.size() / 2];
    return r;
}

} // namespace specop
