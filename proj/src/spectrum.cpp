#include "specop/spectrum.hpp"

#include "specop/characteristic.hpp"
#include "specop/parallel.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace specop {

std::string_view to_string(EigenSource s) {
    switch (s) {
    case EigenSource::w_root: return "W_root";
    case EigenSource::oracle: return "oracle";
    case EigenSource::both: return "both";
    }
    return "unknown";
}

namespace {

bool too_far(const WSample& a, const WSample& b, double variation, double floor) {
    auto jump = [&](cplx u, cplx v) {
        return std::abs(u - v) > variation * std::max({std::abs(u), std::abs(v), floor});
    };
    return jump(a.w_plus, b.w_plus) || jump(a.w_minus, b.w_minus);
}

WSample evaluate(const OperatorSpec& spec, const DerivedConstants& c, double lambda, const Grid& grid,
                 const StepTable& table, int n_index) {
    // the roots coalesce exactly at h_m
    if (std::abs(lambda - c.h_m) < 1e-9) lambda = c.h_m + 1e-8;
    cplx wp = GreenData::build(spec, lambda, Side::plus, grid, &table).W();
    cplx wm = lambda > c.h_p ? GreenData::build(spec, lambda, Side::minus, grid, &table).W() : wp;
    return {lambda, wp, wm, in_M(lambda, wp, wm, n_index, c)};
}

// One side of the branch point, parameterized by t with lambda = map(t).
template <class Map>
std::vector<WSample> sweep_branch(const OperatorSpec& spec, const DerivedConstants& c, double t0, double t1,
                                  Map&& map, const Grid& grid, const StepTable& table, const SweepOptions& opt) {
    std::map<double, WSample> samples;
    std::vector<double> pending;
    for (int k = 0; k < opt.initial_points; ++k) pending.push_back(t0 + (t1 - t0) * k / (opt.initial_points - 1));
    double floor = 1.0 / (2.0 * opt.n_index);
    for (int depth = 0;; ++depth) {
        std::vector<WSample> fresh(pending.size());
        parallel_for(pending.size(), [&](std::size_t i) {
            fresh[i] = evaluate(spec, c, map(pending[i]), grid, table, opt.n_index);
        });
        for (std::size_t i = 0; i < pending.size(); ++i) samples.emplace(pending[i], fresh[i]);
        pending.clear();
        for (auto it = samples.begin(); std::next(it) != samples.end(); ++it) {
            auto nx = std::next(it);
            if (too_far(it->second, nx->second, opt.variation, floor)) pending.push_back(0.5 * (it->first + nx->first));
        }
        if (pending.empty()) break;
        if (depth == opt.max_depth) {
            std::ostringstream os;
            os << pending.size() << " sweep gaps still vary by more than " << opt.variation << " near lambda = "
               << map(pending.front());
            fail(ErrorKind::sweep_too_coarse, os.str());
        }
    }
    std::vector<WSample> out;
    for (auto& [t, s] : samples) out.push_back(s);
    return out;
}

double gauge(const RVec& v, const Grid& g) {
    double at0 = v[g.nearest(0.0)];
    if (std::abs(at0) > 1e-8) return at0 > 0 ? 1.0 : -1.0;
    auto it = std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    return *it > 0 ? 1.0 : -1.0;
}

double rel_residual(const RVec& applied, const RVec& v, double lambda) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        num += (applied[i] - lambda * v[i]) * (applied[i] - lambda * v[i]);
        den += v[i] * v[i];
    }
    return std::sqrt(num / den);
}

// Biorthonormal pair from a cluster of orthonormal Lambda_h modes.
void attach_modes(const GridOperator& go, const std::vector<int>& modes, double lambda_ref, Eigenpair& e) {
    const Grid& g = go.grid();
    const double h = g.step();
    const int n = g.points;
    Eigen::MatrixXd psi(n, static_cast<long>(modes.size()));
    for (std::size_t a = 0; a < modes.size(); ++a) psi.col(static_cast<long>(a)) = go.lambda_vectors().col(modes[a]);
    // symmetric (Loewdin) orthonormalization inside the cluster
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram(psi.transpose() * psi);
    psi = psi * gram.operatorInverseSqrt();
    Eigen::MatrixXd xi = go.S() * psi / std::sqrt(h);
    Eigen::MatrixXd xs = go.S_inv() * psi / std::sqrt(h);
    e.multiplicity = static_cast<int>(modes.size());
    e.residual = 0.0;
    for (long a = 0; a < psi.cols(); ++a) {
        RVec v(xi.col(a).data(), xi.col(a).data() + n), w(xs.col(a).data(), xs.col(a).data() + n);
        double s = gauge(v, g);
        for (auto& t : v) t *= s;
        for (auto& t : w) t *= s;
        e.residual = std::max({e.residual, rel_residual(go.apply_L(v), v, lambda_ref),
                               rel_residual(go.apply_Lstar(w), w, lambda_ref)});
        e.xi.push_back(std::move(v));
        e.xi_star.push_back(std::move(w));
    }
}

} // namespace

std::vector<WSample> adaptive_W_sweep(const OperatorSpec& spec, double lo, double hi, const Grid& grid,
                                      const SweepOptions& opt) {
    auto c = derived_constants(spec);
    StepTable table = StepTable::build(spec, grid);
    std::vector<WSample> out;
    if (lo < c.h_p) {
        double k1 = std::sqrt(c.h_p - lo);
        double k0 = std::min(opt.edge_offset, 0.5 * k1);
        double top = std::min(hi, c.h_p);
        double kmin = top < c.h_p ? std::sqrt(c.h_p - top) : k0;
        auto below = sweep_branch(spec, c, kmin, k1, [&](double k) { return c.h_p - k * k; }, grid, table, opt);
        out.insert(out.end(), below.rbegin(), below.rend());
    }
    if (hi > c.h_p) {
        double n1 = theta_nu(hi, c).nu;
        double n0 = lo > c.h_p ? theta_nu(lo, c).nu : std::min(opt.edge_offset, 0.5 * n1);
        auto above = sweep_branch(spec, c, n0, n1, [&](double v) { return lambda_of_nu(v, c); }, grid, table, opt);
        out.insert(out.end(), above.begin(), above.end());
    }
    return out;
}

RVec W_roots(const OperatorSpec& spec, const std::vector<WSample>& sweep, const Grid& grid, double tol) {
    auto c = derived_constants(spec);
    StepTable table = StepTable::build(spec, grid);
    auto re_w = [&](double l) { return GreenData::build(spec, l, Side::plus, grid, &table).W().real(); };
    RVec roots;
    for (std::size_t k = 0; k + 1 < sweep.size(); ++k) {
        const auto& a = sweep[k];
        const auto& b = sweep[k + 1];
        if (!(b.lambda < c.h_p)) break;
        double fa = a.w_plus.real(), fb = b.w_plus.real();
        if (fa * fb > 0) continue;
        // a sign change of Re W with W itself real is a zero, not a pole or a phase wrap
        if (std::abs(a.w_plus.imag()) > 1e-8 * std::abs(a.w_plus) + 1e-12) continue;
        if (fa == 0.0) {
            roots.push_back(a.lambda);
            continue;
        }
        std::uintmax_t iters = 100;
        auto stop = [tol](double lo, double hi) { return std::abs(hi - lo) <= tol; };
        auto r = boost::math::tools::toms748_solve(re_w, a.lambda, b.lambda, fa, fb, stop, iters);
        roots.push_back(0.5 * (r.first + r.second));
    }
    return roots;
}

std::vector<Eigenpair> find_eigenvalues(const GridOperator& go, double lo, double hi, std::span<const double> w_roots,
                                        const EigenOptions& opt) {
    auto c = derived_constants(go.spec());
    const auto& lv = go.lambda_values();
    double cap = std::min(hi, c.h_p);
    std::vector<int> trusted;
    for (int k = 0; k < static_cast<int>(lv.size()) && lv[k] < cap; ++k)
        if (lv[k] >= lo && outer_mass(go, k) <= opt.outer_mass_limit) trusted.push_back(k);

    std::vector<Eigenpair> out;
    std::vector<bool> used(w_roots.size(), false);
    for (std::size_t i = 0; i < trusted.size();) {
        std::vector<int> cluster{trusted[i]};
        std::size_t j = i + 1;
        while (j < trusted.size() && lv[trusted[j]] - lv[cluster.back()] <= opt.cluster_width) cluster.push_back(trusted[j++]);
        i = j;
        if (cluster.size() > 2) {
            std::ostringstream os;
            os << cluster.size() << " grid modes within " << opt.cluster_width << " of " << lv[cluster[0]];
            fail(ErrorKind::multiplicity_ambiguous, os.str());
        }
        Eigenpair e;
        double mean = 0;
        for (int k : cluster) mean += lv[k];
        mean /= static_cast<double>(cluster.size());
        e.grid_lambda = e.lambda = mean;
        attach_modes(go, cluster, mean, e);
        for (std::size_t r = 0; r < w_roots.size(); ++r) {
            if (!used[r] && std::abs(w_roots[r] - mean) <= opt.reconcile) {
                used[r] = true;
                e.w_root = e.lambda = w_roots[r];
                e.source = EigenSource::both;
                e.confirmed = true;
                break;
            }
        }
        out.push_back(std::move(e));
    }
    for (std::size_t r = 0; r < w_roots.size(); ++r) {
        if (used[r] || w_roots[r] < lo || w_roots[r] > hi) continue;
        Eigenpair e;
        e.lambda = e.w_root = w_roots[r];
        e.source = EigenSource::w_root;
        auto it = std::min_element(lv.begin(), lv.end(), [&](double a, double b) {
            return std::abs(a - w_roots[r]) < std::abs(b - w_roots[r]);
        });
        if (std::abs(*it - w_roots[r]) <= 10 * opt.reconcile) {
            e.grid_lambda = *it;
            attach_modes(go, {static_cast<int>(it - lv.begin())}, *it, e);
        }
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const Eigenpair& a, const Eigenpair& b) { return a.lambda < b.lambda; });
    return out;
}

double biorthonormality_residual(const std::vector<Eigenpair>& eigs, double h) {
    std::vector<const RVec*> xi, xs;
    for (const auto& e : eigs) {
        for (const auto& v : e.xi) xi.push_back(&v);
        for (const auto& v : e.xi_star) xs.push_back(&v);
    }
    double worst = 0.0;
    for (std::size_t a = 0; a < xi.size(); ++a)
        for (std::size_t b = 0; b < xs.size(); ++b)
            worst = std::max(worst, std::abs(dot(*xi[a], *xs[b], h) - (a == b ? 1.0 : 0.0)));
    return worst;
}

RVec point_projection(std::span<const double> f, const std::vector<Eigenpair>& eigs, double h) {
    RVec out(f.size(), 0.0);
    for (const auto& e : eigs) {
        for (std::size_t a = 0; a < e.xi.size(); ++a) {
            double coef = dot(f, e.xi_star[a], h);
            for (std::size_t i = 0; i < f.size(); ++i) out[i] += coef * e.xi[a][i];
        }
    }
    return out;
}

double choose_lambda_0(const DerivedConstants& c, double smallest_eigenvalue) {
    return std::min(c.h_m, smallest_eigenvalue) - 1.0;
}

SpectralPartition partition(const OperatorSpec& spec, int n, const std::vector<WSample>& sweep,
                            const std::vector<Eigenpair>& eigs, double lambda_s, double lambda_max, double variation) {
    auto c = derived_constants(spec);
    double floor = 1.0 / (2.0 * n);
    for (std::size_t k = 0; k + 1 < sweep.size(); ++k) {
        const auto& a = sweep[k];
        const auto& b = sweep[k + 1];
        if ((a.lambda < c.h_p) != (b.lambda < c.h_p)) continue;
        if (too_far(a, b, variation, floor)) {
            std::ostringstream os;
            os << "|W| varies by more than " << variation << " between lambda = " << a.lambda << " and " << b.lambda;
            fail(ErrorKind::sweep_too_coarse, os.str());
        }
    }

    SpectralPartition p;
    p.n = n;
    p.lambda_s = lambda_s;
    p.lambda_max = lambda_max;
    double smallest = eigs.empty() ? c.h_p : eigs.front().lambda;
    p.lambda_0 = choose_lambda_0(c, smallest);

    std::vector<Interval> parts;
    for (const auto& e : eigs) {
        p.zeros.push_back(e.lambda);
        parts.push_back({e.lambda, e.lambda});
    }
    p.guards.push_back(c.h_p);
    for (const auto& e : eigs) {
        if (std::abs(e.lambda - c.h_m) < 0.05) {
            p.guards.push_back(c.h_m);
            break;
        }
    }
    for (double g : p.guards) parts.push_back({g, g});

    // runs of excluded samples above h_p, widened to the neighbouring good samples
    std::vector<bool> good(sweep.size());
    for (std::size_t k = 0; k < sweep.size(); ++k)
        good[k] = in_M(sweep[k].lambda, sweep[k].w_plus, sweep[k].w_minus, n, c);
    for (std::size_t k = 0; k < sweep.size(); ++k) {
        if (!(sweep[k].lambda > c.h_p) || good[k]) continue;
        std::size_t end = k;
        while (end + 1 < sweep.size() && !good[end + 1]) ++end;
        double lo = k > 0 && sweep[k - 1].lambda > c.h_p ? sweep[k - 1].lambda : c.h_p;
        double hi = end + 1 < sweep.size() ? sweep[end + 1].lambda : lambda_max;
        p.dips.push_back({lo, hi});
        parts.push_back({lo, hi});
        k = end;
    }
    p.N_n = IntervalUnion(parts);
    p.M_n = p.N_n.complement(c.h_p, lambda_max);
    return p;
}

} // namespace specop
