#include "specop/ode_core.hpp"
#include "specop/quadrature.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace specop {

namespace {

// Volterra data on s in [s0, S] for the reduced equation
//   w_j(s) = delta_jk + int_{a_j}^s e^{i beta_j (s - t)} a_j(t) <b(t), w(t)> dt,
// with a_j = s0 when Im beta_j > 0 and a_j = S otherwise.
struct VolterraData {
    RVec s;
    std::vector<Vec4c> a;
    std::vector<Vec4c> b;
    std::array<cplx, 4> beta{};
    int k = 0;  // 0-based
};

struct VolterraResult {
    std::vector<Vec4c> w;
    int iterations = 0;
    RVec ratios;
    double residual = 0.0;
};

constexpr int stencil = 6;

// Per-interval weights for the degree-5 interpolant of g, one set per stencil offset.
using StencilWeights = std::array<std::array<cplx, stencil>, stencil - 1>;

StencilWeights interval_weights(cplx beta, double h, bool forward) {
    static const GaussRule rule = gauss_legendre(24);
    StencilWeights w{};
    for (int o = 0; o < stencil - 1; ++o) {
        RVec nodes(stencil);
        for (int r = 0; r < stencil; ++r) nodes[r] = r - o;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            double t = 0.5 * (rule.nodes[q] + 1.0);
            cplx e = forward ? std::exp(I * beta * h * (1.0 - t)) : std::exp(-I * beta * h * t);
            RVec l = lagrange_basis(nodes, t);
            for (int r = 0; r < stencil; ++r) w[o][r] += 0.5 * h * rule.weights[q] * e * l[r];
        }
    }
    return w;
}

class VolterraOperator {
public:
    explicit VolterraOperator(const VolterraData& d) : d_(d) {
        std::size_t n = d.s.size();
        if (n < stencil) fail(ErrorKind::domain, "half-line quadrature needs at least 6 nodes");
        h_ = d.s[1] - d.s[0];
        for (int j = 0; j < 4; ++j) {
            forward_[j] = d.beta[j].imag() > 0.0;
            weights_[j] = interval_weights(d.beta[j], h_, forward_[j]);
            step_[j] = forward_[j] ? std::exp(I * d.beta[j] * h_) : std::exp(-I * d.beta[j] * h_);
        }
    }

    std::vector<Vec4c> apply(const std::vector<Vec4c>& w) const {
        std::size_t n = d_.s.size();
        std::vector<Vec4c> g(n), out(n);
        for (std::size_t m = 0; m < n; ++m) g[m] = d_.a[m] * d_.b[m].transpose() * w[m];
        int last = static_cast<int>(n) - 1;
        for (int j = 0; j < 4; ++j) {
            cplx acc = 0.0;
            auto piece = [&](int m) {
                int start = std::clamp(m - 2, 0, last + 1 - stencil);
                const auto& wt = weights_[j][m - start];
                cplx v = 0.0;
                for (int r = 0; r < stencil; ++r) v += wt[r] * g[start + r](j);
                return v;
            };
            if (forward_[j]) {
                out[0](j) = 0.0;
                for (int m = 0; m < last; ++m) {
                    acc = step_[j] * acc + piece(m);
                    out[m + 1](j) = acc;
                }
            } else {
                out[last](j) = 0.0;
                for (int m = last - 1; m >= 0; --m) {
                    acc = step_[j] * acc + piece(m);
                    out[m](j) = -acc;
                }
            }
        }
        for (auto& v : out) v(d_.k) += 1.0;
        return out;
    }

private:
    const VolterraData& d_;
    double h_ = 0.0;
    std::array<bool, 4> forward_{};
    std::array<StencilWeights, 4> weights_{};
    std::array<cplx, 4> step_{};
};

double sup_distance(const std::vector<Vec4c>& a, const std::vector<Vec4c>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
    return m;
}

VolterraResult iterate(const VolterraData& d, const PicardOptions& opt) {
    VolterraOperator T(d);
    std::vector<Vec4c> w(d.s.size(), Vec4c::Unit(d.k));
    VolterraResult res;
    double prev = -1.0;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        auto next = T.apply(w);
        double diff = sup_distance(next, w);
        w = std::move(next);
        res.iterations = it;
        if (prev > 0.0) {
            double ratio = diff / prev;
            res.ratios.push_back(ratio);
            if (ratio > 0.9) {
                std::ostringstream os;
                os << "observed contraction ratio " << ratio << " at iteration " << it;
                fail(ErrorKind::no_contraction, os.str());
            }
        }
        if (diff <= 0.5 * opt.tol) {
            res.residual = sup_distance(T.apply(w), w);
            res.w = std::move(w);
            return res;
        }
        prev = diff;
    }
    fail(ErrorKind::no_contraction, "no fixed point after " + std::to_string(opt.max_iterations) + " iterations");
}

// Frame P(x) with its inverse; constant for the high regime.
struct Frame {
    std::array<cplx, 4> mu{};
    std::optional<Mat4c> Pi, PiInv;
    std::optional<double> lambda, lambda_s;
    DerivedConstants c{};

    std::pair<Mat4c, Mat4c> at(double x) const {
        if (Pi) return {*Pi, *PiInv};
        auto bm = branch_psi(x, *lambda, *lambda_s, c);
        return {bm.Psi, bm.PsiInv};
    }
};

Frame high_frame(const OperatorSpec& spec, cplx z, Side side) {
    Frame f;
    f.c = derived_constants(spec);
    auto rs = roots_for(z, f.c, side);
    if (rs.regime == Regime::branch_point) fail(ErrorKind::degenerate_roots, "high-regime frame at the branch point");
    f.mu = rs.mu;
    f.Pi = rs.Pi;
    f.PiInv = rs.PiInv;
    return f;
}

Frame branch_frame(const OperatorSpec& spec, double lambda, double lambda_s) {
    Frame f;
    f.c = derived_constants(spec);
    auto [theta, nu] = theta_nu(lambda, f.c);
    f.mu = {I * theta, nu, -nu, -I * theta};
    f.lambda = lambda;
    f.lambda_s = lambda_s;
    return f;
}

double node_step(const std::array<cplx, 4>& mu) {
    double big = 0.0;
    for (cplx a : mu)
        for (cplx b : mu) big = std::max(big, std::abs(a - b));
    return std::min(0.01, 0.1 / std::max(big, 1e-12));
}

// Nodes s in [s0, S] with spacing close to h.
RVec half_nodes(double s0, double S, double h) {
    int m = std::max(stencil, static_cast<int>(std::ceil((S - s0) / h)));
    RVec s(m + 1);
    for (int i = 0; i <= m; ++i) s[i] = s0 + (S - s0) * i / m;
    return s;
}

VolterraData build_data(const OperatorSpec& spec, const Frame& f, int k, End end, const RVec& s) {
    VolterraData d;
    d.s = s;
    d.k = k - 1;
    double sign = end == End::right ? 1.0 : -1.0;
    for (int j = 0; j < 4; ++j) d.beta[j] = sign * (f.mu[j] - f.mu[d.k]);
    d.a.resize(s.size());
    d.b.resize(s.size());
    for (std::size_t m = 0; m < s.size(); ++m) {
        double x = sign * s[m];
        auto [P, Pinv] = f.at(x);
        auto r = perturbation_row(x, spec);
        d.a[m] = sign * Pinv.col(3);
        for (int l = 0; l < 4; ++l) d.b[m](l) = r[0] * P(0, l) + r[1] * P(1, l) + r[2] * P(2, l);
    }
    return d;
}

double certificate_of(const VolterraData& d) {
    double k = 0.0;
    for (std::size_t m = 0; m + 1 < d.s.size(); ++m) {
        auto f = [&](std::size_t i) { return d.a[i].cwiseAbs().maxCoeff() * d.b[i].cwiseAbs().sum(); };
        k += 0.5 * (d.s[m + 1] - d.s[m]) * (f(m) + f(m + 1));
    }
    return k;
}

// Bound on the neglected integral beyond X.
double tail_bound(const OperatorSpec& spec, const Frame& f, double X) {
    const auto& q1 = spec.q1;
    const auto& q2 = spec.q2;
    double t41 = q1.tail_bound(X) * (1.0 + spec.h2) + spec.h1 * q2.tail_bound(X) + q1.decay_constant() * q2.tail_bound(X);
    double t42 = 2.0 * q1.tail_bound(X);
    double t43 = q1.tail_bound(X) + q2.tail_bound(X);
    auto [P, Pinv] = f.at(X);
    // Psi grows linearly; allow for the growth over one decay length past X
    double rate = std::min(q1.is_zero() ? 1.0 : q1.decay_rate(), q2.is_zero() ? 1.0 : q2.decay_rate());
    double stretch = 1.0 + 1.0 / (rate * (1.0 + X));
    double growth = f.Pi ? 1.0 : stretch * stretch;
    double pmax = P.topRows(3).cwiseAbs().maxCoeff();
    return growth * Pinv.col(3).cwiseAbs().maxCoeff() * pmax * (t41 + t42 + t43);
}

HalfLineSolution assemble(const OperatorSpec& spec, const Frame& f, int k, cplx z, Side side, End end,
                          const VolterraData& d, const VolterraResult& vr) {
    HalfLineSolution h;
    h.k = k;
    h.z = z;
    h.side = side;
    h.end = end;
    h.mu = f.mu;
    h.anchor = d.s.front();
    h.iterations = vr.iterations;
    h.ratios = vr.ratios;
    h.residual = vr.residual;
    h.certificate = certificate_of(d);
    h.tail = tail_bound(spec, f, d.s.back());
    h.coefficients_at_anchor.assign(vr.w.front().data(), vr.w.front().data() + 4);
    std::size_t n = d.s.size();
    h.x.resize(n);
    h.y.resize(n);
    h.remainder.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
        std::size_t i = end == End::right ? m : n - 1 - m;
        double x = end == End::right ? d.s[m] : -d.s[m];
        auto [P, Pinv] = f.at(x);
        h.x[i] = x;
        h.y[i] = P * vr.w[m];
        h.remainder[i] = (P * (vr.w[m] - Vec4c::Unit(k - 1)))(0);
    }
    return h;
}

void check_tail(const HalfLineSolution& h, double tol) {
    if (h.tail > tol) {
        std::ostringstream os;
        os << "truncation bound " << h.tail << " beyond the window exceeds tol " << tol;
        fail(ErrorKind::tail_too_fat, os.str());
    }
}

void check_k(int k) {
    if (k < 1 || k > 4) fail(ErrorKind::domain, "solution index must be in 1..4");
}

} // namespace

double contraction_certificate(const OperatorSpec& spec, cplx z, Side side, End end, double x0, double half_width,
                               std::optional<double> branch_lambda_s) {
    Frame f = branch_lambda_s ? branch_frame(spec, z.real(), *branch_lambda_s) : high_frame(spec, z, side);
    auto d = build_data(spec, f, 1, end, half_nodes(x0, half_width, node_step(f.mu)));
    return certificate_of(d) + tail_bound(spec, f, half_width);
}

HalfLineSolution picard_high(const OperatorSpec& spec, int k, cplx z, End end, const PicardOptions& opt, Side side) {
    check_k(k);
    Frame f = high_frame(spec, z, side);
    auto d = build_data(spec, f, k, end, half_nodes(0.0, opt.half_width, node_step(f.mu)));
    double kappa = certificate_of(d);
    if (kappa >= 1.0) {
        std::ostringstream os;
        os << "contraction certificate " << kappa << " >= 1 at z = " << z;
        fail(ErrorKind::no_contraction, os.str());
    }
    auto vr = iterate(d, opt);
    auto h = assemble(spec, f, k, z, side, end, d, vr);
    check_tail(h, opt.tol);
    return h;
}

HalfLineSolution picard_branch(const OperatorSpec& spec, int k, double lambda, double lambda_s, End end,
                               const PicardOptions& opt) {
    check_k(k);
    auto c = derived_constants(spec);
    if (lambda < c.h_p || lambda > lambda_s) {
        std::ostringstream os;
        os << "lambda = " << lambda << " outside the branch window [" << c.h_p << ", " << lambda_s << "]";
        fail(ErrorKind::domain, os.str());
    }
    Frame f = branch_frame(spec, lambda, lambda_s);
    double h = node_step(f.mu);
    std::optional<VolterraData> data;
    for (double x0 = 0.0; x0 <= 0.5 * opt.half_width + 1e-12; x0 += 0.5) {
        auto d = build_data(spec, f, k, end, half_nodes(x0, opt.half_width, h));
        if (certificate_of(d) <= 0.5) {
            data = std::move(d);
            break;
        }
    }
    if (!data) {
        std::ostringstream os;
        os << "branch certificate stays above 1/2 up to x0 = " << 0.5 * opt.half_width << " at lambda = " << lambda;
        fail(ErrorKind::no_contraction, os.str());
    }
    auto vr = iterate(*data, opt);
    auto hs = assemble(spec, f, k, lambda, Side::plus, end, *data, vr);
    check_tail(hs, opt.tol);
    double x0 = data->s.front();
    if (x0 == 0.0) return hs;

    // fill [0, x0] by integrating back from the anchor
    Propagator prop(spec, lambda);
    cplx mu = f.mu[k - 1];
    double sign = end == End::right ? 1.0 : -1.0;
    int extra = std::max(1, static_cast<int>(std::ceil(x0 / h)));
    RVec xs;
    std::vector<Vec4c> ys;
    CVec rs;
    LogVec state = LogVec::from(hs.physical(end == End::right ? 0 : hs.x.size() - 1));
    double xprev = sign * x0, hint = 0.0;
    AdaptiveOptions ao;
    for (int i = extra - 1; i >= 0; --i) {
        double xi = sign * x0 * i / extra;
        state = propagate(prop, state, xprev, xi, ao, hint);
        xprev = xi;
        // remove e^{i mu x} in log form to stay overflow-free
        cplx e = std::exp(-I * mu * xi + state.log_scale);
        Vec4c yi = e * state.v;
        auto [P, Pinv] = f.at(xi);
        xs.push_back(xi);
        ys.push_back(yi);
        rs.push_back(yi(0) - P(0, k - 1));
    }
    // xs runs from the anchor towards 0
    if (end == End::right) {
        std::reverse(xs.begin(), xs.end());
        std::reverse(ys.begin(), ys.end());
        std::reverse(rs.begin(), rs.end());
        hs.x.insert(hs.x.begin(), xs.begin(), xs.end());
        hs.y.insert(hs.y.begin(), ys.begin(), ys.end());
        hs.remainder.insert(hs.remainder.begin(), rs.begin(), rs.end());
    } else {
        hs.x.insert(hs.x.end(), xs.begin(), xs.end());
        hs.y.insert(hs.y.end(), ys.begin(), ys.end());
        hs.remainder.insert(hs.remainder.end(), rs.begin(), rs.end());
    }
    return hs;
}

LambdaSChoice select_lambda_s(const OperatorSpec& spec, double half_width) {
    auto c = derived_constants(spec);
    LambdaSChoice out;
    for (int m = 0; m <= 60; ++m) {
        double lambda = c.h_p + 0.5 * std::pow(2.0, 0.5 * m);
        double kappa = 0.0;
        for (const auto& s : {spec, spec.adjoint()})
            for (End e : {End::right, End::left})
                kappa = std::max(kappa, contraction_certificate(s, lambda, Side::plus, e, 0.0, half_width));
        out.lambdas.push_back(lambda);
        out.certificates.push_back(kappa);
        if (kappa <= 0.25) {
            out.lambda_s = lambda;
            out.certificate = kappa;
            return out;
        }
    }
    fail(ErrorKind::no_contraction, "no lambda on the ladder up to 1e9 meets the certificate");
}

namespace {

LogVec physical_log(const HalfLineSolution& h, std::size_t i) {
    cplx mu = h.mu[h.k - 1];
    double x = h.x[i];
    double n = h.y[i].norm();
    LogVec lv;
    lv.v = h.y[i] / n * std::exp(I * mu.real() * x);
    lv.log_scale = std::log(n) - mu.imag() * x;
    return lv;
}

std::size_t nearest_node(const RVec& x, double xv) {
    auto it = std::lower_bound(x.begin(), x.end(), xv);
    if (it == x.end()) return x.size() - 1;
    std::size_t i = static_cast<std::size_t>(it - x.begin());
    if (i > 0 && std::abs(x[i - 1] - xv) < std::abs(x[i] - xv)) --i;
    return i;
}

LogVec value_near(const Propagator& prop, const HalfLineSolution& h, double xv, const AdaptiveOptions& ao) {
    std::size_t i = nearest_node(h.x, xv);
    double hint = 0.0;
    return propagate(prop, physical_log(h, i), h.x[i], xv, ao, hint);
}

} // namespace

SampledSolution extend_full_line(const OperatorSpec& spec, const HalfLineSolution& half, const RVec& x_grid,
                                 double tol_ode) {
    Propagator prop(spec, half.z);
    AdaptiveOptions ao;
    ao.tol = tol_ode;
    std::size_t n = x_grid.size();
    SampledSolution out;
    out.v.resize(n);
    out.log_scale.resize(n);
    double lo = half.x.front(), hi = half.x.back();
    auto store = [&](std::size_t i, const LogVec& lv) {
        out.v[i] = lv.v;
        out.log_scale[i] = lv.log_scale;
    };
    // inside the half-line: short hop from the nearest node
    for (std::size_t i = 0; i < n; ++i)
        if (x_grid[i] >= lo && x_grid[i] <= hi) store(i, value_near(prop, half, x_grid[i], ao));
    // outside: march away from the normalization end
    double hint = 0.0;
    if (half.end == End::right) {
        std::size_t node = 0;
        LogVec state = physical_log(half, node);
        double x = half.x[node];
        for (std::size_t i = n; i-- > 0;) {
            if (x_grid[i] >= lo) continue;
            state = propagate(prop, state, x, x_grid[i], ao, hint);
            x = x_grid[i];
            store(i, state);
        }
    } else {
        std::size_t node = half.x.size() - 1;
        LogVec state = physical_log(half, node);
        double x = half.x[node];
        for (std::size_t i = 0; i < n; ++i) {
            if (x_grid[i] <= hi) continue;
            state = propagate(prop, state, x, x_grid[i], ao, hint);
            x = x_grid[i];
            store(i, state);
        }
    }
    return out;
}

namespace {

HalfLineSolution conjugate(HalfLineSolution h) {
    h.z = std::conj(h.z);
    h.side = h.side == Side::plus ? Side::minus : Side::plus;
    std::array<cplx, 4> mu{h.mu[0], -h.mu[1], -h.mu[2], h.mu[3]};
    h.mu = mu;
    for (auto& v : h.y) v = v.conjugate();
    for (auto& r : h.remainder) r = std::conj(r);
    for (auto& c : h.coefficients_at_anchor) c = std::conj(c);
    return h;
}

} // namespace

SolutionFamily solve_family(const OperatorSpec& spec, cplx z, Side side, const RVec& x_grid, double lambda_s,
                            const PicardOptions& opt, double tol_ode) {
    auto c = derived_constants(spec);
    bool branch = z.imag() == 0.0 && z.real() >= c.h_p && z.real() < lambda_s;
    SolutionFamily fam;
    fam.z = z;
    fam.side = side;
    fam.x = x_grid;
    fam.branch = branch;
    Propagator prop(spec, z);
    fam.scale = prop.scale();
    AdaptiveOptions ao;
    ao.tol = tol_ode;
    for (int k = 1; k <= 4; ++k) {
        for (End e : {End::right, End::left}) {
            HalfLineSolution h;
            if (branch) {
                // real potentials: the lower boundary value is the conjugate of the upper one
                h = picard_branch(spec, k, z.real(), lambda_s, e, opt);
                if (side == Side::minus) h = conjugate(std::move(h));
            } else {
                h = picard_high(spec, k, z, e, opt, side);
            }
            fam.iterations = std::max(fam.iterations, h.iterations);
            fam.ratios.insert(fam.ratios.end(), h.ratios.begin(), h.ratios.end());
            fam.residual = std::max(fam.residual, h.residual);
            auto sampled = extend_full_line(spec, h, x_grid, tol_ode);
            for (std::size_t p = 0; p < match_points.size(); ++p) {
                Vec4c v = value_near(prop, h, match_points[p], ao).value();
                (e == End::right ? fam.phi_match : fam.chi_match)[p][k - 1] = v;
            }
            if (e == End::right) {
                fam.phi[k - 1] = std::move(sampled);
                fam.r[k - 1] = h.remainder;
                fam.r_nodes[k - 1] = h.x;
            } else {
                fam.chi[k - 1] = std::move(sampled);
                fam.s[k - 1] = h.remainder;
                fam.s_nodes[k - 1] = h.x;
            }
        }
    }
    return fam;
}

ConnectionMatrix connection(const SolutionFamily& fam) {
    double s = fam.scale;
    const std::size_t np = match_points.size();
    Eigen::MatrixXcd A(4 * np, 4), B(4 * np, 4);
    for (std::size_t p = 0; p < np; ++p)
        for (int k = 0; k < 4; ++k)
            for (int r = 0; r < 4; ++r) {
                double w = std::pow(s, -r);
                A(4 * p + r, k) = w * fam.phi_match[p][k](r);
                B(4 * p + r, k) = w * fam.chi_match[p][k](r);
            }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    ConnectionMatrix out;
    out.z = fam.z;
    out.conditioning = sv(3) > 0 ? sv(0) / sv(3) : INFINITY;
    if (!(out.conditioning <= 1e10)) {
        std::ostringstream os;
        os << "fundamental set at z = " << fam.z << " has condition " << out.conditioning;
        fail(ErrorKind::ill_conditioned, os.str());
    }
    out.C = svd.solve(B);
    out.residual = (A * out.C - B).norm() / B.norm();
    return out;
}

namespace {

constexpr char cache_magic[8] = {'S', 'P', 'E', 'C', 'F', 'A', 'M', '\0'};
constexpr std::uint32_t cache_version = 1;

void put(std::ofstream& f, double v) { f.write(reinterpret_cast<const char*>(&v), sizeof v); }
double get(std::ifstream& f) {
    double v = 0.0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

} // namespace

std::string family_key(const std::string& spec_hash, cplx z, Side side, double half_width, double tol) {
    std::ostringstream os;
    os.precision(17);
    os << spec_hash << '|' << z.real() << '|' << z.imag() << '|' << (side == Side::plus ? '+' : '-') << '|'
       << half_width << '|' << tol;
    return os.str();
}

void save_family(const std::filesystem::path& path, const SolutionFamily& fam, const std::string& key) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::domain, "cannot write cache " + path.string());
    f.write(cache_magic, sizeof cache_magic);
    f.write(reinterpret_cast<const char*>(&cache_version), sizeof cache_version);
    std::uint64_t len = key.size(), n = fam.x.size();
    f.write(reinterpret_cast<const char*>(&len), sizeof len);
    f.write(key.data(), static_cast<std::streamsize>(len));
    f.write(reinterpret_cast<const char*>(&n), sizeof n);
    put(f, fam.z.real());
    put(f, fam.z.imag());
    put(f, fam.side == Side::plus ? 1.0 : -1.0);
    put(f, fam.branch ? 1.0 : 0.0);
    for (double x : fam.x) put(f, x);
    for (const auto* group : {&fam.phi, &fam.chi})
        for (const auto& sol : *group)
            for (std::size_t i = 0; i < n; ++i) {
                put(f, sol.log_scale[i]);
                for (int r = 0; r < 4; ++r) {
                    put(f, sol.v[i](r).real());
                    put(f, sol.v[i](r).imag());
                }
            }
    for (const auto* group : {&fam.phi_match, &fam.chi_match})
        for (const auto& row : *group)
            for (const auto& v : row)
                for (int r = 0; r < 4; ++r) {
                    put(f, v(r).real());
                    put(f, v(r).imag());
                }
}

std::optional<SolutionFamily> load_family(const std::filesystem::path& path, const std::string& key) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    char magic[8];
    std::uint32_t ver = 0;
    std::uint64_t len = 0, n = 0;
    f.read(magic, sizeof magic);
    f.read(reinterpret_cast<char*>(&ver), sizeof ver);
    if (!f || std::memcmp(magic, cache_magic, sizeof magic) != 0 || ver != cache_version) return std::nullopt;
    f.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!f || len > (1u << 16)) return std::nullopt;
    std::string stored(len, '\0');
    f.read(stored.data(), static_cast<std::streamsize>(len));
    if (stored != key) return std::nullopt;
    f.read(reinterpret_cast<char*>(&n), sizeof n);
    SolutionFamily fam;
    double re = get(f), im = get(f);
    fam.z = {re, im};
    fam.side = get(f) > 0 ? Side::plus : Side::minus;
    fam.branch = get(f) > 0.5;
    fam.x.resize(n);
    for (auto& x : fam.x) x = get(f);
    for (auto* group : {&fam.phi, &fam.chi})
        for (auto& sol : *group) {
            sol.v.resize(n);
            sol.log_scale.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                sol.log_scale[i] = get(f);
                for (int r = 0; r < 4; ++r) {
                    double a = get(f), b = get(f);
                    sol.v[i](r) = {a, b};
                }
            }
        }
    for (auto* group : {&fam.phi_match, &fam.chi_match})
        for (auto& row : *group)
            for (auto& v : row)
                for (int r = 0; r < 4; ++r) {
                    double a = get(f), b = get(f);
                    v(r) = {a, b};
                }
    if (!f) return std::nullopt;
    return fam;
}

} // namespace specop
