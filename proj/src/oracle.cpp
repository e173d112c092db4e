#include "specop/oracle.hpp"
#include "specop/parallel.hpp"
#include "specop/quadrature.hpp"

#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace specop {

RVec Tridiagonal::apply(std::span<const double> v) const {
    std::size_t n = diag.size();
    RVec out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = diag[i] * v[i];
        if (i > 0) s += off * v[i - 1];
        if (i + 1 < n) s += off * v[i + 1];
        out[i] = s;
    }
    return out;
}

Eigen::MatrixXd Tridiagonal::dense() const {
    int n = static_cast<int>(diag.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, i) = diag[i];
        if (i + 1 < n) m(i, i + 1) = m(i + 1, i) = off;
    }
    return m;
}

namespace {

Tridiagonal fd_operator(const Potential& q, double shift, const Grid& g) {
    double h = g.step();
    Tridiagonal t;
    t.off = -1.0 / (h * h);
    t.diag.resize(g.points);
    for (int i = 0; i < g.points; ++i) t.diag[i] = 2.0 / (h * h) + q.value(g.x(i)) + shift;
    return t;
}

// Eigenvalues (ascending) and, if wanted, eigenvectors of a dense symmetric matrix.
RVec symmetric_eigen(Eigen::MatrixXd& a, bool vectors) {
    int n = static_cast<int>(a.rows());
    RVec w(n);
    int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'U', n, a.data(), n, w.data());
    if (info != 0) fail(ErrorKind::eig_failure, "dsyevd returned " + std::to_string(info));
    return w;
}

Eigen::VectorXd to_eigen(std::span<const double> f) {
    return Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
}

RVec to_rvec(const Eigen::VectorXd& v) { return RVec(v.data(), v.data() + v.size()); }

std::vector<int> modes_in(const GridOperator& go, const IntervalUnion& b) {
    std::vector<int> idx;
    const auto& lv = go.lambda_values();
    for (int k = 0; k < static_cast<int>(lv.size()); ++k)
        if (b.contains(lv[k])) idx.push_back(k);
    return idx;
}

} // namespace

GridOperator GridOperator::build(const OperatorSpec& spec, double half_width, int points) {
    validate(spec);
    if (points < 200 || half_width < 10.0) {
        std::ostringstream os;
        os << "oracle grid needs N >= 200 and X >= 10 (got N=" << points << ", X=" << half_width << ")";
        fail(ErrorKind::domain, os.str());
    }
    GridOperator go;
    go.spec_ = spec;
    go.grid_ = {half_width, points};
    go.d1_ = fd_operator(spec.q1, spec.h1, go.grid_);
    go.d2_ = fd_operator(spec.q2, spec.h2, go.grid_);

    Eigen::MatrixXd u = go.d2_.dense();
    go.d2_values_ = symmetric_eigen(u, true);
    if (go.d2_values_.front() <= 0.0) {
        std::ostringstream os;
        os << "grid operator D2 has smallest eigenvalue " << go.d2_values_.front();
        fail(ErrorKind::non_positive_d2, os.str());
    }
    Eigen::VectorXd sq(points), isq(points);
    for (int i = 0; i < points; ++i) {
        sq(i) = std::sqrt(go.d2_values_[i]);
        isq(i) = 1.0 / sq(i);
    }
    go.s_.noalias() = (u * sq.asDiagonal()) * u.transpose();
    go.s_inv_.noalias() = (u * isq.asDiagonal()) * u.transpose();
    u.resize(0, 0);

    Eigen::MatrixXd d1s(points, points);
    for (int j = 0; j < points; ++j) {
        auto col = go.d1_.apply(std::span<const double>(go.s_.col(j).data(), points));
        d1s.col(j) = Eigen::Map<Eigen::VectorXd>(col.data(), points);
    }
    go.lambda_.noalias() = go.s_ * d1s;
    go.lambda_ = 0.5 * (go.lambda_ + go.lambda_.transpose()).eval();
    go.lambda_vectors_ = go.lambda_;
    go.lambda_values_ = symmetric_eigen(go.lambda_vectors_, true);
    return go;
}

double GridOperator::cond_S() const noexcept { return std::sqrt(d2_values_.back() / d2_values_.front()); }

Eigen::MatrixXd GridOperator::dense_L() const {
    int n = grid_.points;
    auto band = band_L();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int d = -2; d <= 2; ++d)
            if (i + d >= 0 && i + d < n) m(i, i + d) = band[d + 2][i];
    return m;
}

Eigen::MatrixXd GridOperator::dense_Lstar() const {
    // D1 D2, assembled independently of L_h.
    return d1_.dense() * d2_.dense();
}

std::array<RVec, 5> GridOperator::band_L() const {
    int n = grid_.points;
    const auto& a = d1_.diag;
    const auto& b = d2_.diag;
    double o2 = d2_.off, o1 = d1_.off;
    std::array<RVec, 5> band;
    for (auto& v : band) v.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double diag = b[i] * a[i];
        if (i > 0) diag += o2 * o1;
        if (i + 1 < n) diag += o2 * o1;
        band[2][i] = diag;
        if (i + 1 < n) band[3][i] = b[i] * o1 + o2 * a[i + 1];
        if (i > 0) band[1][i] = b[i] * o1 + o2 * a[i - 1];
        if (i + 2 < n) band[4][i] = o2 * o1;
        if (i >= 2) band[0][i] = o2 * o1;
    }
    return band;
}

RVec GridOperator::apply_L(std::span<const double> f) const { return d2_.apply(d1_.apply(f)); }
RVec GridOperator::apply_Lstar(std::span<const double> f) const { return d1_.apply(d2_.apply(f)); }
RVec GridOperator::apply_S(std::span<const double> f) const { return to_rvec(s_ * to_eigen(f)); }
RVec GridOperator::apply_S_inv(std::span<const double> f) const { return to_rvec(s_inv_ * to_eigen(f)); }

OracleSpectrum oracle_spectrum(const GridOperator& go) {
    OracleSpectrum sp;
    int n = go.grid().points;
    Eigen::MatrixXd l = go.dense_L();
    sp.norm_L = l.norm();
    RVec wr(n), wi(n);
    int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, l.data(), n, wr.data(), wi.data(), nullptr, 1,
                             nullptr, 1);
    if (info != 0) fail(ErrorKind::eig_failure, "dgeev returned " + std::to_string(info));
    sp.eig_L.resize(n);
    for (int i = 0; i < n; ++i) sp.eig_L[i] = {wr[i], wi[i]};
    std::sort(sp.eig_L.begin(), sp.eig_L.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
    sp.eig_Lambda = go.lambda_values();
    double scale = 0.0;
    for (double v : sp.eig_Lambda) scale = std::max(scale, std::abs(v));
    for (int i = 0; i < n; ++i) {
        sp.max_imag = std::max(sp.max_imag, std::abs(sp.eig_L[i].imag()));
        sp.max_rel_deviation = std::max(sp.max_rel_deviation, std::abs(sp.eig_L[i] - sp.eig_Lambda[i]) / scale);
    }
    return sp;
}

double similarity_residual(const GridOperator& go) {
    Eigen::MatrixXd l = go.dense_L();
    Eigen::MatrixXd t = go.Lambda() * go.S_inv();
    Eigen::MatrixXd r = go.S() * t;
    return (l - r).norm() / l.norm();
}

double adjoint_residual(const GridOperator& go) {
    Eigen::MatrixXd l = go.dense_L();
    return (go.dense_Lstar() - l.transpose()).norm() / l.norm();
}

CVec oracle_resolvent(const GridOperator& go, cplx z, std::span<const cplx> f) {
    double dist = INFINITY;
    for (double v : go.lambda_values()) dist = std::min(dist, std::abs(z - v));
    if (dist < 1e-6) {
        std::ostringstream os;
        os << "z = " << z << " is within " << dist << " of an eigenvalue of L_h";
        fail(ErrorKind::near_spectrum, os.str());
    }
    int n = go.grid().points;
    const int kl = 2, ku = 2, ldab = 2 * kl + ku + 1;
    auto band = go.band_L();
    std::vector<lapack_complex_double> ab(static_cast<std::size_t>(ldab) * n);
    auto at = [&](int i, int j) -> lapack_complex_double& { return ab[(kl + ku + i - j) + static_cast<std::size_t>(j) * ldab]; };
    for (int i = 0; i < n; ++i)
        for (int d = -2; d <= 2; ++d) {
            int j = i + d;
            if (j < 0 || j >= n) continue;
            cplx v = band[d + 2][i];
            if (d == 0) v -= z;
            at(i, j) = v;
        }
    CVec rhs(f.begin(), f.end());
    std::vector<lapack_int> ipiv(n);
    int info = LAPACKE_zgbsv(LAPACK_COL_MAJOR, n, kl, ku, 1, ab.data(), ldab, ipiv.data(),
                             reinterpret_cast<lapack_complex_double*>(rhs.data()), n);
    if (info != 0) fail(ErrorKind::near_spectrum, "banded solve failed with info " + std::to_string(info));
    return rhs;
}

CVec oracle_resolvent(const GridOperator& go, cplx z, std::span<const double> f) {
    CVec fc(f.begin(), f.end());
    return oracle_resolvent(go, z, std::span<const cplx>(fc));
}

CVec resolvent_by_similarity(const GridOperator& go, cplx z, std::span<const double> f) {
    Eigen::VectorXd g = go.S_inv() * to_eigen(f);
    Eigen::VectorXd cr = go.lambda_vectors().transpose() * g;
    const auto& lv = go.lambda_values();
    Eigen::VectorXd re(cr.size()), im(cr.size());
    for (Eigen::Index k = 0; k < cr.size(); ++k) {
        cplx c = cr(k) / (lv[k] - z);
        re(k) = c.real();
        im(k) = c.imag();
    }
    Eigen::VectorXd ur = go.S() * (go.lambda_vectors() * re);
    Eigen::VectorXd ui = go.S() * (go.lambda_vectors() * im);
    CVec out(ur.size());
    for (Eigen::Index i = 0; i < ur.size(); ++i) out[i] = {ur(i), ui(i)};
    return out;
}

RVec oracle_projection(const GridOperator& go, const IntervalUnion& b, std::span<const double> f) {
    auto idx = modes_in(go, b);
    int n = go.grid().points;
    if (idx.empty()) return RVec(n, 0.0);
    Eigen::VectorXd g = go.S_inv() * to_eigen(f);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    const auto& v = go.lambda_vectors();
    for (int k : idx) acc += v.col(k).dot(g) * v.col(k);
    return to_rvec(go.S() * acc);
}

double projection_norm(const GridOperator& go, const IntervalUnion& b) {
    auto idx = modes_in(go, b);
    if (idx.empty()) return 0.0;
    int n = go.grid().points, m = static_cast<int>(idx.size());
    Eigen::MatrixXd vb(n, m);
    for (int j = 0; j < m; ++j) vb.col(j) = go.lambda_vectors().col(idx[j]);
    Eigen::MatrixXd d2vb(n, m);
    for (int j = 0; j < m; ++j) {
        auto c = go.d2().apply(std::span<const double>(vb.col(j).data(), n));
        d2vb.col(j) = Eigen::Map<Eigen::VectorXd>(c.data(), n);
    }
    Eigen::MatrixXd g1 = vb.transpose() * d2vb;
    Eigen::MatrixXd siv = go.S_inv() * vb;
    Eigen::MatrixXd g2 = siv.transpose() * siv;
    Eigen::LLT<Eigen::MatrixXd> llt(g1);
    Eigen::MatrixXd lm = llt.matrixL();
    Eigen::MatrixXd sym = lm.transpose() * g2 * lm;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

RVec stone_closed_form(const GridOperator& go, double a, double b, double eps, std::span<const double> f) {
    int n = go.grid().points;
    Eigen::VectorXd g = go.S_inv() * to_eigen(f);
    Eigen::VectorXd c = go.lambda_vectors().transpose() * g;
    const auto& lv = go.lambda_values();
    for (int k = 0; k < n; ++k) c(k) *= (std::atan((b - lv[k]) / eps) - std::atan((a - lv[k]) / eps)) / pi;
    return to_rvec(go.S() * (go.lambda_vectors() * c));
}

StoneReport stone_check(const GridOperator& go, double a, double b, std::span<const double> eps_list,
                        std::span<const double> f) {
    const auto& lv = go.lambda_values();
    for (double v : lv)
        if (std::abs(v - a) < 1e-4 || std::abs(v - b) < 1e-4) {
            std::ostringstream os;
            os << "eigenvalue " << v << " of L_h within 1e-4 of an endpoint of [" << a << ", " << b << "]";
            fail(ErrorKind::endpoint_on_spectrum, os.str());
        }
    double h = go.grid().step();
    int n = go.grid().points;
    StoneReport rep;
    rep.a = a;
    rep.b = b;
    rep.f_norm = norm(f, h);
    RVec reference = oracle_projection(go, IntervalUnion::single(a, b), f);
    auto rule = gauss_legendre(8);
    for (double eps : eps_list) {
        // Panels graded geometrically around every eigenvalue near [a, b].
        RVec cuts{a, b};
        for (double c : lv) {
            if (c < a - 1.0 || c > b + 1.0) continue;
            if (c > a && c < b) cuts.push_back(c);
            for (double d = eps; d < 2.0 * (b - a); d *= 2.0) {
                if (c - d > a && c - d < b) cuts.push_back(c - d);
                if (c + d > a && c + d < b) cuts.push_back(c + d);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double x, double y) { return y - x < 1e-14; }),
                   cuts.end());
        std::vector<std::pair<double, double>> nodes;
        for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
            double mid = 0.5 * (cuts[p] + cuts[p + 1]), half = 0.5 * (cuts[p + 1] - cuts[p]);
            for (std::size_t q = 0; q < rule.nodes.size(); ++q)
                nodes.emplace_back(mid + half * rule.nodes[q], half * rule.weights[q]);
        }
        std::vector<RVec> parts(nodes.size());
        parallel_for(nodes.size(), [&](std::size_t q) {
            auto r = oracle_resolvent(go, cplx(nodes[q].first, eps), f);
            parts[q].resize(n);
            // (R(l+ie) - R(l-ie)) f / (2 pi i) = Im R(l+ie) f / pi for real L_h and f
            for (int i = 0; i < n; ++i) parts[q][i] = nodes[q].second * r[i].imag() / pi;
        });
        RVec acc(n, 0.0);
        for (const auto& p : parts)
            for (int i = 0; i < n; ++i) acc[i] += p[i];
        RVec exact = stone_closed_form(go, a, b, eps, f);
        rep.rows.push_back({eps, distance(acc, reference, h), distance(acc, exact, h), static_cast<int>(nodes.size())});
    }
    rep.decreasing = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        if (!(rep.rows[i].error < rep.rows[i - 1].error)) rep.decreasing = false;
    return rep;
}

QuasiSelfadjointReport quasi_selfadjoint_diag(const GridOperator& go, int samples, std::uint64_t seed) {
    QuasiSelfadjointReport rep;
    rep.cond_S = go.cond_S();
    rep.samples = samples;
    const auto& lv = go.lambda_values();
    std::mt19937_64 rng(seed);
    double lo = lv.front() - 1.0, hi = lv.front() + 60.0;
    std::uniform_real_distribution<double> ends(lo, hi);
    std::uniform_int_distribution<int> count(1, 3);
    std::vector<IntervalUnion> sets(samples);
    for (auto& s : sets) {
        std::vector<Interval> parts;
        int m = count(rng);
        for (int i = 0; i < m; ++i) {
            double x = ends(rng), y = ends(rng);
            parts.push_back({std::min(x, y), std::max(x, y)});
        }
        s = IntervalUnion(std::move(parts));
    }
    RVec norms(samples);
    parallel_for(samples, [&](std::size_t i) { norms[i] = projection_norm(go, sets[i]); });
    rep.max_norm = *std::max_element(norms.begin(), norms.end());
    rep.bound_holds = rep.max_norm <= rep.cond_S * (1.0 + 1e-8);
    double gap_mid = 0.5 * (lv[0] + lv[1]);
    rep.off_spectrum_norm = projection_norm(go, IntervalUnion::single(gap_mid, gap_mid));
    return rep;
}

double outer_mass(const GridOperator& go, int k) {
    const auto& g = go.grid();
    double mass = 0.0, total = 0.0;
    for (int i = 0; i < g.points; ++i) {
        double v = go.lambda_vectors()(i, k);
        total += v * v;
        if (std::abs(g.x(i)) > 0.9 * g.half_width) mass += v * v;
    }
    return mass / total;
}

int near_kernel_dimension(const GridOperator& go) {
    RVec d = go.d1().diag;
    RVec e(d.size() - 1, go.d1().off);
    int info = LAPACKE_dstev(LAPACK_COL_MAJOR, 'N', static_cast<int>(d.size()), d.data(), e.data(), nullptr, 1);
    if (info != 0) fail(ErrorKind::eig_failure, "dstev returned " + std::to_string(info));
    double scale = std::max(std::abs(d.front()), std::abs(d.back()));
    return static_cast<int>(std::count_if(d.begin(), d.end(), [&](double v) { return std::abs(v) <= 1e-4 * scale; }));
}

double min_eigenvalue_d2(const OperatorSpec& spec, double half_width, int points) {
    Grid g{half_width, points};
    auto t = fd_operator(spec.q2, spec.h2, g);
    RVec d = t.diag;
    RVec e(points - 1, t.off);
    lapack_int m = 0;
    double w[1];
    std::vector<lapack_int> support(2);
    int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'N', 'I', points, d.data(), e.data(), 0.0, 0.0, 1, 1, 0.0, &m, w,
                              nullptr, 1, support.data());
    if (info != 0 || m != 1) fail(ErrorKind::eig_failure, "dstevr returned " + std::to_string(info));
    return w[0];
}

double nearest_eigenvalue(const OperatorSpec& spec, double half_width, int points, double shift) {
    Grid g{half_width, points};
    auto d1 = fd_operator(spec.q1, spec.h1, g);
    auto d2 = fd_operator(spec.q2, spec.h2, g);
    int n = points;
    const int kl = 2, ku = 2, ldab = 2 * kl + ku + 1;
    std::vector<double> ab(static_cast<std::size_t>(ldab) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = std::max(0, i - 2); j <= std::min(n - 1, i + 2); ++j) {
            double v = 0.0;
            for (int k = std::max({0, i - 1, j - 1}); k <= std::min({n - 1, i + 1, j + 1}); ++k) {
                double a = (i == k) ? d2.diag[i] : d2.off;
                double b = (k == j) ? d1.diag[k] : d1.off;
                v += a * b;
            }
            if (i == j) v -= shift;
            ab[(kl + ku + i - j) + static_cast<std::size_t>(j) * ldab] = v;
        }
    }
    std::vector<lapack_int> ipiv(n);
    if (LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kl, ku, ab.data(), ldab, ipiv.data()) != 0)
        fail(ErrorKind::eig_failure, "shift coincides with an eigenvalue");
    RVec v(n, 1.0);
    double lambda = shift, prev = INFINITY;
    for (int it = 0; it < 200; ++it) {
        LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kl, ku, 1, ab.data(), ldab, ipiv.data(), v.data(), n);
        double s = 0.0;
        for (double x : v) s += x * x;
        s = 1.0 / std::sqrt(s);
        for (double& x : v) x *= s;
        RVec d1v = d1.apply(v);
        RVec dd(d2.diag), ee(n - 1, d2.off), w(v);
        LAPACKE_dptsv(LAPACK_COL_MAJOR, n, 1, dd.data(), ee.data(), w.data(), n);
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            num += v[i] * d1v[i];
            den += v[i] * w[i];
        }
        lambda = num / den;
        if (std::abs(lambda - prev) <= 1e-15 * std::max(1.0, std::abs(lambda))) break;
        prev = lambda;
    }
    return lambda;
}

} // namespace specop
