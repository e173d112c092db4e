#include "specop/green.hpp"

#include "specop/parallel.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

namespace specop {

namespace {

// Largest |generator| * step per Magnus substep.
constexpr double max_phase = 0.15;

struct QR2 {
    Mat42c q;
    Mat2c r;
};

// Thin QR of a 4x2 block by Gram-Schmidt with one reorthogonalization pass.
QR2 thin_qr(const Mat42c& a) {
    QR2 out;
    out.r.setZero();
    double n1 = a.col(0).norm();
    out.q.col(0) = a.col(0) / n1;
    out.r(0, 0) = n1;
    Vec4c v = a.col(1);
    for (int pass = 0; pass < 2; ++pass) {
        cplx p = out.q.col(0).dot(v);
        v -= p * out.q.col(0);
        out.r(0, 1) += p;
    }
    double n2 = v.norm();
    out.q.col(1) = v / n2;
    out.r(1, 1) = n2;
    return out;
}

// R^{-1} v for an upper triangular 2x2 R.
Vec2c upper_solve(const Mat2c& r, const Vec2c& v) {
    Vec2c out;
    out(1) = v(1) / r(1, 1);
    out(0) = (v(0) - r(0, 1) * out(1)) / r(0, 0);
    return out;
}

cplx log_det(const Mat2c& r) { return std::log(r(0, 0)) + std::log(r(1, 1)); }

Vec4c unscale(const Vec4c& v, double s) {
    Vec4c out = v;
    double f = 1.0;
    for (int j = 1; j < 4; ++j) {
        f *= s;
        out(j) *= f;
    }
    return out;
}

int substeps(double h, double s) { return std::max(1, static_cast<int>(std::ceil(h * s / max_phase))); }

} // namespace

StepTable StepTable::build(const OperatorSpec& spec, const Grid& grid) {
    StepTable t;
    t.grid = grid;
    int n = grid.points - 1;
    t.r1.resize(n);
    t.r2.resize(n);
    for (int i = 0; i < n; ++i) {
        auto g = Propagator::gauss_points(grid.x(i), grid.step());
        t.r1[i] = perturbation_row(g[0], spec);
        t.r2[i] = perturbation_row(g[1], spec);
    }
    return t;
}

GreenData GreenData::build(const OperatorSpec& spec, cplx z, Side side, const Grid& grid, const StepTable* table) {
    auto c = derived_constants(spec);
    RootSystem rs = roots_for(z, c, side);
    GreenData g;
    g.spec_ = spec;
    g.grid_ = grid;
    g.z_ = z;
    g.side_ = side;
    g.mu_ = rs.mu;
    g.det_pi_ = rs.Pi.determinant();

    Propagator p(spec, z);
    g.s_ = p.scale();
    const int n = grid.points;
    const double h = grid.step();
    const int m = substeps(h, g.s_);
    bool use_table = table != nullptr && m == 1 && table->grid.points == n && table->grid.half_width == grid.half_width;

    std::vector<Mat4c> fwd(n - 1), bwd(n - 1);
    for (int i = 0; i < n - 1; ++i) {
        if (use_table) {
            Mat4c om = p.omega(table->r1[i], table->r2[i], h);
            fwd[i] = om.exp();
            bwd[i] = Mat4c(-om).exp();
            continue;
        }
        Mat4c f = Mat4c::Identity(), b = Mat4c::Identity();
        double dx = h / m;
        for (int k = 0; k < m; ++k) {
            auto gp = Propagator::gauss_points(grid.x(i) + k * dx, dx);
            Mat4c om = p.omega(perturbation_row(gp[0], spec), perturbation_row(gp[1], spec), dx);
            f = Mat4c(om.exp()) * f;
            b = b * Mat4c(-om).exp();
        }
        fwd[i] = f;
        bwd[i] = b;
    }

    Eigen::Matrix<cplx, 4, 4> tinv = Mat4c::Identity();
    for (int j = 1; j < 4; ++j) tinv(j, j) = 1.0 / std::pow(g.s_, j);

    g.q_right_.resize(n);
    g.r_right_.assign(n, Mat2c::Identity());
    g.logdet_right_.resize(n);
    {
        Mat42c start;
        start << rs.Pi.col(0), rs.Pi.col(1);
        QR2 qr = thin_qr(tinv * start);
        double xe = grid.x(n - 1);
        g.q_right_[n - 1] = qr.q;
        g.logdet_right_[n - 1] = log_det(qr.r) + I * (rs.mu[0] + rs.mu[1]) * xe;
        for (int i = n - 2; i >= 0; --i) {
            QR2 step = thin_qr(bwd[i] * g.q_right_[i + 1]);
            g.q_right_[i] = step.q;
            g.r_right_[i] = step.r;
            g.logdet_right_[i] = g.logdet_right_[i + 1] + log_det(step.r);
        }
    }
    g.q_left_.resize(n);
    g.r_left_.assign(n, Mat2c::Identity());
    g.logdet_left_.resize(n);
    {
        Mat42c start;
        start << rs.Pi.col(2), rs.Pi.col(3);
        QR2 qr = thin_qr(tinv * start);
        double xs = grid.x(0);
        g.q_left_[0] = qr.q;
        g.logdet_left_[0] = log_det(qr.r) + I * (rs.mu[2] + rs.mu[3]) * xs;
        for (int i = 1; i < n; ++i) {
            QR2 step = thin_qr(fwd[i - 1] * g.q_left_[i - 1]);
            g.q_left_[i] = step.q;
            g.r_left_[i] = step.r;
            g.logdet_left_[i] = g.logdet_left_[i - 1] + log_det(step.r);
        }
    }

    // Scaled jump of the state across the source is e4 / s^3.
    g.jump_c_.resize(n);
    g.jump_d_.resize(n);
    Vec4c rhs = Vec4c::Zero();
    rhs(3) = 1.0 / (g.s_ * g.s_ * g.s_);
    for (int i = 0; i < n; ++i) {
        Mat4c a;
        a << g.q_right_[i], -g.q_left_[i];
        Vec4c cd = a.partialPivLu().solve(rhs);
        g.jump_c_[i] = cd.head<2>();
        g.jump_d_[i] = cd.tail<2>();
    }
    return g;
}

cplx GreenData::W_at(int i) const {
    Mat4c a;
    a << q_right_[i], q_left_[i];
    return std::pow(s_, 6) * a.determinant() * std::exp(logdet_right_[i] + logdet_left_[i]) / det_pi_;
}

void GreenData::require_regular() const {
    cplx w = W();
    if (!(std::abs(w) > w_floor)) {
        std::ostringstream os;
        os << "|W(" << z_ << ")| = " << std::abs(w) << " <= " << w_floor;
        fail(ErrorKind::near_singular_w, os.str());
    }
}

std::vector<Vec4c> GreenData::column_vectors(int n) const {
    require_regular();
    const int np = grid_.points;
    std::vector<Vec4c> out(np);
    Vec2c c = jump_c_[n];
    out[n] = unscale(q_right_[n] * c, s_);
    for (int m = n + 1; m < np; ++m) {
        c = upper_solve(r_right_[m - 1], c);
        out[m] = unscale(q_right_[m] * c, s_);
    }
    Vec2c d = jump_d_[n];
    for (int m = n - 1; m >= 0; --m) {
        d = upper_solve(r_left_[m + 1], d);
        out[m] = unscale(q_left_[m] * d, s_);
    }
    return out;
}

CVec GreenData::column(int n) const {
    require_regular();
    const int np = grid_.points;
    CVec out(np);
    Vec2c c = jump_c_[n];
    out[n] = q_right_[n].row(0) * c;
    for (int m = n + 1; m < np; ++m) {
        c = upper_solve(r_right_[m - 1], c);
        out[m] = q_right_[m].row(0) * c;
    }
    Vec2c d = jump_d_[n];
    for (int m = n - 1; m >= 0; --m) {
        d = upper_solve(r_left_[m + 1], d);
        out[m] = q_left_[m].row(0) * d;
    }
    return out;
}

cplx GreenData::kernel(int m, int n) const {
    require_regular();
    if (m >= n) {
        Vec2c c = jump_c_[n];
        for (int k = n + 1; k <= m; ++k) c = upper_solve(r_right_[k - 1], c);
        return q_right_[m].row(0) * c;
    }
    Vec2c d = jump_d_[n];
    for (int k = n - 1; k >= m; --k) d = upper_solve(r_left_[k + 1], d);
    return q_left_[m].row(0) * d;
}

CVec GreenData::apply(std::span<const cplx> f) const {
    require_regular();
    const int np = grid_.points;
    const double h = grid_.step();
    CVec out(np);
    Vec2c acc = Vec2c::Zero();
    for (int m = 0; m < np; ++m) {
        if (m > 0) acc = upper_solve(r_right_[m - 1], acc);
        acc += jump_c_[m] * f[m];
        out[m] = h * cplx(q_right_[m].row(0) * acc);
    }
    acc.setZero();
    for (int m = np - 2; m >= 0; --m) {
        acc = upper_solve(r_left_[m + 1], Vec2c(acc + jump_d_[m + 1] * f[m + 1]));
        out[m] += h * cplx(q_left_[m].row(0) * acc);
    }
    return out;
}

GreenData fundamental_matrix(const OperatorSpec& spec, cplx z, Side side, const Grid& grid) {
    return GreenData::build(spec, z, side, grid);
}

Mat4c theta_at_origin(const OperatorSpec& spec, cplx z, Side side, double lambda_s) {
    auto rs = roots_for(z, derived_constants(spec), side);
    SolutionFamily fam = solve_family(spec, z, side, {}, lambda_s, PicardOptions{});
    Mat4c phi;
    phi << fam.phi_match[0][0], fam.phi_match[0][1], fam.chi_match[0][2], fam.chi_match[0][3];
    return rs.PiInv * phi - Mat4c::Identity();
}

cplx W_value(const OperatorSpec& spec, cplx z, Side side, const Grid& grid) {
    return GreenData::build(spec, z, side, grid).W();
}

cplx green_kernel(const OperatorSpec& spec, cplx z, int m, int n, const Grid& grid) {
    return GreenData::build(spec, z, Side::plus, grid).kernel(m, n);
}

bool in_M(double lambda, cplx w_plus, cplx w_minus, int n, const DerivedConstants& c) {
    double floor = 1.0 / (2.0 * n);
    return lambda > c.h_p && std::abs(w_plus) > floor && std::abs(w_minus) > floor;
}

cplx jump_kernel(const OperatorSpec& spec, double lambda, int m, int n, const Grid& grid, int n_index) {
    auto c = derived_constants(spec);
    if (!(lambda > c.h_p)) fail(ErrorKind::excluded_lambda, "lambda at or below h_p has no jump");
    GreenData gp = GreenData::build(spec, lambda, Side::plus, grid);
    GreenData gm = GreenData::build(spec, lambda, Side::minus, grid);
    if (!in_M(lambda, gp.W(), gm.W(), n_index, c)) {
        std::ostringstream os;
        os << "lambda = " << lambda << " is outside M_" << n_index;
        fail(ErrorKind::excluded_lambda, os.str());
    }
    return gp.kernel(m, n) - gm.kernel(m, n);
}

EpsJump jump_kernel_eps(const OperatorSpec& spec, double lambda, int m, int n, const Grid& grid) {
    constexpr std::array<double, 3> eps{1e-2, 1e-3, 1e-4};
    EpsJump out;
    for (int k = 0; k < 3; ++k) {
        cplx up = GreenData::build(spec, cplx(lambda, eps[k]), Side::plus, grid).kernel(m, n);
        cplx down = GreenData::build(spec, cplx(lambda, -eps[k]), Side::plus, grid).kernel(m, n);
        out.by_eps[k] = up - down;
    }
    // J(eps) = J(0) + O(eps): linear extrapolation through the two smallest eps
    out.extrapolated = (eps[1] * out.by_eps[2] - eps[2] * out.by_eps[1]) / (eps[1] - eps[2]);
    return out;
}

std::vector<WSample> W_sweep(const OperatorSpec& spec, const RVec& lambdas, const Grid& grid, int n_index) {
    auto c = derived_constants(spec);
    StepTable table = StepTable::build(spec, grid);
    std::vector<WSample> out(lambdas.size());
    parallel_for(lambdas.size(), [&](std::size_t k) {
        double l = lambdas[k];
        cplx wp = GreenData::build(spec, l, Side::plus, grid, &table).W();
        cplx wm = l > c.h_p ? GreenData::build(spec, l, Side::minus, grid, &table).W() : wp;
        out[k] = {l, wp, wm, in_M(l, wp, wm, n_index, c)};
    });
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// Incommensurate, so sin(nu x) cannot vanish at all of them for nu below ~12.
constexpr std::array<double, 6> sample_points{-2.3, -1.1, -0.35, 0.35, 1.1, 2.3};

// Sign gauge: positive at the node nearest 0, or at the first node whose
// modulus exceeds half the maximum when the value at 0 is negligible.
double gauge_sign(const Eigen::VectorXd& v, const Grid& g) {
    double peak = v.cwiseAbs().maxCoeff();
    double at0 = v(g.nearest(0.0));
    if (std::abs(at0) > 1e-3 * peak) return at0 > 0 ? 1.0 : -1.0;
    for (int i = 0; i < v.size(); ++i)
        if (std::abs(v(i)) > 0.5 * peak) return v(i) > 0 ? 1.0 : -1.0;
    return 1.0;
}

Eigen::MatrixXd imag_columns(const GreenData& g, const std::vector<int>& nodes) {
    Eigen::MatrixXd out(g.grid().points, static_cast<long>(nodes.size()));
    for (std::size_t c = 0; c < nodes.size(); ++c) {
        CVec col = g.column(nodes[c]);
        for (int m = 0; m < g.grid().points; ++m) out(m, static_cast<long>(c)) = col[m].imag() / pi;
    }
    return out;
}

// Least-squares expansion of a 4-vector pair (at the two match nodes) in a
// basis of four solutions, rows balanced by s^{-r}.
Vec4c expand(const std::array<Vec4c, 2>& target, const std::array<SampledSolution, 4>& basis, double s) {
    Eigen::Matrix<cplx, 8, 4> a;
    Eigen::Matrix<cplx, 8, 1> b;
    for (int p = 0; p < 2; ++p) {
        double f = 1.0;
        for (int r = 0; r < 4; ++r) {
            for (int l = 0; l < 4; ++l) a(4 * p + r, l) = basis[l].at(p)(r) / f;
            b(4 * p + r) = target[p](r) / f;
            f *= s;
        }
    }
    return a.colPivHouseholderQr().solve(b);
}

} // namespace

JumpSolver::JumpSolver(const OperatorSpec& spec, const Grid& grid)
    : spec_(spec), grid_(grid), table_(StepTable::build(spec, grid)),
      table_star_(StepTable::build(spec.adjoint(), grid)) {
    for (double t : sample_points) samples_.push_back(grid.nearest(t));
}

RVec JumpSolver::kernel_column(double lambda, int n) const {
    GreenData g = GreenData::build(spec_, lambda, Side::plus, grid_, &table_);
    CVec col = g.column(n);
    RVec out(col.size());
    for (std::size_t m = 0; m < col.size(); ++m) out[m] = col[m].imag() / pi;
    return out;
}

JumpFactorization JumpSolver::factor(double lambda, const JumpOptions& opt) const {
    auto c = derived_constants(spec_);
    if (!(lambda > c.h_p)) fail(ErrorKind::excluded_lambda, "lambda at or below h_p has no jump");
    GreenData gp = GreenData::build(spec_, lambda, Side::plus, grid_, &table_);
    JumpFactorization out;
    out.lambda = lambda;
    out.w_plus = gp.W();
    // real coefficients: G(lambda - i0) = conj G(lambda + i0)
    out.w_minus = std::conj(out.w_plus);
    if (!in_M(lambda, out.w_plus, out.w_minus, opt.n_index, c)) {
        std::ostringstream os;
        os << "lambda = " << lambda << " is outside M_" << opt.n_index << " (|W| = " << std::abs(out.w_plus) << ")";
        fail(ErrorKind::excluded_lambda, os.str());
    }
    GreenData gs = GreenData::build(spec_.adjoint(), lambda, Side::plus, grid_, &table_star_);

    // K(., t_c) from L, and K(x_r, .) = K_{L*}(., x_r) from the adjoint
    Eigen::MatrixXd cols = imag_columns(gp, samples_);
    Eigen::MatrixXd rows = imag_columns(gs, samples_);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd_c(cols, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_r(rows, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sc = svd_c.singularValues();
    out.rank3_ratio = sc(2) / sc(0);
    if (!(sc(1) > 1e-6 * sc(0))) {
        std::ostringstream os;
        os << "jump kernel at lambda = " << lambda << " has sigma2/sigma1 = " << sc(1) / sc(0);
        fail(ErrorKind::rank_deficient, os.str());
    }
    Eigen::MatrixXd u = svd_c.matrixU().leftCols(2);
    Eigen::MatrixXd v = svd_r.matrixU().leftCols(2);
    Eigen::MatrixXd vs(6, 2);
    for (int k = 0; k < 6; ++k) vs.row(k) = v.row(samples_[k]);
    Eigen::Matrix2d core = u.transpose() * cols * vs * (vs.transpose() * vs).inverse();
    Eigen::JacobiSVD<Eigen::Matrix2d> svd_s(core, Eigen::ComputeFullU | Eigen::ComputeFullV);

    // Each factor as a combination of the sampled columns (rows), for the coefficient fit.
    Eigen::MatrixXd col_weights(6, 2), row_weights(6, 2);
    out.sigma = {svd_s.singularValues()(0), svd_s.singularValues()(1)};
    for (int j = 0; j < 2; ++j) {
        double root = std::sqrt(svd_s.singularValues()(j));
        Eigen::VectorXd f = root * (u * svd_s.matrixU().col(j));
        Eigen::VectorXd fs = root * (v * svd_s.matrixV().col(j));
        double sign = gauge_sign(f, grid_);
        f *= sign;
        fs *= sign;
        out.phi[j].assign(f.data(), f.data() + f.size());
        out.phi_star[j].assign(fs.data(), fs.data() + fs.size());
        // u = cols * V_c * Sigma_c^{-1} on the leading pair
        Eigen::Vector2d a = sign * root * svd_s.matrixU().col(j);
        Eigen::Vector2d b = sign * root * svd_s.matrixV().col(j);
        col_weights.col(j) = svd_c.matrixV().leftCols(2) * sc.head(2).cwiseInverse().asDiagonal() * a;
        row_weights.col(j) = svd_r.matrixV().leftCols(2) *
                             svd_r.singularValues().head(2).cwiseInverse().asDiagonal() * b;
    }

    if (!opt.coefficients) return out;

    std::array<int, 2> match{grid_.nearest(match_points[0]), grid_.nearest(match_points[1])};
    RVec xm{grid_.x(match[0]), grid_.x(match[1])};
    if (match[1] == match[0]) xm[1] = grid_.x(std::min(match[0] + 1, grid_.points - 1)), match[1] = match[0] + 1;
    PicardOptions popt;
    popt.half_width = std::max(popt.half_width, grid_.half_width);

    auto fit = [&](const OperatorSpec& sp, const GreenData& g, const Eigen::MatrixXd& weights,
                   std::array<Vec4c, 2>& alpha, std::array<Vec4c, 2>& beta) {
        SolutionFamily fam = solve_family(sp, lambda, Side::plus, xm, opt.lambda_s, popt);
        std::array<std::vector<Vec4c>, 6> vecs;
        for (int k = 0; k < 6; ++k) vecs[k] = g.column_vectors(samples_[k]);
        for (int j = 0; j < 2; ++j) {
            std::array<Vec4c, 2> target;
            for (int p = 0; p < 2; ++p) {
                Vec4c acc = Vec4c::Zero();
                for (int k = 0; k < 6; ++k) acc += weights(k, j) * vecs[k][match[p]].imag() / pi;
                target[p] = acc;
            }
            alpha[j] = expand(target, fam.phi, fam.scale);
            beta[j] = expand(target, fam.chi, fam.scale);
        }
    };
    fit(spec_, gp, col_weights, out.alpha, out.beta);
    fit(spec_.adjoint(), gs, row_weights, out.alpha_star, out.beta_star);
    out.has_coefficients = true;

    auto check = [&](const std::array<Vec4c, 2>& coef, int unbounded, const char* what) {
        for (int j = 0; j < 2; ++j) {
            double rel = std::abs(coef[j](unbounded)) / coef[j].norm();
            if (rel > 1e-6) {
                std::ostringstream os;
                os << what << " coefficient of factor " << j + 1 << " at lambda = " << lambda << " is " << rel
                   << " relative";
                fail(ErrorKind::unbounded_component, os.str());
            }
        }
    };
    check(out.alpha, 3, "phi_4");
    check(out.beta, 0, "chi_1");
    check(out.alpha_star, 3, "phi*_4");
    check(out.beta_star, 0, "chi*_1");
    return out;
}

} // namespace specop
