#include "specop/problem.hpp"
#include "specop/oracle.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>

namespace specop {

namespace {

double sech2(double x) {
    double c = std::cosh(x);
    return std::isfinite(c) ? 1.0 / (c * c) : 0.0;
}

// int_X^inf (1 + x^3) e^{-g x} dx
double moment_exp_tail(double X, double g) {
    double e = std::exp(-g * X);
    return e * (1.0 / g + X * X * X / g + 3.0 * X * X / (g * g) + 6.0 * X / (g * g * g) + 6.0 / (g * g * g * g));
}

} // namespace

Potential Potential::poschl_teller(double depth) {
    Potential p;
    p.preset_ = Preset::poschl_teller;
    p.params_ = {depth, 0.0};
    return p;
}

Potential Potential::gaussian(double amplitude, double width) {
    if (!(width > 0.0)) fail(ErrorKind::spec_invalid, "gaussian width must be positive");
    Potential p;
    p.preset_ = Preset::gaussian;
    p.params_ = {amplitude, width};
    return p;
}

bool Potential::is_zero() const noexcept {
    return preset_ == Preset::zero || params_[0] == 0.0;
}

std::string Potential::name() const {
    std::ostringstream os;
    switch (preset_) {
    case Preset::zero: os << "zero"; break;
    case Preset::poschl_teller: os << "poschl_teller(" << params_[0] << ")"; break;
    case Preset::gaussian: os << "gaussian(" << params_[0] << "," << params_[1] << ")"; break;
    }
    return os.str();
}

double Potential::value(double x) const noexcept {
    switch (preset_) {
    case Preset::zero: return 0.0;
    case Preset::poschl_teller: return -params_[0] * sech2(x);
    case Preset::gaussian: {
        double w = params_[1];
        return params_[0] * std::exp(-x * x / (2 * w * w));
    }
    }
    return 0.0;
}

double Potential::d1(double x) const noexcept {
    switch (preset_) {
    case Preset::zero: return 0.0;
    case Preset::poschl_teller: return 2.0 * params_[0] * sech2(x) * std::tanh(x);
    case Preset::gaussian: {
        double w2 = params_[1] * params_[1];
        return -x / w2 * value(x);
    }
    }
    return 0.0;
}

double Potential::d2(double x) const noexcept {
    switch (preset_) {
    case Preset::zero: return 0.0;
    case Preset::poschl_teller: {
        double s = sech2(x);
        return -params_[0] * (4.0 * s - 6.0 * s * s);
    }
    case Preset::gaussian: {
        double w2 = params_[1] * params_[1];
        return (x * x / (w2 * w2) - 1.0 / w2) * value(x);
    }
    }
    return 0.0;
}

double Potential::decay_rate() const noexcept {
    switch (preset_) {
    case Preset::zero: return 1.0;
    case Preset::poschl_teller: return 2.0;
    case Preset::gaussian: return 1.0 / params_[1];
    }
    return 1.0;
}

double Potential::decay_constant() const noexcept {
    switch (preset_) {
    case Preset::zero: return 0.0;
    // sech^2 <= 4 e^{-2|x|}; |q''| <= |d| (4 s + 6 s^2) <= 10 |d| s
    case Preset::poschl_teller: return 40.0 * std::abs(params_[0]);
    case Preset::gaussian: {
        // |q^(k)| e^{|x|/w} is bounded; the maximum of the polynomial prefactor
        // (1 + |x|/w^2 + x^2/w^4 + 1/w^2) e^{-x^2/2w^2 + |x|/w} sits at |x| ~ w.
        double a = std::abs(params_[0]), w = params_[1];
        double best = 0.0;
        for (int i = 0; i <= 4000; ++i) {
            double x = 12.0 * w * i / 4000.0;
            double env = std::exp(-x * x / (2 * w * w) + x / w);
            double pre = std::max({1.0, x / (w * w), std::abs(x * x / (w * w * w * w) - 1.0 / (w * w))});
            best = std::max(best, pre * env);
        }
        return 1.05 * a * best;
    }
    }
    return 0.0;
}

double Potential::moment_tail_bound(double X) const noexcept {
    if (is_zero()) return 0.0;
    return 2.0 * decay_constant() * moment_exp_tail(X, decay_rate());
}

double Potential::tail_bound(double X) const noexcept {
    if (is_zero()) return 0.0;
    double g = decay_rate();
    return 2.0 * decay_constant() * std::exp(-g * X) / g;
}

void validate(const OperatorSpec& spec) {
    if (!(spec.h1 > 0.0)) fail(ErrorKind::spec_invalid, "h1 must be positive");
    if (!(spec.h2 > spec.h1)) fail(ErrorKind::spec_invalid, "h2 must exceed h1");
}

DerivedConstants derived_constants(const OperatorSpec& spec) noexcept {
    double ha = 0.5 * (spec.h1 + spec.h2);
    double d = spec.h2 - spec.h1;
    return {ha, spec.h1 * spec.h2, -0.25 * d * d, std::sqrt(2.0 * ha)};
}

Mat4c companion_A(cplx z, const DerivedConstants& c) noexcept {
    Mat4c A = Mat4c::Zero();
    A(0, 1) = A(1, 2) = A(2, 3) = 1.0;
    A(3, 0) = z - c.h_p;
    A(3, 2) = 2.0 * c.h_a;
    return A;
}

std::array<double, 3> perturbation_row(double x, const OperatorSpec& spec) noexcept {
    double q1 = spec.q1.value(x), q2 = spec.q2.value(x);
    return {spec.q1.d2(x) - spec.h2 * q1 - spec.h1 * q2 - q1 * q2, 2.0 * spec.q1.d1(x), q1 + q2};
}

Mat4c perturbation_B(double x, const OperatorSpec& spec) noexcept {
    Mat4c B = Mat4c::Zero();
    auto r = perturbation_row(x, spec);
    B(3, 0) = r[0];
    B(3, 1) = r[1];
    B(3, 2) = r[2];
    return B;
}

Mat4c eval_B_printed(double x, const OperatorSpec& spec) noexcept {
    double q1 = spec.q1.value(x), q2 = spec.q2.value(x);
    Mat4c B = Mat4c::Zero();
    B(3, 0) = spec.q2.d2(x) - (spec.h1 + q1) * (spec.h2 + q2);
    B(3, 1) = 2.0 * spec.q2.d1(x);
    B(3, 2) = spec.h1 + spec.h2 + q1 + q2;
    return B;
}

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
    fail(ErrorKind::spec_invalid, path + ": " + msg);
}

double number_at(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) bad(path + "." + key, "missing");
    const auto& v = j.at(key);
    if (!v.is_number()) bad(path + "." + key, "expected number");
    return v.get<double>();
}

Potential potential_at(const json& root, const std::string& key) {
    if (!root.contains(key)) bad(key, "missing");
    const auto& j = root.at(key);
    if (!j.is_object()) bad(key, "expected object");
    if (!j.contains("preset") || !j.at("preset").is_string()) bad(key + ".preset", "expected string");
    std::string preset = j.at("preset").get<std::string>();
    std::vector<double> params;
    if (j.contains("params")) {
        const auto& p = j.at("params");
        if (!p.is_array()) bad(key + ".params", "expected array");
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!p[i].is_number()) bad(key + ".params[" + std::to_string(i) + "]", "expected number");
            params.push_back(p[i].get<double>());
        }
    }
    auto need = [&](std::size_t n) {
        if (params.size() != n) bad(key + ".params", "expected " + std::to_string(n) + " values for " + preset);
    };
    if (preset == "zero") {
        need(0);
        return Potential::zero();
    }
    if (preset == "poschl_teller") {
        need(1);
        return Potential::poschl_teller(params[0]);
    }
    if (preset == "gaussian") {
        need(2);
        if (!(params[1] > 0.0)) bad(key + ".params[1]", "width must be positive");
        return Potential::gaussian(params[0], params[1]);
    }
    bad(key + ".preset", "unknown preset '" + preset + "'");
}

json potential_json(const Potential& p) {
    switch (p.preset()) {
    case Preset::zero: return {{"preset", "zero"}, {"params", json::array()}};
    case Preset::poschl_teller: return {{"preset", "poschl_teller"}, {"params", {p.param(0)}}};
    case Preset::gaussian: return {{"preset", "gaussian"}, {"params", {p.param(0), p.param(1)}}};
    }
    return {};
}

} // namespace

ProblemSpec parse_problem(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::spec_invalid, std::string("$: malformed JSON: ") + e.what());
    }
    if (!root.is_object()) bad("$", "expected object");
    ProblemSpec ps;
    ps.op.h1 = number_at(root, "h1", "$");
    ps.op.h2 = number_at(root, "h2", "$");
    ps.op.q1 = potential_at(root, "q1");
    ps.op.q2 = potential_at(root, "q2");
    if (root.contains("grid")) {
        const auto& g = root.at("grid");
        if (!g.is_object()) bad("grid", "expected object");
        if (g.contains("half_width")) ps.grid.half_width = number_at(g, "half_width", "grid");
        if (g.contains("points")) {
            if (!g.at("points").is_number_integer()) bad("grid.points", "expected integer");
            ps.grid.points = g.at("points").get<int>();
        }
        if (!(ps.grid.half_width > 0.0)) bad("grid.half_width", "must be positive");
        if (ps.grid.points < 2) bad("grid.points", "must be at least 2");
    }
    if (root.contains("tolerances")) {
        const auto& t = root.at("tolerances");
        if (!t.is_object()) bad("tolerances", "expected object");
        for (auto it = t.begin(); it != t.end(); ++it) {
            if (!it.value().is_number()) bad("tolerances." + it.key(), "expected number");
            double v = it.value().get<double>();
            if (!(v > 0.0)) bad("tolerances." + it.key(), "must be positive");
            ps.tolerances[it.key()] = v;
        }
    }
    validate(ps.op);
    return ps;
}

std::string dump_problem(const ProblemSpec& spec) {
    json j;
    j["h1"] = spec.op.h1;
    j["h2"] = spec.op.h2;
    j["q1"] = potential_json(spec.op.q1);
    j["q2"] = potential_json(spec.op.q2);
    j["grid"] = {{"half_width", spec.grid.half_width}, {"points", spec.grid.points}};
    j["tolerances"] = json::object();
    for (const auto& [k, v] : spec.tolerances) j["tolerances"][k] = v;
    return j.dump();
}

HypothesisReport check_hypotheses(const OperatorSpec& spec, double half_width, int quadrature_points) {
    if (!(half_width > 0.0)) fail(ErrorKind::domain, "domain half width must be positive");
    HypothesisReport rep;
    int n = std::max(quadrature_points, 3);
    if (n % 2 == 0) ++n;
    double h = 2.0 * half_width / (n - 1);
    const Potential* qs[2] = {&spec.q1, &spec.q2};
    for (int i = 0; i < 2; ++i) {
        const Potential& q = *qs[i];
        for (int j = 0; j < n; ++j) {
            double x = -half_width + j * h;
            double w = (j == 0 || j == n - 1) ? 1.0 : (j % 2 ? 4.0 : 2.0);
            w *= h / 3.0;
            double m = 1.0 + std::abs(x * x * x);
            rep.moments[i][0] += w * m * std::abs(q.value(x));
            rep.moments[i][1] += w * m * std::abs(q.d1(x));
            rep.moments[i][2] += w * m * std::abs(q.d2(x));
            rep.q2_square[i] += w * q.d2(x) * q.d2(x);
        }
        rep.tail_bounds[i] = q.moment_tail_bound(half_width);
    }
    rep.exponential_decay = true;
    rep.min_eig_d2 = min_eigenvalue_d2(spec, half_width, std::max(quadrature_points, 200));
    if (rep.min_eig_d2 <= 0.0) {
        std::ostringstream os;
        os << "grid operator D2 has smallest eigenvalue " << rep.min_eig_d2;
        fail(ErrorKind::non_positive_d2, os.str());
    }
    rep.positive_definite = rep.min_eig_d2 >= 0.5 * spec.h2;
    return rep;
}

std::string spec_hash(const ProblemSpec& spec) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : dump_problem(spec)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace specop
