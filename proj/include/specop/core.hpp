#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace specop {

using cplx = std::complex<double>;
using Vec4c = Eigen::Matrix<cplx, 4, 1>;
using Mat4c = Eigen::Matrix<cplx, 4, 4>;
using Mat42c = Eigen::Matrix<cplx, 4, 2>;
using Mat2c = Eigen::Matrix<cplx, 2, 2>;
using Vec2c = Eigen::Matrix<cplx, 2, 1>;
using RVec = std::vector<double>;
using CVec = std::vector<cplx>;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double pi = std::numbers::pi;
inline constexpr std::string_view version = "0.3.1";

enum class ErrorKind {
    spec_invalid,
    non_positive_d2,
    domain,
    degenerate_roots,
    degenerate_ordering,
    singular_pi,
    no_contraction,
    tail_too_fat,
    step_size_underflow,
    ill_conditioned,
    near_singular_w,
    excluded_lambda,
    rank_deficient,
    unbounded_component,
    multiplicity_ambiguous,
    sweep_too_coarse,
    domain_truncation,
    near_spectrum,
    endpoint_on_spectrum,
    eig_failure,
};

inline std::string_view to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::spec_invalid: return "SpecInvalid";
    case ErrorKind::non_positive_d2: return "NonPositiveD2";
    case ErrorKind::domain: return "DomainError";
    case ErrorKind::degenerate_roots: return "DegenerateRoots";
    case ErrorKind::degenerate_ordering: return "DegenerateOrdering";
    case ErrorKind::singular_pi: return "SingularPi";
    case ErrorKind::no_contraction: return "NoContraction";
    case ErrorKind::tail_too_fat: return "TailTooFat";
    case ErrorKind::step_size_underflow: return "StepSizeUnderflow";
    case ErrorKind::ill_conditioned: return "IllConditioned";
    case ErrorKind::near_singular_w: return "NearSingularW";
    case ErrorKind::excluded_lambda: return "ExcludedLambda";
    case ErrorKind::rank_deficient: return "RankDeficient";
    case ErrorKind::unbounded_component: return "UnboundedComponent";
    case ErrorKind::multiplicity_ambiguous: return "MultiplicityAmbiguous";
    case ErrorKind::sweep_too_coarse: return "SweepTooCoarse";
    case ErrorKind::domain_truncation: return "DomainTruncationError";
    case ErrorKind::near_spectrum: return "NearSpectrum";
    case ErrorKind::endpoint_on_spectrum: return "EndpointOnSpectrum";
    case ErrorKind::eig_failure: return "EigFailure";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    // Spec and hypothesis problems are user errors, the rest are numerical.
    bool is_input_error() const noexcept {
        return kind_ == ErrorKind::spec_invalid || kind_ == ErrorKind::non_positive_d2;
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

// One-sided boundary value of a spectral parameter on the real axis.
enum class Side { plus, minus };

} // namespace specop
