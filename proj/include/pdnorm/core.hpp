#pragma once

// Shared vocabulary: scalar/vector aliases and the error hierarchy.

#include <complex>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace pdnorm
{

using cplx = std::complex<double>;
using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;

inline constexpr double infinity = std::numeric_limits<double>::infinity();

// Coefficients below this modulus are never stored in a sparse table.
inline constexpr double canonical_zero = 1e-15;

enum class error_code {
    dimension_mismatch,
    invalid_input,
    not_poincare,
    divisor_too_small,
    non_invertible,
    not_tangent_to_identity,
    nearly_defective,
    mixed_spectrum,
    contraction_impossible,
    insufficient_flatness,
    resonant_map,
    step_underflow,
    escape,
    no_convergence,
};

constexpr std::string_view error_name(error_code c) noexcept
{
    switch (c) {
        case error_code::dimension_mismatch: return "DimensionMismatch";
        case error_code::invalid_input: return "InvalidInput";
        case error_code::not_poincare: return "NotPoincare";
        case error_code::divisor_too_small: return "DivisorTooSmall";
        case error_code::non_invertible: return "NonInvertible";
        case error_code::not_tangent_to_identity: return "NotTangentToIdentity";
        case error_code::nearly_defective: return "NearlyDefective";
        case error_code::mixed_spectrum: return "MixedSpectrum";
        case error_code::contraction_impossible: return "ContractionImpossible";
        case error_code::insufficient_flatness: return "InsufficientFlatness";
        case error_code::resonant_map: return "ResonantMap";
        case error_code::step_underflow: return "StepUnderflow";
        case error_code::escape: return "Escape";
        case error_code::no_convergence: return "NoConvergence";
    }
    return "Unknown";
}

// Numerical failures (as opposed to rejected input).
constexpr bool is_numerical(error_code c) noexcept
{
    return c == error_code::step_underflow || c == error_code::escape || c == error_code::no_convergence;
}

class error : public std::runtime_error
{
public:
    error(error_code c, const std::string &msg) : std::runtime_error(msg), code_(c) {}

    error_code code() const noexcept
    {
        return code_;
    }
    std::string_view name() const noexcept
    {
        return error_name(code_);
    }

private:
    error_code code_;
};

template <error_code C>
class coded_error : public error
{
public:
    explicit coded_error(const std::string &msg) : error(C, msg) {}
};

using DimensionMismatch = coded_error<error_code::dimension_mismatch>;
using InvalidInput = coded_error<error_code::invalid_input>;
using NotPoincare = coded_error<error_code::not_poincare>;
using DivisorTooSmall = coded_error<error_code::divisor_too_small>;
using NonInvertible = coded_error<error_code::non_invertible>;
using NotTangentToIdentity = coded_error<error_code::not_tangent_to_identity>;
using NearlyDefective = coded_error<error_code::nearly_defective>;
using MixedSpectrum = coded_error<error_code::mixed_spectrum>;
using ContractionImpossible = coded_error<error_code::contraction_impossible>;
using InsufficientFlatness = coded_error<error_code::insufficient_flatness>;
using ResonantMap = coded_error<error_code::resonant_map>;
using StepUnderflow = coded_error<error_code::step_underflow>;
using Escape = coded_error<error_code::escape>;
using NoConvergence = coded_error<error_code::no_convergence>;

// Shortest %g-style rendering for error messages.
inline std::string num_str(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

inline void require_dim(std::size_t expected, std::size_t got, const char *what)
{
    if (expected != got) {
        throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(expected) + ", got "
                                + std::to_string(got));
    }
}

} // namespace pdnorm
