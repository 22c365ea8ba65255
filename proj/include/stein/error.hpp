#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stein {

/// Failure categories shared by every module. The CLI maps these onto exit codes.
enum class Errc {
    invalid_argument,
    parse_error,
    unknown_identifier,
    unsupported_family,
    budget_exceeded,
    non_finite,
    bracket_not_found,
    zero_variance,
    mean_mismatch,
    negative_support,
    incompatible_direction,
    missing_gap,
    unknown_scenario,
    derivative_mismatch,
    non_summable,
    unavailable,
    invalid_summary,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

    /// True for failures caused by bad user input rather than numerics.
    bool is_input_error() const noexcept;

private:
    Errc code_;
};

/// Parse failure with the zero-based character offset of the offending token.
class ParseError : public Error {
public:
    ParseError(Errc code, const std::string& what, std::size_t position)
        : Error(code, what + " at position " + std::to_string(position)), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace stein
