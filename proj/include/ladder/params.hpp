#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ladder {

enum class SymmetryClass { symmetric, antisymmetric };

std::string_view to_string(SymmetryClass c);
/// Accepts "sym", "symmetric", "antisym", "antisymmetric".
SymmetryClass parse_symmetry_class(std::string_view text);

/// Exact length of the form (num/den) or (num/den)*pi.
///
/// The ladder height is kept in exact form because the flat-band test is
/// number theoretic: it depends on the parity of the reduced numerator, which
/// cannot be recovered reliably from a double.
class LengthSpec {
public:
    LengthSpec() = default;
    LengthSpec(std::int64_t num, std::int64_t den, bool times_pi = false);

    /// Parses "2", "1/2", "0.75", "10pi/7", "10*pi/7", "pi", "3pi".
    static LengthSpec parse(std::string_view text);
    /// Exact decimal expansion of a double that is itself a short decimal
    /// (e.g. 0.5); falls back to an irrational marker otherwise.
    static LengthSpec from_double(double value);

    std::int64_t numerator() const noexcept { return num_; }
    std::int64_t denominator() const noexcept { return den_; }
    bool times_pi() const noexcept { return times_pi_; }
    /// True when the length is an exact rational number.
    bool is_rational() const noexcept { return !times_pi_ && !inexact_; }

    double value() const noexcept;
    std::string to_string() const;

    friend bool operator==(const LengthSpec&, const LengthSpec&) = default;

private:
    std::int64_t num_ = 1;
    std::int64_t den_ = 1;
    bool times_pi_ = false;
    bool inexact_ = false;
    double inexact_value_ = 0.0;
};

/// Physical configuration of the ladder.
struct LadderParams {
    LengthSpec L{2, 1};
    /// Rung thickness. Only the two-dimensional solvers use it.
    std::optional<double> eps;
    double mu = 1.0;

    double height() const noexcept { return L.value(); }

    /// Checks L > 0 and mu > 0.
    void validate() const;
    /// Additionally requires 0 < eps < min(1, L/2).
    void validate_with_eps() const;
    double thickness() const;
};

} // namespace ladder
