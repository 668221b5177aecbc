#pragma once

// Closed-form spectral theory of the limit quantum graph of the ladder.
//
// All frequencies are in the omega variable (lambda = omega^2). Every
// function here is pure and thread-safe.

#include "ladder/params.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ladder::graph {

/// A real number or one of the markers produced at poles.
///
/// `undefined` marks 0/0 points (for instance g at a flat-band frequency);
/// callers resolve those with the special-point rules.
struct ExtendedReal {
    enum class Kind { finite, plus_infinity, minus_infinity, undefined };

    Kind kind = Kind::finite;
    double value = 0.0;

    static ExtendedReal of(double v) { return {Kind::finite, v}; }
    static ExtendedReal plus_inf() { return {Kind::plus_infinity, 0.0}; }
    static ExtendedReal minus_inf() { return {Kind::minus_infinity, 0.0}; }
    static ExtendedReal nan() { return {Kind::undefined, 0.0}; }

    bool is_finite() const noexcept { return kind == Kind::finite; }
    bool is_infinite() const noexcept
    {
        return kind == Kind::plus_infinity || kind == Kind::minus_infinity;
    }
    /// Finite value, +/-inf, or NaN for `undefined`.
    double to_double() const noexcept;
};

struct Band {
    double omega_lo = 0.0;
    double omega_hi = 0.0;

    double lambda_lo() const noexcept { return omega_lo * omega_lo; }
    double lambda_hi() const noexcept { return omega_hi * omega_hi; }
    bool is_point() const noexcept { return omega_hi == omega_lo; }
};

enum class GapType { i, ii, iii };
std::string to_string(GapType t);

struct Gap {
    double omega_b = 0.0;
    double omega_t = 0.0;
    GapType type = GapType::i;
    SymmetryClass cls = SymmetryClass::symmetric;

    double lambda_b() const noexcept { return omega_b * omega_b; }
    double lambda_t() const noexcept { return omega_t * omega_t; }
    double width() const noexcept { return omega_t - omega_b; }
};

struct GraphEigenvalue {
    double omega = 0.0;
    double lambda = 0.0;
    Gap gap;
    double L = 0.0;
    double mu = 1.0;
    SymmetryClass cls = SymmetryClass::symmetric;
    int multiplicity = 1;
};

/// Value and first two derivatives of an edge trace.
struct TraceValue {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

/// Defect mode of the perturbed graph operator.
///
/// Vertex values decay geometrically, u_j = A r^{|j|}, and the traces on the
/// edges are the closed-form solutions of -u'' = omega^2 u between them. The
/// amplitude A > 0 normalizes the weighted L2 norm over the whole graph to 1.
class GraphEigenfunction {
public:
    GraphEigenfunction(GraphEigenvalue ev, double r, double amplitude);

    const GraphEigenvalue& eigenvalue() const noexcept { return ev_; }
    double decay_rate() const noexcept { return r_; }
    double amplitude() const noexcept { return amplitude_; }

    /// Value at the lower vertex M_j^-. The upper vertex carries the same value
    /// (symmetric class) or its opposite (antisymmetric class).
    double vertex_value(std::int64_t j) const;
    /// Trace on the horizontal edge between vertices j and j+1 at s in [0,1];
    /// `upper` selects the edge at y = +L/2. Derivatives are in s.
    TraceValue horizontal(std::int64_t j, double s, bool upper = false) const;
    /// Trace on the vertical edge at x = j, y in [-L/2, L/2]. Derivatives in y.
    TraceValue vertical(std::int64_t j, double y) const;
    /// Largest weighted outgoing-derivative sum over the two vertices of rung j.
    double kirchhoff_residual(std::int64_t j) const;
    /// Weighted L2 norm squared over the whole graph (closed form).
    double norm_squared() const;
    /// Edge weight of the rung at x = j.
    double weight(std::int64_t j) const noexcept { return j == 0 ? ev_.mu : 1.0; }

private:
    GraphEigenvalue ev_;
    double r_;
    double amplitude_;
};

struct FlatBandSet {
    /// Whether L lies in the set of reduced fractions with odd numerator.
    bool in_Qc = false;
    /// (numerator, denominator) of L when in_Qc.
    std::optional<std::pair<std::int64_t, std::int64_t>> witness;
    std::vector<double> omegas;
    /// False for the antisymmetric class, whose condition has no proof behind it.
    bool condition_proven = true;
};

struct CoverReport {
    bool covered = true;
    double max_hole = 0.0;
    std::vector<Band> holes;
};

struct ScanOptions {
    /// Number of scan intervals over [0, omega_max].
    int steps = 20000;
    /// Bisection tolerance in omega; 0 bisects down to adjacent doubles.
    double tol = 0.0;
};

struct BlochRoots {
    double theta = 0.0;
    std::vector<double> omegas;
    /// Near-zero local minima of the residual that could not be decided.
    std::vector<double> unresolved;
};

ExtendedReal phi_L(double omega, double L, SymmetryClass cls);
ExtendedReal g_value(double omega, double L, SymmetryClass cls);
ExtendedReal g_mu_value(double omega, double L, double mu, SymmetryClass cls);
/// 2 cot(omega), the second auxiliary function in the root equation.
ExtendedReal phi_2(double omega);

/// The pi-periodic comparison functions of the geometric gap picture.
double f_plus(double omega);
double f_minus(double omega);

/// LHS - RHS of the Floquet dispersion relation of the class at quasimomentum
/// theta. Throws DomainError when theta is outside [0, pi].
double dispersion_residual(double theta, double omega, double L, SymmetryClass cls);

std::vector<BlochRoots> bloch_curves(double L, SymmetryClass cls, double omega_max,
                                     std::span<const double> theta_grid,
                                     const ScanOptions& opts = {});

/// Frequencies that belong to the spectrum for every L: n*pi and the
/// class's multiples of pi/L.
std::vector<double> special_points(double L, SymmetryClass cls, double omega_max);

/// Whether omega belongs to the essential spectrum of the class.
bool in_essential_spectrum(double omega, double L, SymmetryClass cls);

std::vector<Band> essential_bands(double L, SymmetryClass cls, double omega_max,
                                  const ScanOptions& opts = {});

/// Complete gaps whose lower end lies below omega_max, typed (i)/(ii)/(iii).
/// Throws NumericalError when a gap fits none of the types.
std::vector<Gap> gaps(double L, SymmetryClass cls, double omega_max,
                      const ScanOptions& opts = {});

/// Types a gap from its endpoints; std::nullopt when no type applies.
std::optional<GapType> classify_gap(double omega_b, double omega_t, double L,
                                    SymmetryClass cls, double tol = 1e-6);

/// F(omega) = 1 - sqrt((g^2 - 1) / (g + cos omega)^2). Requires |g| > 1.
double capital_F(double omega, double L, SymmetryClass cls);
/// Same function written as 1 - sqrt(1 - phi_L (phi_L + phi_2)).
double capital_F_phi_form(double omega, double L, SymmetryClass cls);

/// In-disc root of r^2 + 2 g r + 1 = 0. Requires |g| > 1.
double reflection_root_from_g(double g);
double reflection_root(double omega, double L, SymmetryClass cls);

/// Roots of F = mu inside the gap; empty for mu >= 1. Roots are bisected to
/// machine precision; `tol` bounds the accepted |F - mu| at each root.
std::vector<GraphEigenvalue> discrete_eigenvalues(double L, double mu, SymmetryClass cls,
                                                  const Gap& gap, double tol = 1e-9);

GraphEigenfunction build_eigenfunction(const GraphEigenvalue& ev);

FlatBandSet flat_bands(const LengthSpec& L, SymmetryClass cls, double omega_max);

/// Checks that the symmetric and antisymmetric bands together cover
/// [0, omega_max]; holes wider than `hole_tol` are reported.
CoverReport spectrum_cover_check(double L, double omega_max, double hole_tol = 1e-8,
                                 const ScanOptions& opts = {});

} // namespace ladder::graph
