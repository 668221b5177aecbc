#include "ladder/graph_core.hpp"

#include "detail/roots.hpp"
#include "ladder/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ladder::graph {

using detail::pi;

namespace {

// Points closer than this (relative) to a pole or zero of a trigonometric
// factor are treated as lying on it.
constexpr double lattice_tol = 1e-12;
constexpr double merge_tol = 1e-9;
constexpr double pi_tol = 1e-8;

bool near_lattice(double x, double offset)
{
    long long k = 0;
    return detail::distance_to_lattice(x, offset, k) <= lattice_tol * std::max(1.0, std::abs(x));
}

// sin and cos that return exact zeros and +/-1 on the lattice points.
double clean_sin(double x)
{
    long long k = 0;
    if (detail::distance_to_lattice(x, 0.0, k) <= lattice_tol * std::max(1.0, std::abs(x)))
        return 0.0;
    return std::sin(x);
}

double clean_cos(double x)
{
    long long k = 0;
    if (detail::distance_to_lattice(x, 0.5 * pi, k) <= lattice_tol * std::max(1.0, std::abs(x)))
        return 0.0;
    if (detail::distance_to_lattice(x, 0.0, k) <= lattice_tol * std::max(1.0, std::abs(x)))
        return (k % 2 == 0) ? 1.0 : -1.0;
    return std::cos(x);
}

bool on_pi_lattice(double omega) { return near_lattice(omega, 0.0); }

long long pi_index(double omega) { return static_cast<long long>(std::floor(omega / pi)); }

void check_omega(double omega)
{
    if (!(omega >= 0.0) || !std::isfinite(omega))
        throw DomainError("omega must be finite and non-negative");
}

} // namespace

double ExtendedReal::to_double() const noexcept
{
    switch (kind) {
    case Kind::finite:
        return value;
    case Kind::plus_infinity:
        return std::numeric_limits<double>::infinity();
    case Kind::minus_infinity:
        return -std::numeric_limits<double>::infinity();
    default:
        return std::numeric_limits<double>::quiet_NaN();
    }
}

std::string to_string(GapType t)
{
    switch (t) {
    case GapType::i:
        return "i";
    case GapType::ii:
        return "ii";
    default:
        return "iii";
    }
}

// Poles carry the sign of the right-hand limit.
ExtendedReal phi_L(double omega, double L, SymmetryClass cls)
{
    check_omega(omega);
    const double x = 0.5 * omega * L;
    const double s = clean_sin(x);
    const double c = clean_cos(x);
    if (cls == SymmetryClass::symmetric) {
        if (s == 0.0)
            return ExtendedReal::plus_inf();
        if (c == 0.0)
            return ExtendedReal::of(0.0);
        return ExtendedReal::of(2.0 * c / s);
    }
    if (c == 0.0)
        return ExtendedReal::plus_inf();
    if (s == 0.0)
        return ExtendedReal::of(0.0);
    return ExtendedReal::of(-2.0 * s / c);
}

ExtendedReal phi_2(double omega)
{
    const double s = clean_sin(omega);
    if (s == 0.0)
        return ExtendedReal::plus_inf();
    return ExtendedReal::of(2.0 * clean_cos(omega) / s);
}

ExtendedReal g_mu_value(double omega, double L, double mu, SymmetryClass cls)
{
    const ExtendedReal phi = phi_L(omega, L, cls);
    const double s = clean_sin(omega);
    const double c = clean_cos(omega);
    if (phi.is_infinite())
        return ExtendedReal::of(-c);
    if (phi.value == 0.0) {
        if (s == 0.0)
            return ExtendedReal::nan();
        // phi_L decreases through its zeros for the symmetric class and
        // increases for the antisymmetric one; use the right-hand limit.
        const double side = cls == SymmetryClass::symmetric ? -1.0 : 1.0;
        return side * s * mu > 0.0 ? ExtendedReal::plus_inf() : ExtendedReal::minus_inf();
    }
    return ExtendedReal::of(-c + mu * s / phi.value);
}

ExtendedReal g_value(double omega, double L, SymmetryClass cls)
{
    return g_mu_value(omega, L, 1.0, cls);
}

double f_plus(double omega)
{
    const double reduced = omega - static_cast<double>(pi_index(omega)) * pi;
    return std::tan(0.5 * reduced);
}

double f_minus(double omega)
{
    const double reduced = omega - static_cast<double>(pi_index(omega)) * pi;
    return -1.0 / std::tan(0.5 * reduced);
}

double dispersion_residual(double theta, double omega, double L, SymmetryClass cls)
{
    constexpr double slack = 1e-14;
    if (!(theta >= -slack && theta <= pi + slack))
        throw DomainError("quasimomentum must lie in [0, pi]");
    const double x = 0.5 * omega * L;
    const double diff = std::cos(omega) - std::cos(theta);
    if (cls == SymmetryClass::symmetric)
        return 2.0 * std::cos(x) * diff - std::sin(omega) * std::sin(x);
    return 2.0 * std::sin(x) * diff + std::sin(omega) * std::cos(x);
}

std::vector<double> special_points(double L, SymmetryClass cls, double omega_max)
{
    std::vector<double> pts;
    const bool sym = cls == SymmetryClass::symmetric;
    for (long long n = sym ? 0 : 1; n * pi <= omega_max; ++n)
        pts.push_back(static_cast<double>(n) * pi);
    if (sym) {
        for (long long n = 0; 2.0 * pi * n / L <= omega_max; ++n)
            pts.push_back(2.0 * pi * static_cast<double>(n) / L);
    } else {
        for (long long n = 0; (2.0 * n + 1.0) * pi / L <= omega_max; ++n)
            pts.push_back((2.0 * static_cast<double>(n) + 1.0) * pi / L);
    }
    std::sort(pts.begin(), pts.end());
    std::vector<double> out;
    for (double p : pts)
        if (out.empty() || p - out.back() > lattice_tol * std::max(1.0, p))
            out.push_back(p);
    return out;
}

namespace {

bool is_special_point(double omega, double L, SymmetryClass cls)
{
    if (cls == SymmetryClass::antisymmetric && omega == 0.0)
        return false;
    if (on_pi_lattice(omega))
        return true;
    const double x = 0.5 * omega * L;
    // sym: sin(omega L / 2) = 0; antisym: cos(omega L / 2) = 0.
    return cls == SymmetryClass::symmetric ? clean_sin(x) == 0.0 : clean_cos(x) == 0.0;
}

} // namespace

bool in_essential_spectrum(double omega, double L, SymmetryClass cls)
{
    if (cls == SymmetryClass::antisymmetric && omega == 0.0)
        return false;
    if (is_special_point(omega, L, cls))
        return true;
    const ExtendedReal g = g_value(omega, L, cls);
    if (g.kind == ExtendedReal::Kind::undefined)
        return true;
    return g.is_finite() && std::abs(g.value) <= 1.0;
}

namespace {

std::vector<Band> merge_bands(std::vector<Band> bands)
{
    std::sort(bands.begin(), bands.end(),
              [](const Band& a, const Band& b) { return a.omega_lo < b.omega_lo; });
    std::vector<Band> out;
    for (const Band& b : bands) {
        if (!out.empty() && b.omega_lo <= out.back().omega_hi + merge_tol)
            out.back().omega_hi = std::max(out.back().omega_hi, b.omega_hi);
        else
            out.push_back(b);
    }
    return out;
}

std::vector<Band> scan_bands(double L, SymmetryClass cls, double omega_max, double step,
                             double tol)
{
    auto member = [&](double w) { return in_essential_spectrum(w, L, cls); };
    const auto n = static_cast<long long>(std::ceil(omega_max / step));
    std::vector<Band> bands;
    double prev_w = 0.0;
    bool prev = member(0.0);
    double start = 0.0;
    for (long long k = 1; k <= n; ++k) {
        const double w = std::min(omega_max, static_cast<double>(k) * step);
        const bool m = member(w);
        if (m != prev) {
            const auto [a, b] = detail::bisect_predicate(member, prev_w, w, tol);
            if (m)
                start = b;
            else
                bands.push_back({start, a});
        }
        prev = m;
        prev_w = w;
    }
    if (prev)
        bands.push_back({start, omega_max});

    for (double p : special_points(L, cls, omega_max))
        bands.push_back({p, p});
    return merge_bands(std::move(bands));
}

} // namespace

std::vector<Band> essential_bands(double L, SymmetryClass cls, double omega_max,
                                  const ScanOptions& opts)
{
    if (!(omega_max > 0.0))
        throw DomainError("omega_max must be positive");
    if (!(L > 0.0))
        throw DomainError("L must be positive");
    return scan_bands(L, cls, omega_max, omega_max / opts.steps, opts.tol);
}

std::optional<GapType> classify_gap(double omega_b, double omega_t, double L,
                                    SymmetryClass cls, double tol)
{
    if (!(omega_b < omega_t))
        return std::nullopt;
    const bool b_on_pi = std::abs(omega_b - std::nearbyint(omega_b / pi) * pi) <= pi_tol;
    const bool t_on_pi = std::abs(omega_t - std::nearbyint(omega_t / pi) * pi) <= pi_tol;
    auto matches = [&](double omega, double f) {
        const ExtendedReal phi = phi_L(omega, L, cls);
        return phi.is_finite() && std::abs(phi.value - f) <= tol * std::max(1.0, std::abs(f));
    };
    auto phi_at = [&](double omega) {
        const double snapped = std::nearbyint(omega / pi) * pi;
        return phi_L(snapped, L, cls);
    };

    if (!b_on_pi && !t_on_pi) {
        if (pi_index(omega_b) != pi_index(omega_t))
            return std::nullopt;
        if (matches(omega_b, f_plus(omega_b)) && matches(omega_t, f_minus(omega_t)))
            return GapType::i;
        return std::nullopt;
    }
    if (b_on_pi && !t_on_pi) {
        const ExtendedReal phi_b = phi_at(omega_b);
        const bool nonpositive = phi_b.kind == ExtendedReal::Kind::minus_infinity ||
                                 (phi_b.is_finite() && phi_b.value <= tol);
        if (nonpositive && matches(omega_t, f_minus(omega_t)))
            return GapType::ii;
        return std::nullopt;
    }
    if (!b_on_pi && t_on_pi) {
        const ExtendedReal phi_t = phi_at(omega_t);
        const bool nonnegative = phi_t.kind == ExtendedReal::Kind::plus_infinity ||
                                 (phi_t.is_finite() && phi_t.value >= -tol);
        if (matches(omega_b, f_plus(omega_b)) && nonnegative)
            return GapType::iii;
        return std::nullopt;
    }
    return std::nullopt;
}

std::vector<Gap> gaps(double L, SymmetryClass cls, double omega_max, const ScanOptions& opts)
{
    if (!(omega_max > 0.0))
        throw DomainError("omega_max must be positive");
    // Every gap is shorter than pi (n*pi is always in the spectrum), so
    // scanning one extra period closes a gap that straddles omega_max.
    const double step = omega_max / opts.steps;
    const double extended = omega_max + pi + 0.5;
    const std::vector<Band> bands = scan_bands(L, cls, extended, step, opts.tol);

    std::vector<std::pair<double, double>> raw;
    if (!bands.empty() && bands.front().omega_lo > 0.0)
        raw.emplace_back(0.0, bands.front().omega_lo);
    for (std::size_t k = 0; k + 1 < bands.size(); ++k)
        raw.emplace_back(bands[k].omega_hi, bands[k + 1].omega_lo);

    std::vector<Gap> out;
    for (const auto& [wb, wt] : raw) {
        if (wb >= omega_max)
            break;
        const auto type = classify_gap(wb, wt, L, cls);
        if (!type) {
            std::ostringstream os;
            os.precision(15);
            os << "gap (" << wb << ", " << wt << ") of class " << to_string(cls)
               << " at L=" << L << " fits none of the types (i)/(ii)/(iii)";
            throw NumericalError(os.str());
        }
        out.push_back({wb, wt, *type, cls});
    }
    return out;
}

double capital_F(double omega, double L, SymmetryClass cls)
{
    const ExtendedReal g = g_value(omega, L, cls);
    if (!g.is_finite() || std::abs(g.value) <= 1.0)
        throw DomainError("capital_F requires |g(omega)| > 1");
    const double denom = g.value + clean_cos(omega);
    return 1.0 - std::sqrt(g.value * g.value - 1.0) / std::abs(denom);
}

double capital_F_phi_form(double omega, double L, SymmetryClass cls)
{
    const ExtendedReal phi = phi_L(omega, L, cls);
    const ExtendedReal p2 = phi_2(omega);
    if (!phi.is_finite() || !p2.is_finite())
        throw DomainError("capital_F_phi_form: pole of phi_L or phi_2");
    const double radicand = 1.0 - phi.value * (phi.value + p2.value);
    if (!(radicand > 0.0))
        throw DomainError("capital_F_phi_form requires |g(omega)| > 1");
    return 1.0 - std::sqrt(radicand);
}

double reflection_root_from_g(double g)
{
    if (!(std::abs(g) > 1.0))
        throw DomainError("reflection_root requires |g| > 1");
    // The large root -g - sign(g) sqrt(g^2 - 1) has no cancellation; the
    // in-disc root is its reciprocal.
    const double big = g + std::copysign(std::sqrt(g * g - 1.0), g);
    return -1.0 / big;
}

double reflection_root(double omega, double L, SymmetryClass cls)
{
    const ExtendedReal g = g_value(omega, L, cls);
    if (!g.is_finite())
        throw DomainError("reflection_root: g is not finite");
    return reflection_root_from_g(g.value);
}

namespace {

// P = phi_L (phi_L + phi_2); F = mu  <=>  P = mu (2 - mu).
double p_function(double omega, double L, SymmetryClass cls)
{
    const ExtendedReal phi = phi_L(omega, L, cls);
    const ExtendedReal p2 = phi_2(omega);
    if (!phi.is_finite() || !p2.is_finite())
        return std::numeric_limits<double>::quiet_NaN();
    return phi.value * (phi.value + p2.value);
}

double phi_sum(double omega, double L, SymmetryClass cls)
{
    const ExtendedReal phi = phi_L(omega, L, cls);
    const ExtendedReal p2 = phi_2(omega);
    if (!phi.is_finite() || !p2.is_finite())
        return std::numeric_limits<double>::quiet_NaN();
    return phi.value + p2.value;
}

// Roots on the monotone branches identified in the existence proof for the
// symmetric class: phi_L decreases through c, phi_L + phi_2 through d, and F
// is monotone on (omega_b, min(c,d)) and (max(c,d), omega_t).
std::vector<double> symmetric_roots(double L, double target, const Gap& gap, double tol)
{
    const auto cls = SymmetryClass::symmetric;
    const double wb = gap.omega_b;
    const double wt = gap.omega_t;
    auto phi = [&](double w) { return phi_L(w, L, cls).value; };
    auto sum = [&](double w) { return phi_sum(w, L, cls); };
    auto shifted = [&](double w) { return p_function(w, L, cls) - target; };

    std::vector<double> roots;
    switch (gap.type) {
    case GapType::i: {
        const double c = detail::bisect_open(phi, wb, wt, +1.0, tol);
        const double d = detail::bisect_open(sum, wb, wt, +1.0, tol);
        const double lo = std::min(c, d);
        const double hi = std::max(c, d);
        roots.push_back(detail::bisect_open(shifted, wb, lo, +1.0, tol));
        roots.push_back(detail::bisect_open(shifted, hi, wt, -1.0, tol));
        break;
    }
    case GapType::ii: {
        const double d = detail::bisect_open(sum, wb, wt, +1.0, tol);
        roots.push_back(detail::bisect_open(shifted, d, wt, -1.0, tol));
        break;
    }
    case GapType::iii: {
        const double d = detail::bisect_open(sum, wb, wt, +1.0, tol);
        roots.push_back(detail::bisect_open(shifted, wb, d, +1.0, tol));
        break;
    }
    }
    return roots;
}

// Sampled bracketing for classes without a monotonicity proof.
std::vector<double> sampled_roots(double L, SymmetryClass cls, double target, const Gap& gap,
                                  double tol)
{
    constexpr int samples = 4000;
    const double wb = gap.omega_b;
    const double wt = gap.omega_t;
    const double width = wt - wb;
    auto shifted = [&](double w) { return p_function(w, L, cls) - target; };
    auto end_value = [&](double w, double inward) {
        // P -> 1 at an endpoint where |g| = 1; near n*pi take a one-sided sample.
        if (!on_pi_lattice(w) && std::abs(w - std::nearbyint(w / pi) * pi) > pi_tol)
            return 1.0 - target;
        return shifted(w + inward * 1e-9 * width);
    };

    std::vector<double> xs(samples + 1);
    std::vector<double> fs(samples + 1);
    for (int k = 0; k <= samples; ++k) {
        xs[k] = wb + width * static_cast<double>(k) / samples;
        if (k == 0)
            fs[k] = end_value(wb, +1.0);
        else if (k == samples)
            fs[k] = end_value(wt, -1.0);
        else
            fs[k] = shifted(xs[k]);
    }
    std::vector<double> roots;
    for (int k = 0; k < samples; ++k) {
        if (!std::isfinite(fs[k]) || !std::isfinite(fs[k + 1]))
            continue;
        if ((fs[k] > 0.0) != (fs[k + 1] > 0.0))
            roots.push_back(detail::bisect_open(shifted, xs[k], xs[k + 1],
                                                fs[k] > 0.0 ? 1.0 : -1.0, tol));
    }
    return roots;
}

// Band edges from the scan are accurate to the scan tolerance; narrow gaps
// need them to full precision before the branches are bracketed.
double refine_edge(double w, double L, SymmetryClass cls, bool lower_end)
{
    if (std::abs(w - std::nearbyint(w / pi) * pi) <= pi_tol)
        return std::nearbyint(w / pi) * pi;
    const double delta = 1e-8 * std::max(1.0, w);
    auto member = [&](double x) { return in_essential_spectrum(x, L, cls); };
    const double a = w - delta;
    const double b = w + delta;
    if (member(a) != lower_end || member(b) == lower_end)
        return w;
    const auto [in, out] = detail::bisect_predicate(member, a, b, 0.0);
    return lower_end ? in : out;
}

} // namespace

std::vector<GraphEigenvalue> discrete_eigenvalues(double L, double mu, SymmetryClass cls,
                                                  const Gap& gap, double tol)
{
    if (!(mu > 0.0))
        throw DomainError("mu must be positive");
    if (gap.cls != cls)
        throw DomainError("gap belongs to a different symmetry class");
    if (mu >= 1.0)
        return {};
    const double target = mu * (2.0 - mu);
    Gap sharp = gap;
    if (gap.omega_b > 0.0)
        sharp.omega_b = refine_edge(gap.omega_b, L, cls, true);
    sharp.omega_t = refine_edge(gap.omega_t, L, cls, false);
    const std::vector<double> roots = cls == SymmetryClass::symmetric
                                          ? symmetric_roots(L, target, sharp, 0.0)
                                          : sampled_roots(L, cls, target, sharp, 0.0);
    std::vector<GraphEigenvalue> out;
    for (double w : roots) {
        if (!(w > sharp.omega_b && w < sharp.omega_t))
            continue;
        const ExtendedReal g = g_value(w, L, cls);
        if (!g.is_finite() || std::abs(g.value) <= 1.0)
            continue;
        // Where F is very steep the residual can exceed tol by rounding alone;
        // a sign change of F - mu over a few ulps certifies the root instead.
        const double fw = capital_F_phi_form(w, L, cls) - mu;
        if (std::abs(fw) > tol) {
            const double delta = 64.0 * std::numeric_limits<double>::epsilon() * w;
            const double lo = p_function(w - delta, L, cls) - target;
            const double hi = p_function(w + delta, L, cls) - target;
            if (!((lo > 0.0) != (hi > 0.0))) {
                std::ostringstream os;
                os.precision(17);
                os << "root of F = mu failed verification at omega = " << w
                   << " (F - mu = " << fw << ")";
                throw NumericalError(os.str());
            }
        }
        out.push_back({w, w * w, gap, L, mu, cls, 1});
    }
    std::sort(out.begin(), out.end(),
              [](const GraphEigenvalue& a, const GraphEigenvalue& b) { return a.omega < b.omega; });
    return out;
}

GraphEigenfunction::GraphEigenfunction(GraphEigenvalue ev, double r, double amplitude)
    : ev_(std::move(ev)), r_(r), amplitude_(amplitude)
{
}

double GraphEigenfunction::vertex_value(std::int64_t j) const
{
    return amplitude_ * std::pow(r_, static_cast<double>(j < 0 ? -j : j));
}

TraceValue GraphEigenfunction::horizontal(std::int64_t j, double s, bool upper) const
{
    const double w = ev_.omega;
    const double sw = std::sin(w);
    double a = vertex_value(j);
    double b = vertex_value(j + 1);
    if (upper && ev_.cls == SymmetryClass::antisymmetric) {
        a = -a;
        b = -b;
    }
    const double s1 = std::sin(w * (1.0 - s));
    const double s2 = std::sin(w * s);
    const double c1 = std::cos(w * (1.0 - s));
    const double c2 = std::cos(w * s);
    TraceValue t;
    t.value = (a * s1 + b * s2) / sw;
    t.d1 = w * (-a * c1 + b * c2) / sw;
    t.d2 = -w * w * t.value;
    return t;
}

TraceValue GraphEigenfunction::vertical(std::int64_t j, double y) const
{
    const double w = ev_.omega;
    const double u = vertex_value(j);
    const double half = 0.5 * w * ev_.L;
    TraceValue t;
    if (ev_.cls == SymmetryClass::symmetric) {
        const double k = u / std::cos(half);
        t.value = k * std::cos(w * y);
        t.d1 = -k * w * std::sin(w * y);
    } else {
        const double k = -u / std::sin(half);
        t.value = k * std::sin(w * y);
        t.d1 = k * w * std::cos(w * y);
    }
    t.d2 = -w * w * t.value;
    return t;
}

double GraphEigenfunction::kirchhoff_residual(std::int64_t j) const
{
    const double half = 0.5 * ev_.L;
    const double wj = weight(j);
    double worst = 0.0;
    for (bool upper : {false, true}) {
        // Outgoing derivatives: towards decreasing x on the left edge,
        // increasing x on the right edge, and into the rung.
        const double left = -horizontal(j - 1, 1.0, upper).d1;
        const double right = horizontal(j, 0.0, upper).d1;
        const double rung = upper ? -vertical(j, half).d1 : vertical(j, -half).d1;
        worst = std::max(worst, std::abs(left + right + wj * rung));
    }
    return worst;
}

double GraphEigenfunction::norm_squared() const
{
    const double w = ev_.omega;
    const double r = r_;
    const double sw = std::sin(w);
    const double i_same = (0.5 - std::sin(2.0 * w) / (4.0 * w)) / (sw * sw);
    const double i_cross = (sw / w - std::cos(w)) / (2.0 * sw * sw);
    const double geometric = 1.0 / (1.0 - r * r);
    // Two horizontal rails, each with the mirror-symmetric sums over j >= 0 and j < 0.
    const double rails = 4.0 * ((1.0 + r * r) * i_same + 2.0 * r * i_cross) * geometric;
    const double L = ev_.L;
    const double half = 0.5 * w * L;
    double i_vert = 0.0;
    if (ev_.cls == SymmetryClass::symmetric) {
        const double c = std::cos(half);
        i_vert = (0.5 * L + std::sin(w * L) / (2.0 * w)) / (c * c);
    } else {
        const double s = std::sin(half);
        i_vert = (0.5 * L - std::sin(w * L) / (2.0 * w)) / (s * s);
    }
    const double rungs = i_vert * (ev_.mu + 2.0 * r * r * geometric);
    return amplitude_ * amplitude_ * (rails + rungs);
}

GraphEigenfunction build_eigenfunction(const GraphEigenvalue& ev)
{
    const ExtendedReal g = g_value(ev.omega, ev.L, ev.cls);
    const ExtendedReal gmu = g_mu_value(ev.omega, ev.L, ev.mu, ev.cls);
    if (!g.is_finite() || !gmu.is_finite())
        throw NumericalError("build_eigenfunction: g is not finite at the eigenvalue");
    const double r = reflection_root_from_g(g.value);
    if (std::abs(r + gmu.value) > 1e-8) {
        std::ostringstream os;
        os.precision(15);
        os << "build_eigenfunction: r = " << r << " but -g_mu = " << -gmu.value
           << " (omega = " << ev.omega << " is not a defect eigenvalue)";
        throw NumericalError(os.str());
    }
    const GraphEigenfunction unit(ev, r, 1.0);
    return GraphEigenfunction(ev, r, 1.0 / std::sqrt(unit.norm_squared()));
}

FlatBandSet flat_bands(const LengthSpec& L, SymmetryClass cls, double omega_max)
{
    FlatBandSet out;
    out.condition_proven = cls == SymmetryClass::symmetric;
    if (!L.is_rational())
        return out;
    const std::int64_t p = L.numerator();
    const std::int64_t q = L.denominator();
    out.in_Qc = (p % 2) != 0;
    if (out.in_Qc)
        out.witness = std::make_pair(p, q);

    // omega = q t pi. Symmetric: sin(omega) = cos(omega L/2) = 0 needs t p odd.
    // Antisymmetric: sin(omega) = sin(omega L/2) = 0 needs t p even.
    for (std::int64_t t = 1; static_cast<double>(q * t) * pi <= omega_max + 1e-12; ++t) {
        const bool odd = ((t * p) % 2) != 0;
        if ((cls == SymmetryClass::symmetric) == odd)
            out.omegas.push_back(static_cast<double>(q * t) * pi);
    }
    return out;
}

CoverReport spectrum_cover_check(double L, double omega_max, double hole_tol,
                                 const ScanOptions& opts)
{
    std::vector<Band> all = essential_bands(L, SymmetryClass::symmetric, omega_max, opts);
    const std::vector<Band> anti = essential_bands(L, SymmetryClass::antisymmetric, omega_max, opts);
    all.insert(all.end(), anti.begin(), anti.end());
    std::sort(all.begin(), all.end(),
              [](const Band& a, const Band& b) { return a.omega_lo < b.omega_lo; });

    CoverReport report;
    double reach = 0.0;
    for (const Band& b : all) {
        if (b.omega_lo > reach) {
            const Band hole{reach, b.omega_lo};
            report.max_hole = std::max(report.max_hole, hole.omega_hi - hole.omega_lo);
            if (hole.omega_hi - hole.omega_lo > hole_tol)
                report.holes.push_back(hole);
        }
        reach = std::max(reach, b.omega_hi);
    }
    if (reach < omega_max) {
        report.max_hole = std::max(report.max_hole, omega_max - reach);
        if (omega_max - reach > hole_tol)
            report.holes.push_back({reach, omega_max});
    }
    report.covered = report.holes.empty();
    return report;
}

std::vector<BlochRoots> bloch_curves(double L, SymmetryClass cls, double omega_max,
                                     std::span<const double> theta_grid, const ScanOptions& opts)
{
    if (!(omega_max > 0.0))
        throw DomainError("omega_max must be positive");
    if (theta_grid.empty())
        throw DomainError("theta grid is empty");

    const double step = omega_max / opts.steps;
    const std::vector<double> specials = special_points(L, cls, omega_max);
    std::vector<BlochRoots> out;
    out.reserve(theta_grid.size());

    for (double theta : theta_grid) {
        auto res = [&](double w) { return dispersion_residual(theta, w, L, cls); };
        BlochRoots br;
        br.theta = theta;
        std::vector<double> roots;

        std::vector<double> ws(opts.steps + 1);
        std::vector<double> rs(opts.steps + 1);
        for (int k = 0; k <= opts.steps; ++k) {
            ws[k] = std::min(omega_max, k * step);
            rs[k] = res(ws[k]);
        }
        for (int k = 0; k < opts.steps; ++k) {
            if (rs[k] == 0.0)
                roots.push_back(ws[k]);
            else if ((rs[k] > 0.0) != (rs[k + 1] > 0.0) && rs[k + 1] != 0.0)
                roots.push_back(detail::bisect_open(res, ws[k], ws[k + 1],
                                                    rs[k] > 0.0 ? 1.0 : -1.0, opts.tol));
        }
        if (rs[opts.steps] == 0.0)
            roots.push_back(ws[opts.steps]);

        // Tangential zeros: local minima of |residual| without a sign change.
        for (int k = 1; k < opts.steps; ++k) {
            const double a = std::abs(rs[k - 1]);
            const double b = std::abs(rs[k]);
            const double c = std::abs(rs[k + 1]);
            if (!(b < a && b < c) || (rs[k - 1] > 0.0) != (rs[k + 1] > 0.0))
                continue;
            if ((rs[k] > 0.0) != (rs[k - 1] > 0.0))
                continue;
            // Only minima that could plausibly reach zero are refined.
            if (b > 4.0 * std::max(a, c) - 3.0 * b + 1e-3)
                continue;
            auto absres = [&](double w) { return std::abs(res(w)); };
            const double wm = detail::golden_min(absres, ws[k - 1], ws[k + 1], opts.tol);
            const double rm = res(wm);
            if ((rm > 0.0) != (rs[k] > 0.0) && rm != 0.0) {
                const double s = rs[k] > 0.0 ? 1.0 : -1.0;
                roots.push_back(detail::bisect_open(res, ws[k - 1], wm, s, opts.tol));
                roots.push_back(detail::bisect_open(res, wm, ws[k + 1], -s, opts.tol));
            } else if (std::abs(rm) <= 1e-12) {
                roots.push_back(wm);
            } else if (std::abs(rm) <= 1e-8) {
                br.unresolved.push_back(wm);
            }
        }

        for (double p : specials)
            if (std::abs(res(p)) <= 1e-12)
                roots.push_back(p);

        std::sort(roots.begin(), roots.end());
        for (double w : roots) {
            if (cls == SymmetryClass::antisymmetric && w <= merge_tol)
                continue;
            if (br.omegas.empty() || w - br.omegas.back() > merge_tol)
                br.omegas.push_back(w);
        }
        out.push_back(std::move(br));
    }
    return out;
}

} // namespace ladder::graph
