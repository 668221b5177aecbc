#pragma once

#include <cmath>
#include <functional>
#include <numbers>

namespace ladder::detail {

constexpr double pi = std::numbers::pi;

/// Bisection on (a, b) for a function known to have sign `sign_a` just right
/// of a and the opposite sign just left of b. The endpoints are never
/// evaluated, so the function may be singular there.
template <class F>
double bisect_open(F&& f, double a, double b, double sign_a, double tol)
{
    for (int it = 0; it < 200 && b - a > tol; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b)
            break;
        const double fm = f(m);
        if (fm == 0.0)
            return m;
        if ((fm > 0.0) == (sign_a > 0.0))
            a = m;
        else
            b = m;
    }
    return 0.5 * (a + b);
}

/// Locates the switch point of a boolean predicate between a and b, where
/// pred(a) != pred(b). Returns {last point with pred(a), first with pred(b)}.
template <class P>
std::pair<double, double> bisect_predicate(P&& pred, double a, double b, double tol)
{
    const bool pa = pred(a);
    for (int it = 0; it < 200 && b - a > tol; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b)
            break;
        if (pred(m) == pa)
            a = m;
        else
            b = m;
    }
    return {a, b};
}

/// Golden-section minimization on [a, b].
template <class F>
double golden_min(F&& f, double a, double b, double tol, int max_it = 200)
{
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < max_it && b - a > tol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? c : d;
}

/// Distance from x to the nearest point of offset + pi*Z, and that point's index.
inline double distance_to_lattice(double x, double offset, long long& index)
{
    const double k = std::nearbyint((x - offset) / pi);
    index = static_cast<long long>(k);
    return std::abs(x - offset - k * pi);
}

/// Least-squares slope of log(y) against log(x).
template <class XS, class YS>
double loglog_slope(const XS& xs, const YS& ys)
{
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(xs[i]);
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double nn = static_cast<double>(n);
    return (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
}

} // namespace ladder::detail
