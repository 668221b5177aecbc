// Runs the acceptance criteria and prints one PASS/FAIL line for each.
// Exit status is the number of failed criteria.

#include "detail/roots.hpp"
#include "ladder/eigensolve.hpp"
#include "ladder/fem2d.hpp"
#include "ladder/graph_core.hpp"
#include "ladder/graph_oracle.hpp"
#include "ladder/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ladder;

namespace {

constexpr double pi = std::numbers::pi;
constexpr auto sym = SymmetryClass::symmetric;
constexpr auto anti = SymmetryClass::antisymmetric;

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Verdict()> run;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string join_series(const study::ConvergenceResult& r)
{
    std::ostringstream os;
    for (const auto& s : r.series) {
        os << s.name << " slope " << fmt("%.3f", s.slope) << " errors";
        for (double e : s.error)
            os << ' ' << fmt("%.3e", e);
        os << "; ";
    }
    return os.str();
}

// A theta in [0, pi] with a residual sign change, bisected to 1e-10.
bool has_theta_root(double w, double L, SymmetryClass cls)
{
    const double a = graph::dispersion_residual(0.0, w, L, cls);
    const double b = graph::dispersion_residual(pi, w, L, cls);
    if (a == 0.0 || b == 0.0)
        return true;
    if ((a > 0.0) == (b > 0.0))
        return false;
    auto f = [&](double t) { return graph::dispersion_residual(t, w, L, cls); };
    const double t = detail::bisect_open(f, 0.0, pi, a > 0.0 ? 1.0 : -1.0, 1e-10);
    const double lo = std::max(0.0, t - 1e-10);
    const double hi = std::min(pi, t + 1e-10);
    return f(lo) * f(hi) <= 0.0;
}

Verdict membership()
{
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> dist(0.0, 6 * pi);
    int total = 0;
    int bad = 0;
    for (double L : {2.0, 8.0, 0.5}) {
        int taken = 0;
        while (taken < 10000) {
            const double w = dist(rng);
            const auto g = graph::g_value(w, L, sym);
            if (!g.is_finite() || w <= 0.0)
                continue;
            ++taken;
            bad += has_theta_root(w, L, sym) != (std::abs(g.value) <= 1.0);
        }
        total += taken;
    }
    return {bad == 0, std::to_string(total) + " samples, " + std::to_string(bad) + " disagreements"};
}

bool in_bands(double p, const std::vector<graph::Band>& bands)
{
    const double tol = 1e-9 * std::max(1.0, p);
    return std::any_of(bands.begin(), bands.end(), [&](const graph::Band& b) {
        return p >= b.omega_lo - tol && p <= b.omega_hi + tol;
    });
}

Verdict special_points()
{
    int checked = 0;
    int missing = 0;
    for (double L : {2.0, 8.0, 0.5, 10 * pi / 7}) {
        for (auto cls : {sym, anti}) {
            const auto bands = graph::essential_bands(L, cls, 10 * pi);
            for (double p : graph::special_points(L, cls, 10 * pi)) {
                ++checked;
                missing += !in_bands(p, bands);
            }
        }
    }
    return {missing == 0, std::to_string(checked) + " points, " + std::to_string(missing) +
                              " outside the bands"};
}

Verdict root_counts()
{
    int wrong = 0;
    int gaps_checked = 0;
    for (double L : {2.0, 8.0}) {
        const auto sg = graph::gaps(L, sym, 20 * pi);
        const auto ag = graph::gaps(L, anti, 20 * pi);
        if (sg.size() < 5 || ag.size() < 5)
            return {false, "fewer than five gaps found"};
        for (double mu : {0.1, 0.25, 0.5, 0.9, 1.0, 1.5}) {
            for (int k = 0; k < 5; ++k) {
                const auto& g = sg[static_cast<std::size_t>(k)];
                const auto n = graph::discrete_eigenvalues(L, mu, sym, g).size();
                const std::size_t expected = mu >= 1.0 ? 0 : g.type == graph::GapType::i ? 2 : 1;
                wrong += n != expected;
                const auto& a = ag[static_cast<std::size_t>(k)];
                const auto na = graph::discrete_eigenvalues(L, mu, anti, a).size();
                wrong += mu >= 1.0 ? na != 0 : (na < 1 || na > 2);
                gaps_checked += 2;
            }
        }
    }
    return {wrong == 0, std::to_string(gaps_checked) + " (gap, mu) cases, " +
                            std::to_string(wrong) + " wrong counts"};
}

// The h-order comes from successive differences, which cancel the fixed
// truncation offset of the 40-cell problem; slowly decaying modes otherwise
// flatten the fit once the discretization error reaches that offset.
Verdict oracle_equivalence()
{
    const std::vector<double> hs{8e-3, 4e-3, 2e-3, 1e-3};
    double worst_rel = 0.0;
    double order_lo = 1e9;
    double order_hi = -1e9;
    double raw_lo = 1e9;
    int count = 0;
    for (auto cls : {sym, anti}) {
        for (double mu : {0.25, 0.5}) {
            LadderParams p;
            p.L = LengthSpec(2, 1);
            p.mu = mu;
            for (const auto& gap : graph::gaps(2.0, cls, 4.0)) {
                const auto exact = graph::discrete_eigenvalues(2.0, mu, cls, gap);
                if (exact.empty())
                    continue;
                const double margin = 0.01 * (gap.lambda_t() - gap.lambda_b());
                const std::pair<double, double> window{gap.lambda_b() + margin,
                                                       gap.lambda_t() - margin};
                std::vector<std::vector<double>> vals(exact.size());
                for (double h : hs) {
                    const auto found =
                        oracle::oracle_gap_eigenvalues(oracle::discretize_graph(p, cls, 40, h), window);
                    if (found.size() != exact.size())
                        return {false, "eigenvalue count differs at h=" + fmt("%g", h)};
                    for (std::size_t i = 0; i < exact.size(); ++i)
                        vals[i].push_back(found[i]);
                }
                for (std::size_t i = 0; i < exact.size(); ++i) {
                    worst_rel = std::max(worst_rel, std::abs(vals[i].back() - exact[i].lambda) /
                                                        exact[i].lambda);
                    std::vector<double> diff;
                    std::vector<double> raw;
                    for (std::size_t k = 0; k + 1 < hs.size(); ++k)
                        diff.push_back(std::abs(vals[i][k] - vals[i][k + 1]));
                    for (double v : vals[i])
                        raw.push_back(std::abs(v - exact[i].lambda));
                    const std::vector<double> hd(hs.begin(), hs.end() - 1);
                    const double order = fem::fit_loglog_slope(hd, diff);
                    order_lo = std::min(order_lo, order);
                    order_hi = std::max(order_hi, order);
                    raw_lo = std::min(raw_lo, fem::fit_loglog_slope(hs, raw));
                    ++count;
                }
            }
        }
    }
    const bool pass = count > 0 && worst_rel <= 1e-4 && order_lo >= 1.8 && order_hi <= 2.2;
    return {pass, std::to_string(count) + " eigenvalues, worst relative error " +
                      fmt("%.2e", worst_rel) + " at h=1e-3, h-order in [" +
                      fmt("%.3f", order_lo) + ", " + fmt("%.3f", order_hi) +
                      "] (lowest order against the closed form " + fmt("%.3f", raw_lo) + ")"};
}

Verdict cover()
{
    bool pass = true;
    std::string detail;
    for (double L : {2.0, 8.0}) {
        const auto r = graph::spectrum_cover_check(L, 10 * pi, 1e-8);
        pass = pass && r.covered && r.max_hole <= 1e-8;
        detail += "L=" + fmt("%g", L) + " max hole " + fmt("%.2e", r.max_hole) + "; ";
    }
    return {pass, detail};
}

study::StudyConfig convergence_config(study::StudyKind kind, std::vector<double> eps)
{
    study::StudyConfig c;
    c.command = study::Command::study_convergence;
    c.study = kind;
    c.eps = std::move(eps);
    c.h_factor = 0.25;
    c.ntheta = 17;
    return c;
}

Verdict band_edges()
{
    const auto c = convergence_config(study::StudyKind::bands, {0.2, 0.1, 0.05, 0.025});
    c.validate();
    const auto r = study::band_edge_study(c);
    return {r.pass, join_series(r) + "window [0.8, 1.2]"};
}

Verdict trapped_modes()
{
    auto c = convergence_config(study::StudyKind::eigs, {0.2, 0.1, 0.05});
    c.mu = {0.25};
    c.cells = 10;
    c.validate();
    const auto r = study::eigenvalue_study(c);
    std::string counts;
    for (double e : c.eps)
        counts += std::to_string(static_cast<int>(r.values.at("count_eps_" +
                                                             study::format_number(e)))) + " ";
    return {r.pass, "in-gap counts " + counts + "; " + join_series(r) + "min slope 0.8"};
}

Verdict quasimode()
{
    auto c = convergence_config(study::StudyKind::quasimode, {0.2, 0.1, 0.05});
    c.mu = {0.25};
    c.validate();
    const auto r = study::quasimode_study(c);
    return {r.pass, join_series(r) + "exponent taken from the dual ratio, min 0.5"};
}

Verdict flat_band()
{
    auto c = convergence_config(study::StudyKind::flatband, {0.1, 0.05});
    c.L = LengthSpec(1, 2);
    c.validate();
    const auto r = study::flatband_study(c);
    std::string detail = "target " + fmt("%.4f", r.values.count("target_omega")
                                                     ? r.values.at("target_omega")
                                                     : 0.0);
    if (r.values.count("C"))
        detail += ", C " + fmt("%.3f", r.values.at("C"));
    if (r.values.count("ratio_1"))
        detail += ", width ratio " + fmt("%.3f", r.values.at("ratio_1")) + " (expected 2 +/- 30%)";
    for (const auto& n : r.notes)
        detail += "; " + n;
    return {r.pass, detail};
}

Verdict rectangle()
{
    const double a = 1.0;
    const double b = 0.6;
    std::vector<double> exact{pi * pi / (b * b), pi * pi, pi * pi * (1 + 1 / (b * b)), 4 * pi * pi};
    std::sort(exact.begin(), exact.end());
    const std::vector<double> hs{0.1, 0.05, 0.025};
    std::vector<std::vector<double>> err(exact.size());
    for (double h : hs) {
        const auto p = fem::assemble_pencil(fem::build_rectangle_mesh(a, b, h));
        eig::ShiftInvertOptions o;
        o.want_vectors = false;
        const auto vals = eig::eig_sparse_shift_invert(p.K, p.M, -1.0, 5, o).values;
        for (std::size_t i = 0; i < exact.size(); ++i)
            err[i].push_back(std::abs(vals[i + 1] - exact[i]));
    }
    double lo = 1e9;
    double hi = -1e9;
    for (const auto& e : err) {
        const double order = fem::fit_loglog_slope(hs, e);
        lo = std::min(lo, order);
        hi = std::max(hi, order);
    }
    return {lo >= 1.8 && hi <= 2.2,
            "4 eigenvalues, h-order in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]"};
}

} // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {1, "membership equivalence", 10, membership},
        {2, "special points in bands", 5, special_points},
        {3, "root counts", 10, root_counts},
        {4, "oracle equivalence", 120, oracle_equivalence},
        {5, "full-operator cover", 5, cover},
        {6, "band edge convergence", 900, band_edges},
        {7, "trapped modes", 1200, trapped_modes},
        {8, "quasi-mode residual", 600, quasimode},
        {9, "flat-band splitting", 600, flat_band},
        {10, "rectangle self-check", 60, rectangle},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_s;
        const bool pass = v.pass && in_time;
        failed += !pass;
        std::printf("criterion %2d %-26s %s  (%.1f s, limit %.0f s%s) %s\n", c.id, c.name,
                    pass ? "PASS" : "FAIL", secs, c.limit_s, in_time ? "" : ", too slow",
                    v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
                criteria.size());
    return failed;
}
