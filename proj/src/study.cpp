#include "ladder/study.hpp"

#include "ladder/errors.hpp"
#include "ladder/fem2d.hpp"
#include "ladder/graph_core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace ladder::study {

using nlohmann::json;

namespace {

constexpr double pi = std::numbers::pi;

template <class E>
E lookup(const std::vector<std::pair<E, std::string>>& table, const std::string& text,
         const char* field)
{
    for (const auto& [e, name] : table)
        if (name == text)
            return e;
    std::string names;
    for (const auto& [e, name] : table)
        names += (names.empty() ? "" : ", ") + name;
    throw ConfigError(field, "unknown value '" + text + "' (expected one of " + names + ")");
}

const std::vector<std::pair<Command, std::string>> command_names{
    {Command::graph_bands, "graph bands"},     {Command::graph_gaps, "graph gaps"},
    {Command::graph_eigs, "graph eigs"},       {Command::fem_bands, "fem bands"},
    {Command::fem_localized, "fem localized"}, {Command::study_convergence, "study convergence"},
};

const std::vector<std::pair<StudyKind, std::string>> study_names{
    {StudyKind::bands, "bands"},         {StudyKind::eigs, "eigs"},
    {StudyKind::quasimode, "quasimode"}, {StudyKind::flatband, "flatband"},
    {StudyKind::all, "all"},
};

} // namespace

std::string to_string(Command c)
{
    for (const auto& [e, name] : command_names)
        if (e == c)
            return name;
    return "?";
}

Command parse_command(const std::string& text) { return lookup(command_names, text, "command"); }

std::string to_string(StudyKind k)
{
    for (const auto& [e, name] : study_names)
        if (e == k)
            return name;
    return "?";
}

StudyKind parse_study_kind(const std::string& text)
{
    return lookup(study_names, text, "study");
}

std::string format_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

void StudyConfig::validate() const
{
    LadderParams p;
    p.L = L;
    p.validate();
    if (!(omega_max > 0.0) || !std::isfinite(omega_max))
        throw ConfigError("omega-max", "must be positive");
    if (mu.empty())
        throw ConfigError("mu", "at least one value is required");
    for (double m : mu)
        if (!(m > 0.0) || !std::isfinite(m))
            throw ConfigError("mu", "values must be positive");
    if (ntheta < 2)
        throw ConfigError("ntheta", "at least 2 quasimomenta are required");
    if (nev < 1)
        throw ConfigError("nev", "must be at least 1");
    if (!(tol > 0.0))
        throw ConfigError("tol", "must be positive");
    if (!(h_factor > 0.0) || h_factor > 1.0 / 3.0 + 1e-12)
        throw ConfigError("h", "h_factor must lie in (0, 1/3]");
    if (gap < 1)
        throw ConfigError("gap", "gap index is 1-based");
    if (window && !(window->first >= 0.0 && window->first < window->second))
        throw ConfigError("window", "need 0 <= lo < hi");

    const bool fem = command == Command::fem_bands || command == Command::fem_localized ||
                     command == Command::study_convergence;
    if (!fem)
        return;
    if (eps.empty())
        throw ConfigError("eps", "the two-dimensional solvers need at least one value");
    for (double e : eps) {
        p.eps = e;
        p.validate_with_eps();
        const double hh = mesh_size(e);
        if (!(hh > 0.0) || hh > e / 3.0 * (1.0 + 1e-12))
            throw ConfigError("h", "mesh size must satisfy 0 < h <= eps/3 for every eps");
    }
    if (command == Command::fem_localized || command == Command::study_convergence)
        if (cells < 4)
            throw ConfigError("cells", "at least 4 cells are required");
    if (command == Command::study_convergence && eps.size() < 3 && study != StudyKind::flatband)
        throw ConfigError("eps", "a convergence study needs at least 3 values");
    if (command == Command::study_convergence && eps.size() < 2)
        throw ConfigError("eps", "a convergence study needs at least 2 values");
}

namespace {

json config_json(const StudyConfig& c)
{
    json j;
    j["command"] = to_string(c.command);
    j["L"] = c.L.to_string();
    j["eps"] = c.eps;
    j["mu"] = c.mu;
    j["class"] = std::string(to_string(c.cls));
    j["omega_max"] = c.omega_max;
    j["ntheta"] = c.ntheta;
    j["h"] = c.h ? json(*c.h) : json(nullptr);
    j["h_factor"] = c.h_factor;
    j["cells"] = c.cells;
    j["nev"] = c.nev;
    j["gap"] = c.gap;
    j["window"] = c.window ? json::array({c.window->first, c.window->second}) : json(nullptr);
    j["out"] = c.out;
    j["seed"] = c.seed;
    j["tol"] = c.tol;
    j["study"] = to_string(c.study);
    j["band_slope"] = json::array({c.band_slope.first, c.band_slope.second});
    j["eig_slope_min"] = c.eig_slope_min;
    j["residual_exponent_min"] = c.residual_exponent_min;
    j["halving_tol"] = c.halving_tol;
    j["dump_modes"] = c.dump_modes;
    return j;
}

template <class T>
void read(const json& j, const char* key, T& out)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key, std::string("wrong type: ") + e.what());
    }
}

StudyConfig config_from(const json& j)
{
    if (!j.is_object())
        throw ConfigError("config", "expected a JSON object");
    StudyConfig c;
    std::string s;
    if (j.contains("command")) {
        read(j, "command", s);
        c.command = parse_command(s);
    }
    if (j.contains("L")) {
        if (j["L"].is_number())
            c.L = LengthSpec::from_double(j["L"].get<double>());
        else {
            read(j, "L", s);
            c.L = LengthSpec::parse(s);
        }
    }
    read(j, "eps", c.eps);
    read(j, "mu", c.mu);
    if (j.contains("class")) {
        read(j, "class", s);
        c.cls = parse_symmetry_class(s);
    }
    read(j, "omega_max", c.omega_max);
    read(j, "ntheta", c.ntheta);
    if (j.contains("h") && !j["h"].is_null()) {
        double h = 0;
        read(j, "h", h);
        c.h = h;
    }
    read(j, "h_factor", c.h_factor);
    read(j, "cells", c.cells);
    read(j, "nev", c.nev);
    read(j, "gap", c.gap);
    if (j.contains("window") && !j["window"].is_null()) {
        std::vector<double> w;
        read(j, "window", w);
        if (w.size() != 2)
            throw ConfigError("window", "expected two values");
        c.window = std::make_pair(w[0], w[1]);
    }
    read(j, "out", c.out);
    read(j, "seed", c.seed);
    read(j, "tol", c.tol);
    if (j.contains("study")) {
        read(j, "study", s);
        c.study = parse_study_kind(s);
    }
    if (j.contains("band_slope")) {
        std::vector<double> w;
        read(j, "band_slope", w);
        if (w.size() != 2)
            throw ConfigError("band_slope", "expected two values");
        c.band_slope = {w[0], w[1]};
    }
    read(j, "eig_slope_min", c.eig_slope_min);
    read(j, "residual_exponent_min", c.residual_exponent_min);
    read(j, "halving_tol", c.halving_tol);
    read(j, "dump_modes", c.dump_modes);
    return c;
}

} // namespace

std::string config_to_json(const StudyConfig& c) { return config_json(c).dump(2); }

StudyConfig config_from_json(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("invalid JSON: ") + e.what());
    }
    return config_from(j);
}

ParsedReport parse_report(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("report", std::string("invalid JSON: ") + e.what());
    }
    if (!j.contains("schema_version") || j["schema_version"] != schema_version)
        throw ConfigError("schema_version", "unsupported report schema");
    return {config_from(j.at("config")), j.at("results").dump()};
}

namespace {

LadderParams params_of(const StudyConfig& c, std::optional<double> eps = {}, double mu = 1.0)
{
    LadderParams p;
    p.L = c.L;
    p.eps = eps;
    p.mu = mu;
    return p;
}

class Csv {
public:
    Csv(const StudyConfig& c, std::vector<std::string> columns)
    {
        json head;
        head["schema_version"] = schema_version;
        head["config"] = config_json(c);
        os_ << "# " << head.dump() << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i)
            os_ << (i ? "," : "") << columns[i];
        os_ << '\n';
    }

    template <class... Cells>
    void row(const Cells&... cells)
    {
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
        os_ << '\n';
    }

    std::string str() const { return os_.str(); }

private:
    static std::string cell(double v) { return format_number(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }

    std::ostringstream os_;
};

std::string cls_name(SymmetryClass c) { return std::string(to_string(c)); }

json gap_json(const graph::Gap& g)
{
    return {{"omega_b", g.omega_b},   {"omega_t", g.omega_t},
            {"lambda_b", g.lambda_b()}, {"lambda_t", g.lambda_t()},
            {"type", graph::to_string(g.type)}};
}

Output finish(const StudyConfig& c, const Csv& csv, json results)
{
    json report;
    report["schema_version"] = schema_version;
    report["config"] = config_json(c);
    report["results"] = std::move(results);
    Output out;
    out.csv = csv.str();
    out.json = report.dump(2);
    return out;
}

Output run_graph_bands(const StudyConfig& c)
{
    const double L = c.L.value();
    const auto bands = graph::essential_bands(L, c.cls, c.omega_max);
    const auto flat = graph::flat_bands(c.L, c.cls, c.omega_max);
    Csv csv(c, {"omega", "lambda", "kind", "gap_type", "class"});
    json jb = json::array();
    for (const auto& b : bands) {
        csv.row(b.omega_lo, b.lambda_lo(), "band_edge", "", cls_name(c.cls));
        csv.row(b.omega_hi, b.lambda_hi(), "band_edge", "", cls_name(c.cls));
        jb.push_back({{"omega_lo", b.omega_lo},
                      {"omega_hi", b.omega_hi},
                      {"lambda_lo", b.lambda_lo()},
                      {"lambda_hi", b.lambda_hi()}});
    }
    for (double w : flat.omegas)
        csv.row(w, w * w, "flat", "", cls_name(c.cls));
    json jf;
    jf["in_Qc"] = flat.in_Qc;
    jf["omegas"] = flat.omegas;
    jf["condition_proven"] = flat.condition_proven;
    return finish(c, csv, {{"bands", jb}, {"flat_bands", jf}});
}

Output run_graph_gaps(const StudyConfig& c)
{
    const auto gaps = graph::gaps(c.L.value(), c.cls, c.omega_max);
    Csv csv(c, {"omega", "lambda", "kind", "gap_type", "class"});
    json jg = json::array();
    for (const auto& g : gaps) {
        const std::string t = graph::to_string(g.type);
        csv.row(g.omega_b, g.lambda_b(), "gap_b", t, cls_name(c.cls));
        csv.row(g.omega_t, g.lambda_t(), "gap_t", t, cls_name(c.cls));
        jg.push_back(gap_json(g));
    }
    return finish(c, csv, {{"gaps", jg}});
}

Output run_graph_eigs(const StudyConfig& c)
{
    const double L = c.L.value();
    const auto gaps = graph::gaps(L, c.cls, c.omega_max);
    Csv csv(c, {"omega", "lambda", "kind", "gap_type", "class", "mu", "gap_index"});
    json je = json::array();
    for (double mu : c.mu)
        for (std::size_t i = 0; i < gaps.size(); ++i)
            for (const auto& ev : graph::discrete_eigenvalues(L, mu, c.cls, gaps[i])) {
                csv.row(ev.omega, ev.lambda, "eig", graph::to_string(gaps[i].type),
                        cls_name(c.cls), mu, static_cast<int>(i + 1));
                je.push_back({{"omega", ev.omega},
                              {"lambda", ev.lambda},
                              {"mu", mu},
                              {"gap_index", i + 1},
                              {"gap", gap_json(gaps[i])},
                              {"decay_rate", graph::reflection_root(ev.omega, L, c.cls)}});
            }
    json jg = json::array();
    for (const auto& g : gaps)
        jg.push_back(gap_json(g));
    return finish(c, csv, {{"gaps", jg}, {"eigenvalues", je}});
}

json bands_json(const fem::SpectralReport& r)
{
    json jb = json::array();
    for (const auto& b : r.bands)
        jb.push_back({{"rank", b.rank},
                      {"lambda_lo", b.lambda_lo},
                      {"lambda_hi", b.lambda_hi},
                      {"omega_lo", b.omega_lo()},
                      {"omega_hi", b.omega_hi()},
                      {"theta_lo", b.theta_lo},
                      {"theta_hi", b.theta_hi}});
    json jg = json::array();
    for (const auto& g : r.gaps)
        jg.push_back({{"lambda_b", g.lambda_b},
                      {"lambda_t", g.lambda_t},
                      {"omega_b", g.omega_b()},
                      {"omega_t", g.omega_t()},
                      {"rank_below", g.rank_below},
                      {"rank_above", g.rank_above}});
    return {{"bands", jb}, {"gaps", jg}, {"n_dofs", r.n_dofs}, {"log", r.log}};
}

fem::SpectralReport cell_bands(const StudyConfig& c, double eps, int nev)
{
    fem::BandOptions o;
    o.tol = std::max(c.tol, 1e-12);
    o.seed = c.seed;
    return fem::fem_bloch_bands(params_of(c, eps), c.cls, nev, fem::uniform_theta_grid(c.ntheta),
                                c.mesh_size(eps), o);
}

Output run_fem_bands(const StudyConfig& c)
{
    Csv csv(c, {"eps", "theta", "rank", "lambda", "omega"});
    json runs = json::array();
    for (double eps : c.eps) {
        const auto r = cell_bands(c, eps, c.nev);
        for (std::size_t i = 0; i < r.theta_grid.size(); ++i)
            for (int k = 0; k < c.nev; ++k) {
                const double lam = r.theta_table[i][static_cast<std::size_t>(k)];
                csv.row(eps, r.theta_grid[i], k, lam, std::sqrt(std::max(0.0, lam)));
            }
        json j = bands_json(r);
        j["eps"] = eps;
        j["h"] = c.mesh_size(eps);
        runs.push_back(j);
    }
    json graph_gaps = json::array();
    double top = 0.0;
    for (const auto& r : runs)
        for (const auto& b : r["bands"])
            top = std::max(top, b["omega_hi"].get<double>());
    for (const auto& g : graph::gaps(c.L.value(), c.cls, std::max(top, 1.0)))
        graph_gaps.push_back(gap_json(g));
    return finish(c, csv, {{"runs", runs}, {"graph_gaps", graph_gaps}});
}

// The FEM gap used as the eigenvalue window of a localized run.
std::pair<double, double> localized_window(const StudyConfig& c, const fem::SpectralReport& r,
                                           double eps)
{
    if (r.gaps.size() < static_cast<std::size_t>(c.gap)) {
        std::ostringstream os;
        os << "eps = " << eps << ": only " << r.gaps.size() << " FEM gaps below rank " << c.nev
           << "; raise nev";
        throw ConfigError("gap", os.str());
    }
    const auto& g = r.gaps[static_cast<std::size_t>(c.gap - 1)];
    if (!c.window)
        return g.interior();
    const double lo = c.window->first * c.window->first;
    const double hi = c.window->second * c.window->second;
    if (!(lo > g.lambda_b && hi < g.lambda_t)) {
        std::ostringstream os;
        os.precision(10);
        os << "window must lie strictly inside the FEM gap (" << g.omega_b() << ", "
           << g.omega_t() << ") at eps = " << eps;
        throw ConfigError("window", os.str());
    }
    return {lo, hi};
}

Output run_fem_localized(const StudyConfig& c)
{
    Csv csv(c, {"eps", "mu", "omega", "lambda", "kind", "gap_index", "central_fraction",
                "decay_ratio", "graph_omega", "graph_ratio", "residual"});
    json runs = json::array();
    std::vector<std::pair<std::string, std::string>> attachments;
    for (double eps : c.eps) {
        const auto bands = cell_bands(c, eps, c.nev);
        const auto window = localized_window(c, bands, eps);
        const auto& gap = bands.gaps[static_cast<std::size_t>(c.gap - 1)];
        for (double mu : c.mu) {
            const double h = c.mesh_size(eps);
            const auto rep = fem::localized_modes(params_of(c, eps, mu), c.cls, window, c.cells, h, c.seed);
            json modes = json::array();
            int idx = 0;
            for (const auto& d : rep.defects) {
                if (!(d.lambda > gap.lambda_b && d.lambda < gap.lambda_t))
                    throw NumericalError("defect eigenvalue outside the FEM gap");
                const double nan = std::numeric_limits<double>::quiet_NaN();
                csv.row(eps, mu, d.omega, d.lambda, "eig", c.gap, d.central_fraction,
                        d.mass_ratio, d.omega_graph.value_or(nan), d.graph_ratio.value_or(nan),
                        d.residual);
                json m = {{"omega", d.omega},
                          {"lambda", d.lambda},
                          {"central_fraction", d.central_fraction},
                          {"decay_ratio", d.mass_ratio},
                          {"cell_mass", d.cell_mass},
                          {"residual", d.residual}};
                if (d.omega_graph) {
                    m["graph_omega"] = *d.omega_graph;
                    m["graph_ratio"] = *d.graph_ratio;
                }
                modes.push_back(m);
                if (c.dump_modes) {
                    const auto mesh = fem::build_supercell_mesh(params_of(c, eps, mu), c.cls,
                                                                c.cells, h);
                    std::ostringstream os;
                    fem::write_mesh(os, mesh, &d.nodal);
                    std::ostringstream name;
                    name << "mode_eps" << eps << "_mu" << mu << "_" << idx << ".mesh";
                    attachments.emplace_back(name.str(), os.str());
                }
                ++idx;
            }
            runs.push_back({{"eps", eps},
                            {"mu", mu},
                            {"h", h},
                            {"window_lambda", {window.first, window.second}},
                            {"gap_omega", {gap.omega_b(), gap.omega_t()}},
                            {"inertia_count", rep.window_count},
                            {"n_dofs", rep.n_dofs},
                            {"modes", modes},
                            {"log", rep.log}});
        }
    }
    Output out = finish(c, csv, {{"runs", runs}});
    out.attachments = std::move(attachments);
    return out;
}

graph::Gap graph_gap_near(const StudyConfig& c, double omega_b, double omega_t)
{
    const auto gaps = graph::gaps(c.L.value(), c.cls, omega_t + pi);
    if (gaps.empty())
        throw NumericalError("the graph has no gap to compare with");
    const double mid = 0.5 * (omega_b + omega_t);
    return *std::min_element(gaps.begin(), gaps.end(), [&](const auto& a, const auto& b) {
        return std::abs(0.5 * (a.omega_b + a.omega_t) - mid) <
               std::abs(0.5 * (b.omega_b + b.omega_t) - mid);
    });
}

double first_sub_unit_mu(const StudyConfig& c)
{
    for (double m : c.mu)
        if (m < 1.0)
            return m;
    throw ConfigError("mu", "this study needs a value below 1");
}

bool decreasing(const std::vector<double>& v)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1]))
            return false;
    return true;
}

} // namespace

ConvergenceResult band_edge_study(const StudyConfig& c)
{
    ConvergenceResult res;
    res.kind = StudyKind::bands;
    Series lower{"gap_b", {}, {}, {}, {}, 0.0};
    Series upper{"gap_t", {}, {}, {}, {}, 0.0};
    for (double eps : c.eps) {
        const auto r = cell_bands(c, eps, c.nev);
        if (r.gaps.empty())
            throw NumericalError("no FEM gap found; raise nev");
        const auto& g = r.gaps.front();
        const auto ref = graph_gap_near(c, g.omega_b(), g.omega_t());
        for (auto* s : {&lower, &upper}) {
            const double v = s == &lower ? g.omega_b() : g.omega_t();
            const double w = s == &lower ? ref.omega_b : ref.omega_t;
            s->eps.push_back(eps);
            s->value.push_back(v);
            s->reference.push_back(w);
            s->error.push_back(std::abs(v - w));
        }
        for (const auto& line : r.log)
            res.notes.push_back("eps " + format_number(eps) + ": " + line);
    }
    res.pass = true;
    for (auto* s : {&lower, &upper}) {
        s->slope = fem::fit_loglog_slope(s->eps, s->error);
        res.pass = res.pass && s->slope >= c.band_slope.first && s->slope <= c.band_slope.second;
        res.series.push_back(*s);
    }
    return res;
}

ConvergenceResult eigenvalue_study(const StudyConfig& c)
{
    ConvergenceResult res;
    res.kind = StudyKind::eigs;
    const double mu = first_sub_unit_mu(c);
    std::vector<std::vector<double>> fem_by_eps;
    std::vector<graph::GraphEigenvalue> refs;
    for (double eps : c.eps) {
        const auto bands = cell_bands(c, eps, c.nev);
        if (bands.gaps.size() < static_cast<std::size_t>(c.gap))
            throw NumericalError("no FEM gap with the requested index; raise nev");
        const auto& g = bands.gaps[static_cast<std::size_t>(c.gap - 1)];
        const auto rep = fem::localized_modes(params_of(c, eps, mu), c.cls, g.interior(), c.cells,
                                              c.mesh_size(eps), c.seed);
        std::vector<double> vals;
        for (const auto& d : rep.defects)
            vals.push_back(d.lambda);
        fem_by_eps.push_back(vals);
        res.values["count_eps_" + format_number(eps)] = static_cast<double>(vals.size());
        if (refs.empty()) {
            const auto ref = graph_gap_near(c, g.omega_b(), g.omega_t());
            refs = graph::discrete_eigenvalues(c.L.value(), mu, c.cls, ref);
        }
        for (const auto& line : rep.log)
            res.notes.push_back("eps " + format_number(eps) + ": " + line);
    }
    if (refs.empty()) {
        res.notes.push_back("the graph gap holds no eigenvalue for this mu");
        return res;
    }
    bool any = false;
    res.pass = true;
    for (std::size_t k = 0; k < refs.size(); ++k) {
        Series s{"eig_" + std::to_string(k + 1), {}, {}, {}, {}, 0.0};
        bool complete = true;
        for (std::size_t i = 0; i < c.eps.size(); ++i) {
            const auto& vals = fem_by_eps[i];
            if (vals.empty()) {
                complete = false;
                break;
            }
            // Equal counts pair by rank; otherwise each root takes the nearest value.
            const double ref = refs[k].lambda;
            double best = 0.0;
            if (vals.size() == refs.size()) {
                best = vals[k];
            } else {
                best = *std::min_element(vals.begin(), vals.end(), [&](double a, double b) {
                    return std::abs(a - ref) < std::abs(b - ref);
                });
            }
            s.eps.push_back(c.eps[i]);
            s.value.push_back(best);
            s.reference.push_back(ref);
            s.error.push_back(std::abs(best - ref));
        }
        if (!complete) {
            res.notes.push_back("graph root " + format_number(refs[k].omega) +
                                " has no FEM partner at every eps");
            continue;
        }
        any = true;
        s.slope = fem::fit_loglog_slope(s.eps, s.error);
        res.pass = res.pass && decreasing(s.error) && s.slope >= c.eig_slope_min;
        res.series.push_back(s);
    }
    res.pass = res.pass && any;
    for (std::size_t i = 0; i < c.eps.size(); ++i)
        if (fem_by_eps[i].empty())
            res.pass = false;
    return res;
}

ConvergenceResult quasimode_study(const StudyConfig& c)
{
    ConvergenceResult res;
    res.kind = StudyKind::quasimode;
    const double mu = first_sub_unit_mu(c);
    const double L = c.L.value();
    const auto gaps = graph::gaps(L, c.cls, c.omega_max);
    if (gaps.size() < static_cast<std::size_t>(c.gap))
        throw ConfigError("gap", "the graph has fewer gaps below omega-max");
    const auto refs =
        graph::discrete_eigenvalues(L, mu, c.cls, gaps[static_cast<std::size_t>(c.gap - 1)]);
    if (refs.empty()) {
        res.notes.push_back("the graph gap holds no eigenvalue for this mu");
        return res;
    }
    res.pass = true;
    for (std::size_t k = 0; k < refs.size(); ++k) {
        Series dual{"dual_ratio_" + std::to_string(k + 1), {}, {}, {}, {}, 0.0};
        Series mass{"mass_ratio_" + std::to_string(k + 1), {}, {}, {}, {}, 0.0};
        for (double eps : c.eps) {
            const auto q =
                fem::quasimode_residual(params_of(c, eps, mu), c.cls, refs[k], c.mesh_size(eps));
            for (auto* s : {&dual, &mass}) {
                const double v = s == &dual ? q.dual_ratio : q.mass_ratio;
                s->eps.push_back(eps);
                s->value.push_back(v);
                s->reference.push_back(0.0);
                s->error.push_back(v);
            }
        }
        dual.slope = fem::fit_loglog_slope(dual.eps, dual.error);
        mass.slope = fem::fit_loglog_slope(mass.eps, mass.error);
        res.pass = res.pass && dual.slope >= c.residual_exponent_min;
        res.series.push_back(dual);
        res.series.push_back(mass);
    }
    res.notes.push_back("pass/fail uses the H1-dual ratio; the M^-1 ratio is reported only");
    return res;
}

ConvergenceResult flatband_study(const StudyConfig& c)
{
    ConvergenceResult res;
    res.kind = StudyKind::flatband;
    const auto flat = graph::flat_bands(c.L, c.cls, c.omega_max);
    if (flat.omegas.empty())
        throw ConfigError("L", "no flat band below omega-max for this height and class");
    const double target = flat.omegas.front();
    const double half = 0.5;
    Series width{"width", {}, {}, {}, {}, 0.0};
    for (double eps : c.eps) {
        int nev = c.nev;
        std::optional<fem::BandInterval> found;
        bool isolated = false;
        for (; nev <= 40 && !found; nev += 3) {
            const auto r = cell_bands(c, eps, nev);
            for (std::size_t k = 0; k < r.bands.size(); ++k) {
                const auto& b = r.bands[k];
                if (b.omega_lo() > target - half && b.omega_lo() < target + half) {
                    found = b;
                    const bool below = k > 0 && r.bands[k - 1].lambda_hi < b.lambda_lo;
                    const bool above = k + 1 < r.bands.size() && b.lambda_hi < r.bands[k + 1].lambda_lo;
                    isolated = below && above;
                    break;
                }
            }
            if (!found && r.bands.back().omega_lo() >= target + half)
                break;
        }
        if (!found) {
            res.notes.push_back("eps " + format_number(eps) + ": no band starts near the flat band");
            return res;
        }
        const bool inside = found->omega_hi() < target + half;
        res.notes.push_back("eps " + format_number(eps) + ": band [" +
                            format_number(found->omega_lo()) + ", " +
                            format_number(found->omega_hi()) + "]" +
                            (inside ? " inside" : " extends past") + " the window, " +
                            (isolated ? "isolated by gaps" : "touching a neighbour"));
        width.eps.push_back(eps);
        width.value.push_back(found->width_omega());
        width.reference.push_back(0.0);
        width.error.push_back(found->width_omega());
        res.values["C_eps_" + format_number(eps)] = found->width_omega() / eps;
        res.values["isolated_eps_" + format_number(eps)] = isolated ? 1.0 : 0.0;
        res.values["inside_eps_" + format_number(eps)] = inside ? 1.0 : 0.0;
    }
    width.slope = fem::fit_loglog_slope(width.eps, width.error);
    double cmax = 0.0;
    res.pass = true;
    for (std::size_t i = 0; i < width.eps.size(); ++i) {
        cmax = std::max(cmax, width.value[i] / width.eps[i]);
        if (i > 0) {
            const double expected = width.eps[i - 1] / width.eps[i];
            const double ratio = width.value[i - 1] / width.value[i];
            res.values["ratio_" + std::to_string(i)] = ratio;
            res.pass = res.pass && std::abs(ratio / expected - 1.0) <= c.halving_tol;
        }
        const std::string key = format_number(width.eps[i]);
        res.pass = res.pass && res.values["isolated_eps_" + key] == 1.0 &&
                   res.values["inside_eps_" + key] == 1.0;
    }
    res.values["C"] = cmax;
    res.values["target_omega"] = target;
    res.series.push_back(width);
    return res;
}

namespace {

Output run_convergence(const StudyConfig& c)
{
    std::vector<ConvergenceResult> results;
    auto want = [&](StudyKind k) { return c.study == k || c.study == StudyKind::all; };
    if (want(StudyKind::bands))
        results.push_back(band_edge_study(c));
    if (want(StudyKind::eigs))
        results.push_back(eigenvalue_study(c));
    if (want(StudyKind::quasimode))
        results.push_back(quasimode_study(c));
    if (c.study == StudyKind::flatband)
        results.push_back(flatband_study(c));

    Csv csv(c, {"study", "series", "eps", "value", "reference", "error"});
    json js = json::array();
    bool pass = true;
    for (const auto& r : results) {
        json jr;
        jr["study"] = to_string(r.kind);
        jr["pass"] = r.pass;
        jr["notes"] = r.notes;
        jr["values"] = r.values;
        json series = json::array();
        for (const auto& s : r.series) {
            for (std::size_t i = 0; i < s.eps.size(); ++i)
                csv.row(to_string(r.kind), s.name, s.eps[i], s.value[i], s.reference[i],
                        s.error[i]);
            series.push_back({{"name", s.name},
                              {"eps", s.eps},
                              {"value", s.value},
                              {"reference", s.reference},
                              {"error", s.error},
                              {"slope", s.slope}});
        }
        jr["series"] = series;
        js.push_back(jr);
        pass = pass && r.pass;
    }
    Output out = finish(c, csv, {{"studies", js}, {"pass", pass}});
    out.pass = pass;
    return out;
}

} // namespace

Output run(const StudyConfig& config)
{
    config.validate();
    switch (config.command) {
    case Command::graph_bands: return run_graph_bands(config);
    case Command::graph_gaps: return run_graph_gaps(config);
    case Command::graph_eigs: return run_graph_eigs(config);
    case Command::fem_bands: return run_fem_bands(config);
    case Command::fem_localized: return run_fem_localized(config);
    case Command::study_convergence: return run_convergence(config);
    }
    throw ConfigError("command", "unknown command");
}

} // namespace ladder::study
