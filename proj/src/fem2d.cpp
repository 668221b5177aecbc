#include "ladder/fem2d.hpp"

#include "detail/roots.hpp"
#include "ladder/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

namespace ladder::fem {

std::string to_string(BoundaryTag t)
{
    switch (t) {
    case BoundaryTag::neumann: return "neumann";
    case BoundaryTag::left_master: return "left_master";
    case BoundaryTag::right_slave: return "right_slave";
    case BoundaryTag::symmetry_axis: return "symmetry_axis";
    }
    return "?";
}

double Mesh::triangle_area(int t) const
{
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    const auto& p = vertices[tri[0]];
    const auto& q = vertices[tri[1]];
    const auto& r = vertices[tri[2]];
    return 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]));
}

double Mesh::area() const
{
    double s = 0.0;
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t)
        s += triangle_area(t);
    return s;
}

double Mesh::min_triangle_area() const
{
    double m = std::numeric_limits<double>::infinity();
    for (int t = 0; t < static_cast<int>(triangles.size()); ++t)
        m = std::min(m, triangle_area(t));
    return m;
}

double cell_area(const LadderParams& params)
{
    const double e = params.thickness();
    return e + e * (0.5 * params.height() - e);
}

double supercell_area(const LadderParams& params, int n_cells)
{
    const double e = params.thickness();
    const double rung = e * (0.5 * params.height() - e);
    return (2.0 * n_cells + 1.0) * (e + rung) + (params.mu - 1.0) * rung;
}

namespace {

constexpr double pi = std::numbers::pi;

struct Axis {
    std::vector<double> coords;
};

// Grid coordinates through every break, each interval split into pieces no
// longer than h (at least min_pieces[k] pieces for interval k).
Axis make_axis(const std::vector<double>& breaks, double h, const std::vector<int>& min_pieces)
{
    Axis ax;
    ax.coords.push_back(breaks.front());
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double a = breaks[k];
        const double b = breaks[k + 1];
        int n = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-9)));
        n = std::max(n, min_pieces.empty() ? 1 : min_pieces[k]);
        for (int i = 1; i < n; ++i)
            ax.coords.push_back(a + (b - a) * i / n);
        ax.coords.push_back(b);
    }
    return ax;
}

template <class Inside, class Tagger>
void triangulate(Mesh& mesh, const Axis& ax, const Axis& ay, Inside inside, Tagger tag)
{
    const int nx = static_cast<int>(ax.coords.size()) - 1;
    const int ny = static_cast<int>(ay.coords.size()) - 1;
    std::vector<char> keep(static_cast<std::size_t>(nx) * ny, 0);
    auto cell = [&](int i, int k) -> bool {
        return i >= 0 && i < nx && k >= 0 && k < ny && keep[static_cast<std::size_t>(k) * nx + i];
    };
    for (int k = 0; k < ny; ++k)
        for (int i = 0; i < nx; ++i) {
            const double xc = 0.5 * (ax.coords[i] + ax.coords[i + 1]);
            const double yc = 0.5 * (ay.coords[k] + ay.coords[k + 1]);
            keep[static_cast<std::size_t>(k) * nx + i] = inside(xc, yc) ? 1 : 0;
        }

    std::vector<int> id(static_cast<std::size_t>(nx + 1) * (ny + 1), -1);
    auto node = [&](int i, int k) {
        int& v = id[static_cast<std::size_t>(k) * (nx + 1) + i];
        if (v < 0) {
            v = mesh.n_vertices();
            mesh.vertices.push_back({ax.coords[i], ay.coords[k]});
        }
        return v;
    };

    for (int k = 0; k < ny; ++k)
        for (int i = 0; i < nx; ++i) {
            if (!cell(i, k))
                continue;
            const int p00 = node(i, k);
            const int p10 = node(i + 1, k);
            const int p11 = node(i + 1, k + 1);
            const int p01 = node(i, k + 1);
            const double xc = 0.5 * (ax.coords[i] + ax.coords[i + 1]);
            if (xc - std::nearbyint(xc) >= 0.0) {
                mesh.triangles.push_back({p00, p10, p11});
                mesh.triangles.push_back({p00, p11, p01});
            } else {
                mesh.triangles.push_back({p00, p10, p01});
                mesh.triangles.push_back({p10, p11, p01});
            }
            if (!cell(i, k - 1))
                mesh.boundary.push_back({p00, p10, tag(ax.coords[i], ay.coords[k], false)});
            if (!cell(i, k + 1))
                mesh.boundary.push_back({p11, p01, tag(ax.coords[i], ay.coords[k + 1], false)});
            if (!cell(i - 1, k))
                mesh.boundary.push_back({p01, p00, tag(ax.coords[i], ay.coords[k], true)});
            if (!cell(i + 1, k))
                mesh.boundary.push_back({p10, p11, tag(ax.coords[i + 1], ay.coords[k], true)});
        }

    for (int k = 0; k <= ny; ++k) {
        if (id[static_cast<std::size_t>(k) * (nx + 1)] >= 0)
            mesh.left_nodes.push_back(id[static_cast<std::size_t>(k) * (nx + 1)]);
        if (id[static_cast<std::size_t>(k) * (nx + 1) + nx] >= 0)
            mesh.right_nodes.push_back(id[static_cast<std::size_t>(k) * (nx + 1) + nx]);
    }
    for (int i = 0; i <= nx; ++i)
        if (id[static_cast<std::size_t>(ny) * (nx + 1) + i] >= 0)
            mesh.axis_nodes.push_back(id[static_cast<std::size_t>(ny) * (nx + 1) + i]);
}

void check_ladder_h(const LadderParams& params, double h)
{
    params.validate_with_eps();
    const double e = params.thickness();
    if (!(h > 0.0) || h > e / 3.0 * (1.0 + 1e-12))
        throw GeometryError("mesh size h must satisfy 0 < h <= eps/3");
}

double rung_weight(const LadderParams& params, long j) { return j == 0 ? params.mu : 1.0; }

void check_mesh(const Mesh& mesh)
{
    const double floor_area = mesh.h * mesh.h / 100.0;
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t)
        if (!(mesh.triangle_area(t) > floor_area)) {
            std::ostringstream os;
            os << "triangle " << t << " has area " << mesh.triangle_area(t) << " <= h^2/100";
            throw GeometryError(os.str());
        }
}

} // namespace

Mesh build_cell_mesh(const LadderParams& params, SymmetryClass cls, double h)
{
    check_ladder_h(params, h);
    const double e = params.thickness();
    const double L = params.height();

    Mesh mesh;
    mesh.kind = MeshKind::cell;
    mesh.params = params;
    mesh.cls = cls;
    mesh.h = h;
    const Axis ax = make_axis({-0.5, -0.5 * e, 0.5 * e, 0.5}, h, {});
    const Axis ay = make_axis({-0.5 * L, -0.5 * L + e, 0.0}, h, {});
    const double ys = -0.5 * L + e;
    triangulate(
        mesh, ax, ay,
        [&](double x, double y) { return y < ys || std::abs(x) < 0.5 * e; },
        [&](double x, double y, bool vertical) {
            if (vertical && x == -0.5)
                return BoundaryTag::left_master;
            if (vertical && x == 0.5)
                return BoundaryTag::right_slave;
            if (!vertical && y == 0.0)
                return BoundaryTag::symmetry_axis;
            return BoundaryTag::neumann;
        });
    if (mesh.left_nodes.size() != mesh.right_nodes.size())
        throw GeometryError("lateral node sets differ in size");
    for (std::size_t k = 0; k < mesh.left_nodes.size(); ++k) {
        const auto& l = mesh.vertices[mesh.left_nodes[k]];
        const auto& r = mesh.vertices[mesh.right_nodes[k]];
        if (r[0] - l[0] != 1.0 || r[1] != l[1])
            throw GeometryError("lateral nodes are not in translation correspondence");
    }
    check_mesh(mesh);
    return mesh;
}

Mesh build_supercell_mesh(const LadderParams& params, SymmetryClass cls, int n_cells, double h)
{
    if (n_cells < 4)
        throw ConfigError("cells", "a supercell needs at least 4 cells on each side");
    check_ladder_h(params, h);
    const double e = params.thickness();
    const double L = params.height();

    std::vector<double> xb{-n_cells - 0.5};
    std::vector<int> pieces;
    // Breaks at every half-integer make each outer cell a translate of the
    // cell mesh, so the unperturbed supercell spectrum lies in the discrete bands.
    for (int j = -n_cells; j <= n_cells; ++j) {
        const double w = rung_weight(params, j) * e;
        xb.push_back(j - 0.5 * w);
        pieces.push_back(1);
        xb.push_back(j + 0.5 * w);
        pieces.push_back(j == 0 ? 3 : 1);
        xb.push_back(j + 0.5);
        pieces.push_back(1);
    }
    const double half_central = 0.5 * params.mu * e;
    if (half_central >= 0.5)
        throw GeometryError("central rung wider than the cell");

    Mesh mesh;
    mesh.kind = MeshKind::supercell;
    mesh.params = params;
    mesh.cls = cls;
    mesh.n_cells = n_cells;
    mesh.h = h;
    const Axis ax = make_axis(xb, h, pieces);
    const Axis ay = make_axis({-0.5 * L, -0.5 * L + e, 0.0}, h, {});
    const double ys = -0.5 * L + e;
    triangulate(
        mesh, ax, ay,
        [&](double x, double y) {
            if (y < ys)
                return true;
            const double j = std::nearbyint(x);
            return std::abs(x - j) < 0.5 * rung_weight(params, static_cast<long>(j)) * e;
        },
        [&](double, double y, bool vertical) {
            if (!vertical && y == 0.0)
                return BoundaryTag::symmetry_axis;
            return BoundaryTag::neumann;
        });
    mesh.left_nodes.clear();
    mesh.right_nodes.clear();
    check_mesh(mesh);
    return mesh;
}

Mesh build_rectangle_mesh(double a, double b, double h)
{
    if (!(a > 0.0) || !(b > 0.0))
        throw ConfigError("rectangle", "side lengths must be positive");
    if (!(h > 0.0) || h > std::min(a, b))
        throw ConfigError("h", "mesh size must satisfy 0 < h <= min(a, b)");
    Mesh mesh;
    mesh.kind = MeshKind::rectangle;
    mesh.h = h;
    const Axis ax = make_axis({0.0, a}, h, {});
    const Axis ay = make_axis({0.0, b}, h, {});
    triangulate(
        mesh, ax, ay, [](double, double) { return true; },
        [](double, double, bool) { return BoundaryTag::neumann; });
    mesh.left_nodes.clear();
    mesh.right_nodes.clear();
    mesh.axis_nodes.clear();
    check_mesh(mesh);
    return mesh;
}

void write_mesh(std::ostream& os, const Mesh& mesh, const Eigen::VectorXcd* nodal_values)
{
    const auto old = os.precision(17);
    os << "# ladder mesh v1 h " << mesh.h << '\n';
    os << "vertices " << mesh.vertices.size() << '\n';
    for (const auto& v : mesh.vertices)
        os << v[0] << ' ' << v[1] << '\n';
    os << "triangles " << mesh.triangles.size() << '\n';
    for (const auto& t : mesh.triangles)
        os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    os << "boundary " << mesh.boundary.size() << '\n';
    for (const auto& e : mesh.boundary)
        os << e.a << ' ' << e.b << ' ' << to_string(e.tag) << '\n';
    if (nodal_values) {
        os << "values " << nodal_values->size() << '\n';
        for (Eigen::Index i = 0; i < nodal_values->size(); ++i)
            os << (*nodal_values)[i].real() << ' ' << (*nodal_values)[i].imag() << '\n';
    }
    os.precision(old);
}

namespace {

void element_matrices(const Mesh& mesh, int t, std::array<double, 9>& k, std::array<double, 9>& m)
{
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    double x[3], y[3];
    for (int a = 0; a < 3; ++a) {
        x[a] = mesh.vertices[tri[a]][0];
        y[a] = mesh.vertices[tri[a]][1];
    }
    const double area = mesh.triangle_area(t);
    const double b[3] = {y[1] - y[2], y[2] - y[0], y[0] - y[1]};
    const double c[3] = {x[2] - x[1], x[0] - x[2], x[1] - x[0]};
    for (int a = 0; a < 3; ++a)
        for (int d = 0; d < 3; ++d) {
            k[a * 3 + d] = (b[a] * b[d] + c[a] * c[d]) / (4.0 * area);
            m[a * 3 + d] = area / 12.0 * (a == d ? 2.0 : 1.0);
        }
}

HermitianPencil assemble_with(const Mesh& mesh, const DofMap& map, double theta)
{
    PencilAssembler as(map);
    std::array<double, 9> k{}, m{};
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        element_matrices(mesh, t, k, m);
        as.add(mesh.triangles[static_cast<std::size_t>(t)], k, m);
    }
    return as.finish(theta);
}

std::vector<int> dirichlet_nodes(const Mesh& mesh)
{
    if (mesh.kind != MeshKind::rectangle && mesh.cls == SymmetryClass::antisymmetric)
        return mesh.axis_nodes;
    return {};
}

} // namespace

HermitianPencil assemble_bloch_pencil(const Mesh& mesh, double theta)
{
    if (mesh.kind != MeshKind::cell)
        throw GeometryError("quasi-periodic assembly needs a cell mesh");
    if (!(theta >= 0.0 && theta <= pi))
        throw DomainError("quasimomentum must lie in [0, pi]");
    if (mesh.left_nodes.size() != mesh.right_nodes.size() || mesh.left_nodes.empty())
        throw GeometryError("master and slave node sets do not match");
    std::vector<std::pair<int, int>> ties;
    for (std::size_t k = 0; k < mesh.left_nodes.size(); ++k)
        ties.emplace_back(mesh.right_nodes[k], mesh.left_nodes[k]);
    const auto dir = dirichlet_nodes(mesh);
    const DofMap map = DofMap::build(mesh.n_vertices(), ties, bloch_phase(theta), dir);
    return assemble_with(mesh, map, theta);
}

HermitianPencil assemble_pencil(const Mesh& mesh)
{
    if (mesh.kind == MeshKind::cell)
        throw GeometryError("a cell mesh needs a quasimomentum; use assemble_bloch_pencil");
    const auto dir = dirichlet_nodes(mesh);
    const DofMap map = DofMap::build(mesh.n_vertices(), {}, {1.0, 0.0}, dir);
    return assemble_with(mesh, map, 0.0);
}

double BandInterval::omega_lo() const { return std::sqrt(std::max(0.0, lambda_lo)); }
double BandInterval::omega_hi() const { return std::sqrt(std::max(0.0, lambda_hi)); }
double GapInterval::omega_b() const { return std::sqrt(std::max(0.0, lambda_b)); }
double GapInterval::omega_t() const { return std::sqrt(std::max(0.0, lambda_t)); }

std::pair<double, double> GapInterval::interior(double margin) const
{
    const double w = lambda_t - lambda_b;
    return {lambda_b + margin * w, lambda_t - margin * w};
}

std::vector<double> uniform_theta_grid(int n)
{
    if (n < 2)
        throw ConfigError("ntheta", "at least 2 quasimomenta are required");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g[static_cast<std::size_t>(i)] = i == n - 1 ? pi : pi * i / (n - 1);
    return g;
}

namespace {

unsigned default_threads()
{
    if (const char* env = std::getenv("LADDER_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0)
            return static_cast<unsigned>(n);
    }
    return 1;
}

template <class F>
void parallel_for(int n, F&& body)
{
    const unsigned threads = std::min<unsigned>(default_threads(), static_cast<unsigned>(n));
    if (threads <= 1) {
        for (int i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = static_cast<int>(t); i < n; i += static_cast<int>(threads))
                    body(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

std::vector<double> lowest_at(const Mesh& mesh, double theta, int nev, const BandOptions& bo)
{
    const HermitianPencil p = assemble_bloch_pencil(mesh, theta);
    eig::ShiftInvertOptions o;
    o.tol = bo.tol;
    o.seed = bo.seed;
    o.want_vectors = false;
    try {
        return eig::eig_sparse_shift_invert(p.K, p.M, -1.0, nev, o).values;
    } catch (const NumericalError& e) {
        std::ostringstream os;
        os << "Bloch solve failed at theta = " << theta << ": " << e.what();
        throw NumericalError(os.str());
    }
}

} // namespace

SpectralReport fem_bloch_bands(const LadderParams& params, SymmetryClass cls, int nev,
                               const std::vector<double>& theta_grid, double h,
                               const BandOptions& opts)
{
    if (nev < 1)
        throw ConfigError("nev", "must be at least 1");
    if (theta_grid.size() < 2)
        throw ConfigError("ntheta", "at least 2 quasimomenta are required");
    for (double t : theta_grid)
        if (!(t >= 0.0 && t <= pi))
            throw ConfigError("theta", "grid points must lie in [0, pi]");
    if (!std::is_sorted(theta_grid.begin(), theta_grid.end()))
        throw ConfigError("theta", "grid must be ascending");

    const Mesh mesh = build_cell_mesh(params, cls, h);
    SpectralReport rep;
    rep.params = params;
    rep.cls = cls;
    rep.h = h;
    rep.nev = nev;
    rep.theta_grid = theta_grid;
    rep.theta_table.resize(theta_grid.size());
    rep.n_dofs = assemble_bloch_pencil(mesh, theta_grid.front()).size();

    parallel_for(static_cast<int>(theta_grid.size()), [&](int i) {
        rep.theta_table[static_cast<std::size_t>(i)] =
            lowest_at(mesh, theta_grid[static_cast<std::size_t>(i)], nev, opts);
    });

    const int n = static_cast<int>(theta_grid.size());
    for (int r = 0; r < nev; ++r) {
        BandInterval b;
        b.rank = r;
        int imin = 0, imax = 0;
        for (int i = 1; i < n; ++i) {
            if (rep.theta_table[i][r] < rep.theta_table[imin][r])
                imin = i;
            if (rep.theta_table[i][r] > rep.theta_table[imax][r])
                imax = i;
        }
        b.lambda_lo = rep.theta_table[imin][r];
        b.theta_lo = theta_grid[imin];
        b.lambda_hi = rep.theta_table[imax][r];
        b.theta_hi = theta_grid[imax];
        rep.bands.push_back(b);
    }

    auto refine = [&](BandInterval& b, bool upper) {
        const double t0 = upper ? b.theta_hi : b.theta_lo;
        const auto it = std::lower_bound(theta_grid.begin(), theta_grid.end(), t0);
        const auto i = static_cast<std::size_t>(it - theta_grid.begin());
        const double a = i == 0 ? theta_grid[0] : theta_grid[i - 1];
        const double c = i + 1 == theta_grid.size() ? theta_grid.back() : theta_grid[i + 1];
        const double sgn = upper ? -1.0 : 1.0;
        auto f = [&](double t) { return sgn * lowest_at(mesh, t, b.rank + 1, opts)[b.rank]; };
        const double ts = detail::golden_min(f, a, c, opts.refine_tol);
        const double lam = sgn * f(ts);
        if (upper && lam > b.lambda_hi) {
            b.lambda_hi = lam;
            b.theta_hi = ts;
        }
        if (!upper && lam < b.lambda_lo) {
            b.lambda_lo = lam;
            b.theta_lo = ts;
        }
    };

    for (int r = 0; r + 1 < nev; ++r) {
        if (!(rep.bands[r].lambda_hi < rep.bands[r + 1].lambda_lo))
            continue;
        if (opts.refine) {
            refine(rep.bands[r], true);
            refine(rep.bands[r + 1], false);
        }
    }
    for (int r = 0; r + 1 < nev; ++r) {
        const auto& lo = rep.bands[r];
        const auto& hi = rep.bands[r + 1];
        if (lo.lambda_hi < hi.lambda_lo) {
            rep.gaps.push_back({lo.lambda_hi, hi.lambda_lo, r, r + 1});
            for (const auto* b : {&lo, &hi}) {
                const double t = b == &lo ? lo.theta_hi : hi.theta_lo;
                if (t != 0.0 && t != pi) {
                    std::ostringstream os;
                    os << "gap edge of rank " << b->rank << " attained at interior theta = " << t;
                    rep.log.push_back(os.str());
                }
            }
        }
    }
    return rep;
}

namespace {

// L2 mass of a nodal field per cell (triangles assigned by centroid).
std::vector<double> cell_masses(const Mesh& mesh, const Eigen::VectorXcd& u)
{
    std::vector<double> mass(static_cast<std::size_t>(2 * mesh.n_cells + 1), 0.0);
    std::array<double, 9> k{}, m{};
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
        element_matrices(mesh, t, k, m);
        double s = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                s += m[a * 3 + b] * std::real(std::conj(u[tri[a]]) * u[tri[b]]);
        const double xc =
            (mesh.vertices[tri[0]][0] + mesh.vertices[tri[1]][0] + mesh.vertices[tri[2]][0]) / 3.0;
        long j = std::lround(xc);
        j = std::clamp<long>(j, -mesh.n_cells, mesh.n_cells);
        mass[static_cast<std::size_t>(j + mesh.n_cells)] += s;
    }
    return mass;
}

// exp of the least-squares slope of log(mass) against |j| over 1 <= |j| <= jmax,
// with the two sides averaged.
double fit_mass_ratio(const std::vector<double>& mass, int n_cells, int jmax)
{
    std::vector<double> js, ls;
    for (int j = 1; j <= jmax; ++j) {
        const double m = 0.5 * (mass[static_cast<std::size_t>(n_cells + j)] +
                                mass[static_cast<std::size_t>(n_cells - j)]);
        if (m <= 0.0)
            break;
        js.push_back(j);
        ls.push_back(std::log(m));
    }
    if (js.size() < 2)
        return std::numeric_limits<double>::quiet_NaN();
    const double nn = static_cast<double>(js.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < js.size(); ++i) {
        sx += js[i];
        sy += ls[i];
        sxx += js[i] * js[i];
        sxy += js[i] * ls[i];
    }
    return std::exp((nn * sxy - sx * sy) / (nn * sxx - sx * sx));
}

} // namespace

SpectralReport localized_modes(const LadderParams& params, SymmetryClass cls,
                               std::pair<double, double> window, int n_cells, double h,
                               std::uint64_t seed)
{
    const auto [lo, hi] = window;
    if (!(lo < hi) || lo < 0.0)
        throw ConfigError("window", "need 0 <= lo < hi");
    const Mesh mesh = build_supercell_mesh(params, cls, n_cells, h);
    const HermitianPencil p = assemble_pencil(mesh);

    SpectralReport rep;
    rep.params = params;
    rep.cls = cls;
    rep.h = h;
    rep.n_cells = n_cells;
    rep.n_dofs = p.size();
    rep.window = window;
    const int count =
        eig::count_eigenvalues_below(p.K, p.M, hi) - eig::count_eigenvalues_below(p.K, p.M, lo);
    rep.window_count = count;
    if (count <= 0)
        return rep;

    eig::ShiftInvertOptions o;
    o.window = window;
    o.want_vectors = true;
    o.seed = seed;
    const auto res = eig::eig_sparse_shift_invert(p.K, p.M, 0.5 * (lo + hi), count, o);
    rep.nev = count;

    std::vector<graph::GraphEigenvalue> graph_evs;
    if (params.mu < 1.0) {
        const double top = std::sqrt(hi) + pi;
        for (const auto& g : graph::gaps(params.height(), cls, top))
            for (const auto& ev : graph::discrete_eigenvalues(params.height(), params.mu, cls, g))
                graph_evs.push_back(ev);
    }

    for (std::size_t i = 0; i < res.values.size(); ++i) {
        if (res.outside_window[i])
            continue;
        DefectMode d;
        d.lambda = res.values[i];
        d.omega = std::sqrt(std::max(0.0, d.lambda));
        d.residual = res.residual_norms[i];
        const Eigen::VectorXcd u =
            p.dof_map.expand(res.vectors->col(static_cast<Eigen::Index>(i)));
        d.cell_mass = cell_masses(mesh, u);
        d.nodal = u;
        double total = 0.0;
        for (double m : d.cell_mass)
            total += m;
        d.central_fraction =
            (d.cell_mass[n_cells - 1] + d.cell_mass[n_cells] + d.cell_mass[n_cells + 1]) / total;
        d.mass_ratio = fit_mass_ratio(d.cell_mass, n_cells, n_cells - 2);
        if (!graph_evs.empty()) {
            const auto best = std::min_element(
                graph_evs.begin(), graph_evs.end(), [&](const auto& a, const auto& b) {
                    return std::abs(a.omega - d.omega) < std::abs(b.omega - d.omega);
                });
            d.omega_graph = best->omega;
            const double r = graph::reflection_root(best->omega, params.height(), cls);
            d.graph_ratio = r * r;
        }
        rep.defects.push_back(std::move(d));
    }
    if (static_cast<int>(rep.defects.size()) != count) {
        std::ostringstream os;
        os << "inertia reports " << count << " eigenvalues in the window, solver returned "
           << rep.defects.size();
        rep.log.push_back(os.str());
    }
    return rep;
}

Eigen::VectorXcd fattened_eigenfunction(const Mesh& mesh, const graph::GraphEigenfunction& u)
{
    if (mesh.kind != MeshKind::supercell)
        throw GeometryError("the fattened eigenfunction lives on a supercell mesh");
    const auto& params = mesh.params;
    const double e = params.thickness();
    const double L = params.height();
    const double ys = -0.5 * L + e;
    const double slack = 1e-12;

    Eigen::VectorXcd out(mesh.n_vertices());
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        const double x = mesh.vertices[v][0];
        const double y = mesh.vertices[v][1];
        const long jn = std::lround(x);
        const double half = 0.5 * rung_weight(params, jn) * e;
        const bool in_rung_columns = std::abs(x - jn) <= half + slack;
        double val = 0.0;
        if (y <= ys + slack) {
            if (in_rung_columns) {
                val = u.vertex_value(jn);
            } else {
                const long j = static_cast<long>(std::floor(x));
                const double wl = rung_weight(params, j) * e;
                const double wr = rung_weight(params, j + 1) * e;
                const double s = (x - j - 0.5 * wl) / (1.0 - 0.5 * (wl + wr));
                if (s < -slack || s > 1.0 + slack)
                    throw GeometryError("mesh node outside the horizontal trace domain");
                val = u.horizontal(j, std::clamp(s, 0.0, 1.0)).value;
            }
        } else {
            if (!in_rung_columns)
                throw GeometryError("mesh node outside every rung trace domain");
            const double t = y / (1.0 - 2.0 * e / L);
            val = u.vertical(jn, std::clamp(t, -0.5 * L, 0.0)).value;
        }
        out[v] = val;
    }
    return out;
}

QuasimodeResidual quasimode_residual(const LadderParams& params, SymmetryClass cls,
                                     const graph::GraphEigenvalue& ev, double h, int n_cells)
{
    const graph::GraphEigenfunction u = graph::build_eigenfunction(ev);
    if (n_cells <= 0) {
        const double r = std::abs(u.decay_rate());
        n_cells = r > 0.0 ? static_cast<int>(std::ceil(std::log(1e-8) / std::log(r))) : 4;
        n_cells = std::clamp(n_cells, 4, 40);
    }
    const Mesh mesh = build_supercell_mesh(params, cls, n_cells, h);
    const HermitianPencil p = assemble_pencil(mesh);
    const Eigen::VectorXcd x = p.dof_map.restrict_to_dofs(fattened_eigenfunction(mesh, u));

    const eig::SparseMatrix A = p.K + p.M;
    const Eigen::VectorXcd res = p.K * x - ev.lambda * (p.M * x);
    const double unorm = std::sqrt(std::real(x.dot(A * x)));

    Eigen::SimplicialLLT<eig::SparseMatrix> mchol(p.M);
    Eigen::SimplicialLLT<eig::SparseMatrix> achol(A);
    if (mchol.info() != Eigen::Success || achol.info() != Eigen::Success)
        throw NumericalError("quasimode_residual: Cholesky factorization failed");
    const Eigen::VectorXcd zm = mchol.solve(res);
    const Eigen::VectorXcd za = achol.solve(res);

    QuasimodeResidual out;
    out.mass_ratio = std::sqrt(std::abs(std::real(res.dot(zm)))) / unorm;
    out.dual_ratio = std::sqrt(std::abs(std::real(res.dot(za)))) / unorm;
    out.n_cells = n_cells;
    out.n_dofs = p.size();
    return out;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw DomainError("slope fit needs at least two matching points");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw DomainError("slope fit needs positive data");
    return detail::loglog_slope(x, y);
}

} // namespace ladder::fem
