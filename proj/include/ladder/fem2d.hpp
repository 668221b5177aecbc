#pragma once

// P1 finite elements on the thin ladder: quasi-periodic Bloch problems on the
// periodicity cell, truncated supercells of the perturbed ladder, and the
// residual of the fattened graph eigenfunction.
//
// Meshes cover the lower half y <= 0 only; the class condition is imposed on
// the axis y = 0 (natural for sym, Dirichlet for antisym).

#include "ladder/eigensolve.hpp"
#include "ladder/graph_core.hpp"
#include "ladder/params.hpp"
#include "ladder/pencil.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ladder::fem {

enum class BoundaryTag { neumann, left_master, right_slave, symmetry_axis };
std::string to_string(BoundaryTag t);

struct BoundaryEdge {
    int a = 0;
    int b = 0;
    BoundaryTag tag = BoundaryTag::neumann;
};

enum class MeshKind { cell, supercell, rectangle };

struct Mesh {
    MeshKind kind = MeshKind::cell;
    LadderParams params;
    SymmetryClass cls = SymmetryClass::symmetric;
    int n_cells = 0;
    double h = 0.0;

    std::vector<std::array<double, 2>> vertices;
    /// Counter-clockwise vertex triples.
    std::vector<std::array<int, 3>> triangles;
    std::vector<BoundaryEdge> boundary;

    /// Lateral node lists of a cell mesh, sorted by y; left_nodes[k] and
    /// right_nodes[k] differ by exactly 1 in x.
    std::vector<int> left_nodes;
    std::vector<int> right_nodes;
    /// Nodes on y = 0.
    std::vector<int> axis_nodes;

    int n_vertices() const noexcept { return static_cast<int>(vertices.size()); }
    double area() const;
    double triangle_area(int t) const;
    double min_triangle_area() const;
};

/// Half periodicity cell x in [-1/2, 1/2], y in [-L/2, 0]. Requires
/// 0 < h <= eps/3.
Mesh build_cell_mesh(const LadderParams& params, SymmetryClass cls, double h);

/// Half ladder truncated at x = +/-(n_cells + 1/2), central rung of width
/// mu*eps. The central rung always gets at least 3 elements across.
/// Requires n_cells >= 4 and 0 < h <= eps/3.
Mesh build_supercell_mesh(const LadderParams& params, SymmetryClass cls, int n_cells, double h);

/// Rectangle [0, a] x [0, b] with Neumann conditions, for self-checks.
Mesh build_rectangle_mesh(double a, double b, double h);

/// Analytic area of the half cell and of the truncated half supercell.
double cell_area(const LadderParams& params);
double supercell_area(const LadderParams& params, int n_cells);

/// Text export: header line, "vertices n" then x y rows, "triangles n" then
/// index rows, "boundary n" then "a b tag" rows. Optional nodal values are
/// appended as "values n" then re im rows.
void write_mesh(std::ostream& os, const Mesh& mesh,
                const Eigen::VectorXcd* nodal_values = nullptr);

/// P1 stiffness and mass of the cell mesh with the right nodes tied to the
/// left ones by e^{-i theta}. Requires theta in [0, pi].
HermitianPencil assemble_bloch_pencil(const Mesh& mesh, double theta);

/// Pencil of a supercell or rectangle mesh (no lateral tying).
HermitianPencil assemble_pencil(const Mesh& mesh);

struct BandInterval {
    int rank = 0;
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
    /// Quasimomenta at which the extrema are attained.
    double theta_lo = 0.0;
    double theta_hi = 0.0;

    double omega_lo() const;
    double omega_hi() const;
    double width_omega() const { return omega_hi() - omega_lo(); }
};

struct GapInterval {
    double lambda_b = 0.0;
    double lambda_t = 0.0;
    /// Ranks of the bands below and above.
    int rank_below = 0;
    int rank_above = 0;

    double omega_b() const;
    double omega_t() const;
    /// The gap shrunk by `margin` times its width at both ends, in lambda.
    std::pair<double, double> interior(double margin = 1e-6) const;
};

struct DefectMode {
    double lambda = 0.0;
    double omega = 0.0;
    double residual = 0.0;
    /// L2 mass of the mode per cell, index j + n_cells.
    std::vector<double> cell_mass;
    double central_fraction = 0.0;
    /// Fitted per-cell decay ratio of the mass (r_hat^2).
    double mass_ratio = 0.0;
    /// Nearest graph eigenvalue and its r^2, when one exists.
    std::optional<double> omega_graph;
    std::optional<double> graph_ratio;
    /// Mode at every mesh vertex, M-normalized.
    Eigen::VectorXcd nodal;
};

struct SpectralReport {
    static constexpr int schema_version = 1;

    LadderParams params;
    SymmetryClass cls = SymmetryClass::symmetric;
    double h = 0.0;
    int nev = 0;
    int n_cells = 0;
    int n_dofs = 0;

    std::vector<double> theta_grid;
    /// theta_table[i][r]: eigenvalue of rank r at theta_grid[i].
    std::vector<std::vector<double>> theta_table;
    std::vector<BandInterval> bands;
    std::vector<GapInterval> gaps;

    std::optional<std::pair<double, double>> window;
    int window_count = 0;
    std::vector<DefectMode> defects;

    std::map<std::string, double> slopes;
    std::vector<std::string> log;
};

struct BandOptions {
    double tol = 1e-10;
    /// Golden-section refinement of each band extremum over theta.
    bool refine = true;
    double refine_tol = 1e-6;
    std::uint64_t seed = eig::ShiftInvertOptions{}.seed;
};

/// The nev lowest eigenvalues at every theta of the grid, per-rank bands and
/// the gaps between them that no unresolved branch can reach.
SpectralReport fem_bloch_bands(const LadderParams& params, SymmetryClass cls, int nev,
                               const std::vector<double>& theta_grid, double h,
                               const BandOptions& opts = {});

/// Uniform grid of n points on [0, pi].
std::vector<double> uniform_theta_grid(int n);

/// Eigenpairs of the supercell inside the lambda window, with per-cell mass,
/// the central three-cell fraction and the fitted decay compared with the
/// graph's reflection root.
SpectralReport localized_modes(const LadderParams& params, SymmetryClass cls,
                               std::pair<double, double> window, int n_cells, double h,
                               std::uint64_t seed = eig::ShiftInvertOptions{}.seed);

struct QuasimodeResidual {
    /// ||K u - lambda M u||_{M^-1} / ||u||_{K+M}.
    double mass_ratio = 0.0;
    /// ||K u - lambda M u||_{(K+M)^-1} / ||u||_{K+M}, the discrete H^1 dual norm.
    double dual_ratio = 0.0;
    int n_cells = 0;
    int n_dofs = 0;
};

/// Nodal interpolant of the fattened graph eigenfunction on a supercell mesh.
Eigen::VectorXcd fattened_eigenfunction(const Mesh& mesh, const graph::GraphEigenfunction& u);

/// Residual of the fattened eigenfunction of `ev` on the supercell of the
/// ladder with thickness params.eps. n_cells = 0 sizes the truncation from
/// the decay rate.
QuasimodeResidual quasimode_residual(const LadderParams& params, SymmetryClass cls,
                                     const graph::GraphEigenvalue& ev, double h,
                                     int n_cells = 0);

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace ladder::fem
