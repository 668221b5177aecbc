#pragma once

// Brute-force discretization of the limit graph operator: P1 elements on
// every edge, continuity at the vertices (which makes the weighted Kirchhoff
// condition the natural one) and the class condition at y = 0 on the
// half-graph y <= 0.

#include "ladder/eigensolve.hpp"
#include "ladder/params.hpp"
#include "ladder/pencil.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace ladder::oracle {

struct GraphEdge {
    enum class Kind { horizontal, vertical };
    Kind kind = Kind::horizontal;
    /// Rung index for vertical edges; left vertex index for horizontal ones.
    int j = 0;
    double weight = 1.0;
    /// Node indices from one end to the other (bottom to top for rungs).
    std::vector<int> nodes;
};

struct GraphDiscretization {
    LadderParams params;
    SymmetryClass cls = SymmetryClass::symmetric;
    /// Truncation |x| <= cells + 1/2; 0 for a single quasi-periodic cell.
    int cells = 0;
    double h = 0.0;
    std::optional<double> theta;
    std::vector<double> node_x;
    std::vector<double> node_y;
    /// Node of the lower vertex of rung j, stored at index j + cells.
    std::vector<int> vertex_nodes;
    std::vector<GraphEdge> edges;
    HermitianPencil pencil;

    int vertex_node(int j) const { return vertex_nodes.at(static_cast<std::size_t>(j + cells)); }
};

/// Perturbed half-graph truncated at the mid-edge points x = +/-(cells + 1/2)
/// with natural end conditions. Requires cells >= 5 and 0 < h <= 1/10.
GraphDiscretization discretize_graph(const LadderParams& params, SymmetryClass cls, int cells,
                                     double h);

/// One periodicity cell x in [-1/2, 1/2] with u(1/2) = e^{-i theta} u(-1/2).
GraphDiscretization discretize_cell(const LadderParams& params, SymmetryClass cls, double theta,
                                    double h);

/// All pencil eigenvalues (in lambda) inside the window, found by counting
/// with the inertia and then solving by shift-invert at the window centre.
std::vector<double> oracle_gap_eigenvalues(const GraphDiscretization& disc,
                                           std::pair<double, double> window,
                                           const eig::ShiftInvertOptions& opts = {});

/// The `count` lowest eigenvalues (in lambda) of the quasi-periodic cell.
std::vector<double> oracle_band_edges(const LadderParams& params, SymmetryClass cls,
                                      double theta, double h, int count = 3);

} // namespace ladder::oracle
