#include "ladder/graph_oracle.hpp"

#include "ladder/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ladder::oracle {

namespace {

struct Builder {
    GraphDiscretization& d;

    int node(double x, double y)
    {
        d.node_x.push_back(x);
        d.node_y.push_back(y);
        return static_cast<int>(d.node_x.size()) - 1;
    }

    // Nodes strictly between two existing nodes along a straight segment.
    GraphEdge segment(GraphEdge::Kind kind, int j, double weight, int a, int b, double length)
    {
        GraphEdge e{kind, j, weight, {a}};
        const int n = std::max(1, static_cast<int>(std::ceil(length / d.h - 1e-9)));
        const double xa = d.node_x[a];
        const double ya = d.node_y[a];
        const double xb = d.node_x[b];
        const double yb = d.node_y[b];
        for (int k = 1; k < n; ++k) {
            const double t = static_cast<double>(k) / n;
            e.nodes.push_back(node(xa + t * (xb - xa), ya + t * (yb - ya)));
        }
        e.nodes.push_back(b);
        return e;
    }
};

void check_h(double h)
{
    if (!(h > 0.0) || h > 0.1 + 1e-15)
        throw ConfigError("h", "graph mesh step must satisfy 0 < h <= 1/10");
}

HermitianPencil assemble(const GraphDiscretization& d, const DofMap& map)
{
    PencilAssembler as(map);
    for (const auto& e : d.edges) {
        for (std::size_t k = 0; k + 1 < e.nodes.size(); ++k) {
            const int a = e.nodes[k];
            const int b = e.nodes[k + 1];
            const double len = std::hypot(d.node_x[b] - d.node_x[a], d.node_y[b] - d.node_y[a]);
            const double kk = e.weight / len;
            const double mm = e.weight * len / 6.0;
            const std::array<int, 2> nodes{a, b};
            const std::array<double, 4> kl{kk, -kk, -kk, kk};
            const std::array<double, 4> ml{2 * mm, mm, mm, 2 * mm};
            as.add(nodes, kl, ml);
        }
    }
    return as.finish(d.theta.value_or(0.0));
}

// The half-rung from the vertex (x, -L/2) up to the symmetry axis y = 0.
int add_rung(Builder& b, int j, int vertex, double weight)
{
    const double L = b.d.params.height();
    const int top = b.node(b.d.node_x[vertex], 0.0);
    b.d.edges.push_back(b.segment(GraphEdge::Kind::vertical, j, weight, vertex, top, 0.5 * L));
    return top;
}

} // namespace

GraphDiscretization discretize_graph(const LadderParams& params, SymmetryClass cls, int cells,
                                     double h)
{
    params.validate();
    if (cells < 5)
        throw ConfigError("cells", "at least 5 cells are required");
    check_h(h);

    GraphDiscretization d;
    d.params = params;
    d.cls = cls;
    d.cells = cells;
    d.h = h;
    Builder b{d};
    const double y0 = -0.5 * params.height();

    std::vector<int> axis_nodes;
    const int left_end = b.node(-cells - 0.5, y0);
    int prev = left_end;
    for (int j = -cells; j <= cells; ++j) {
        const int v = b.node(static_cast<double>(j), y0);
        const double len = j == -cells ? 0.5 : 1.0;
        d.edges.push_back(b.segment(GraphEdge::Kind::horizontal, j - 1, 1.0, prev, v, len));
        d.vertex_nodes.push_back(v);
        axis_nodes.push_back(add_rung(b, j, v, j == 0 ? params.mu : 1.0));
        prev = v;
    }
    const int right_end = b.node(cells + 0.5, y0);
    d.edges.push_back(b.segment(GraphEdge::Kind::horizontal, cells, 1.0, prev, right_end, 0.5));

    std::vector<int> dirichlet;
    if (cls == SymmetryClass::antisymmetric)
        dirichlet = axis_nodes;
    const DofMap map =
        DofMap::build(static_cast<int>(d.node_x.size()), {}, {1.0, 0.0}, dirichlet);
    d.pencil = assemble(d, map);
    return d;
}

GraphDiscretization discretize_cell(const LadderParams& params, SymmetryClass cls, double theta,
                                    double h)
{
    params.validate();
    check_h(h);
    if (!(theta >= 0.0 && theta <= std::numbers::pi))
        throw DomainError("quasimomentum must lie in [0, pi]");

    GraphDiscretization d;
    d.params = params;
    d.cls = cls;
    d.cells = 0;
    d.h = h;
    d.theta = theta;
    Builder b{d};
    const double y0 = -0.5 * params.height();
    const int left = b.node(-0.5, y0);
    const int v = b.node(0.0, y0);
    const int right = b.node(0.5, y0);
    d.edges.push_back(b.segment(GraphEdge::Kind::horizontal, -1, 1.0, left, v, 0.5));
    d.edges.push_back(b.segment(GraphEdge::Kind::horizontal, 0, 1.0, v, right, 0.5));
    d.vertex_nodes.push_back(v);
    const int top = add_rung(b, 0, v, 1.0);

    std::vector<int> dirichlet;
    if (cls == SymmetryClass::antisymmetric)
        dirichlet.push_back(top);
    const std::array<std::pair<int, int>, 1> ties{std::make_pair(right, left)};
    const DofMap map =
        DofMap::build(static_cast<int>(d.node_x.size()), ties, bloch_phase(theta), dirichlet);
    d.pencil = assemble(d, map);
    return d;
}

std::vector<double> oracle_gap_eigenvalues(const GraphDiscretization& disc,
                                           std::pair<double, double> window,
                                           const eig::ShiftInvertOptions& opts)
{
    const auto [lo, hi] = window;
    if (!(lo < hi))
        throw DomainError("empty eigenvalue window");
    const auto& K = disc.pencil.K;
    const auto& M = disc.pencil.M;
    const int count = eig::count_eigenvalues_below(K, M, hi) - eig::count_eigenvalues_below(K, M, lo);
    if (count <= 0)
        return {};
    eig::ShiftInvertOptions o = opts;
    o.window = window;
    o.want_vectors = false;
    const auto res = eig::eig_sparse_shift_invert(K, M, 0.5 * (lo + hi), count, o);
    std::vector<double> out;
    for (std::size_t i = 0; i < res.values.size(); ++i)
        if (!res.outside_window[i])
            out.push_back(res.values[i]);
    if (static_cast<int>(out.size()) != count) {
        std::ostringstream os;
        os << "inertia reports " << count << " eigenvalues in the window but the solver found "
           << out.size() << " (" << res.iterations << " operator applications)";
        throw NumericalError(os.str());
    }
    return out;
}

std::vector<double> oracle_band_edges(const LadderParams& params, SymmetryClass cls,
                                      double theta, double h, int count)
{
    const GraphDiscretization d = discretize_cell(params, cls, theta, h);
    eig::ShiftInvertOptions o;
    o.want_vectors = false;
    o.tol = 1e-11;
    return eig::eig_sparse_shift_invert(d.pencil.K, d.pencil.M, -1.0, count, o).values;
}

} // namespace ladder::oracle
