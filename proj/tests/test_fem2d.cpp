#include "ladder/errors.hpp"
#include "ladder/fem2d.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

using namespace ladder;
using namespace ladder::fem;

namespace {

constexpr double pi = std::numbers::pi;

LadderParams make_params(std::int64_t num, std::int64_t den, double eps, double mu = 1.0)
{
    LadderParams p;
    p.L = LengthSpec(num, den);
    p.eps = eps;
    p.mu = mu;
    return p;
}

std::vector<double> lowest(const HermitianPencil& p, int k)
{
    eig::ShiftInvertOptions o;
    o.want_vectors = false;
    return eig::eig_sparse_shift_invert(p.K, p.M, -1.0, k, o).values;
}

} // namespace

TEST(CellMesh, LateralNodesMatchUnderUnitShift)
{
    const Mesh m = build_cell_mesh(make_params(2, 1, 0.1), SymmetryClass::symmetric, 0.1 / 3);
    ASSERT_FALSE(m.left_nodes.empty());
    ASSERT_EQ(m.left_nodes.size(), m.right_nodes.size());
    for (std::size_t k = 0; k < m.left_nodes.size(); ++k) {
        const auto& l = m.vertices[m.left_nodes[k]];
        const auto& r = m.vertices[m.right_nodes[k]];
        EXPECT_EQ(r[0] - l[0], 1.0);
        EXPECT_EQ(r[1], l[1]);
    }
}

TEST(CellMesh, AreaMatchesHalfCell)
{
    for (double eps : {0.2, 0.1, 0.05})
        for (auto L : {std::pair{2, 1}, std::pair{1, 2}, std::pair{8, 1}}) {
            const auto p = make_params(L.first, L.second, eps);
            const Mesh m = build_cell_mesh(p, SymmetryClass::symmetric, eps / 4);
            const double expected = eps * (1 - eps) + eps * p.height() / 2;
            EXPECT_NEAR(m.area(), expected, 1e-12);
            EXPECT_NEAR(cell_area(p), expected, 1e-15);
        }
}

TEST(CellMesh, ThreeLayersAcrossRung)
{
    const double eps = 0.1;
    const Mesh m = build_cell_mesh(make_params(2, 1, eps), SymmetryClass::symmetric, eps / 3);
    std::set<double> xs;
    for (const auto& v : m.vertices)
        if (v[1] == 0.0)
            xs.insert(v[0]);
    EXPECT_GE(xs.size(), 4u);
}

TEST(CellMesh, TrianglesPositiveAndNotSliver)
{
    const double eps = 0.08;
    const Mesh m = build_cell_mesh(make_params(1, 2, eps), SymmetryClass::antisymmetric, eps / 3);
    for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t)
        EXPECT_GT(m.triangle_area(t), m.h * m.h / 100);
}

TEST(CellMesh, BoundaryTags)
{
    const double eps = 0.1;
    const double h = eps / 4;
    const Mesh m = build_cell_mesh(make_params(2, 1, eps), SymmetryClass::symmetric, h);
    double left = 0, right = 0, axis = 0, neumann = 0;
    for (const auto& e : m.boundary) {
        const double len = std::hypot(m.vertices[e.a][0] - m.vertices[e.b][0],
                                      m.vertices[e.a][1] - m.vertices[e.b][1]);
        switch (e.tag) {
        case BoundaryTag::left_master: left += len; break;
        case BoundaryTag::right_slave: right += len; break;
        case BoundaryTag::symmetry_axis: axis += len; break;
        case BoundaryTag::neumann: neumann += len; break;
        }
    }
    EXPECT_NEAR(left, eps, 1e-14);
    EXPECT_NEAR(right, eps, 1e-14);
    EXPECT_NEAR(axis, eps, 1e-14);
    // Bottom, strip top on both sides, both rung sides.
    EXPECT_NEAR(neumann, 1.0 + (1.0 - eps) + 2 * (1.0 - eps), 1e-12);
}

TEST(CellMesh, RejectsCoarseMeshAndThickRungs)
{
    EXPECT_THROW(build_cell_mesh(make_params(2, 1, 0.1), SymmetryClass::symmetric, 0.05),
                 GeometryError);
    EXPECT_THROW(build_cell_mesh(make_params(1, 2, 0.3), SymmetryClass::symmetric, 0.05), Error);
    EXPECT_THROW(build_cell_mesh(make_params(2, 1, 1.0), SymmetryClass::symmetric, 0.05), Error);
}

TEST(SupercellMesh, AreaWithCentralRungCorrection)
{
    for (double mu : {0.25, 1.0, 1.5}) {
        const double eps = 0.1;
        const auto p = make_params(2, 1, eps, mu);
        const Mesh m = build_supercell_mesh(p, SymmetryClass::symmetric, 5, eps / 4);
        const double unperturbed = 11 * (eps + eps * (1.0 - eps));
        EXPECT_NEAR(m.area(), unperturbed + (mu - 1) * eps * (1.0 - eps), 1e-12);
        EXPECT_NEAR(supercell_area(p, 5), m.area(), 1e-12);
    }
}

TEST(SupercellMesh, UnperturbedIsTranslationPeriodic)
{
    const double eps = 0.1;
    const Mesh m = build_supercell_mesh(make_params(2, 1, eps), SymmetryClass::symmetric, 4, eps / 4);
    auto cell_points = [&](int j) {
        std::set<std::pair<long long, long long>> pts;
        for (const auto& v : m.vertices)
            if (v[0] >= j - 0.5 && v[0] <= j + 0.5)
                pts.emplace(std::llround((v[0] - j) * 1e9), std::llround(v[1] * 1e9));
        return pts;
    };
    const auto ref = cell_points(0);
    for (int j = -3; j <= 3; ++j)
        EXPECT_EQ(cell_points(j), ref) << "cell " << j;
}

TEST(SupercellMesh, CentralRungResolved)
{
    const double eps = 0.1;
    const double mu = 0.25;
    const Mesh m =
        build_supercell_mesh(make_params(2, 1, eps, mu), SymmetryClass::symmetric, 4, eps / 4);
    std::set<double> xs;
    for (const auto& v : m.vertices)
        if (v[1] == 0.0 && std::abs(v[0]) < 0.5)
            xs.insert(v[0]);
    ASSERT_GE(xs.size(), 4u);
    EXPECT_NEAR(*xs.rbegin() - *xs.begin(), mu * eps, 1e-15);
}

TEST(BlochPencil, HermitianByConstruction)
{
    const Mesh m = build_cell_mesh(make_params(2, 1, 0.1), SymmetryClass::symmetric, 0.025);
    const auto p = assemble_bloch_pencil(m, pi / 2);
    EXPECT_EQ(p.hermitian_defect(), 0.0);
    EXPECT_FALSE(eig::is_real(p.K));
}

TEST(BlochPencil, RealAtThetaPi)
{
    const Mesh m = build_cell_mesh(make_params(2, 1, 0.1), SymmetryClass::symmetric, 0.025);
    const auto p = assemble_bloch_pencil(m, pi);
    EXPECT_TRUE(eig::is_real(p.K));
    EXPECT_TRUE(eig::is_real(p.M));
    EXPECT_EQ(p.size(), m.n_vertices() - static_cast<int>(m.left_nodes.size()));
}

TEST(BlochPencil, ConstantModeAtThetaZero)
{
    const Mesh m = build_cell_mesh(make_params(2, 1, 0.1), SymmetryClass::symmetric, 0.025);
    const auto p = assemble_bloch_pencil(m, 0.0);
    const Eigen::VectorXcd one = Eigen::VectorXcd::Ones(p.size());
    EXPECT_LT((p.K * one).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(lowest(p, 1)[0], 0.0, 1e-10);
}

TEST(BlochPencil, AntisymmetricAxisIsDirichlet)
{
    const Mesh m = build_cell_mesh(make_params(2, 1, 0.1), SymmetryClass::antisymmetric, 0.025);
    const auto p = assemble_bloch_pencil(m, 0.0);
    EXPECT_EQ(p.size(), m.n_vertices() - static_cast<int>(m.left_nodes.size()) -
                            static_cast<int>(m.axis_nodes.size()));
    EXPECT_GT(lowest(p, 1)[0], 0.1);
}

TEST(BlochPencil, SparseAgreesWithDense)
{
    const Mesh m = build_cell_mesh(make_params(2, 1, 0.2), SymmetryClass::symmetric, 0.2 / 3);
    const auto p = assemble_bloch_pencil(m, 1.0);
    const auto dense = eig::eig_dense_hermitian_generalized(eig::DenseMatrix(p.K),
                                                            eig::DenseMatrix(p.M), false);
    const auto sparse = lowest(p, 4);
    for (int i = 0; i < 4; ++i)
        EXPECT_NEAR(sparse[i], dense.values[i], 1e-9 * std::max(1.0, dense.values[i]));
}

TEST(BlochPencil, RejectsSupercellAndBadTheta)
{
    const double eps = 0.1;
    const auto p = make_params(2, 1, eps);
    EXPECT_THROW(assemble_bloch_pencil(build_supercell_mesh(p, SymmetryClass::symmetric, 4, 0.025),
                                       0.0),
                 GeometryError);
    EXPECT_THROW(assemble_bloch_pencil(build_cell_mesh(p, SymmetryClass::symmetric, 0.025), 4.0),
                 DomainError);
}

TEST(Rectangle, NeumannEigenvaluesConvergeQuadratically)
{
    const double a = 1.0, b = 0.6;
    // (m, n) = (0,1), (1,0), (1,1), (2,0).
    const std::vector<double> exact{pi * pi / (b * b), pi * pi, pi * pi * (1 + 1 / (b * b)),
                                    4 * pi * pi};
    std::vector<double> hs{0.1, 0.05, 0.025};
    std::vector<std::vector<double>> err(exact.size());
    for (double h : hs) {
        const auto vals = lowest(assemble_pencil(build_rectangle_mesh(a, b, h)), 5);
        EXPECT_NEAR(vals[0], 0.0, 1e-9);
        std::vector<double> sorted = exact;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i)
            err[i].push_back(std::abs(vals[i + 1] - sorted[i]));
    }
    for (const auto& e : err) {
        const double order = fit_loglog_slope(hs, e);
        EXPECT_GE(order, 1.8);
        EXPECT_LE(order, 2.2);
    }
}

TEST(MeshExport, WritesAllTables)
{
    const Mesh m = build_cell_mesh(make_params(2, 1, 0.2), SymmetryClass::symmetric, 0.2 / 3);
    std::ostringstream os;
    write_mesh(os, m);
    std::istringstream is(os.str());
    std::string line, word;
    std::getline(is, line);
    EXPECT_EQ(line.rfind("# ladder mesh", 0), 0u);
    std::size_t n = 0;
    is >> word >> n;
    EXPECT_EQ(word, "vertices");
    EXPECT_EQ(n, m.vertices.size());
    EXPECT_NE(os.str().find("triangles " + std::to_string(m.triangles.size())), std::string::npos);
    EXPECT_NE(os.str().find("left_master"), std::string::npos);
}

TEST(BlochBands, FirstGapNearGraphEdges)
{
    const double eps = 0.05;
    const auto rep = fem_bloch_bands(make_params(2, 1, eps), SymmetryClass::symmetric, 3,
                                     uniform_theta_grid(9), eps / 4);
    ASSERT_FALSE(rep.gaps.empty());
    const auto& g = rep.gaps.front();
    EXPECT_EQ(g.rank_below, 0);
    EXPECT_NEAR(g.omega_b(), 1.23095941734077468213, 3 * eps);
    EXPECT_NEAR(g.omega_t(), 1.91063323624901855633, 3 * eps);
    for (const auto& row : rep.theta_table)
        for (double v : row)
            EXPECT_GE(v, -1e-10);
}

TEST(LocalizedModes, TrappedModeInFirstGap)
{
    const double eps = 0.06;
    const double h = eps / 4;
    const auto bands = fem_bloch_bands(make_params(2, 1, eps), SymmetryClass::symmetric, 3,
                                       uniform_theta_grid(9), h);
    const auto window = bands.gaps.front().interior();
    const auto rep = localized_modes(make_params(2, 1, eps, 0.25), SymmetryClass::symmetric, window,
                                     10, h);
    ASSERT_GE(rep.defects.size(), 1u);
    for (const auto& d : rep.defects) {
        EXPECT_GT(d.lambda, window.first);
        EXPECT_LT(d.lambda, window.second);
        EXPECT_GT(d.central_fraction, 0.9);
    }
    const auto control = localized_modes(make_params(2, 1, eps, 1.0), SymmetryClass::symmetric,
                                         window, 10, h);
    EXPECT_EQ(control.window_count, 0);
    EXPECT_TRUE(control.defects.empty());
}

TEST(LocalizedModes, DecayMatchesGraphReflectionRoot)
{
    const double eps = 0.05;
    const double h = eps / 4;
    const auto bands = fem_bloch_bands(make_params(2, 1, eps), SymmetryClass::symmetric, 3,
                                       uniform_theta_grid(9), h);
    const auto rep = localized_modes(make_params(2, 1, eps, 0.25), SymmetryClass::symmetric,
                                     bands.gaps.front().interior(), 10, h);
    ASSERT_FALSE(rep.defects.empty());
    for (const auto& d : rep.defects) {
        ASSERT_TRUE(d.graph_ratio.has_value());
        EXPECT_NEAR(d.mass_ratio / *d.graph_ratio, 1.0, 0.2);
    }
}

TEST(Quasimode, ResidualDecreasesWithThickness)
{
    const auto g = graph::gaps(2.0, SymmetryClass::symmetric, 3.0).front();
    const auto ev = graph::discrete_eigenvalues(2.0, 0.25, SymmetryClass::symmetric, g).front();
    const auto coarse = quasimode_residual(make_params(2, 1, 0.2, 0.25), SymmetryClass::symmetric, ev,
                                           0.05);
    const auto fine = quasimode_residual(make_params(2, 1, 0.1, 0.25), SymmetryClass::symmetric, ev,
                                         0.025);
    EXPECT_LT(fine.dual_ratio, coarse.dual_ratio);
    EXPECT_GT(coarse.dual_ratio, 0.0);
}

TEST(Quasimode, FattenedFunctionIsContinuousAtJunctions)
{
    const auto g = graph::gaps(2.0, SymmetryClass::symmetric, 3.0).front();
    const auto ev = graph::discrete_eigenvalues(2.0, 0.25, SymmetryClass::symmetric, g).front();
    const auto u = graph::build_eigenfunction(ev);
    const double eps = 0.1;
    const Mesh m =
        build_supercell_mesh(make_params(2, 1, eps, 0.25), SymmetryClass::symmetric, 4, eps / 4);
    const Eigen::VectorXcd v = fattened_eigenfunction(m, u);
    for (int i = 0; i < m.n_vertices(); ++i) {
        const auto& p = m.vertices[i];
        if (p[0] == 0.0 && p[1] == -1.0)
            EXPECT_NEAR(v[i].real(), u.vertex_value(0), 1e-14);
        if (p[0] == 0.0 && p[1] == 0.0)
            EXPECT_NEAR(v[i].real(), u.vertical(0, 0.0).value, 1e-14);
    }
}
