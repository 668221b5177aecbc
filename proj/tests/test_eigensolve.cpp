#include "ladder/eigensolve.hpp"
#include "ladder/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ladder;
using namespace ladder::eig;

namespace {

SparseMatrix to_sparse(const DenseMatrix& A)
{
    SparseMatrix S = A.sparseView();
    S.makeCompressed();
    return S;
}

// Sturm-count bisection: the eigenvalue of index `idx` (0-based).
double bisect_eigenvalue(const DenseMatrix& K, const DenseMatrix& M, int idx, double lo, double hi)
{
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (count_eigenvalues_below_dense(K, M, mid) > idx)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

// Random Hermitian K and Hermitian positive definite M.
std::pair<DenseMatrix, DenseMatrix> random_pencil(int n, std::uint64_t seed, bool complex)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    DenseMatrix A(n, n);
    DenseMatrix B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            A(i, j) = Complex(d(rng), complex ? d(rng) : 0.0);
            B(i, j) = Complex(d(rng), complex ? d(rng) : 0.0);
        }
    DenseMatrix K = 0.5 * (A + A.adjoint());
    DenseMatrix M = B * B.adjoint() / n + DenseMatrix::Identity(n, n);
    return {K, M};
}

// P1 pencil of -u'' on [0, 1] with quasi-periodic phase e^{i theta}.
std::pair<SparseMatrix, SparseMatrix> ring_pencil(int n, double theta)
{
    const double h = 1.0 / n;
    const Complex phase = std::polar(1.0, theta);
    std::vector<Eigen::Triplet<Complex>> k;
    std::vector<Eigen::Triplet<Complex>> m;
    for (int e = 0; e < n; ++e) {
        const int a = e;
        const int b = (e + 1) % n;
        const Complex beta = (e + 1 == n) ? phase : Complex(1.0);
        const Complex kl[2][2] = {{1.0 / h, -1.0 / h * beta}, {-1.0 / h * std::conj(beta), 1.0 / h}};
        const Complex ml[2][2] = {{h / 3, h / 6 * beta}, {h / 6 * std::conj(beta), h / 3}};
        const int idx[2] = {a, b};
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                k.emplace_back(idx[r], idx[c], kl[r][c]);
                m.emplace_back(idx[r], idx[c], ml[r][c]);
            }
    }
    SparseMatrix K(n, n);
    SparseMatrix M(n, n);
    K.setFromTriplets(k.begin(), k.end());
    M.setFromTriplets(m.begin(), m.end());
    return {K, M};
}

} // namespace

TEST(Dense, DiagonalExample)
{
    DenseMatrix K = DenseMatrix::Zero(2, 2);
    K(0, 0) = 1.0;
    K(1, 1) = 4.0;
    const auto r = eig_dense_hermitian_generalized(K, DenseMatrix::Identity(2, 2));
    ASSERT_EQ(r.values.size(), 2u);
    EXPECT_NEAR(r.values[0], 1.0, 1e-15);
    EXPECT_NEAR(r.values[1], 4.0, 1e-15);
}

TEST(Dense, TwoPointLaplacian)
{
    DenseMatrix K(2, 2);
    K << 2.0, -1.0, -1.0, 2.0;
    const auto r = eig_dense_hermitian_generalized(K, DenseMatrix::Identity(2, 2));
    EXPECT_NEAR(r.values[0], 1.0, 1e-14);
    EXPECT_NEAR(r.values[1], 3.0, 1e-14);
}

TEST(Dense, RandomPencilAgainstSturmBisection)
{
    for (bool complex : {false, true}) {
        const auto [K, M] = random_pencil(50, complex ? 11 : 10, complex);
        const auto r = eig_dense_hermitian_generalized(K, M);
        ASSERT_EQ(r.values.size(), 50u);
        for (std::size_t i = 0; i + 1 < r.values.size(); ++i)
            EXPECT_LE(r.values[i], r.values[i + 1]);
        for (double res : r.residual_norms)
            EXPECT_LE(res, 1e-10);
        const DenseMatrix& X = *r.vectors;
        const DenseMatrix G = X.adjoint() * M * X;
        EXPECT_LE((G - DenseMatrix::Identity(50, 50)).cwiseAbs().maxCoeff(), 1e-10);
        const double bound = 100.0;
        for (int i = 0; i < 50; i += 7)
            EXPECT_NEAR(r.values[i], bisect_eigenvalue(K, M, i, -bound, bound), 1e-9);
    }
}

TEST(Dense, ReportsFailingPivot)
{
    DenseMatrix M = DenseMatrix::Identity(3, 3);
    M(2, 2) = -1.0;
    try {
        eig_dense_hermitian_generalized(DenseMatrix::Identity(3, 3), M);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("pivot 2"), std::string::npos) << e.what();
    }
}

TEST(Sparse, SmallExample)
{
    DenseMatrix K(2, 2);
    K << 1.0, 0.0, 0.0, 4.0;
    const auto r = eig_sparse_shift_invert(to_sparse(K), to_sparse(DenseMatrix::Identity(2, 2)), 0.9, 1);
    ASSERT_EQ(r.values.size(), 1u);
    EXPECT_NEAR(r.values[0], 1.0, 1e-12);
}

TEST(Sparse, MatchesDenseOnRing)
{
    for (double theta : {0.0, 0.7, std::numbers::pi}) {
        const auto [K, M] = ring_pencil(400, theta);
        const auto dense = eig_dense_hermitian_generalized(DenseMatrix(K), DenseMatrix(M), false);
        const double sigma = 1500.0;
        ShiftInvertOptions opts;
        opts.tol = 1e-12;
        const auto sparse = eig_sparse_shift_invert(K, M, sigma, 6, opts);
        ASSERT_EQ(sparse.values.size(), 6u);
        std::vector<double> nearest = dense.values;
        std::sort(nearest.begin(), nearest.end(), [&](double a, double b) {
            return std::abs(a - sigma) < std::abs(b - sigma);
        });
        nearest.resize(6);
        std::sort(nearest.begin(), nearest.end());
        for (int i = 0; i < 6; ++i)
            EXPECT_NEAR(sparse.values[i], nearest[i], 1e-9 * std::max(1.0, nearest[i])) << theta;
        for (double rr : sparse.relative_residuals)
            EXPECT_LE(rr, 1e-12);
        const DenseMatrix& X = *sparse.vectors;
        const DenseMatrix G = X.adjoint() * DenseMatrix(M) * X;
        EXPECT_LE((G - DenseMatrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Sparse, DegenerateEigenvaluesAreAllFound)
{
    // theta = 0 ring: every nonzero eigenvalue is double.
    const auto [K, M] = ring_pencil(300, 0.0);
    const auto r = eig_sparse_shift_invert(K, M, 100.0, 5);
    const auto dense = eig_dense_hermitian_generalized(DenseMatrix(K), DenseMatrix(M), false);
    for (int i = 0; i < 5; ++i)
        EXPECT_NEAR(r.values[i], dense.values[i], 1e-9 * std::max(1.0, dense.values[i]));
}

TEST(Sparse, FlagsValuesOutsideWindow)
{
    const auto [K, M] = ring_pencil(200, 0.3);
    const auto dense = eig_dense_hermitian_generalized(DenseMatrix(K), DenseMatrix(M), false);
    // Window around a single eigenvalue; asking for three forces two outside it.
    const double target = dense.values[4];
    ShiftInvertOptions opts;
    opts.window = std::make_pair(target - 1e-3, target + 1e-3);
    const auto r = eig_sparse_shift_invert(K, M, target + 1e-4, 3, opts);
    int inside = 0;
    for (std::size_t i = 0; i < r.values.size(); ++i)
        if (!r.outside_window[i])
            ++inside;
    EXPECT_EQ(inside, 1);
    EXPECT_EQ(r.outside_window.size(), 3u);
}

TEST(Sparse, ShiftOnEigenvalueIsJittered)
{
    DenseMatrix K = DenseMatrix::Zero(100, 100);
    for (int i = 0; i < 100; ++i)
        K(i, i) = 1.0 + i;
    const auto r = eig_sparse_shift_invert(to_sparse(K), to_sparse(DenseMatrix::Identity(100, 100)),
                                           2.0, 1);
    EXPECT_NEAR(r.values[0], 2.0, 1e-12);
    EXPECT_NE(r.sigma, 2.0);
    EXPECT_GE(r.factorizations, 2);
}

TEST(Sparse, Deterministic)
{
    const auto [K, M] = ring_pencil(300, 1.1);
    ShiftInvertOptions opts;
    opts.seed = 99;
    const auto a = eig_sparse_shift_invert(K, M, 700.0, 4, opts);
    const auto b = eig_sparse_shift_invert(K, M, 700.0, 4, opts);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.seed, 99u);
    EXPECT_TRUE(a.vectors->isApprox(*b.vectors, 0.0));
}

TEST(Inertia, SparseMatchesDense)
{
    const auto [K, M] = ring_pencil(120, 0.9);
    const auto dense = eig_dense_hermitian_generalized(DenseMatrix(K), DenseMatrix(M), false);
    for (double x : {0.5, 100.0, 5000.0, 20000.0}) {
        int expected = 0;
        for (double v : dense.values)
            expected += v < x;
        EXPECT_EQ(count_eigenvalues_below(K, M, x), expected);
        EXPECT_EQ(count_eigenvalues_below_dense(DenseMatrix(K), DenseMatrix(M), x), expected);
    }
}
