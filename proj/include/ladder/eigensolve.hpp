#pragma once

// Generalized Hermitian eigensolvers for pencils (K, M) with M positive
// definite: a dense path for small systems and a shift-invert Lanczos path
// for interior eigenvalues of large sparse pencils.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ladder::eig {

using Complex = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<Complex>;
using DenseMatrix = Eigen::MatrixXcd;

struct EigenResult {
    /// Ascending.
    std::vector<double> values;
    /// M-orthonormal eigenvectors, one per column, when requested.
    std::optional<DenseMatrix> vectors;
    /// ||K x - lambda M x|| / ||x|| on the original pencil.
    std::vector<double> residual_norms;
    /// Residual divided by (||K||_1 + |lambda| ||M||_1); the convergence test.
    std::vector<double> relative_residuals;
    /// Set for values outside the requested window (sparse path only).
    std::vector<bool> outside_window;

    std::string method;
    int iterations = 0;
    int restarts = 0;
    int factorizations = 0;
    /// Shift actually used after jitter retries.
    double sigma = 0.0;
    std::uint64_t seed = 0;
    /// Free-form diagnostics (factorization fallbacks, Ritz history).
    std::vector<std::string> log;
};

/// All eigenpairs of K x = lambda M x by Cholesky reduction of M and a
/// Hermitian tridiagonal QR eigensolver. Throws NumericalError naming the
/// failing pivot when M is not positive definite.
EigenResult eig_dense_hermitian_generalized(const DenseMatrix& K, const DenseMatrix& M,
                                            bool want_vectors = true);

struct ShiftInvertOptions {
    /// Bound on the relative residual of every returned pair.
    double tol = 1e-9;
    std::uint64_t seed = 20240611;
    /// Start block size; at least the largest expected multiplicity.
    int block = 4;
    /// Basis size before a thick restart; 0 picks max(40, 3k + 2 block).
    int max_basis = 0;
    int max_restarts = 60;
    /// Relative shift increment applied when K - sigma M cannot be factored.
    double jitter = 1e-7;
    int max_retries = 5;
    /// Optional lambda interval; Ritz values outside it are flagged.
    std::optional<std::pair<double, double>> window;
    bool want_vectors = true;
};

/// The k eigenvalues nearest sigma, by Lanczos on (K - sigma M)^{-1} M with
/// full M-reorthogonalization and thick restarts. Throws NumericalError on
/// non-convergence, with the Ritz history in the message.
EigenResult eig_sparse_shift_invert(const SparseMatrix& K, const SparseMatrix& M, double sigma,
                                    int k, const ShiftInvertOptions& opts = {});

/// Number of eigenvalues of the pencil strictly below x, from the inertia of
/// an LDL^H factorization of K - x M (Sylvester's law).
int count_eigenvalues_below(const SparseMatrix& K, const SparseMatrix& M, double x);

/// Dense variant of the inertia count, used as an independent check.
int count_eigenvalues_below_dense(const DenseMatrix& K, const DenseMatrix& M, double x);

/// True when every stored entry has zero imaginary part.
bool is_real(const SparseMatrix& A);

} // namespace ladder::eig
