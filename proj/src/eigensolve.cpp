#include "ladder/eigensolve.hpp"

#include "ladder/errors.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

namespace ladder::eig {

namespace {

template <class Scalar>
using Sparse = Eigen::SparseMatrix<Scalar>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

double real_part(double x) { return x; }
double real_part(Complex x) { return x.real(); }
double numext_conj(double x) { return x; }
Complex numext_conj(Complex x) { return std::conj(x); }

template <class Scalar>
Scalar random_scalar(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    if constexpr (std::is_same_v<Scalar, double>)
        return n(rng);
    else
        return Scalar(n(rng), n(rng));
}

template <class Scalar>
double norm1(const Sparse<Scalar>& A)
{
    double best = 0.0;
    for (int c = 0; c < A.outerSize(); ++c) {
        double s = 0.0;
        for (typename Sparse<Scalar>::InnerIterator it(A, c); it; ++it)
            s += std::abs(it.value());
        best = std::max(best, s);
    }
    return best;
}

void check_square(Eigen::Index rows, Eigen::Index cols, Eigen::Index mrows, Eigen::Index mcols)
{
    if (rows != cols || mrows != mcols || rows != mrows)
        throw DomainError("pencil matrices must be square and of equal size");
    if (rows == 0)
        throw DomainError("pencil is empty");
}

// Factorization of K - sigma M with a residual check. LDL^H without pivoting
// is tried first; SparseLU takes over when it is inaccurate.
template <class Scalar>
class ShiftedSolver {
public:
    bool factor(const Sparse<Scalar>& A, std::vector<std::string>& log)
    {
        A_ = &A;
        ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Sparse<Scalar>, Eigen::Lower>>();
        ldlt_->compute(A);
        use_lu_ = false;
        if (ldlt_->info() == Eigen::Success && accurate())
            return true;
        log.emplace_back("LDL^H factorization inaccurate; falling back to SparseLU");
        ldlt_.reset();
        lu_ = std::make_unique<Eigen::SparseLU<Sparse<Scalar>>>();
        lu_->analyzePattern(A);
        lu_->factorize(A);
        use_lu_ = true;
        if (lu_->info() != Eigen::Success) {
            log.emplace_back("SparseLU failed: " + lu_->lastErrorMessage());
            return false;
        }
        return accurate();
    }

    Vec<Scalar> solve(const Vec<Scalar>& b) const
    {
        return use_lu_ ? Vec<Scalar>(lu_->solve(b)) : Vec<Scalar>(ldlt_->solve(b));
    }

private:
    bool accurate() const
    {
        std::mt19937_64 rng(12345);
        Vec<Scalar> x(A_->rows());
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x[i] = random_scalar<Scalar>(rng);
        const Vec<Scalar> b = (*A_) * x;
        const Vec<Scalar> y = solve(b);
        if (!y.allFinite())
            return false;
        const double res = ((*A_) * y - b).norm();
        return res <= 1e-8 * norm1(*A_) * y.norm();
    }

    const Sparse<Scalar>* A_ = nullptr;
    std::unique_ptr<Eigen::SimplicialLDLT<Sparse<Scalar>, Eigen::Lower>> ldlt_;
    std::unique_ptr<Eigen::SparseLU<Sparse<Scalar>>> lu_;
    bool use_lu_ = false;
};

template <class Scalar>
EigenResult shift_invert_impl(const Sparse<Scalar>& K, const Sparse<Scalar>& M, double sigma,
                              int k, const ShiftInvertOptions& opts)
{
    const Eigen::Index n = K.rows();
    EigenResult res;
    res.method = "shift-invert-lanczos";
    res.seed = opts.seed;
    if (k > n)
        throw DomainError("requested more eigenvalues than the pencil dimension");

    // Factorization with bounded jitter retries.
    ShiftedSolver<Scalar> solver;
    double shift = sigma;
    Sparse<Scalar> A;
    bool ok = false;
    for (int attempt = 0; attempt <= opts.max_retries && !ok; ++attempt) {
        if (attempt > 0) {
            shift = sigma + opts.jitter * std::max(1.0, std::abs(sigma)) * attempt;
            std::ostringstream os;
            os << "retrying factorization with sigma = " << shift;
            res.log.push_back(os.str());
        }
        A = K - Scalar(shift) * M;
        A.makeCompressed();
        ++res.factorizations;
        ok = solver.factor(A, res.log);
    }
    if (!ok) {
        std::ostringstream os;
        os << "K - sigma M could not be factored near sigma = " << sigma << " after "
           << res.factorizations << " attempts";
        throw NumericalError(os.str());
    }
    res.sigma = shift;

    const double knorm = norm1(K);
    const double mnorm = norm1(M);
    const int block = std::max(1, std::min<int>(opts.block, static_cast<int>(n)));
    const int max_basis = static_cast<int>(std::min<Eigen::Index>(
        n, opts.max_basis > 0 ? opts.max_basis : std::max(40, 3 * k + 2 * block)));
    const int keep = std::min(max_basis - block - 1, k + block + 2);
    if (keep < k)
        throw DomainError("basis too small for the requested number of eigenvalues");

    std::mt19937_64 rng(opts.seed);
    Mat<Scalar> V(n, max_basis + 1);
    Mat<Scalar> MV(n, max_basis + 1);
    Mat<Scalar> H = Mat<Scalar>::Zero(max_basis + 1, max_basis + 1);
    int size = 0;     // basis vectors stored
    int expanded = 0; // vectors whose image under the operator is in H

    auto m_orthonormalize = [&](Vec<Scalar>& w, int upto, Scalar* coeffs) -> double {
        const double before = std::sqrt(std::max(0.0, real_part(w.dot(M * w))));
        for (int pass = 0; pass < 2; ++pass) {
            const Vec<Scalar> proj = MV.leftCols(upto).adjoint() * w;
            w -= V.leftCols(upto) * proj;
            if (coeffs)
                for (int i = 0; i < upto; ++i)
                    coeffs[i] += proj[i];
        }
        const double after = std::sqrt(std::max(0.0, real_part(w.dot(M * w))));
        return before > 0.0 ? after / before : 0.0;
    };

    auto push_random = [&]() {
        for (int tries = 0; tries < 10; ++tries) {
            Vec<Scalar> w(n);
            for (Eigen::Index i = 0; i < n; ++i)
                w[i] = random_scalar<Scalar>(rng);
            // Push the random start through the operator once so that it lies
            // in the range of (K - sigma M)^{-1} M.
            w = solver.solve(M * w);
            if (m_orthonormalize(w, size, nullptr) < 1e-8)
                continue;
            const Vec<Scalar> mw = M * w;
            const double nrm = std::sqrt(real_part(w.dot(mw)));
            V.col(size) = w / nrm;
            MV.col(size) = mw / nrm;
            ++size;
            return true;
        }
        return false;
    };

    for (int b = 0; b < block; ++b)
        if (!push_random())
            break;

    std::vector<double> history;
    std::vector<double> ritz_lambda;
    Mat<Scalar> ritz_vectors;
    std::vector<double> abs_res;
    std::vector<double> rel_res;

    auto rayleigh_ritz = [&](bool final_check) -> bool {
        const int m = expanded;
        Mat<Scalar> T = H.topLeftCorner(m, m);
        T = (0.5 * (T + T.adjoint())).eval();
        Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(T);
        const Eigen::VectorXd& theta = es.eigenvalues();
        std::vector<int> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return std::abs(theta[a]) > std::abs(theta[b]); });
        const int want = std::min(k, m);
        ritz_lambda.assign(want, 0.0);
        ritz_vectors.resize(n, want);
        abs_res.assign(want, 0.0);
        rel_res.assign(want, 0.0);
        bool all = want == k;
        double worst = 0.0;
        for (int c = 0; c < want; ++c) {
            const int idx = order[c];
            const double lam = shift + 1.0 / theta[idx];
            Vec<Scalar> x = V.leftCols(m) * es.eigenvectors().col(idx);
            const Vec<Scalar> r = K * x - Scalar(lam) * (M * x);
            const double xn = x.norm();
            abs_res[c] = r.norm() / xn;
            rel_res[c] = abs_res[c] / (knorm + std::abs(lam) * mnorm);
            worst = std::max(worst, rel_res[c]);
            all = all && rel_res[c] <= opts.tol;
            ritz_lambda[c] = lam;
            ritz_vectors.col(c) = x;
        }
        history.push_back(worst);
        (void)final_check;
        return all;
    };

    bool converged = false;
    int restarts = 0;
    while (!converged) {
        // Expand until the basis is full.
        while (size < max_basis && expanded < size) {
            const int j = expanded;
            Vec<Scalar> w = solver.solve(MV.col(j));
            ++res.iterations;
            std::vector<Scalar> coeffs(size, Scalar(0));
            const double kept = m_orthonormalize(w, size, coeffs.data());
            for (int i = 0; i < size; ++i)
                H(i, j) = coeffs[i];
            ++expanded;
            if (kept > 1e-12) {
                const Vec<Scalar> mw = M * w;
                const double nrm = std::sqrt(real_part(w.dot(mw)));
                H(size, j) = Scalar(nrm);
                V.col(size) = w / nrm;
                MV.col(size) = mw / nrm;
                ++size;
            } else if (expanded == size && size < max_basis) {
                // Invariant subspace found; continue with a fresh direction.
                if (!push_random())
                    break;
            }
            // Hermitian completion of the row for vector j.
            for (int i = 0; i < j; ++i)
                H(j, i) = numext_conj(H(i, j));
            if (expanded >= k + block && (expanded % block == 0) && rayleigh_ritz(false)) {
                converged = true;
                break;
            }
        }
        if (converged)
            break;
        if (expanded < k) {
            if (size == expanded && !push_random())
                break;
            if (size >= max_basis)
                throw DomainError("basis too small for the requested number of eigenvalues");
            continue;
        }
        if (rayleigh_ritz(true)) {
            converged = true;
            break;
        }
        if (expanded == n || restarts >= opts.max_restarts)
            break;

        // Thick restart: keep the Ritz vectors nearest the shift together with
        // the unexpanded tail of the basis.
        ++restarts;
        const int m = expanded;
        Mat<Scalar> T = H.topLeftCorner(m, m);
        T = (0.5 * (T + T.adjoint())).eval();
        Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(T);
        const Eigen::VectorXd& theta = es.eigenvalues();
        std::vector<int> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return std::abs(theta[a]) > std::abs(theta[b]); });
        const int kk = std::min(keep, m);
        Mat<Scalar> S(m, kk);
        for (int c = 0; c < kk; ++c)
            S.col(c) = es.eigenvectors().col(order[c]);
        const int tail = size - m;
        Mat<Scalar> Ynew = V.leftCols(m) * S;
        Mat<Scalar> MYnew = MV.leftCols(m) * S;
        Mat<Scalar> coupling = H.block(m, 0, tail, m) * S;
        Mat<Scalar> Vtail = V.middleCols(m, tail);
        Mat<Scalar> MVtail = MV.middleCols(m, tail);
        Mat<Scalar> Htail = H.block(m, m, tail, tail);
        H.setZero();
        V.leftCols(kk) = Ynew;
        MV.leftCols(kk) = MYnew;
        V.middleCols(kk, tail) = Vtail;
        MV.middleCols(kk, tail) = MVtail;
        for (int c = 0; c < kk; ++c)
            H(c, c) = Scalar(theta[order[c]]);
        H.block(kk, 0, tail, kk) = coupling;
        H.block(0, kk, kk, tail) = coupling.adjoint();
        H.block(kk, kk, tail, tail) = Htail;
        size = kk + tail;
        expanded = kk;
    }
    res.restarts = restarts;

    if (!converged) {
        std::ostringstream os;
        os << "shift-invert Lanczos did not converge: sigma = " << shift << ", k = " << k
           << ", " << res.iterations << " operator applications, " << restarts
           << " restarts; worst relative residual per Rayleigh-Ritz step:";
        const std::size_t first = history.size() > 10 ? history.size() - 10 : 0;
        for (std::size_t i = first; i < history.size(); ++i)
            os << ' ' << history[i];
        throw NumericalError(os.str());
    }

    std::vector<int> order(ritz_lambda.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return ritz_lambda[a] < ritz_lambda[b]; });
    Mat<Scalar> X(n, static_cast<Eigen::Index>(order.size()));
    for (std::size_t c = 0; c < order.size(); ++c) {
        const int i = order[c];
        res.values.push_back(ritz_lambda[i]);
        res.residual_norms.push_back(abs_res[i]);
        res.relative_residuals.push_back(rel_res[i]);
        const bool out = opts.window && (ritz_lambda[i] < opts.window->first ||
                                         ritz_lambda[i] > opts.window->second);
        res.outside_window.push_back(out);
        Vec<Scalar> x = ritz_vectors.col(i);
        x /= std::sqrt(real_part(x.dot(M * x)));
        X.col(static_cast<Eigen::Index>(c)) = x;
    }
    if (opts.want_vectors) {
        // Clusters are re-orthonormalized in the M inner product.
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            for (Eigen::Index p = 0; p < c; ++p) {
                if (std::abs(res.values[c] - res.values[p]) >
                    1e-6 * std::max(1.0, std::abs(res.values[c])))
                    continue;
                const Scalar proj = X.col(p).dot(M * X.col(c));
                X.col(c) -= proj * X.col(p);
            }
            X.col(c) /= std::sqrt(real_part(X.col(c).dot(M * X.col(c))));
        }
        if constexpr (std::is_same_v<Scalar, double>)
            res.vectors = X.template cast<Complex>();
        else
            res.vectors = X;
    }
    return res;
}

template <class Scalar>
Eigen::Index failing_pivot(const Mat<Scalar>& M)
{
    const Eigen::Index n = M.rows();
    Mat<Scalar> L = Mat<Scalar>::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Scalar s = M(j, j);
        for (Eigen::Index p = 0; p < j; ++p)
            s -= L(j, p) * numext_conj(L(j, p));
        const double d2 = real_part(s);
        if (!(d2 > 0.0) || !std::isfinite(d2))
            return j;
        const double d = std::sqrt(d2);
        L(j, j) = d;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            Scalar t = M(i, j);
            for (Eigen::Index p = 0; p < j; ++p)
                t -= L(i, p) * numext_conj(L(j, p));
            L(i, j) = t / d;
        }
    }
    return -1;
}

template <class Scalar>
EigenResult dense_impl(const Mat<Scalar>& K, const Mat<Scalar>& M, bool want_vectors)
{
    const Eigen::Index n = K.rows();
    Eigen::LLT<Mat<Scalar>> llt(M);
    if (llt.info() != Eigen::Success) {
        std::ostringstream os;
        os << "mass matrix is not positive definite: Cholesky fails at pivot "
           << failing_pivot<Scalar>(M);
        throw NumericalError(os.str());
    }
    const Mat<Scalar> L = llt.matrixL();
    const auto tri = L.template triangularView<Eigen::Lower>();
    Mat<Scalar> C = tri.solve(K);
    C = tri.solve(Mat<Scalar>(C.adjoint())).adjoint();
    C = (0.5 * (C + C.adjoint())).eval();

    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(
        C, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("Hermitian eigensolver failed to converge");

    EigenResult res;
    res.method = "dense-cholesky-qr";
    res.values.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
    if (want_vectors) {
        const double knorm = K.cwiseAbs().colwise().sum().maxCoeff();
        const double mnorm = M.cwiseAbs().colwise().sum().maxCoeff();
        Mat<Scalar> X = L.adjoint().template triangularView<Eigen::Upper>().solve(es.eigenvectors());
        for (Eigen::Index c = 0; c < n; ++c) {
            const double lam = res.values[c];
            const Vec<Scalar> r = K * X.col(c) - Scalar(lam) * (M * X.col(c));
            const double abs_r = r.norm() / X.col(c).norm();
            res.residual_norms.push_back(abs_r);
            res.relative_residuals.push_back(abs_r / (knorm + std::abs(lam) * mnorm));
        }
        if constexpr (std::is_same_v<Scalar, double>)
            res.vectors = X.template cast<Complex>();
        else
            res.vectors = std::move(X);
    }
    return res;
}

template <class Scalar>
int inertia_below(const Sparse<Scalar>& K, const Sparse<Scalar>& M, double x)
{
    Sparse<Scalar> A = K - Scalar(x) * M;
    A.makeCompressed();
    Eigen::SimplicialLDLT<Sparse<Scalar>, Eigen::Lower> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("LDL^H factorization failed in the inertia count");
    const auto& d = ldlt.vectorD();
    int neg = 0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        const double v = real_part(d[i]);
        if (!std::isfinite(v) || v == 0.0)
            throw NumericalError("singular pivot in the inertia count; shift x slightly");
        if (v < 0.0)
            ++neg;
    }
    return neg;
}

Sparse<double> real_copy(const SparseMatrix& A)
{
    Sparse<double> R = A.real();
    R.makeCompressed();
    return R;
}

// Pencils this small are solved densely; a Krylov basis would span them anyway.
constexpr Eigen::Index small_dimension = 64;

EigenResult nearest_dense(const SparseMatrix& K, const SparseMatrix& M, double sigma, int k,
                          const ShiftInvertOptions& opts)
{
    EigenResult all = eig_dense_hermitian_generalized(DenseMatrix(K), DenseMatrix(M), true);
    std::vector<int> order(all.values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(all.values[a] - sigma) < std::abs(all.values[b] - sigma);
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    EigenResult res;
    res.method = "dense-small-pencil";
    res.sigma = sigma;
    res.seed = opts.seed;
    DenseMatrix X(K.rows(), k);
    for (int c = 0; c < k; ++c) {
        const int i = order[c];
        const double lam = all.values[i];
        res.values.push_back(lam);
        res.residual_norms.push_back(all.residual_norms[i]);
        res.relative_residuals.push_back(all.relative_residuals[i]);
        res.outside_window.push_back(opts.window &&
                                     (lam < opts.window->first || lam > opts.window->second));
        X.col(c) = all.vectors->col(i);
    }
    if (opts.want_vectors)
        res.vectors = std::move(X);
    return res;
}

} // namespace

bool is_real(const SparseMatrix& A)
{
    for (int c = 0; c < A.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(A, c); it; ++it)
            if (it.value().imag() != 0.0)
                return false;
    return true;
}

EigenResult eig_dense_hermitian_generalized(const DenseMatrix& K, const DenseMatrix& M,
                                            bool want_vectors)
{
    check_square(K.rows(), K.cols(), M.rows(), M.cols());
    if (K.imag().isZero(0.0) && M.imag().isZero(0.0))
        return dense_impl<double>(K.real(), M.real(), want_vectors);
    return dense_impl<Complex>(K, M, want_vectors);
}

EigenResult eig_sparse_shift_invert(const SparseMatrix& K, const SparseMatrix& M, double sigma,
                                    int k, const ShiftInvertOptions& opts)
{
    check_square(K.rows(), K.cols(), M.rows(), M.cols());
    if (k < 1)
        throw DomainError("k must be at least 1");
    if (k > K.rows())
        throw DomainError("requested more eigenvalues than the pencil dimension");
    if (K.rows() <= small_dimension)
        return nearest_dense(K, M, sigma, k, opts);
    if (is_real(K) && is_real(M))
        return shift_invert_impl<double>(real_copy(K), real_copy(M), sigma, k, opts);
    return shift_invert_impl<Complex>(K, M, sigma, k, opts);
}

int count_eigenvalues_below(const SparseMatrix& K, const SparseMatrix& M, double x)
{
    check_square(K.rows(), K.cols(), M.rows(), M.cols());
    if (is_real(K) && is_real(M))
        return inertia_below<double>(real_copy(K), real_copy(M), x);
    return inertia_below<Complex>(K, M, x);
}

int count_eigenvalues_below_dense(const DenseMatrix& K, const DenseMatrix& M, double x)
{
    check_square(K.rows(), K.cols(), M.rows(), M.cols());
    const DenseMatrix A = K - x * M;
    Eigen::LDLT<DenseMatrix> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("dense LDL^H factorization failed in the inertia count");
    int neg = 0;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        if (ldlt.vectorD()[i].real() < 0.0)
            ++neg;
    return neg;
}

} // namespace ladder::eig
