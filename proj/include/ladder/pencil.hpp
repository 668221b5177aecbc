#pragma once

// Assembly of Hermitian pencils (K, M) from real element matrices, with
// Dirichlet elimination and phase tying of slave nodes to master nodes.

#include "ladder/eigensolve.hpp"

#include <span>
#include <vector>

namespace ladder {

/// Maps mesh nodes to unknowns. A free node owns an unknown with coefficient
/// 1; a slave node reuses its master's unknown with a phase coefficient; a
/// Dirichlet node has no unknown.
struct DofMap {
    std::vector<int> dof;
    std::vector<eig::Complex> coeff;
    int n_dofs = 0;
    /// (slave node, master node) pairs.
    std::vector<std::pair<int, int>> ties;
    eig::Complex phase{1.0, 0.0};
    std::vector<int> dirichlet;

    /// Builds the map for `n_nodes` nodes. Each slave takes the value
    /// phase * (its master's value).
    static DofMap build(int n_nodes, std::span<const std::pair<int, int>> ties,
                        eig::Complex phase, std::span<const int> dirichlet);

    /// Nodal values of a reduced vector.
    Eigen::VectorXcd expand(const Eigen::VectorXcd& reduced) const;
    /// Reduced vector whose expansion matches `nodal` on the free nodes.
    Eigen::VectorXcd restrict_to_dofs(const Eigen::VectorXcd& nodal) const;
};

struct HermitianPencil {
    eig::SparseMatrix K;
    eig::SparseMatrix M;
    DofMap dof_map;
    double theta = 0.0;

    int size() const noexcept { return static_cast<int>(K.rows()); }
    /// Largest |A - A^H| entry over K and M; zero by construction.
    double hermitian_defect() const;
};

/// Accumulates element contributions: entry (a, b) receives
/// conj(c_a) c_b k_ab, which keeps the reduced matrices exactly Hermitian.
class PencilAssembler {
public:
    explicit PencilAssembler(DofMap map);

    /// `kloc` and `mloc` are row-major n x n element matrices.
    void add(std::span<const int> nodes, std::span<const double> kloc,
             std::span<const double> mloc);

    HermitianPencil finish(double theta);

private:
    DofMap map_;
    std::vector<Eigen::Triplet<eig::Complex>> k_;
    std::vector<Eigen::Triplet<eig::Complex>> m_;
};

/// e^{-i theta}, exact at theta = 0 and theta = pi.
eig::Complex bloch_phase(double theta);

} // namespace ladder
