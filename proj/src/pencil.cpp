#include "ladder/pencil.hpp"

#include "ladder/errors.hpp"

#include <cmath>
#include <numbers>

namespace ladder {

using eig::Complex;

Complex bloch_phase(double theta)
{
    if (theta == 0.0)
        return {1.0, 0.0};
    if (theta == std::numbers::pi)
        return {-1.0, 0.0};
    return std::polar(1.0, -theta);
}

DofMap DofMap::build(int n_nodes, std::span<const std::pair<int, int>> ties, Complex phase,
                     std::span<const int> dirichlet)
{
    DofMap map;
    map.phase = phase;
    map.dof.assign(n_nodes, -2);
    map.coeff.assign(n_nodes, Complex(1.0, 0.0));
    std::vector<int> master_of(n_nodes, -1);
    for (const auto& [slave, master] : ties) {
        if (slave < 0 || slave >= n_nodes || master < 0 || master >= n_nodes || slave == master)
            throw GeometryError("tie refers to an invalid node pair");
        if (master_of[slave] != -1)
            throw GeometryError("node tied to two masters");
        master_of[slave] = master;
    }
    for (const auto& [slave, master] : ties)
        if (master_of[master] != -1)
            throw GeometryError("master node is itself a slave");
    for (int d : dirichlet) {
        if (d < 0 || d >= n_nodes)
            throw GeometryError("Dirichlet node out of range");
        map.dof[d] = -1;
    }
    int next = 0;
    for (int i = 0; i < n_nodes; ++i)
        if (master_of[i] == -1 && map.dof[i] == -2)
            map.dof[i] = next++;
    for (int i = 0; i < n_nodes; ++i) {
        if (master_of[i] == -1)
            continue;
        const int m = master_of[i];
        const bool slave_dirichlet = map.dof[i] == -1;
        const bool master_dirichlet = map.dof[m] == -1;
        if (slave_dirichlet != master_dirichlet)
            throw GeometryError("slave and master disagree on the Dirichlet condition");
        if (!slave_dirichlet) {
            map.dof[i] = map.dof[m];
            map.coeff[i] = phase;
        }
    }
    map.n_dofs = next;
    map.ties.assign(ties.begin(), ties.end());
    map.dirichlet.assign(dirichlet.begin(), dirichlet.end());
    return map;
}

Eigen::VectorXcd DofMap::expand(const Eigen::VectorXcd& reduced) const
{
    if (reduced.size() != n_dofs)
        throw DomainError("reduced vector has the wrong length");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dof.size()));
    for (std::size_t i = 0; i < dof.size(); ++i)
        if (dof[i] >= 0)
            out[static_cast<Eigen::Index>(i)] = coeff[i] * reduced[dof[i]];
    return out;
}

Eigen::VectorXcd DofMap::restrict_to_dofs(const Eigen::VectorXcd& nodal) const
{
    if (nodal.size() != static_cast<Eigen::Index>(dof.size()))
        throw DomainError("nodal vector has the wrong length");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n_dofs);
    for (std::size_t i = 0; i < dof.size(); ++i)
        if (dof[i] >= 0 && coeff[i] == Complex(1.0, 0.0))
            out[dof[i]] = nodal[static_cast<Eigen::Index>(i)];
    return out;
}

double HermitianPencil::hermitian_defect() const
{
    const eig::SparseMatrix dk = K - eig::SparseMatrix(K.adjoint());
    const eig::SparseMatrix dm = M - eig::SparseMatrix(M.adjoint());
    double worst = 0.0;
    for (const auto* A : {&dk, &dm})
        for (int c = 0; c < A->outerSize(); ++c)
            for (eig::SparseMatrix::InnerIterator it(*A, c); it; ++it)
                worst = std::max(worst, std::abs(it.value()));
    return worst;
}

PencilAssembler::PencilAssembler(DofMap map) : map_(std::move(map)) {}

void PencilAssembler::add(std::span<const int> nodes, std::span<const double> kloc,
                          std::span<const double> mloc)
{
    const std::size_t n = nodes.size();
    for (std::size_t a = 0; a < n; ++a) {
        const int da = map_.dof[nodes[a]];
        if (da < 0)
            continue;
        const Complex ca = std::conj(map_.coeff[nodes[a]]);
        for (std::size_t b = 0; b < n; ++b) {
            const int db = map_.dof[nodes[b]];
            if (db < 0)
                continue;
            const Complex c = ca * map_.coeff[nodes[b]];
            k_.emplace_back(da, db, c * kloc[a * n + b]);
            m_.emplace_back(da, db, c * mloc[a * n + b]);
        }
    }
}

HermitianPencil PencilAssembler::finish(double theta)
{
    HermitianPencil p;
    p.K.resize(map_.n_dofs, map_.n_dofs);
    p.M.resize(map_.n_dofs, map_.n_dofs);
    p.K.setFromTriplets(k_.begin(), k_.end());
    p.M.setFromTriplets(m_.begin(), m_.end());
    // Entrywise (A + A^H)/2 is exactly Hermitian in floating point, whatever
    // order the duplicate entries were summed in.
    p.K = 0.5 * (p.K + eig::SparseMatrix(p.K.adjoint()));
    p.M = 0.5 * (p.M + eig::SparseMatrix(p.M.adjoint()));
    p.K.makeCompressed();
    p.M.makeCompressed();
    p.dof_map = std::move(map_);
    p.theta = theta;
    k_.clear();
    m_.clear();
    return p;
}

} // namespace ladder
