#include "dynscreen/errors.hpp"
#include "dynscreen/grid.hpp"

#include <cmath>

namespace dynscreen {

std::vector<double> nominal_scale(const Grid& grid) {
    return std::vector<double>(grid.branch_count(), 1.0);
}

std::vector<double> fault_scale(const Grid& grid, std::size_t branch, double factor) {
    if (branch >= grid.branch_count())
        throw ContractError("faulted branch " + std::to_string(branch) + " does not exist");
    auto scale = nominal_scale(grid);
    scale[branch] = factor;
    return scale;
}

Laplacian build_laplacian(const Grid& grid, std::span<const double> scale) {
    if (scale.size() != grid.branch_count())
        throw ContractError("scale map size does not match branch count");
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    Laplacian lap;
    lap.matrix = Matrix::Zero(n, n);
    lap.endpoints.reserve(grid.branch_count());
    lap.weights.reserve(grid.branch_count());
    for (std::size_t k = 0; k < grid.branch_count(); ++k) {
        if (!(scale[k] > 0.0) || scale[k] > 1.0)
            throw ContractError("branch scale must lie in (0, 1]");
        const auto i = static_cast<Eigen::Index>(grid.from_index(k));
        const auto j = static_cast<Eigen::Index>(grid.to_index(k));
        const double w = scale[k] * grid.branches()[k].susceptance;
        lap.matrix(i, i) += w;
        lap.matrix(j, j) += w;
        lap.matrix(i, j) -= w;
        lap.matrix(j, i) -= w;
        lap.endpoints.emplace_back(grid.from_index(k), grid.to_index(k));
        lap.weights.push_back(w);
    }
    return lap;
}

Vector equilibrium_angles(const Laplacian& laplacian, const Vector& injections,
                          std::size_t reference_index) {
    const Eigen::Index n = laplacian.matrix.rows();
    if (injections.size() != n) throw ContractError("injection vector size mismatch");
    if (static_cast<Eigen::Index>(reference_index) >= n)
        throw ContractError("reference index out of range");

    const double scale = std::max(injections.cwiseAbs().maxCoeff(), 1.0);
    const double imbalance = injections.sum();
    if (std::abs(imbalance) > 1e-9 * scale)
        throw BalanceError("injections are unbalanced: sum = " + std::to_string(imbalance));

    Vector theta = Vector::Zero(n);
    if (n == 1) return theta;

    // Eliminate the reference row/column; the reduced Laplacian of a
    // connected graph is symmetric positive definite.
    const auto r = static_cast<Eigen::Index>(reference_index);
    Matrix reduced(n - 1, n - 1);
    Vector rhs(n - 1);
    for (Eigen::Index a = 0, ra = 0; a < n; ++a) {
        if (a == r) continue;
        rhs[ra] = injections[a];
        for (Eigen::Index b = 0, rb = 0; b < n; ++b) {
            if (b == r) continue;
            reduced(ra, rb) = laplacian.matrix(a, b);
            ++rb;
        }
        ++ra;
    }
    Eigen::LLT<Matrix> llt(reduced);
    if (llt.info() != Eigen::Success) throw TopologyError("reduced Laplacian is singular");
    Vector solution = llt.solve(rhs);
    for (Eigen::Index a = 0, ra = 0; a < n; ++a) {
        if (a == r) continue;
        theta[a] = solution[ra++];
    }
    return theta;
}

Vector equilibrium_angles(const Grid& grid) {
    return equilibrium_angles(build_laplacian(grid, nominal_scale(grid)), grid.injections(),
                              grid.reference_index());
}

Vector branch_flows(const Grid& grid, const Vector& angles) {
    Vector flows(static_cast<Eigen::Index>(grid.branch_count()));
    for (std::size_t k = 0; k < grid.branch_count(); ++k) {
        flows[static_cast<Eigen::Index>(k)] =
            grid.branches()[k].susceptance *
            (angles[static_cast<Eigen::Index>(grid.from_index(k))] -
             angles[static_cast<Eigen::Index>(grid.to_index(k))]);
    }
    return flows;
}

}  // namespace dynscreen
