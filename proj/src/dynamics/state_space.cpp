#include "dynscreen/state_space.hpp"

#include "dynscreen/errors.hpp"

namespace dynscreen {

Matrix swing_drift(const Vector& inertia, const Vector& damping, const Matrix& laplacian) {
    const Eigen::Index n = inertia.size();
    Matrix a = Matrix::Zero(2 * n, 2 * n);
    const Vector inv_m = inertia.cwiseInverse();
    a.topLeftCorner(n, n).diagonal() = -inv_m.cwiseProduct(damping);
    a.topRightCorner(n, n) = -(inv_m.asDiagonal() * laplacian);
    a.bottomLeftCorner(n, n).setIdentity();
    return a;
}

Vector rest_state(const Vector& angles) {
    Vector x = Vector::Zero(2 * angles.size());
    x.tail(angles.size()) = angles;
    return x;
}

StateSpace assemble_state_space(const Grid& grid, const FaultScenario& scenario) {
    if (scenario.faulted_branch && *scenario.faulted_branch >= grid.branch_count())
        throw ContractError("faulted branch " + std::to_string(*scenario.faulted_branch) +
                            " does not exist");
    if (!(scenario.noise_strength >= 0.0)) throw ContractError("noise strength must be >= 0");

    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    const Vector m = grid.inertias();
    const Vector d = grid.dampings();
    const Vector p = grid.injections();

    StateSpace ss;
    ss.n = grid.bus_count();
    ss.faulted_branch = scenario.faulted_branch;
    ss.noise_strength = scenario.faulted_branch ? scenario.noise_strength : 0.0;

    const Laplacian nominal = build_laplacian(grid, nominal_scale(grid));
    ss.drift = swing_drift(m, d, nominal.matrix);
    ss.forcing = Vector::Zero(2 * n);
    ss.forcing.head(n) = p.cwiseQuotient(m);
    ss.nominal_equilibrium =
        rest_state(equilibrium_angles(nominal, p, grid.reference_index()));

    ss.noise_input = Vector::Zero(2 * n);
    ss.noise_probe = Vector::Zero(2 * n);
    if (scenario.faulted_branch) {
        const std::size_t k = *scenario.faulted_branch;
        const Laplacian faulted =
            build_laplacian(grid, fault_scale(grid, k, kFaultSusceptanceFactor));
        ss.drift_correction = swing_drift(m, d, faulted.matrix) - ss.drift;
        ss.fault_equilibrium =
            rest_state(equilibrium_angles(faulted, p, grid.reference_index()));

        const auto i = static_cast<Eigen::Index>(grid.from_index(k));
        const auto j = static_cast<Eigen::Index>(grid.to_index(k));
        ss.noise_input[i] = ss.noise_strength / m[i];
        ss.noise_input[j] = -ss.noise_strength / m[j];
        ss.noise_probe[n + i] = 1.0;
        ss.noise_probe[n + j] = -1.0;
    } else {
        ss.drift_correction = Matrix::Zero(2 * n, 2 * n);
        ss.fault_equilibrium = ss.nominal_equilibrium;
    }
    ss.noise = ss.noise_input * ss.noise_probe.transpose();
    return ss;
}

}  // namespace dynscreen
