#pragma once

#include "dynscreen/grid.hpp"
#include "dynscreen/scenario.hpp"

#include <optional>

namespace dynscreen {

/// Compact first-order form of the swing dynamics for one scenario, with the
/// state stacked as x = (theta_dot; theta):
///
///   dx = ((A0 + 1[t <= tau] dA) x + P) dt + 1[t <= tau] G x dW
///
/// A = [[-M^-1 D, -M^-1 L], [I, 0]] and P = (M^-1 p; 0). G is the rank-one
/// product u v^T with u = (sigma M^-1 (e_i - e_j); 0) and v = (0; e_i - e_j),
/// so G * G = 0.
struct StateSpace {
    std::size_t n = 0;
    std::optional<std::size_t> faulted_branch;
    double noise_strength = 0.0;

    Matrix drift;             // A0, 2n x 2n
    Matrix drift_correction;  // dA, 2n x 2n
    Matrix noise;             // G, 2n x 2n
    Vector forcing;           // P, 2n

    Vector noise_input;  // u
    Vector noise_probe;  // v

    /// Fixed points of the nominal and fault-on drift, angles pinned to zero
    /// at the reference bus.
    Vector nominal_equilibrium;
    Vector fault_equilibrium;

    [[nodiscard]] Matrix fault_drift() const { return drift + drift_correction; }
};

/// Drift matrix for a given Laplacian.
[[nodiscard]] Matrix swing_drift(const Vector& inertia, const Vector& damping, const Matrix& laplacian);

[[nodiscard]] StateSpace assemble_state_space(const Grid& grid, const FaultScenario& scenario);

/// Stacks (0; theta).
[[nodiscard]] Vector rest_state(const Vector& angles);

}  // namespace dynscreen
