#pragma once

#include "dynscreen/propagator.hpp"

namespace dynscreen {

/// Explicit first-order stepping of the SDE:
/// x_{k+1} = x_k + (A x_k + P) dt + G x_k dW_k during the fault, noise-free after.
[[nodiscard]] Trajectory propagate_euler_maruyama(const StateSpace& ss, const Vector& x0,
                                                  const NoisePath& path, double tau, double horizon);

struct Moments {
    Vector mean;
    Matrix covariance;
};

/// Exact first and second moments of the fault-on SDE at time tau, from
///   m' = A m + P,  C' = A C + C A^T + G (C + m m^T) G^T
/// integrated with an adaptive 7(8) Runge-Kutta scheme.
[[nodiscard]] Moments moment_ode_oracle(const StateSpace& ss, const Vector& x0, double tau,
                                        double tolerance = 1e-12);

/// Noise-free trajectory from an adaptive 7(8) Runge-Kutta integrator, with
/// the fault cleared at the grid-snapped tau and sampled on the same grid as
/// the analytic propagators.
[[nodiscard]] Trajectory reference_trajectory(const StateSpace& ss, const Vector& x0, double tau,
                                              double horizon, double dt, double tolerance = 1e-12);

}  // namespace dynscreen
