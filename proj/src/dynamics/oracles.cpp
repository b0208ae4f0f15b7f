#include "dynscreen/oracles.hpp"

#include "dynscreen/errors.hpp"

#include <boost/numeric/odeint.hpp>

#include <string>
#include <vector>

namespace dynscreen {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::vector<double>;
using Stepper = odeint::runge_kutta_fehlberg78<State>;

Eigen::Map<const Vector> view(const State& s, std::size_t offset, Eigen::Index size) {
    return {s.data() + offset, size};
}

Eigen::Map<Vector> view(State& s, std::size_t offset, Eigen::Index size) { return {s.data() + offset, size}; }

}  // namespace

Trajectory propagate_euler_maruyama(const StateSpace& ss, const Vector& x0, const NoisePath& path, double tau,
                                    double horizon) {
    const TimeGrid grid = make_time_grid(tau, horizon, path.dt);
    if (static_cast<Eigen::Index>(path.increments.size()) != grid.fault_steps)
        throw ContractError("noise path length does not match the fault-on steps");
    const auto n2 = static_cast<Eigen::Index>(2 * ss.n);
    if (x0.size() != n2) throw ContractError("initial state has wrong length");

    const SparseMatrix fault = ss.fault_drift().sparseView();
    const SparseMatrix nominal = ss.drift.sparseView();
    const SparseMatrix noise = ss.noise.sparseView();

    Trajectory traj;
    traj.grid = grid;
    traj.n = ss.n;
    traj.times.resize(grid.steps + 1);
    traj.states.resize(n2, grid.steps + 1);
    traj.scenario = {ss.faulted_branch, tau, ss.noise_strength, horizon};

    Vector x = x0;
    Vector drift(n2);
    const double dt = grid.dt;
    for (Eigen::Index k = 0; k <= grid.steps; ++k) {
        traj.times[k] = static_cast<double>(k) * dt;
        traj.states.col(k) = x;
        if (k == grid.steps) break;
        if (k < grid.fault_steps) {
            drift.noalias() = fault * x;
            drift += ss.forcing;
            const Vector kick = noise * x;
            x += drift * dt + kick * path.increments[static_cast<std::size_t>(k)];
        } else {
            drift.noalias() = nominal * x;
            drift += ss.forcing;
            x += drift * dt;
        }
    }
    return traj;
}

Moments moment_ode_oracle(const StateSpace& ss, const Vector& x0, double tau, double tolerance) {
    const auto n2 = static_cast<Eigen::Index>(2 * ss.n);
    if (x0.size() != n2) throw ContractError("initial state has wrong length");
    if (!(tau >= 0.0)) throw ContractError("tau must be >= 0");
    const Matrix a = ss.fault_drift();
    const Matrix& g = ss.noise;
    const auto nn = static_cast<std::size_t>(n2);

    State s(nn + nn * nn, 0.0);
    view(s, 0, n2) = x0;

    auto rhs = [&](const State& y, State& dy, double) {
        const auto m = view(y, 0, n2);
        const Eigen::Map<const Matrix> c(y.data() + nn, n2, n2);
        view(dy, 0, n2) = a * m + ss.forcing;
        Eigen::Map<Matrix> dc(dy.data() + nn, n2, n2);
        const Matrix second = c + m * m.transpose();
        dc = a * c + c * a.transpose() + g * second * g.transpose();
    };
    if (tau > 0.0) {
        odeint::integrate_adaptive(odeint::make_controlled<Stepper>(tolerance, tolerance), rhs, s, 0.0, tau,
                                   std::min(1e-3, tau));
    }
    Moments out;
    out.mean = view(s, 0, n2);
    out.covariance = Eigen::Map<const Matrix>(s.data() + nn, n2, n2);
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
}

Trajectory reference_trajectory(const StateSpace& ss, const Vector& x0, double tau, double horizon, double dt,
                                double tolerance) {
    const TimeGrid grid = make_time_grid(tau, horizon, dt);
    const auto n2 = static_cast<Eigen::Index>(2 * ss.n);
    if (x0.size() != n2) throw ContractError("initial state has wrong length");

    Trajectory traj;
    traj.grid = grid;
    traj.n = ss.n;
    traj.times.resize(grid.steps + 1);
    traj.states.resize(n2, grid.steps + 1);
    traj.scenario = {ss.faulted_branch, tau, 0.0, horizon};
    for (Eigen::Index k = 0; k <= grid.steps; ++k) traj.times[k] = static_cast<double>(k) * dt;

    State s(static_cast<std::size_t>(n2));
    view(s, 0, n2) = x0;

    auto integrate_piece = [&](const SparseMatrix& a, Eigen::Index k0, Eigen::Index k1) {
        auto rhs = [&](const State& y, State& dy, double) {
            view(dy, 0, n2) = a * view(y, 0, n2) + ss.forcing;
        };
        std::vector<double> times;
        for (Eigen::Index k = k0; k <= k1; ++k) times.push_back(static_cast<double>(k) * dt);
        Eigen::Index k = k0;
        auto observer = [&](const State& y, double) {
            traj.states.col(k) = view(y, 0, n2);
            ++k;
        };
        odeint::integrate_times(odeint::make_controlled<Stepper>(tolerance, tolerance), rhs, s, times.begin(),
                                times.end(), std::min(dt, 1e-3), observer);
    };

    const SparseMatrix fault = ss.fault_drift().sparseView();
    const SparseMatrix nominal = ss.drift.sparseView();
    if (grid.fault_steps > 0) integrate_piece(fault, 0, grid.fault_steps);
    integrate_piece(nominal, grid.fault_steps, grid.steps);
    return traj;
}

}  // namespace dynscreen
