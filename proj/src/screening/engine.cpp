#include "dynscreen/engine.hpp"

#include "dynscreen/errors.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

namespace dynscreen {

void EngineOptions::validate() const {
    (void)make_time_grid(0.0, horizon, dt);
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw ContractError("noise scale must be >= 0");
    if (!duration_levels.empty()) {
        if (duration_levels.front() != 0.0) throw ContractError("duration levels must start at 0");
        for (std::size_t i = 1; i < duration_levels.size(); ++i)
            if (!(duration_levels[i] > duration_levels[i - 1]))
                throw ContractError("duration levels must be strictly increasing");
    }
}

DynamicsEngine::DynamicsEngine(Grid grid, EngineOptions options)
    : grid_(std::move(grid)),
      options_(std::move(options)),
      kernel_(grid_, grid_.monitored()),
      cache_(grid_.branch_count()),
      once_(std::make_unique<std::once_flag[]>(grid_.branch_count())) {
    options_.validate();
    base_grid_ = make_time_grid(0.0, options_.horizon, options_.dt);
    const StateSpace nominal = assemble_state_space(grid_, FaultScenario{});
    x0_ = nominal.nominal_equilibrium;
    nominal_ = make_segment(options_.backend, nominal.drift, x0_, options_.dt);
    idle_ = std::make_shared<PiecewisePropagator>(nominal_, nominal_);
}

double DynamicsEngine::effective_duration(double tau) const {
    if (!(tau >= 0.0)) throw ContractError("fault duration must be >= 0");
    if (!options_.duration_levels.empty()) {
        const auto& lv = options_.duration_levels;
        tau = *(std::upper_bound(lv.begin(), lv.end(), tau) - 1);
    }
    return std::min(tau, options_.horizon);
}

double DynamicsEngine::noise_strength(std::size_t branch) const {
    if (!options_.stochastic) return 0.0;
    return options_.noise_scale * grid_.branches().at(branch).susceptance;
}

const PiecewisePropagator& DynamicsEngine::propagator(std::optional<std::size_t> branch) const {
    if (!branch) return *idle_;
    const std::size_t b = *branch;
    if (b >= grid_.branch_count()) throw ContractError("faulted branch " + std::to_string(b) + " does not exist");
    std::call_once(once_[b], [&] {
        // Noise enters with unit scale (sigma = beta); the actual strength
        // rescales the Wiener increments.
        FaultScenario sc;
        sc.faulted_branch = b;
        sc.noise_strength = grid_.branches()[b].susceptance;
        sc.horizon = options_.horizon;
        const StateSpace ss = assemble_state_space(grid_, sc);
        auto fault = make_segment(options_.backend, ss.fault_drift(), ss.fault_equilibrium, options_.dt,
                                  ss.noise_input, ss.noise_probe);
        cache_[b] = std::make_shared<PiecewisePropagator>(std::move(fault), nominal_);
    });
    return *cache_[b];
}

void DynamicsEngine::warm(std::span<const std::size_t> branches, int workers) const {
    std::vector<std::size_t> list(branches.begin(), branches.end());
    if (list.empty()) list = all_branches(grid_.branch_count());
    const int threads = workers > 0 ? workers : omp_get_max_threads();
    const auto count = static_cast<long long>(list.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long i = 0; i < count; ++i) (void)propagator(list[static_cast<std::size_t>(i)]);
}

void DynamicsEngine::run(const ScenarioDraw& draw, double sigma, Rng& rng, Eigen::Ref<Matrix> out,
                         Eigen::Index& fault_steps) const {
    TimeGrid g = base_grid_;
    g.fault_steps = 0;
    thread_local std::vector<double> increments;
    increments.clear();
    if (draw.branch) {
        const double tau = effective_duration(draw.duration);
        g.fault_steps = std::min<Eigen::Index>(g.steps, static_cast<Eigen::Index>(std::llround(tau / g.dt)));
        const double beta = grid_.branches().at(*draw.branch).susceptance;
        if (sigma > 0.0 && g.fault_steps > 0) {
            std::normal_distribution<double> normal(0.0, std::sqrt(g.dt) * sigma / beta);
            increments.resize(static_cast<std::size_t>(g.fault_steps));
            for (double& w : increments) w = normal(rng);
        }
    }
    fault_steps = g.fault_steps;
    propagator(draw.branch).run(x0_, g, increments, out);
}

double DynamicsEngine::score_with_noise(const ScenarioDraw& draw, double sigma, Rng& rng,
                                        std::span<double> per_target) const {
    if (per_target.size() != kernel_.size()) throw ContractError("per-target span has wrong size");
    const auto n = static_cast<Eigen::Index>(grid_.bus_count());
    thread_local Matrix angles;
    thread_local std::vector<int> steps;
    thread_local std::vector<double> ratio;
    angles.resize(n, base_grid_.steps);
    steps.resize(kernel_.size());
    ratio.resize(kernel_.size());
    Eigen::Index fault_steps = 0;
    run(draw, sigma, rng, angles, fault_steps);
    SusceptanceSchedule schedule;
    schedule.faulted_branch = draw.branch;
    schedule.fault_steps = fault_steps;
    kernel_.count(angles, schedule, steps, ratio);
    double total = 0.0;
    for (std::size_t e = 0; e < kernel_.size(); ++e) {
        per_target[e] = steps[e] * base_grid_.dt;
        total += per_target[e];
    }
    return total;
}

double DynamicsEngine::score(const ScenarioDraw& draw, Rng& rng, std::span<double> per_target) const {
    const double sigma = draw.branch ? noise_strength(*draw.branch) : 0.0;
    return score_with_noise(draw, sigma, rng, per_target);
}

Trajectory DynamicsEngine::simulate(const ScenarioDraw& draw, Rng& rng, std::optional<double> sigma) const {
    const double s = sigma.value_or(draw.branch ? noise_strength(*draw.branch) : 0.0);
    Trajectory traj;
    traj.n = grid_.bus_count();
    traj.grid = base_grid_;
    traj.states.resize(static_cast<Eigen::Index>(2 * traj.n), base_grid_.steps + 1);
    Eigen::Index fault_steps = 0;
    run(draw, s, rng, traj.states, fault_steps);
    traj.grid.fault_steps = fault_steps;
    traj.times.resize(base_grid_.steps + 1);
    for (Eigen::Index k = 0; k <= base_grid_.steps; ++k) traj.times[k] = static_cast<double>(k) * base_grid_.dt;
    traj.scenario = {draw.branch, draw.duration, s, options_.horizon};
    return traj;
}

}  // namespace dynscreen
