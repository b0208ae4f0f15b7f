#pragma once

#include "dynscreen/overload.hpp"
#include "dynscreen/propagator.hpp"
#include "dynscreen/sweep.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace dynscreen {

struct EngineOptions {
    double horizon = 20.0;  // T [s]
    double dt = 0.01;
    bool stochastic = true;
    double noise_scale = 1.0;  // sigma_ij = noise_scale * beta_ij
    StepBackend backend = StepBackend::modal;
    /// When non-empty (sorted, starting at 0), tau is snapped down to the
    /// largest level not above it, which makes the duration law discrete.
    std::vector<double> duration_levels;

    void validate() const;
};

/// Scores fault scenarios on one grid: propagates from the pre-fault
/// equilibrium and counts overload seconds on the monitored branches. The
/// per-branch fault-on propagators are built on first use and shared.
class DynamicsEngine final : public ScenarioScorer {
public:
    DynamicsEngine(Grid grid, EngineOptions options);

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] const EngineOptions& options() const noexcept { return options_; }
    [[nodiscard]] const Vector& initial_state() const noexcept { return x0_; }
    [[nodiscard]] std::size_t target_count() const override { return kernel_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& monitored() const noexcept { return kernel_.branches(); }

    double score(const ScenarioDraw& draw, Rng& rng, std::span<double> per_target) const override;

    /// Scores with an explicit noise strength instead of the configured one.
    double score_with_noise(const ScenarioDraw& draw, double sigma, Rng& rng, std::span<double> per_target) const;

    /// Full trajectory for a draw, consuming the same noise draws as score().
    [[nodiscard]] Trajectory simulate(const ScenarioDraw& draw, Rng& rng,
                                      std::optional<double> sigma = std::nullopt) const;

    /// tau after snapping to duration levels and clamping to the horizon.
    [[nodiscard]] double effective_duration(double tau) const;
    [[nodiscard]] double noise_strength(std::size_t branch) const;

    /// Builds the propagators for `branches` (all when empty) in parallel.
    void warm(std::span<const std::size_t> branches = {}, int workers = 0) const;
    [[nodiscard]] const PiecewisePropagator& propagator(std::optional<std::size_t> branch) const;

private:
    void run(const ScenarioDraw& draw, double sigma, Rng& rng, Eigen::Ref<Matrix> out, Eigen::Index& fault_steps) const;

    Grid grid_;
    EngineOptions options_;
    OverloadKernel kernel_;
    TimeGrid base_grid_;
    Vector x0_;
    std::shared_ptr<const LinearSegment> nominal_;
    std::shared_ptr<const PiecewisePropagator> idle_;
    mutable std::vector<std::shared_ptr<const PiecewisePropagator>> cache_;
    std::unique_ptr<std::once_flag[]> once_;
};

}  // namespace dynscreen
