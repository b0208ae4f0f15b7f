#pragma once

#include "dynscreen/config.hpp"
#include "dynscreen/engine.hpp"
#include "dynscreen/report.hpp"

#include <functional>
#include <memory>

namespace dynscreen {

struct ScreeningRun {
    RiskReport report;
    Timings timings;
};

/// Progress hook: phase name and completed fraction of that phase.
using ProgressFn = std::function<void(std::string_view, double)>;

/// Full sweep: cross-entropy fit of the proposal on P[S >= T*] (unless the
/// sampler is plain Monte Carlo), one final pool of N scenarios, then every
/// estimate, zone, ranking and curve from that pool with importance weights.
[[nodiscard]] ScreeningRun run_screening(const ScreeningConfig& config, const Grid& grid,
                                         const ProgressFn& progress = {});
/// Same, reusing an engine (and its propagator cache).
[[nodiscard]] ScreeningRun run_screening(const ScreeningConfig& config, const DynamicsEngine& engine,
                                         const ProgressFn& progress = {});
/// Loads the grid named by the config first.
[[nodiscard]] ScreeningRun run_screening(const ScreeningConfig& config, const ProgressFn& progress = {});

[[nodiscard]] Grid load_config_grid(const ScreeningConfig& config);
[[nodiscard]] EngineOptions engine_options(const ScreeningConfig& config);

/// Faulted branches by weighted frequency of causing S_m >= T* on any
/// monitored element, then weighted overload seconds, then index.
/// `weights` are the importance weights of the pool; every branch appears.
[[nodiscard]] std::vector<FaultedRank> rank_faulted_lines(const ScenarioPool& pool, std::span<const double> weights,
                                                          std::size_t branch_count, double t_star,
                                                          Exceedance rule = Exceedance::at_least);

/// Monitored elements by how often they reach S_m >= T* among the top-K
/// scenarios by S (ties: lower sample index first), then by `probability`
/// (per monitored position), then branch index.
[[nodiscard]] std::vector<VulnerableRank> rank_vulnerable_elements(
    const ScenarioPool& pool, std::span<const std::size_t> monitored, std::span<const double> probability,
    const std::vector<bool>& transformer, std::size_t top_k, double t_star, Exceedance rule = Exceedance::at_least);

/// Indices of the top-K samples by S.
[[nodiscard]] std::vector<std::size_t> top_scenarios(const ScenarioPool& pool, std::size_t top_k);

}  // namespace dynscreen
