#pragma once

#include "dynscreen/rng.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace dynscreen {

/// Sampling law q(alpha, tau) = phi_alpha * lambda_alpha exp(-lambda_alpha tau),
/// plus an optional atom for "no fault".
struct ScenarioDistribution {
    std::vector<double> weights;  // phi_alpha
    std::vector<double> rates;    // lambda_alpha [1/s]
    double no_fault = 0.0;

    [[nodiscard]] std::size_t branch_count() const noexcept { return weights.size(); }

    /// Uniform branch weights sharing 1 - no_fault, common rate.
    [[nodiscard]] static ScenarioDistribution nominal(std::size_t branches, double rate = 0.1,
                                                      double no_fault = 0.0);
    /// All mass on one branch.
    [[nodiscard]] static ScenarioDistribution one_hot(std::size_t branches, std::size_t branch,
                                                      double rate = 0.1);

    /// Throws ContractError unless weights >= 0 sum to one with the no-fault
    /// atom (within 1e-9) and every rate is positive and finite.
    void validate() const;

    friend bool operator==(const ScenarioDistribution&, const ScenarioDistribution&) = default;
};

struct ScenarioDraw {
    std::optional<std::size_t> branch;  // empty: no fault
    double duration = 0.0;              // exact sampled tau [s]

    friend bool operator==(const ScenarioDraw&, const ScenarioDraw&) = default;
};

/// Draws alpha by inversion of the cumulative weights, then tau by
/// inversion of the exponential law; consumes exactly two uniforms.
[[nodiscard]] ScenarioDraw sample_scenario(const ScenarioDistribution& dist, Rng& rng);

/// q(alpha, tau); for the no-fault atom returns its mass. Throws
/// ContractError when the draw has zero support.
[[nodiscard]] double scenario_density(const ScenarioDistribution& dist, const ScenarioDraw& draw);
[[nodiscard]] double log_scenario_density(const ScenarioDistribution& dist, const ScenarioDraw& draw);

/// p(draw) / q(draw), computed in log space.
[[nodiscard]] double likelihood_ratio(const ScenarioDistribution& nominal,
                                      const ScenarioDistribution& proposal, const ScenarioDraw& draw);

/// Sup-norm distance used for the cross-entropy stopping rule: the largest
/// absolute weight change or relative rate change.
[[nodiscard]] double parameter_change(const ScenarioDistribution& a, const ScenarioDistribution& b);

}  // namespace dynscreen
