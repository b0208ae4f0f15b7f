#pragma once

#include "dynscreen/distribution.hpp"
#include "dynscreen/sweep.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace dynscreen {

/// Event definition: S >= gamma (default) or S > gamma.
enum class Exceedance { at_least, above };

[[nodiscard]] inline bool exceeds(double s, double gamma, Exceedance rule) noexcept {
    return rule == Exceedance::at_least ? s >= gamma : s > gamma;
}

[[nodiscard]] std::string_view to_string(Exceedance rule) noexcept;
[[nodiscard]] Exceedance exceedance_from_string(std::string_view text);

/// Which score an estimate refers to: the global S or one monitored element
/// (by position in the monitored list).
struct Target {
    bool global = true;
    std::size_t position = 0;

    [[nodiscard]] static Target overall() { return {}; }
    [[nodiscard]] static Target element(std::size_t position) { return {false, position}; }
};

struct CeIteration {
    int iteration = 0;
    double level = 0.0;  // gamma_t
    std::size_t elites = 0;
    double change = 0.0;  // parameter_change(nu_t, nu_{t-1})
    ScenarioDistribution proposal;
};

struct EstimatorResult {
    std::string method;  // "MC" or "CE-IS"
    double gamma = 0.0;
    double estimate = 0.0;
    double standard_error = 0.0;
    double ess = 0.0;
    std::size_t samples = 0;      // N of the final estimate
    std::size_t evaluations = 0;  // trajectories including CE iterations
    std::size_t failed = 0;
    bool converged = true;
    ScenarioDistribution proposal;
    std::vector<CeIteration> trace;
    std::vector<std::string> warnings;
};

/// Likelihood ratios nominal / proposal for every draw in the pool; exactly
/// one when the two laws are identical.
[[nodiscard]] std::vector<double> pool_weights(const ScenarioPool& pool, const ScenarioDistribution& nominal,
                                               const ScenarioDistribution& proposal);

/// Weighted indicator estimator (1/N) sum w_i 1[S_i exceeds gamma] with
/// standard error from the sample variance (denominator N) and
/// ESS = (sum w)^2 / sum w^2. With unit weights the standard error reduces
/// to sqrt(Q(1-Q)/N).
[[nodiscard]] EstimatorResult estimate_from_pool(const ScenarioPool& pool, std::span<const double> weights,
                                                 double gamma, Target target,
                                                 Exceedance rule = Exceedance::at_least);

[[nodiscard]] EstimatorResult monte_carlo_estimate(const ScenarioScorer& scorer,
                                                   const ScenarioDistribution& nominal, double gamma,
                                                   std::size_t samples, Target target, const SweepOptions& sweep,
                                                   Exceedance rule = Exceedance::at_least);

[[nodiscard]] EstimatorResult importance_estimate(const ScenarioScorer& scorer,
                                                  const ScenarioDistribution& proposal,
                                                  const ScenarioDistribution& nominal, double gamma,
                                                  std::size_t samples, Target target, const SweepOptions& sweep,
                                                  Exceedance rule = Exceedance::at_least);

/// Score of sample i for a target.
[[nodiscard]] double target_score(const ScenarioPool& pool, std::size_t i, Target target);

}  // namespace dynscreen
