#pragma once

#include "dynscreen/estimator.hpp"

#include <optional>

namespace dynscreen {

struct CeOptions {
    double rho = 0.1;
    double smoothing = -1.0;  // epsilon; negative selects 1e-3 / |E|
    double mixing = 0.7;      // eta
    double tolerance = 1e-3;
    int max_iterations = 20;
    std::size_t samples = 1000;  // per iteration
    std::size_t elite_floor = 0;  // 0 selects max(10, rho N / 2)
    Exceedance rule = Exceedance::at_least;
    /// ce_optimize clamps refitted rates at the nominal rate, so proposals
    /// only lengthen faults and duration weights stay bounded by lambda_p/lambda_q.
    bool cap_rates = true;
    /// Refits at the target level after it is first reached, before stopping.
    /// An iteration in which every sample hits the event stops immediately.
    int settle_iterations = 1;

    void validate() const;
    [[nodiscard]] double smoothing_for(std::size_t branches) const;
    [[nodiscard]] std::size_t floor_for(std::size_t samples) const;
};

struct CeUpdate {
    ScenarioDistribution proposal;
    double level = 0.0;
    std::size_t elites = 0;
    bool reached = false;  // the elite set is exactly the target event
};

/// One cross-entropy step. The level is the (1-rho)-quantile of `scores`,
/// capped at `gamma`; elites (S >= level, or the target event once the cap
/// is hit) are weighted by `ratios` and refit in closed form:
///   phi_a ~ sum_{elite on a} w + eps,  lambda_a = sum w / sum w tau,
/// then mixed as eta * new + (1 - eta) * previous. Branches without elites
/// keep their previous rate.
[[nodiscard]] CeUpdate ce_update(std::span<const ScenarioDraw> draws, std::span<const double> scores,
                                 std::span<const double> ratios, double gamma,
                                 const ScenarioDistribution& previous, const CeOptions& options);

struct CeOutcome {
    ScenarioDistribution proposal;
    std::vector<CeIteration> trace;
    bool converged = false;
    bool reached_level = false;
    std::size_t evaluations = 0;
};

/// Iterates sample -> score -> update until the level gamma has been reached
/// on settle_iterations + 1 consecutive iterations or the parameters move
/// less than the tolerance. Iteration t draws from RNG
/// stream t (t >= 1).
[[nodiscard]] CeOutcome ce_optimize(const ScenarioScorer& scorer, const ScenarioDistribution& nominal,
                                    double gamma, const CeOptions& options, const SweepOptions& sweep);

/// ce_optimize followed by a final importance-sampling run of
/// `final_samples` draws on stream 0.
[[nodiscard]] EstimatorResult cross_entropy_estimate(const ScenarioScorer& scorer,
                                                     const ScenarioDistribution& nominal, double gamma,
                                                     const CeOptions& options, std::size_t final_samples,
                                                     Target target, const SweepOptions& sweep);

}  // namespace dynscreen
