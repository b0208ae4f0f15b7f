#include "dynscreen/estimator.hpp"

#include "dynscreen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dynscreen {

std::string_view to_string(Exceedance rule) noexcept { return rule == Exceedance::at_least ? "at_least" : "above"; }

Exceedance exceedance_from_string(std::string_view text) {
    if (text == "at_least" || text == ">=") return Exceedance::at_least;
    if (text == "above" || text == ">") return Exceedance::above;
    throw ParseError("unknown exceedance rule '" + std::string(text) + "'");
}

std::vector<double> pool_weights(const ScenarioPool& pool, const ScenarioDistribution& nominal,
                                 const ScenarioDistribution& proposal) {
    std::vector<double> w(pool.size(), 1.0);
    if (nominal == proposal) return w;
    for (std::size_t i = 0; i < pool.size(); ++i) w[i] = likelihood_ratio(nominal, proposal, pool.draws[i]);
    return w;
}

double target_score(const ScenarioPool& pool, std::size_t i, Target target) {
    if (target.global) return pool.totals[i];
    if (target.position >= pool.targets) throw ContractError("target position out of range");
    if (pool.per_target.empty()) throw ContractError("pool was evaluated without per-target scores");
    return pool.per_target[i * pool.targets + target.position];
}

EstimatorResult estimate_from_pool(const ScenarioPool& pool, std::span<const double> weights, double gamma,
                                   Target target, Exceedance rule) {
    if (weights.size() != pool.size()) throw ContractError("one weight per sample is required");
    const std::size_t n = pool.size();
    if (n == 0) throw ContractError("estimate needs at least one sample");
    EstimatorResult r;
    r.gamma = gamma;
    r.samples = n;
    r.evaluations = n;
    r.failed = pool.failures.size();

    bool unit = true;
    double sum = 0.0, sum_sq = 0.0, w_sum = 0.0, w_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights[i];
        unit = unit && w == 1.0;
        w_sum += w;
        w_sq += w * w;
        if (exceeds(target_score(pool, i, target), gamma, rule)) {
            sum += w;
            sum_sq += w * w;
        }
    }
    const auto nn = static_cast<double>(n);
    const double q = sum / nn;
    if (unit) {
        r.estimate = q;
        r.standard_error = std::sqrt(q * (1.0 - q) / nn);
        r.ess = nn;
        r.method = "MC";
    } else {
        const double variance = std::max(0.0, sum_sq / nn - q * q);
        r.estimate = q;
        r.standard_error = std::sqrt(variance / nn);
        r.ess = w_sq > 0.0 ? w_sum * w_sum / w_sq : 0.0;
        r.method = "IS";
        if (r.ess < 0.01 * nn)
            r.warnings.push_back("low effective sample size: " + std::to_string(r.ess) + " of " + std::to_string(n));
    }
    if (r.estimate > 1.0) {
        r.warnings.push_back("importance estimate " + std::to_string(r.estimate) + " (se " +
                             std::to_string(r.standard_error) + ") clipped to 1");
        r.estimate = 1.0;
        r.standard_error = 0.0;
    }
    return r;
}

EstimatorResult monte_carlo_estimate(const ScenarioScorer& scorer, const ScenarioDistribution& nominal, double gamma,
                                     std::size_t samples, Target target, const SweepOptions& sweep, Exceedance rule) {
    if (samples == 0) throw ContractError("Monte Carlo needs N >= 1");
    SweepOptions opts = sweep;
    opts.keep_targets = !target.global;
    const ScenarioPool pool = evaluate_pool(scorer, nominal, samples, opts);
    const std::vector<double> w(pool.size(), 1.0);
    EstimatorResult r = estimate_from_pool(pool, w, gamma, target, rule);
    r.method = "MC";
    r.proposal = nominal;
    return r;
}

EstimatorResult importance_estimate(const ScenarioScorer& scorer, const ScenarioDistribution& proposal,
                                    const ScenarioDistribution& nominal, double gamma, std::size_t samples,
                                    Target target, const SweepOptions& sweep, Exceedance rule) {
    if (samples == 0) throw ContractError("importance sampling needs N >= 1");
    SweepOptions opts = sweep;
    opts.keep_targets = !target.global;
    const ScenarioPool pool = evaluate_pool(scorer, proposal, samples, opts);
    EstimatorResult r = estimate_from_pool(pool, pool_weights(pool, nominal, proposal), gamma, target, rule);
    r.method = "CE-IS";
    r.proposal = proposal;
    return r;
}

}  // namespace dynscreen
