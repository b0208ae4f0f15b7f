#include "dynscreen/distribution.hpp"

#include "dynscreen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dynscreen {

ScenarioDistribution ScenarioDistribution::nominal(std::size_t branches, double rate, double no_fault) {
    if (branches == 0) throw ContractError("distribution needs at least one branch");
    ScenarioDistribution d;
    d.weights.assign(branches, (1.0 - no_fault) / static_cast<double>(branches));
    d.rates.assign(branches, rate);
    d.no_fault = no_fault;
    d.validate();
    return d;
}

ScenarioDistribution ScenarioDistribution::one_hot(std::size_t branches, std::size_t branch, double rate) {
    if (branch >= branches) throw ContractError("branch index out of range");
    ScenarioDistribution d;
    d.weights.assign(branches, 0.0);
    d.weights[branch] = 1.0;
    d.rates.assign(branches, rate);
    return d;
}

void ScenarioDistribution::validate() const {
    if (weights.empty()) throw ContractError("distribution has no branches");
    if (rates.size() != weights.size()) throw ContractError("one rate per branch is required");
    if (!(no_fault >= 0.0 && no_fault <= 1.0)) throw ContractError("no-fault mass must lie in [0, 1]");
    double total = no_fault;
    for (std::size_t a = 0; a < weights.size(); ++a) {
        if (!(weights[a] >= 0.0) || !std::isfinite(weights[a]))
            throw ContractError("branch weight " + std::to_string(a) + " must be >= 0");
        if (!(rates[a] > 0.0) || !std::isfinite(rates[a]))
            throw ContractError("duration rate " + std::to_string(a) + " must be positive");
        total += weights[a];
    }
    if (std::abs(total - 1.0) > 1e-9) throw ContractError("weights must sum to one");
}

ScenarioDraw sample_scenario(const ScenarioDistribution& dist, Rng& rng) {
    const double u = uniform01(rng);
    const double v = uniform01(rng);
    ScenarioDraw draw;
    double cumulative = 0.0;
    std::size_t last = dist.weights.size();
    for (std::size_t a = 0; a < dist.weights.size(); ++a) {
        if (dist.weights[a] <= 0.0) continue;
        last = a;
        cumulative += dist.weights[a];
        if (u < cumulative) {
            draw.branch = a;
            break;
        }
    }
    if (!draw.branch) {
        // u landed in the no-fault atom, or rounding left it just past the
        // last positive weight.
        if (dist.no_fault > 0.0 && u >= 1.0 - dist.no_fault) return draw;
        if (last == dist.weights.size()) return draw;
        draw.branch = last;
    }
    draw.duration = -std::log1p(-v) / dist.rates[*draw.branch];
    return draw;
}

double log_scenario_density(const ScenarioDistribution& dist, const ScenarioDraw& draw) {
    if (!draw.branch) {
        if (dist.no_fault <= 0.0) throw ContractError("no-fault draw has zero density");
        return std::log(dist.no_fault);
    }
    const std::size_t a = *draw.branch;
    if (a >= dist.weights.size()) throw ContractError("draw references an unknown branch");
    if (dist.weights[a] <= 0.0) throw ContractError("draw on branch " + std::to_string(a) + " has zero density");
    if (draw.duration < 0.0) throw ContractError("negative fault duration");
    return std::log(dist.weights[a]) + std::log(dist.rates[a]) - dist.rates[a] * draw.duration;
}

double scenario_density(const ScenarioDistribution& dist, const ScenarioDraw& draw) {
    return std::exp(log_scenario_density(dist, draw));
}

double likelihood_ratio(const ScenarioDistribution& nominal, const ScenarioDistribution& proposal,
                        const ScenarioDraw& draw) {
    const double lp = draw.branch && nominal.weights[*draw.branch] <= 0.0
                          ? -HUGE_VAL
                          : (!draw.branch && nominal.no_fault <= 0.0 ? -HUGE_VAL
                                                                      : log_scenario_density(nominal, draw));
    if (lp == -HUGE_VAL) return 0.0;
    return std::exp(lp - log_scenario_density(proposal, draw));
}

double parameter_change(const ScenarioDistribution& a, const ScenarioDistribution& b) {
    if (a.weights.size() != b.weights.size()) throw ContractError("distributions differ in size");
    double change = std::abs(a.no_fault - b.no_fault);
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
        change = std::max(change, std::abs(a.weights[i] - b.weights[i]));
        change = std::max(change, std::abs(a.rates[i] - b.rates[i]) / b.rates[i]);
    }
    return change;
}

}  // namespace dynscreen
