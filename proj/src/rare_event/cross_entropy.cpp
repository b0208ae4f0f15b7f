#include "dynscreen/cross_entropy.hpp"

#include "dynscreen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dynscreen {

void CeOptions::validate() const {
    if (!(rho > 0.0 && rho <= 1.0)) throw ContractError("rho must lie in (0, 1]");
    if (!(mixing > 0.0 && mixing <= 1.0)) throw ContractError("mixing must lie in (0, 1]");
    if (!(tolerance > 0.0)) throw ContractError("tolerance must be positive");
    if (max_iterations < 1) throw ContractError("max_iterations must be >= 1");
    if (samples == 0) throw ContractError("samples per iteration must be >= 1");
    if (settle_iterations < 0) throw ContractError("settle_iterations must be >= 0");
}

double CeOptions::smoothing_for(std::size_t branches) const {
    return smoothing >= 0.0 ? smoothing : 1e-3 / static_cast<double>(std::max<std::size_t>(branches, 1));
}

std::size_t CeOptions::floor_for(std::size_t n) const {
    const std::size_t f = elite_floor > 0 ? elite_floor
                                          : std::max<std::size_t>(10, static_cast<std::size_t>(std::ceil(rho * n / 2.0)));
    return std::min(f, n);
}

CeUpdate ce_update(std::span<const ScenarioDraw> draws, std::span<const double> scores, std::span<const double> ratios,
                   double gamma, const ScenarioDistribution& previous, const CeOptions& options) {
    options.validate();
    const std::size_t n = draws.size();
    if (n == 0) throw ContractError("ce_update needs at least one sample");
    if (scores.size() != n || ratios.size() != n) throw ContractError("draws, scores and ratios must align");

    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t top = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(options.rho * n)));
    const std::size_t floor = options.floor_for(n);

    std::size_t hits = 0;
    for (double s : scores) hits += exceeds(s, gamma, options.rule);

    CeUpdate out;
    std::vector<char> elite(n, 0);
    if (hits >= top) {
        out.reached = true;
        out.level = gamma;
        for (std::size_t i = 0; i < n; ++i) elite[i] = exceeds(scores[i], gamma, options.rule);
    } else {
        const std::size_t q_index = std::min(n - 1, static_cast<std::size_t>(std::floor((1.0 - options.rho) * n)));
        double level = std::min(sorted[q_index], gamma);
        std::size_t count = static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), level));
        bool strict = false;
        if (count > top) {
            // Ties at the level inflate the elite set; prefer the strictly
            // larger scores when there are enough of them.
            const auto above = static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), level));
            if (above >= floor) {
                strict = true;
                count = above;
            }
        }
        if (count < floor) {
            level = sorted[n - floor];
            strict = false;
        }
        out.level = level;
        for (std::size_t i = 0; i < n; ++i) elite[i] = strict ? scores[i] > level : scores[i] >= level;
    }

    const std::size_t m = previous.branch_count();
    std::vector<double> mass(m, 0.0), mass_tau(m, 0.0);
    double no_fault_mass = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!elite[i]) continue;
        ++out.elites;
        const double w = ratios[i];
        if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("likelihood ratio must be finite and >= 0");
        total += w;
        if (!draws[i].branch) {
            no_fault_mass += w;
            continue;
        }
        const std::size_t a = *draws[i].branch;
        if (a >= m) throw ContractError("draw references an unknown branch");
        mass[a] += w;
        mass_tau[a] += w * draws[i].duration;
    }
    if (out.elites == 0 || !(total > 0.0)) throw DegenerateEliteError("no elite samples with positive weight");

    const double eps = options.smoothing_for(m);
    const bool has_atom = previous.no_fault > 0.0;
    const double denom = 1.0 + eps * static_cast<double>(m + (has_atom ? 1 : 0));
    ScenarioDistribution fit = previous;
    for (std::size_t a = 0; a < m; ++a) {
        fit.weights[a] = (mass[a] / total + eps) / denom;
        if (mass[a] > 0.0 && mass_tau[a] > 0.0) fit.rates[a] = mass[a] / mass_tau[a];
    }
    fit.no_fault = has_atom ? (no_fault_mass / total + eps) / denom : 0.0;

    const double eta = options.mixing;
    out.proposal = previous;
    for (std::size_t a = 0; a < m; ++a) {
        out.proposal.weights[a] = eta * fit.weights[a] + (1.0 - eta) * previous.weights[a];
        out.proposal.rates[a] = eta * fit.rates[a] + (1.0 - eta) * previous.rates[a];
    }
    out.proposal.no_fault = eta * fit.no_fault + (1.0 - eta) * previous.no_fault;
    // Renormalise away rounding drift.
    const double sum = std::accumulate(out.proposal.weights.begin(), out.proposal.weights.end(), out.proposal.no_fault);
    for (double& w : out.proposal.weights) w /= sum;
    out.proposal.no_fault /= sum;
    return out;
}

CeOutcome ce_optimize(const ScenarioScorer& scorer, const ScenarioDistribution& nominal, double gamma,
                      const CeOptions& options, const SweepOptions& sweep) {
    options.validate();
    nominal.validate();
    CeOutcome out;
    out.proposal = nominal;
    SweepOptions opts = sweep;
    opts.keep_targets = false;
    int at_level = 0;
    for (int t = 1; t <= options.max_iterations; ++t) {
        opts.stream = static_cast<std::uint64_t>(t);
        const ScenarioPool pool = evaluate_pool(scorer, out.proposal, options.samples, opts);
        out.evaluations += pool.size();
        const std::vector<double> ratios = pool_weights(pool, nominal, out.proposal);
        CeUpdate up = ce_update(pool.draws, pool.totals, ratios, gamma, out.proposal, options);
        if (options.cap_rates)
            for (std::size_t a = 0; a < up.proposal.rates.size(); ++a)
                up.proposal.rates[a] = std::min(up.proposal.rates[a], nominal.rates[a]);
        const double change = parameter_change(up.proposal, out.proposal);
        out.trace.push_back({t, up.level, up.elites, change, up.proposal});
        out.proposal = std::move(up.proposal);
        at_level = up.reached ? at_level + 1 : 0;
        out.reached_level = up.reached;
        if (at_level > options.settle_iterations || (up.reached && up.elites == pool.size())) {
            out.converged = true;
            break;
        }
        if (change < options.tolerance) {
            out.converged = true;
            break;
        }
    }
    return out;
}

EstimatorResult cross_entropy_estimate(const ScenarioScorer& scorer, const ScenarioDistribution& nominal, double gamma,
                                       const CeOptions& options, std::size_t final_samples, Target target,
                                       const SweepOptions& sweep) {
    CeOutcome ce = ce_optimize(scorer, nominal, gamma, options, sweep);
    SweepOptions opts = sweep;
    opts.stream = 0;
    EstimatorResult r = importance_estimate(scorer, ce.proposal, nominal, gamma, final_samples, target, opts, options.rule);
    r.evaluations += ce.evaluations;
    r.converged = ce.converged;
    r.trace = std::move(ce.trace);
    if (!ce.converged) r.warnings.push_back("cross-entropy did not converge within the iteration budget");
    return r;
}

}  // namespace dynscreen
