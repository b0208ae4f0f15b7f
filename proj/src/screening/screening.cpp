#include "dynscreen/screening.hpp"

#include "dynscreen/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace dynscreen {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report_progress(const ProgressFn& fn, std::string_view phase, double fraction) {
    if (fn) fn(phase, fraction);
}

bool any_exceeds(std::span<const double> row, double t_star, Exceedance rule) {
    return std::any_of(row.begin(), row.end(), [&](double s) { return exceeds(s, t_star, rule); });
}

}  // namespace

std::vector<std::size_t> RiskReport::zone_members(RiskZone zone) const {
    std::vector<std::size_t> out;
    for (const auto& m : marginal)
        if (m.zone == zone) out.push_back(m.branch);
    std::sort(out.begin(), out.end());
    return out;
}

EngineOptions engine_options(const ScreeningConfig& config) { return config.engine; }

Grid load_config_grid(const ScreeningConfig& config) {
    if (config.grid_path.empty()) throw ContractError("config names no grid");
    return load_grid(config.grid_path, config.case_options);
}

std::vector<std::size_t> top_scenarios(const ScenarioPool& pool, std::size_t top_k) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t k = std::min(top_k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          return pool.totals[a] != pool.totals[b] ? pool.totals[a] > pool.totals[b] : a < b;
                      });
    idx.resize(k);
    return idx;
}

std::vector<FaultedRank> rank_faulted_lines(const ScenarioPool& pool, std::span<const double> weights,
                                            std::size_t branch_count, double t_star, Exceedance rule) {
    if (weights.size() != pool.size()) throw ContractError("one weight per sample is required");
    if (!pool.has_targets()) throw ContractError("faulted-line ranking needs per-target scores");
    std::vector<FaultedRank> out(branch_count);
    for (std::size_t a = 0; a < branch_count; ++a) out[a].branch = a;
    const auto n = static_cast<double>(std::max<std::size_t>(pool.size(), 1));
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& b = pool.draws[i].branch;
        if (!b) continue;
        if (*b >= branch_count) throw ContractError("draw references an unknown branch");
        FaultedRank& r = out[*b];
        r.mean_overload += weights[i] * pool.totals[i] / n;
        if (pool.targets > 0 && any_exceeds(pool.row(i), t_star, rule)) r.probability += weights[i] / n;
    }
    std::stable_sort(out.begin(), out.end(), [](const FaultedRank& x, const FaultedRank& y) {
        if (x.probability != y.probability) return x.probability > y.probability;
        if (x.mean_overload != y.mean_overload) return x.mean_overload > y.mean_overload;
        return x.branch < y.branch;
    });
    return out;
}

std::vector<VulnerableRank> rank_vulnerable_elements(const ScenarioPool& pool, std::span<const std::size_t> monitored,
                                                     std::span<const double> probability,
                                                     const std::vector<bool>& transformer, std::size_t top_k,
                                                     double t_star, Exceedance rule) {
    const std::size_t m = monitored.size();
    if (pool.targets != m) throw ContractError("pool targets do not match the monitored set");
    if (probability.size() != m || transformer.size() != m)
        throw ContractError("probability and transformer flags must follow the monitored set");
    std::vector<VulnerableRank> out(m);
    for (std::size_t e = 0; e < m; ++e) out[e] = {monitored[e], 0, probability[e], transformer[e]};
    if (m > 0) {
        if (!pool.has_targets()) throw ContractError("vulnerability ranking needs per-target scores");
        for (std::size_t i : top_scenarios(pool, top_k)) {
            const auto row = pool.row(i);
            for (std::size_t e = 0; e < m; ++e) out[e].recurrences += exceeds(row[e], t_star, rule);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const VulnerableRank& x, const VulnerableRank& y) {
        if (x.recurrences != y.recurrences) return x.recurrences > y.recurrences;
        if (x.probability != y.probability) return x.probability > y.probability;
        return x.branch < y.branch;
    });
    return out;
}

ScreeningRun run_screening(const ScreeningConfig& config, const DynamicsEngine& engine, const ProgressFn& progress) {
    config.validate();
    const auto t_start = Clock::now();
    const Grid& grid = engine.grid();
    const std::size_t branches = grid.branch_count();
    const std::vector<std::size_t>& monitored = engine.monitored();
    const std::size_t m = monitored.size();
    const double t_star = config.policy.t_star;
    const Exceedance rule = config.ce.rule;

    ScreeningRun run;
    RiskReport& rep = run.report;
    rep.seed = config.seed;
    rep.config_hash = config_hash(config, grid);
    rep.model = engine.options().stochastic ? "stochastic" : "deterministic";
    rep.noise_scale = engine.options().stochastic ? engine.options().noise_scale : 0.0;
    rep.horizon = engine.options().horizon;
    rep.dt = engine.options().dt;
    rep.rate = config.rate;
    rep.sampler = std::string(to_string(config.sampler));
    rep.backend = std::string(to_string(engine.options().backend));
    rep.rule = rule;
    rep.buses = grid.bus_count();
    rep.branches = branches;
    rep.monitored = monitored;
    rep.transformer.resize(m);
    for (std::size_t e = 0; e < m; ++e) rep.transformer[e] = grid.branches()[monitored[e]].is_transformer;
    rep.policy = config.policy;

    report_progress(progress, "cache", 0.0);
    auto t0 = Clock::now();
    engine.warm({}, config.workers);
    run.timings.cache_seconds = since(t0);
    report_progress(progress, "cache", 1.0);

    const ScenarioDistribution nominal = ScenarioDistribution::nominal(branches, config.rate, config.no_fault);
    SweepOptions sweep;
    sweep.seed = config.seed;
    sweep.workers = config.workers;

    ScenarioDistribution proposal = nominal;
    t0 = Clock::now();
    if (config.sampler == Sampler::cross_entropy) {
        report_progress(progress, "cross-entropy", 0.0);
        CeOutcome ce = ce_optimize(engine, nominal, t_star, config.ce, sweep);
        rep.ce.used = true;
        rep.ce.converged = ce.converged;
        rep.ce.reached = ce.reached_level;
        rep.ce.evaluations = ce.evaluations;
        for (const auto& it : ce.trace) rep.ce.iterations.push_back({it.iteration, it.level, it.elites, it.change});
        rep.ce.proposal = ce.proposal;
        proposal = std::move(ce.proposal);
        if (!ce.converged) rep.warnings.push_back("cross-entropy did not converge within the iteration budget");
        report_progress(progress, "cross-entropy", 1.0);
    } else {
        rep.ce.proposal = nominal;
    }
    run.timings.ce_seconds = since(t0);

    report_progress(progress, "sweep", 0.0);
    t0 = Clock::now();
    sweep.stream = 0;
    sweep.keep_targets = true;
    const ScenarioPool pool = evaluate_pool(engine, proposal, config.samples, sweep);
    run.timings.sweep_seconds = since(t0);
    report_progress(progress, "sweep", 1.0);

    const std::vector<double> w = pool_weights(pool, nominal, proposal);
    const std::size_t n = pool.size();
    const auto nn = static_cast<double>(n);
    rep.samples = n;
    rep.evaluations = n + rep.ce.evaluations;
    rep.failures = pool.failures;
    if (pool.failure_rate() > 0.01) {
        rep.degraded = true;
        rep.warnings.push_back("degraded: " + std::to_string(pool.failures.size()) + " of " + std::to_string(n) +
                               " scenarios failed");
    }
    {
        double s = 0.0, s2 = 0.0;
        for (double x : w) {
            s += x;
            s2 += x * x;
        }
        rep.ess = s2 > 0.0 ? s * s / s2 : 0.0;
    }

    for (double g : config.gammas) {
        const EstimatorResult r = estimate_from_pool(pool, w, g, Target::overall(), rule);
        rep.global.push_back({g, r.estimate, r.standard_error, r.ess});
        for (const auto& msg : r.warnings) rep.warnings.push_back("gamma " + std::to_string(g) + ": " + msg);
    }

    rep.marginal.resize(m);
    std::vector<double> marginal_q(m);
    std::vector<char> positive(m, 0);
    rep.joint.assign(branches * m, 0.0);
    for (std::size_t e = 0; e < m; ++e) {
        const EstimatorResult r = estimate_from_pool(pool, w, t_star, Target::element(e), rule);
        MarginalRisk& mr = rep.marginal[e];
        mr.branch = monitored[e];
        mr.probability = r.estimate;
        mr.standard_error = r.standard_error;
        mr.zone = risk_classify(r.estimate, config.policy);
        marginal_q[e] = r.estimate;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = pool.row(i);
        const auto& b = pool.draws[i].branch;
        for (std::size_t e = 0; e < m; ++e) {
            if (row[e] <= 0.0) continue;
            positive[e] = 1;
            rep.marginal[e].mean_overload += w[i] * row[e] / nn;
            if (b && exceeds(row[e], t_star, rule)) rep.joint[*b * m + e] += w[i] / nn;
        }
    }
    for (double& q : rep.joint) q = std::min(q, 1.0);
    rep.positive_overload_branches = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), 1));

    rep.faulted_ranking = rank_faulted_lines(pool, w, branches, t_star, rule);
    rep.vulnerability_ranking =
        rank_vulnerable_elements(pool, monitored, marginal_q, rep.transformer, config.top_k, t_star, rule);
    for (std::size_t i : top_scenarios(pool, config.top_k))
        rep.top_scenarios.push_back({i, pool.draws[i].branch, pool.draws[i].duration, pool.totals[i], w[i]});

    RiskCurves& cv = rep.curves;
    cv.bin_width = config.curve_bin;
    cv.max_tau = config.curve_max_tau;
    cv.branches = monitored;
    const auto bins = static_cast<std::size_t>(std::ceil(config.curve_max_tau / config.curve_bin - 1e-9));
    cv.samples.assign(bins, 0);
    cv.mass.assign(bins, 0.0);
    cv.probability.assign(m * bins, 0.0);
    cv.mean_overload.assign(m * bins, 0.0);
    std::vector<double> bin_w(bins, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!pool.draws[i].branch) continue;
        const double tau = pool.draws[i].duration;
        const auto b = static_cast<std::size_t>(std::floor(tau / config.curve_bin));
        if (tau >= config.curve_max_tau || b >= bins) continue;
        ++cv.samples[b];
        bin_w[b] += w[i];
        const auto row = pool.row(i);
        for (std::size_t e = 0; e < m; ++e) {
            if (row[e] <= 0.0) continue;
            cv.mean_overload[e * bins + b] += w[i] * row[e];
            if (exceeds(row[e], t_star, rule)) cv.probability[e * bins + b] += w[i];
        }
    }
    for (std::size_t b = 0; b < bins; ++b) {
        cv.mass[b] = bin_w[b] / nn;
        if (!(bin_w[b] > 0.0)) continue;
        for (std::size_t e = 0; e < m; ++e) {
            cv.probability[e * bins + b] = std::min(1.0, cv.probability[e * bins + b] / bin_w[b]);
            cv.mean_overload[e * bins + b] /= bin_w[b];
        }
    }

    run.timings.total_seconds = since(t_start);
    return run;
}

ScreeningRun run_screening(const ScreeningConfig& config, const Grid& grid, const ProgressFn& progress) {
    config.validate();
    const DynamicsEngine engine(grid, engine_options(config));
    return run_screening(config, engine, progress);
}

ScreeningRun run_screening(const ScreeningConfig& config, const ProgressFn& progress) {
    config.validate();
    return run_screening(config, load_config_grid(config), progress);
}

}  // namespace dynscreen
