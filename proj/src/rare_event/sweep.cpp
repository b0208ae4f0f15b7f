#include "dynscreen/sweep.hpp"

#include <omp.h>

#include <algorithm>
#include <exception>
#include <optional>

namespace dynscreen {

namespace {

ScenarioPool allocate(const ScenarioScorer& scorer, std::size_t samples, const SweepOptions& options) {
    ScenarioPool pool;
    pool.targets = scorer.target_count();
    pool.draws.resize(samples);
    pool.totals.assign(samples, 0.0);
    if (options.keep_targets) pool.per_target.assign(samples * pool.targets, 0.0);
    return pool;
}

// Evaluates sample i into its own slots; returns a failure reason if any.
std::optional<std::string> evaluate_one(const ScenarioScorer& scorer, const ScenarioDistribution& dist,
                                        const SweepOptions& options, std::size_t i, ScenarioPool& pool,
                                        std::vector<double>& scratch) {
    Rng rng = make_stream(options.seed, options.stream, i);
    pool.draws[i] = sample_scenario(dist, rng);
    std::span<double> out = options.keep_targets
                                ? std::span<double>(pool.per_target.data() + i * pool.targets, pool.targets)
                                : std::span<double>(scratch);
    try {
        pool.totals[i] = scorer.score(pool.draws[i], rng, out);
        return std::nullopt;
    } catch (const std::exception& e) {
        std::fill(out.begin(), out.end(), 0.0);
        pool.totals[i] = 0.0;
        return std::string(e.what());
    }
}

}  // namespace

ScenarioPool evaluate_pool(const ScenarioScorer& scorer, const ScenarioDistribution& dist, std::size_t samples,
                           const SweepOptions& options) {
    dist.validate();
    ScenarioPool pool = allocate(scorer, samples, options);
    std::vector<std::optional<std::string>> reasons(samples);
    const int workers = options.workers > 0 ? options.workers : omp_get_max_threads();
    const auto count = static_cast<long long>(samples);
#pragma omp parallel num_threads(workers)
    {
        std::vector<double> scratch(pool.targets);
#pragma omp for schedule(dynamic, 16)
        for (long long i = 0; i < count; ++i) {
            const auto k = static_cast<std::size_t>(i);
            reasons[k] = evaluate_one(scorer, dist, options, k, pool, scratch);
        }
    }
    for (std::size_t i = 0; i < samples; ++i)
        if (reasons[i]) pool.failures.push_back({i, std::move(*reasons[i])});
    return pool;
}

ScenarioPool evaluate_pool_serial(const ScenarioScorer& scorer, const ScenarioDistribution& dist,
                                  std::size_t samples, const SweepOptions& options) {
    dist.validate();
    ScenarioPool pool = allocate(scorer, samples, options);
    std::vector<double> scratch(pool.targets);
    for (std::size_t i = 0; i < samples; ++i)
        if (auto reason = evaluate_one(scorer, dist, options, i, pool, scratch))
            pool.failures.push_back({i, std::move(*reason)});
    return pool;
}

}  // namespace dynscreen
