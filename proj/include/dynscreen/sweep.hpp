#pragma once

#include "dynscreen/distribution.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dynscreen {

/// Maps one sampled scenario to overload seconds per monitored element.
/// Implementations must be safe to call concurrently and may draw further
/// randomness (noise paths) from `rng` after the scenario draws.
class ScenarioScorer {
public:
    virtual ~ScenarioScorer() = default;
    [[nodiscard]] virtual std::size_t target_count() const = 0;
    /// Fills `per_target` (size target_count()) and returns their sum.
    virtual double score(const ScenarioDraw& draw, Rng& rng, std::span<double> per_target) const = 0;
};

struct ScenarioFailure {
    std::size_t index = 0;
    std::string reason;

    friend bool operator==(const ScenarioFailure&, const ScenarioFailure&) = default;
};

/// Scenarios and scores, indexed by sample number.
struct ScenarioPool {
    std::size_t targets = 0;
    std::vector<ScenarioDraw> draws;
    std::vector<double> totals;         // global S
    std::vector<double> per_target;     // row-major size() x targets, empty if not kept
    std::vector<ScenarioFailure> failures;

    [[nodiscard]] std::size_t size() const noexcept { return draws.size(); }
    [[nodiscard]] bool has_targets() const noexcept { return !per_target.empty() || targets == 0; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return {per_target.data() + i * targets, targets};
    }
    [[nodiscard]] double failure_rate() const noexcept {
        return draws.empty() ? 0.0 : static_cast<double>(failures.size()) / static_cast<double>(draws.size());
    }
};

struct SweepOptions {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    bool keep_targets = true;
    int workers = 0;  // 0: OpenMP default
};

/// Sample i uses the RNG stream derive_seed(seed, stream, i), so the pool is
/// identical for any worker count. Failed scenarios score zero and are
/// listed in `failures`.
[[nodiscard]] ScenarioPool evaluate_pool(const ScenarioScorer& scorer, const ScenarioDistribution& dist,
                                         std::size_t samples, const SweepOptions& options);

/// Single-threaded reference for evaluate_pool.
[[nodiscard]] ScenarioPool evaluate_pool_serial(const ScenarioScorer& scorer, const ScenarioDistribution& dist,
                                                std::size_t samples, const SweepOptions& options);

}  // namespace dynscreen
