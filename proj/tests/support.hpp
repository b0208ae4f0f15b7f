#pragma once

#include "dynscreen/case_io.hpp"
#include "dynscreen/distribution.hpp"
#include "dynscreen/engine.hpp"
#include "dynscreen/estimator.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace dynscreen::testing {

inline std::string data_path(const std::string& rel) { return std::string(DYNSCREEN_DATA_DIR) + "/" + rel; }

inline const Grid& ieee118() {
    static const Grid g = load_grid(data_path("case118.m"));
    return g;
}

inline Grid triangle() { return load_grid(data_path("fixtures/triangle3.json")); }

/// beta = 1 between bus 1 (+p) and bus 2 (-p), unit inertia and damping.
inline Grid two_bus(double p = 1.0, int reference = 2, double limit = 10.0) {
    return Grid({{1, 1.0, 1.0, p, BusKind::generator}, {2, 1.0, 1.0, -p, BusKind::load}},
                {{1, 2, 1.0, limit, false}}, {0}, reference);
}

/// Discrete durations of the enumerable toy instance.
inline const std::vector<double> kToyLevels{0.0, 0.5, 1.0, 2.0, 4.0};
inline constexpr double kToyRate = 0.5;

inline EngineOptions toy_options() {
    EngineOptions o;
    o.stochastic = false;
    o.duration_levels = kToyLevels;
    return o;
}

/// Nominal probability that the snapped duration equals level l.
inline double level_mass(const std::vector<double>& levels, std::size_t l, double rate) {
    const double lo = std::exp(-rate * levels[l]);
    const double hi = l + 1 < levels.size() ? std::exp(-rate * levels[l + 1]) : 0.0;
    return lo - hi;
}

/// Exact scores of every (branch, level) pair of a deterministic engine.
struct Enumeration {
    std::vector<std::vector<double>> total;                    // [branch][level]
    std::vector<std::vector<std::vector<double>>> per_target;  // [branch][level][position]
};

inline Enumeration enumerate(const DynamicsEngine& engine, const std::vector<double>& levels) {
    Enumeration e;
    const std::size_t nb = engine.grid().branch_count();
    e.total.assign(nb, std::vector<double>(levels.size()));
    e.per_target.assign(nb, std::vector<std::vector<double>>(levels.size()));
    for (std::size_t a = 0; a < nb; ++a)
        for (std::size_t l = 0; l < levels.size(); ++l) {
            Rng rng(0);
            std::vector<double> s(engine.target_count());
            e.total[a][l] = engine.score({a, levels[l]}, rng, s);
            e.per_target[a][l] = s;
        }
    return e;
}

/// P[alpha = branch (any when nullopt) and score >= gamma] under uniform
/// branch weights; `position` selects a monitored element, otherwise S.
inline double exact_probability(const Enumeration& e, const std::vector<double>& levels, double rate, double gamma,
                                Exceedance rule, std::optional<std::size_t> position = std::nullopt,
                                std::optional<std::size_t> branch = std::nullopt) {
    const std::size_t nb = e.total.size();
    double q = 0.0;
    for (std::size_t a = 0; a < nb; ++a) {
        if (branch && *branch != a) continue;
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const double s = position ? e.per_target[a][l][*position] : e.total[a][l];
            if (exceeds(s, gamma, rule)) q += level_mass(levels, l, rate) / static_cast<double>(nb);
        }
    }
    return q;
}

inline bool within_se(double estimate, double exact, double se, double k = 3.0) {
    return std::abs(estimate - exact) <= k * se + 1e-12;
}

}  // namespace dynscreen::testing
