#pragma once

#include "dynscreen/grid.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dynscreen {

/// Rules that turn a static power-flow case into a dynamic grid.
struct CaseOptions {
    /// Generator inertia and damping per unit of machine rating (p.u. on the
    /// system base). Rating is max(Pmax, Pg) summed over in-service units.
    double generator_inertia_per_rating = 10.0;
    double generator_damping_per_rating = 10.0;
    /// Buses without an active generator: m = factor * median generator m,
    /// d = factor * median generator d.
    double load_inertia_factor = 0.1;
    double load_damping_factor = 1.0;
    /// Margin-rule limit: pbar = max(margin * |base flow|, min_limit).
    double limit_margin = 1.2;
    double min_limit = 0.2;
    /// Case ratings at or above this value [MVA] are treated as "unrated".
    double unrated_sentinel_mva = 9900.0;
    /// Empty selects every branch.
    std::optional<std::vector<std::size_t>> monitored;
};

/// Parses the standard bus/gen/branch matrix case layout (`mpc.bus = [...]`).
/// Susceptance is 1/x under a flat voltage profile, injections are Pg - Pd
/// rebalanced to zero mean, out-of-service rows are dropped.
[[nodiscard]] Grid parse_matpower_case(std::string_view text, const CaseOptions& options = {});
[[nodiscard]] Grid load_matpower_case(const std::string& path, const CaseOptions& options = {});

inline constexpr int kGridFormatVersion = 1;

[[nodiscard]] Grid parse_grid_json(std::string_view text);
[[nodiscard]] Grid grid_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json grid_to_json(const Grid& grid);
[[nodiscard]] std::string emit_grid_json(const Grid& grid);

/// Dispatches on extension: `.json` is the native schema, anything else is
/// read as a matrix case file.
[[nodiscard]] Grid load_grid(const std::string& path, const CaseOptions& options = {});

}  // namespace dynscreen
