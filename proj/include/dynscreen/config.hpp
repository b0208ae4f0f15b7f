#pragma once

#include "dynscreen/case_io.hpp"
#include "dynscreen/cross_entropy.hpp"
#include "dynscreen/engine.hpp"
#include "dynscreen/overload.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace dynscreen {

enum class Sampler { cross_entropy, monte_carlo };

[[nodiscard]] std::string_view to_string(Sampler s) noexcept;
[[nodiscard]] Sampler sampler_from_string(std::string_view text);

struct ScreeningConfig {
    std::string grid_path;
    CaseOptions case_options;  // monitored selector lives here
    EngineOptions engine;
    double rate = 0.1;      // nominal lambda [1/s]
    double no_fault = 0.0;  // nominal mass of the no-fault atom
    std::vector<double> gammas{0.0, 0.5, 5.0, 10.0};
    SafetyPolicy policy;
    Sampler sampler = Sampler::cross_entropy;
    CeOptions ce;
    std::size_t samples = 10000;  // N of the final estimate
    std::uint64_t seed = 1;
    int workers = 0;
    std::size_t top_k = 100;
    double curve_bin = 0.1;       // tau bin width [s]
    double curve_max_tau = 5.0;   // curves cover [0, curve_max_tau)
    std::string output_json;
    std::string output_csv;       // prefix; see emit_report_csv

    /// Throws ContractError on any violated invariant (N >= 1, gammas sorted,
    /// positive rates and widths, ...).
    void validate() const;
};

/// Missing keys keep their defaults; unknown keys are rejected.
[[nodiscard]] ScreeningConfig config_from_json(const nlohmann::json& doc, ScreeningConfig base = {});
[[nodiscard]] ScreeningConfig load_config(const std::string& path);

/// `runtime` adds worker count and output paths, which do not affect results.
[[nodiscard]] nlohmann::json config_to_json(const ScreeningConfig& config, bool runtime = true);

[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept;
[[nodiscard]] std::string hex64(std::uint64_t v);

/// Hash of the result-relevant configuration and the grid contents.
[[nodiscard]] std::string config_hash(const ScreeningConfig& config, const Grid& grid);

}  // namespace dynscreen
