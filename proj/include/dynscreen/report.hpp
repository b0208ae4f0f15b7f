#pragma once

#include "dynscreen/estimator.hpp"
#include "dynscreen/overload.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dynscreen {

inline constexpr int kReportSchemaVersion = 1;

struct MarginalRisk {
    std::size_t branch = 0;
    double probability = 0.0;  // P[S_m >= T*]
    double standard_error = 0.0;
    double mean_overload = 0.0;  // E[S_m]
    RiskZone zone = RiskZone::safe;

    friend bool operator==(const MarginalRisk&, const MarginalRisk&) = default;
};

struct GlobalRisk {
    double gamma = 0.0;
    double probability = 0.0;  // P[S >= gamma]
    double standard_error = 0.0;
    double ess = 0.0;

    friend bool operator==(const GlobalRisk&, const GlobalRisk&) = default;
};

struct FaultedRank {
    std::size_t branch = 0;
    double probability = 0.0;    // P[alpha = branch and some S_m >= T*]
    double mean_overload = 0.0;  // E[S 1[alpha = branch]]

    friend bool operator==(const FaultedRank&, const FaultedRank&) = default;
};

struct VulnerableRank {
    std::size_t branch = 0;
    std::size_t recurrences = 0;  // among the top-K scenarios
    double probability = 0.0;
    bool transformer = false;

    friend bool operator==(const VulnerableRank&, const VulnerableRank&) = default;
};

struct ScenarioRecord {
    std::size_t sample = 0;
    std::optional<std::size_t> branch;
    double duration = 0.0;
    double overload = 0.0;  // S
    double weight = 1.0;

    friend bool operator==(const ScenarioRecord&, const ScenarioRecord&) = default;
};

/// Importance-weighted conditional statistics per tau bin. Rows follow
/// `branches` (the monitored set), columns the bins.
struct RiskCurves {
    double bin_width = 0.1;
    double max_tau = 0.0;
    std::vector<std::size_t> branches;
    std::vector<std::size_t> samples;     // per bin
    std::vector<double> mass;             // per bin, (1/N) sum w
    std::vector<double> probability;      // row-major, P[S_m >= T* | tau in bin]
    std::vector<double> mean_overload;    // row-major, E[S_m | tau in bin]

    [[nodiscard]] std::size_t bins() const noexcept { return samples.size(); }
    friend bool operator==(const RiskCurves&, const RiskCurves&) = default;
};

struct CeStep {
    int iteration = 0;
    double level = 0.0;
    std::size_t elites = 0;
    double change = 0.0;

    friend bool operator==(const CeStep&, const CeStep&) = default;
};

struct CeSummary {
    bool used = false;
    bool converged = false;
    bool reached = false;
    std::size_t evaluations = 0;
    std::vector<CeStep> iterations;
    ScenarioDistribution proposal;

    friend bool operator==(const CeSummary&, const CeSummary&) = default;
};

struct RiskReport {
    int schema_version = kReportSchemaVersion;

    // Run metadata.
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string model;  // "stochastic" or "deterministic"
    double noise_scale = 0.0;
    double horizon = 0.0;
    double dt = 0.0;
    double rate = 0.0;
    std::string sampler;
    std::string backend;
    Exceedance rule = Exceedance::at_least;
    std::size_t buses = 0;
    std::size_t branches = 0;
    std::vector<std::size_t> monitored;
    std::vector<bool> transformer;  // per monitored position
    SafetyPolicy policy;

    std::size_t samples = 0;
    std::size_t evaluations = 0;
    std::vector<ScenarioFailure> failures;
    bool degraded = false;
    std::vector<std::string> warnings;
    double ess = 0.0;

    /// Row-major branches x monitored: P[alpha = a and S_m >= T*].
    std::vector<double> joint;
    std::vector<MarginalRisk> marginal;
    std::vector<GlobalRisk> global;
    std::vector<FaultedRank> faulted_ranking;
    std::vector<VulnerableRank> vulnerability_ranking;
    std::vector<ScenarioRecord> top_scenarios;
    /// Monitored branches with S_m > 0 in at least one sample.
    std::size_t positive_overload_branches = 0;
    RiskCurves curves;
    CeSummary ce;

    [[nodiscard]] double joint_at(std::size_t faulted, std::size_t position) const {
        return joint.at(faulted * monitored.size() + position);
    }
    [[nodiscard]] std::vector<std::size_t> zone_members(RiskZone zone) const;

    friend bool operator==(const RiskReport&, const RiskReport&) = default;
};

/// Wall-clock phases; kept out of the report so reports compare byte-wise.
struct Timings {
    double cache_seconds = 0.0;
    double ce_seconds = 0.0;
    double sweep_seconds = 0.0;
    double total_seconds = 0.0;
};

[[nodiscard]] nlohmann::json report_to_json(const RiskReport& report);
[[nodiscard]] RiskReport report_from_json(const nlohmann::json& doc);
[[nodiscard]] std::string emit_report_json(const RiskReport& report);
[[nodiscard]] RiskReport parse_report_json(std::string_view text);
[[nodiscard]] RiskReport load_report(const std::string& path);

/// Curve data for one monitored branch, as served by the API.
[[nodiscard]] nlohmann::json curves_to_json(const RiskReport& report, std::size_t branch);

/// CSV flattening. `<prefix>_matrix.csv` holds the nonzero joint entries in
/// long form, `<prefix>_marginal.csv` per-branch probability and zone,
/// `<prefix>_faulted.csv` and `<prefix>_vulnerable.csv` the rankings.
struct CsvTables {
    std::string matrix;
    std::string marginal;
    std::string faulted;
    std::string vulnerable;
};
[[nodiscard]] CsvTables report_to_csv(const RiskReport& report);

/// Writes the JSON file and/or CSV tables. Throws Error when a path cannot be
/// written; an existing file is replaced atomically.
void write_report_json(const RiskReport& report, const std::string& path,
                       const std::optional<Timings>& timings = std::nullopt);
void write_report_csv(const RiskReport& report, const std::string& prefix);

}  // namespace dynscreen
