#pragma once

#include "dynscreen/grid.hpp"
#include "dynscreen/propagator.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace dynscreen {

/// Mean susceptance schedule: beta on every branch except the faulted one,
/// which carries factor * beta on steps k < fault_steps.
struct SusceptanceSchedule {
    std::optional<std::size_t> faulted_branch;
    Eigen::Index fault_steps = 0;
    double factor = kFaultSusceptanceFactor;

    [[nodiscard]] double scale(std::size_t branch, Eigen::Index step) const noexcept {
        return faulted_branch && *faulted_branch == branch && step < fault_steps ? factor : 1.0;
    }
};

[[nodiscard]] SusceptanceSchedule schedule_for(const Trajectory& traj);

/// Seconds with |beta(t) (theta_i - theta_j)| > pbar, left-endpoint rule
/// over steps 0..K-1.
[[nodiscard]] double line_overload(const Trajectory& traj, const Grid& grid, std::size_t branch,
                                   const SusceptanceSchedule& schedule);
[[nodiscard]] double line_overload(const Trajectory& traj, const Grid& grid, std::size_t branch);

[[nodiscard]] double global_overload(const Trajectory& traj, const Grid& grid,
                                     std::span<const std::size_t> monitored);

struct OverloadResult {
    std::vector<std::size_t> branches;  // monitored set, in order
    std::vector<double> seconds;        // S_ij per monitored branch
    std::vector<double> max_ratio;      // max_t |flow| / pbar per monitored branch
    double total = 0.0;                 // S
    FaultScenario scenario;
};

[[nodiscard]] OverloadResult evaluate_overloads(const Trajectory& traj, const Grid& grid,
                                                std::span<const std::size_t> monitored);

/// Flattened monitored-branch data for scoring angle blocks directly.
class OverloadKernel {
public:
    OverloadKernel(const Grid& grid, std::vector<std::size_t> monitored);

    [[nodiscard]] std::size_t size() const noexcept { return branches_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& branches() const noexcept { return branches_; }

    /// `angles` is n x K with column k holding theta(t_k). Writes the number
    /// of overloaded steps and the peak flow ratio per monitored branch.
    void count(const Eigen::Ref<const Matrix>& angles, const SusceptanceSchedule& schedule,
               std::span<int> steps, std::span<double> max_ratio) const;

private:
    std::vector<std::size_t> branches_;
    std::vector<Eigen::Index> from_;
    std::vector<Eigen::Index> to_;
    std::vector<double> beta_;
    std::vector<double> limit_;
};

struct Violation {
    std::size_t branch = 0;
    double ratio = 0.0;  // |flow| / pbar
};

struct Membership {
    bool member = true;
    std::vector<Violation> violators;
};

/// Safety-polytope test |beta_ij scale_ij (theta_i - theta_j)| <= pbar_ij over
/// all branches; `scale` empty means nominal susceptances.
[[nodiscard]] Membership polytope_membership(const Vector& angles, const Grid& grid,
                                             std::span<const double> scale = {});

enum class RiskZone { safe, warning, emergency };

[[nodiscard]] std::string_view to_string(RiskZone zone) noexcept;
[[nodiscard]] RiskZone risk_zone_from_string(std::string_view text);

/// Zones: q < warning_lower is safe, q > emergency_above is emergency, the
/// closed interval between is warning.
struct SafetyPolicy {
    double t_star = 1.0;
    double warning_lower = 0.025;
    double emergency_above = 0.04;

    void validate() const;
    friend bool operator==(const SafetyPolicy&, const SafetyPolicy&) = default;
};

[[nodiscard]] RiskZone risk_classify(double q, const SafetyPolicy& policy = {});

}  // namespace dynscreen
