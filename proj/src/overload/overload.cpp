#include "dynscreen/overload.hpp"

#include "dynscreen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dynscreen {

SusceptanceSchedule schedule_for(const Trajectory& traj) {
    SusceptanceSchedule s;
    s.faulted_branch = traj.scenario.faulted_branch;
    s.fault_steps = traj.grid.fault_steps;
    return s;
}

double line_overload(const Trajectory& traj, const Grid& grid, std::size_t branch,
                     const SusceptanceSchedule& schedule) {
    if (branch >= grid.branch_count()) throw ContractError("branch index out of range");
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    if (traj.states.rows() != 2 * n) throw ContractError("trajectory does not match the grid");
    const auto i = static_cast<Eigen::Index>(grid.from_index(branch));
    const auto j = static_cast<Eigen::Index>(grid.to_index(branch));
    const Branch& b = grid.branches()[branch];
    const Eigen::Index steps = traj.states.cols() - 1;
    long count = 0;
    for (Eigen::Index k = 0; k < steps; ++k) {
        const double flow = b.susceptance * schedule.scale(branch, k) * (traj.states(n + i, k) - traj.states(n + j, k));
        if (std::abs(flow) > b.thermal_limit) ++count;
    }
    return static_cast<double>(count) * traj.grid.dt;
}

double line_overload(const Trajectory& traj, const Grid& grid, std::size_t branch) {
    return line_overload(traj, grid, branch, schedule_for(traj));
}

double global_overload(const Trajectory& traj, const Grid& grid, std::span<const std::size_t> monitored) {
    return evaluate_overloads(traj, grid, monitored).total;
}

OverloadResult evaluate_overloads(const Trajectory& traj, const Grid& grid, std::span<const std::size_t> monitored) {
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    if (traj.states.rows() != 2 * n) throw ContractError("trajectory does not match the grid");
    OverloadKernel kernel(grid, {monitored.begin(), monitored.end()});
    OverloadResult r;
    r.branches = kernel.branches();
    r.scenario = traj.scenario;
    std::vector<int> steps(kernel.size());
    r.max_ratio.assign(kernel.size(), 0.0);
    const Eigen::Index k = traj.states.cols() - 1;
    kernel.count(traj.states.bottomLeftCorner(n, k), schedule_for(traj), steps, r.max_ratio);
    r.seconds.resize(kernel.size());
    for (std::size_t e = 0; e < kernel.size(); ++e) {
        r.seconds[e] = steps[e] * traj.grid.dt;
        r.total += r.seconds[e];
    }
    return r;
}

OverloadKernel::OverloadKernel(const Grid& grid, std::vector<std::size_t> monitored)
    : branches_(std::move(monitored)) {
    for (std::size_t b : branches_) {
        if (b >= grid.branch_count()) throw ReferenceError("monitored branch " + std::to_string(b) + " does not exist");
        from_.push_back(static_cast<Eigen::Index>(grid.from_index(b)));
        to_.push_back(static_cast<Eigen::Index>(grid.to_index(b)));
        beta_.push_back(grid.branches()[b].susceptance);
        limit_.push_back(grid.branches()[b].thermal_limit);
    }
}

void OverloadKernel::count(const Eigen::Ref<const Matrix>& angles, const SusceptanceSchedule& schedule,
                           std::span<int> steps, std::span<double> max_ratio) const {
    const std::size_t m = branches_.size();
    if (steps.size() != m || max_ratio.size() != m) throw ContractError("output spans must match the monitored set");
    std::fill(steps.begin(), steps.end(), 0);
    std::vector<double> peak(m, 0.0);
    const Eigen::Index cols = angles.cols();
    const Eigen::Index fault_end = std::min(cols, schedule.faulted_branch ? schedule.fault_steps : 0);

    auto sweep = [&](Eigen::Index k0, Eigen::Index k1, const std::vector<double>& beta) {
        for (Eigen::Index k = k0; k < k1; ++k) {
            const double* theta = angles.col(k).data();
            for (std::size_t e = 0; e < m; ++e) {
                const double flow = std::abs(beta[e] * (theta[from_[e]] - theta[to_[e]]));
                steps[e] += flow > limit_[e];
                peak[e] = std::max(peak[e], flow);
            }
        }
    };
    if (fault_end > 0) {
        std::vector<double> faulted = beta_;
        for (std::size_t e = 0; e < m; ++e)
            if (branches_[e] == *schedule.faulted_branch) faulted[e] = beta_[e] * schedule.factor;
        sweep(0, fault_end, faulted);
    }
    sweep(fault_end, cols, beta_);
    for (std::size_t e = 0; e < m; ++e) max_ratio[e] = peak[e] / limit_[e];
}

Membership polytope_membership(const Vector& angles, const Grid& grid, std::span<const double> scale) {
    if (angles.size() != static_cast<Eigen::Index>(grid.bus_count()))
        throw ContractError("angle vector length must equal the bus count");
    if (!scale.empty() && scale.size() != grid.branch_count())
        throw ContractError("scale must have one entry per branch");
    Membership m;
    for (std::size_t b = 0; b < grid.branch_count(); ++b) {
        const Branch& br = grid.branches()[b];
        const double s = scale.empty() ? 1.0 : scale[b];
        const double flow = std::abs(br.susceptance * s *
                                     (angles[static_cast<Eigen::Index>(grid.from_index(b))] -
                                      angles[static_cast<Eigen::Index>(grid.to_index(b))]));
        if (flow > br.thermal_limit) m.violators.push_back({b, flow / br.thermal_limit});
    }
    m.member = m.violators.empty();
    return m;
}

std::string_view to_string(RiskZone zone) noexcept {
    switch (zone) {
        case RiskZone::safe: return "safe";
        case RiskZone::warning: return "warning";
        case RiskZone::emergency: return "emergency";
    }
    return "safe";
}

RiskZone risk_zone_from_string(std::string_view text) {
    if (text == "safe") return RiskZone::safe;
    if (text == "warning") return RiskZone::warning;
    if (text == "emergency") return RiskZone::emergency;
    throw ParseError("unknown risk zone '" + std::string(text) + "'");
}

void SafetyPolicy::validate() const {
    if (!(t_star > 0.0)) throw ContractError("T* must be positive");
    if (!(0.0 < warning_lower && warning_lower < emergency_above && emergency_above < 1.0))
        throw ContractError("risk zone bounds must satisfy 0 < warning_lower < emergency_above < 1");
}

RiskZone risk_classify(double q, const SafetyPolicy& policy) {
    if (!(q >= 0.0 && q <= 1.0)) throw ContractError("probability must lie in [0, 1]");
    if (q < policy.warning_lower) return RiskZone::safe;
    if (q <= policy.emergency_above) return RiskZone::warning;
    return RiskZone::emergency;
}

}  // namespace dynscreen
