#pragma once

#include <cstddef>
#include <optional>

namespace dynscreen {

/// One counterfactual contingency: a single-phase fault on `faulted_branch`
/// lasting `duration` seconds, with fault-localized susceptance noise of
/// strength `noise_strength`, observed over [0, horizon].
struct FaultScenario {
    std::optional<std::size_t> faulted_branch;  // empty: no fault
    double duration = 0.0;        // tau [s]
    double noise_strength = 0.0;  // sigma_ij [p.u.]
    double horizon = 20.0;        // T [s]

    friend bool operator==(const FaultScenario&, const FaultScenario&) = default;
};

/// Susceptance factor of the faulted line while the fault is on.
inline constexpr double kFaultSusceptanceFactor = 2.0 / 3.0;

}  // namespace dynscreen
