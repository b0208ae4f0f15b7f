#pragma once

#include "dynscreen/propagator.hpp"

#include <iosfwd>
#include <string>

namespace dynscreen {

/// Columns: t, theta_1..theta_n, theta_dot_1..theta_dot_n.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

/// Columnar little-endian dump: 8-byte magic "DYNTRJ01", uint64 n, uint64 row
/// count, then each column of the CSV layout as contiguous float64.
void write_trajectory_binary(std::ostream& out, const Trajectory& traj);

/// Reads the binary dump back as (times, states) with dt inferred from the
/// time column.
[[nodiscard]] Trajectory read_trajectory_binary(std::istream& in);

void save_trajectory(const std::string& path, const Trajectory& traj);

}  // namespace dynscreen
