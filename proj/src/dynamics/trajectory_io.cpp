#include "dynscreen/trajectory_io.hpp"

#include "dynscreen/errors.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace dynscreen {

namespace {

constexpr std::array<char, 8> kMagic{'D', 'Y', 'N', 'T', 'R', 'J', '0', '1'};

static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError("truncated trajectory dump");
    return v;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    const auto n = static_cast<Eigen::Index>(traj.n);
    out << "t";
    for (Eigen::Index i = 1; i <= n; ++i) out << ",theta_" << i;
    for (Eigen::Index i = 1; i <= n; ++i) out << ",theta_dot_" << i;
    out << '\n' << std::setprecision(17);
    for (Eigen::Index k = 0; k < traj.states.cols(); ++k) {
        out << traj.times[k];
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << traj.states(n + i, k);
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << traj.states(i, k);
        out << '\n';
    }
}

void write_trajectory_binary(std::ostream& out, const Trajectory& traj) {
    const auto n = static_cast<Eigen::Index>(traj.n);
    const Eigen::Index rows = traj.states.cols();
    out.write(kMagic.data(), kMagic.size());
    put_u64(out, static_cast<std::uint64_t>(n));
    put_u64(out, static_cast<std::uint64_t>(rows));
    const auto bytes = static_cast<std::streamsize>(sizeof(double));
    out.write(reinterpret_cast<const char*>(traj.times.data()), bytes * rows);
    Vector column(rows);
    for (Eigen::Index i = 0; i < 2 * n; ++i) {
        // angles first, then frequencies
        const Eigen::Index r = i < n ? n + i : i - n;
        column = traj.states.row(r).transpose();
        out.write(reinterpret_cast<const char*>(column.data()), bytes * rows);
    }
}

Trajectory read_trajectory_binary(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw ParseError("not a trajectory dump");
    const auto n = static_cast<Eigen::Index>(get_u64(in));
    const auto rows = static_cast<Eigen::Index>(get_u64(in));
    Trajectory traj;
    traj.n = static_cast<std::size_t>(n);
    traj.times.resize(rows);
    traj.states.resize(2 * n, rows);
    const auto bytes = static_cast<std::streamsize>(sizeof(double));
    in.read(reinterpret_cast<char*>(traj.times.data()), bytes * rows);
    Vector column(rows);
    for (Eigen::Index i = 0; i < 2 * n; ++i) {
        in.read(reinterpret_cast<char*>(column.data()), bytes * rows);
        const Eigen::Index r = i < n ? n + i : i - n;
        traj.states.row(r) = column.transpose();
    }
    if (!in) throw ParseError("truncated trajectory dump");
    traj.grid.steps = rows > 0 ? rows - 1 : 0;
    traj.grid.dt = rows > 1 ? traj.times[1] - traj.times[0] : 0.0;
    return traj;
}

void save_trajectory(const std::string& path, const Trajectory& traj) {
    const bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    if (binary) {
        write_trajectory_binary(out, traj);
    } else {
        write_trajectory_csv(out, traj);
    }
    if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace dynscreen
