#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dynscreen {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class BusKind { generator, load, condenser };

[[nodiscard]] std::string_view to_string(BusKind kind) noexcept;
[[nodiscard]] BusKind bus_kind_from_string(std::string_view text);

struct Bus {
    int id = 0;
    double inertia = 0.0;    // m_i [p.u. s^2]
    double damping = 0.0;    // d_i [p.u. s]
    double injection = 0.0;  // p_i [p.u.]
    BusKind kind = BusKind::load;

    friend bool operator==(const Bus&, const Bus&) = default;
};

struct Branch {
    int from = 0;  // bus id
    int to = 0;    // bus id
    double susceptance = 0.0;    // beta_ij [p.u.]
    double thermal_limit = 0.0;  // pbar_ij [p.u.]
    bool is_transformer = false;

    friend bool operator==(const Branch&, const Branch&) = default;
};

/// Static network. Immutable once constructed; the constructor enforces
/// positivity of m, d, beta and limits, unique bus ids, valid endpoints,
/// connectivity and that the monitored set indexes existing branches.
class Grid {
public:
    Grid(std::vector<Bus> buses, std::vector<Branch> branches,
         std::vector<std::size_t> monitored, int reference_bus);

    [[nodiscard]] const std::vector<Bus>& buses() const noexcept { return buses_; }
    [[nodiscard]] const std::vector<Branch>& branches() const noexcept { return branches_; }
    [[nodiscard]] const std::vector<std::size_t>& monitored() const noexcept { return monitored_; }
    [[nodiscard]] int reference_bus() const noexcept { return reference_bus_; }
    [[nodiscard]] std::size_t reference_index() const noexcept { return reference_index_; }

    [[nodiscard]] std::size_t bus_count() const noexcept { return buses_.size(); }
    [[nodiscard]] std::size_t branch_count() const noexcept { return branches_.size(); }

    /// Position of bus `id` in `buses()`; throws ReferenceError if unknown.
    [[nodiscard]] std::size_t index_of(int id) const;
    [[nodiscard]] std::size_t from_index(std::size_t branch) const { return endpoints_.at(branch).first; }
    [[nodiscard]] std::size_t to_index(std::size_t branch) const { return endpoints_.at(branch).second; }

    [[nodiscard]] Vector injections() const;
    [[nodiscard]] Vector inertias() const;
    [[nodiscard]] Vector dampings() const;

    /// Same network with a different monitored set.
    [[nodiscard]] Grid with_monitored(std::vector<std::size_t> monitored) const;
    /// Same network with thermal limits replaced.
    [[nodiscard]] Grid with_limits(std::span<const double> limits) const;

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.buses_ == b.buses_ && a.branches_ == b.branches_ &&
               a.monitored_ == b.monitored_ && a.reference_bus_ == b.reference_bus_;
    }

private:
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<std::size_t> monitored_;
    int reference_bus_;
    std::size_t reference_index_ = 0;
    std::unordered_map<int, std::size_t> index_;
    std::vector<std::pair<std::size_t, std::size_t>> endpoints_;
};

/// All branch indices 0..branch_count-1.
[[nodiscard]] std::vector<std::size_t> all_branches(std::size_t branch_count);

struct Laplacian {
    Matrix matrix;
    /// Internal endpoint indices and effective (scaled) susceptance per branch.
    std::vector<std::pair<std::size_t, std::size_t>> endpoints;
    std::vector<double> weights;
};

/// Per-branch multipliers: all ones.
[[nodiscard]] std::vector<double> nominal_scale(const Grid& grid);
/// Per-branch multipliers: `factor` on `branch`, ones elsewhere.
[[nodiscard]] std::vector<double> fault_scale(const Grid& grid, std::size_t branch,
                                              double factor = 2.0 / 3.0);

/// Weighted Laplacian; parallel branches accumulate.
[[nodiscard]] Laplacian build_laplacian(const Grid& grid, std::span<const double> scale);

/// Solves L theta = p with theta[reference] = 0.
/// Throws BalanceError if |sum p| exceeds 1e-9 * max(|p|_inf, 1).
[[nodiscard]] Vector equilibrium_angles(const Laplacian& laplacian, const Vector& injections,
                                        std::size_t reference_index);
[[nodiscard]] Vector equilibrium_angles(const Grid& grid);

/// Nominal branch flows beta_ij * (theta_i - theta_j).
[[nodiscard]] Vector branch_flows(const Grid& grid, const Vector& angles);

}  // namespace dynscreen
