#pragma once

#include "dynscreen/eigensystem.hpp"
#include "dynscreen/scenario.hpp"
#include "dynscreen/state_space.hpp"

#include <Eigen/Sparse>

#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace dynscreen {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Wiener increments on a uniform grid, one per fault-on step.
struct NoisePath {
    double dt = 0.0;
    std::vector<double> increments;
};

/// Uniform time grid t_k = k dt, k = 0..steps, with the fault cleared at
/// step fault_steps (tau rounded to the nearest grid point).
struct TimeGrid {
    double dt = 0.0;
    Eigen::Index steps = 0;
    Eigen::Index fault_steps = 0;

    [[nodiscard]] double horizon() const noexcept { return dt * static_cast<double>(steps); }
    [[nodiscard]] double clearing_time() const noexcept { return dt * static_cast<double>(fault_steps); }
};

/// Throws ContractError unless dt > 0, 0 <= tau <= T and T is a multiple of dt.
[[nodiscard]] TimeGrid make_time_grid(double tau, double horizon, double dt);

struct Trajectory {
    TimeGrid grid;
    std::size_t n = 0;
    Vector times;   // steps + 1
    Matrix states;  // 2n x (steps + 1), columns x_k = (theta_dot; theta)
    FaultScenario scenario;

    [[nodiscard]] auto angles() const { return states.bottomRows(static_cast<Eigen::Index>(n)); }
    [[nodiscard]] auto frequencies() const { return states.topRows(static_cast<Eigen::Index>(n)); }
};

/// x -> e^{A t} x for sparse A by a truncated Taylor series with substeps,
/// terminated once two consecutive terms fall below tolerance.
class ExpAction {
public:
    ExpAction(SparseMatrix a, double t, double tolerance = 0x1p-53);

    void apply(Vector& v, Vector& term, Vector& scratch) const;

    [[nodiscard]] int substeps() const noexcept { return substeps_; }
    [[nodiscard]] const SparseMatrix& matrix() const noexcept { return a_; }

private:
    SparseMatrix a_;
    double h_;
    int substeps_;
    double tolerance_;
};

enum class StepBackend { modal, action, dense };

[[nodiscard]] const char* to_string(StepBackend backend) noexcept;
[[nodiscard]] StepBackend step_backend_from_string(std::string_view text);

/// Affine system dx = (A x + P) dt + u (v^T x) dW sampled on a uniform grid,
/// stepped as x_{k+1} = x* + e^{A dt}((x_k - x*) + u (v^T x_k) dW_k).
/// The state is carried in backend-specific coordinates.
class LinearSegment {
public:
    virtual ~LinearSegment() = default;

    [[nodiscard]] Eigen::Index dimension() const noexcept { return equilibrium_.size(); }
    [[nodiscard]] const Vector& equilibrium() const noexcept { return equilibrium_; }
    [[nodiscard]] double dt() const noexcept { return dt_; }
    [[nodiscard]] bool has_noise() const noexcept { return !noise_input_.empty(); }
    [[nodiscard]] virtual StepBackend backend() const noexcept = 0;

    /// Physical state -> internal coordinates and back.
    virtual void load(const Vector& x, Vector& z) const = 0;
    virtual void store(const Vector& z, Vector& x) const = 0;

    /// Writes the physical output of steps k0..k0+count-1 into the columns of
    /// `out` (all 2n rows, or only the angle rows when out has n rows), then
    /// leaves z at step k0+count. `increments` is empty or holds `count` draws.
    virtual void advance(Vector& z, std::span<const double> increments, Eigen::Index count,
                         Eigen::Ref<Matrix> out) const = 0;

protected:
    LinearSegment(Vector equilibrium, double dt, const Vector& noise_input, const Vector& noise_probe);

    Vector equilibrium_;
    double dt_;
    std::vector<std::pair<Eigen::Index, double>> noise_input_;
    std::vector<std::pair<Eigen::Index, double>> noise_probe_;
    double probe_offset_ = 0.0;  // v^T x*
};

/// Builds a segment for drift `a` with fixed point `equilibrium`. The modal
/// backend falls back to the dense one when the eigendecomposition is
/// defective. Noise vectors may be empty.
[[nodiscard]] std::shared_ptr<const LinearSegment> make_segment(
    StepBackend backend, const Matrix& a, const Vector& equilibrium, double dt,
    const Vector& noise_input = {}, const Vector& noise_probe = {});

/// Modal segment from a precomputed eigensystem of the drift.
[[nodiscard]] std::shared_ptr<const LinearSegment> make_modal_segment(
    const Eigensystem& es, const Vector& equilibrium, double dt,
    const Vector& noise_input = {}, const Vector& noise_probe = {});

[[nodiscard]] std::shared_ptr<const LinearSegment> make_action_segment(
    SparseMatrix a, const Vector& equilibrium, double dt,
    const Vector& noise_input = {}, const Vector& noise_probe = {});

/// Fault-on segment followed by the nominal one.
class PiecewisePropagator {
public:
    PiecewisePropagator(std::shared_ptr<const LinearSegment> fault,
                        std::shared_ptr<const LinearSegment> nominal);

    /// Fills `out` (rows 2n or n, columns grid.steps or grid.steps + 1).
    void run(const Vector& x0, const TimeGrid& grid, std::span<const double> increments,
             Eigen::Ref<Matrix> out) const;

    [[nodiscard]] const LinearSegment& fault() const noexcept { return *fault_; }
    [[nodiscard]] const LinearSegment& nominal() const noexcept { return *nominal_; }
    [[nodiscard]] double dt() const noexcept { return nominal_->dt(); }

private:
    std::shared_ptr<const LinearSegment> fault_;
    std::shared_ptr<const LinearSegment> nominal_;
};

[[nodiscard]] PiecewisePropagator make_propagator(const StateSpace& ss, double dt,
                                                  StepBackend backend = StepBackend::modal);

[[nodiscard]] Trajectory propagate_deterministic(const StateSpace& ss, const Vector& x0, double tau,
                                                 double horizon, double dt,
                                                 StepBackend backend = StepBackend::modal);

[[nodiscard]] Trajectory propagate_stochastic(const StateSpace& ss, const Vector& x0,
                                              const NoisePath& path, double tau, double horizon,
                                              StepBackend backend = StepBackend::modal);

/// Same as above with a prebuilt propagator (dt taken from it).
[[nodiscard]] Trajectory propagate(const PiecewisePropagator& prop, std::size_t n, const Vector& x0,
                                   const NoisePath& path, double tau, double horizon);

/// Matrix exponential by scaling and squaring.
[[nodiscard]] Matrix matrix_exponential(const Matrix& a);

}  // namespace dynscreen
