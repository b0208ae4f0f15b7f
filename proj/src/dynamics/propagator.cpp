#include "dynscreen/propagator.hpp"

#include "dynscreen/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <string>

namespace dynscreen {

TimeGrid make_time_grid(double tau, double horizon, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractError("dt must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ContractError("horizon must be positive");
    if (!(tau >= 0.0) || tau > horizon) throw ContractError("fault duration must lie in [0, T]");
    const double ratio = horizon / dt;
    const auto steps = static_cast<Eigen::Index>(std::llround(ratio));
    if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio)
        throw ContractError("horizon must be an integer multiple of dt");
    TimeGrid g;
    g.dt = dt;
    g.steps = steps;
    g.fault_steps = std::min<Eigen::Index>(steps, static_cast<Eigen::Index>(std::llround(tau / dt)));
    return g;
}

ExpAction::ExpAction(SparseMatrix a, double t, double tolerance)
    : a_(std::move(a)), h_(t), substeps_(1), tolerance_(tolerance) {
    if (a_.rows() != a_.cols()) throw ContractError("ExpAction: matrix must be square");
    a_.makeCompressed();
    Vector colsum = Vector::Zero(a_.cols());
    for (Eigen::Index r = 0; r < a_.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(a_, r); it; ++it) colsum[it.col()] += std::abs(it.value());
    const double norm = a_.cols() > 0 ? colsum.maxCoeff() * std::abs(t) : 0.0;
    constexpr double theta = 3.5;
    substeps_ = std::max(1, static_cast<int>(std::ceil(norm / theta)));
    h_ = t / substeps_;
}

void ExpAction::apply(Vector& v, Vector& term, Vector& scratch) const {
    constexpr int max_terms = 60;
    const Eigen::Index rows = a_.rows();
    const int* outer = a_.outerIndexPtr();
    const int* inner = a_.innerIndexPtr();
    const double* values = a_.valuePtr();
    for (int s = 0; s < substeps_; ++s) {
        term = v;
        double previous = term.lpNorm<Eigen::Infinity>();
        for (int j = 1; j <= max_terms; ++j) {
            const double c = h_ / j;
            double current = 0.0;
            double size = 0.0;
            for (Eigen::Index r = 0; r < rows; ++r) {
                double acc = 0.0;
                for (int p = outer[r]; p < outer[r + 1]; ++p) acc += values[p] * term[inner[p]];
                const double t = acc * c;
                scratch[r] = t;
                v[r] += t;
                current = std::max(current, std::abs(t));
                size = std::max(size, std::abs(v[r]));
            }
            term.swap(scratch);
            if (current + previous <= tolerance_ * size) break;
            previous = current;
        }
    }
}

const char* to_string(StepBackend backend) noexcept {
    switch (backend) {
        case StepBackend::modal: return "modal";
        case StepBackend::action: return "action";
        case StepBackend::dense: return "dense";
    }
    return "modal";
}

StepBackend step_backend_from_string(std::string_view text) {
    if (text == "modal") return StepBackend::modal;
    if (text == "action") return StepBackend::action;
    if (text == "dense") return StepBackend::dense;
    throw ContractError("unknown propagator backend '" + std::string(text) + "'");
}

LinearSegment::LinearSegment(Vector equilibrium, double dt, const Vector& noise_input,
                             const Vector& noise_probe)
    : equilibrium_(std::move(equilibrium)), dt_(dt) {
    if (!(dt > 0.0)) throw ContractError("dt must be positive");
    if (noise_input.size() != noise_probe.size())
        throw ContractError("noise input and probe must have equal length");
    if (noise_input.size() == 0) return;
    if (noise_input.size() != equilibrium_.size()) throw ContractError("noise vector has wrong length");
    for (Eigen::Index i = 0; i < noise_input.size(); ++i) {
        if (noise_input[i] != 0.0) noise_input_.emplace_back(i, noise_input[i]);
        if (noise_probe[i] != 0.0) noise_probe_.emplace_back(i, noise_probe[i]);
    }
    if (noise_input_.empty() || noise_probe_.empty()) {
        noise_input_.clear();
        noise_probe_.clear();
        return;
    }
    probe_offset_ = noise_probe.dot(equilibrium_);
}

namespace {

void write_output(Eigen::Ref<Matrix> out, Eigen::Index col, const Vector& x) {
    if (out.rows() == x.size()) {
        out.col(col) = x;
    } else {
        out.col(col) = x.tail(out.rows());
    }
}

void check_output(const LinearSegment& seg, const Eigen::Ref<Matrix>& out, Eigen::Index count,
                  std::span<const double> increments) {
    const Eigen::Index n2 = seg.dimension();
    if (out.cols() != count || (out.rows() != n2 && out.rows() != n2 / 2))
        throw ContractError("output block has wrong shape");
    if (!increments.empty() && static_cast<Eigen::Index>(increments.size()) != count)
        throw ContractError("noise path length does not match the fault-on steps");
}

// Shared by the dense and action backends: state is y = x - x*.
template <class Step>
class DeviationSegment : public LinearSegment {
public:
    DeviationSegment(Step step, StepBackend backend, Vector equilibrium, double dt, const Vector& u,
                     const Vector& v)
        : LinearSegment(std::move(equilibrium), dt, u, v), step_(std::move(step)), backend_(backend) {}

    StepBackend backend() const noexcept override { return backend_; }

    void load(const Vector& x, Vector& z) const override { z = x - equilibrium_; }
    void store(const Vector& z, Vector& x) const override { x = z + equilibrium_; }

    void advance(Vector& z, std::span<const double> increments, Eigen::Index count,
                 Eigen::Ref<Matrix> out) const override {
        check_output(*this, out, count, increments);
        const bool noisy = has_noise() && !increments.empty();
        Vector x(z.size()), a(z.size()), b(z.size());
        for (Eigen::Index k = 0; k < count; ++k) {
            x = z + equilibrium_;
            write_output(out, k, x);
            if (noisy) {
                double probe = probe_offset_;
                for (const auto& [i, w] : noise_probe_) probe += w * z[i];
                const double s = probe * increments[static_cast<std::size_t>(k)];
                for (const auto& [i, w] : noise_input_) z[i] += w * s;
            }
            step_(z, a, b);
        }
    }

private:
    Step step_;
    StepBackend backend_;
};

struct DenseStep {
    Matrix e;
    void operator()(Vector& z, Vector& tmp, Vector&) const {
        tmp.noalias() = e * z;
        z.swap(tmp);
    }
};

struct ActionStep {
    ExpAction action;
    void operator()(Vector& z, Vector& a, Vector& b) const { action.apply(z, a, b); }
};

// Real modal coordinates z = V^-1 (x - x*), where each 1x1 or 2x2 block
// evolves independently: z'_i = alpha_i z_i + beta_i z_{partner_i}.
class ModalSegment : public LinearSegment {
public:
    ModalSegment(const Eigensystem& es, Vector equilibrium, double dt, const Vector& u, const Vector& v)
        : LinearSegment(std::move(equilibrium), dt, u, v),
          basis_(es.real_basis),
          basis_inverse_(es.real_basis_inverse) {
        const Eigen::Index n2 = es.dimension();
        if (n2 != equilibrium_.size()) throw ContractError("eigensystem dimension mismatch");
        alpha_.resize(n2);
        beta_.resize(n2);
        partner_.resize(static_cast<std::size_t>(n2));
        for (const ModalBlock& blk : es.blocks) {
            const Eigen::Index o = blk.offset;
            const double decay = std::exp(blk.re * dt);
            if (blk.size == 1) {
                alpha_[o] = decay;
                beta_[o] = 0.0;
                partner_[static_cast<std::size_t>(o)] = o;
            } else {
                const double c = decay * std::cos(blk.im * dt);
                const double s = decay * std::sin(blk.im * dt);
                alpha_[o] = c;
                beta_[o] = s;
                partner_[static_cast<std::size_t>(o)] = o + 1;
                alpha_[o + 1] = c;
                beta_[o + 1] = -s;
                partner_[static_cast<std::size_t>(o + 1)] = o;
            }
        }
        if (has_noise()) {
            Vector uu = Vector::Zero(n2);
            for (const auto& [i, w] : noise_input_) uu[i] = w;
            modal_input_ = basis_inverse_ * uu;
            modal_probe_ = Vector::Zero(n2);
            for (const auto& [i, w] : noise_probe_) modal_probe_ += w * basis_.row(i).transpose();
        }
    }

    StepBackend backend() const noexcept override { return StepBackend::modal; }

    void load(const Vector& x, Vector& z) const override { z.noalias() = basis_inverse_ * (x - equilibrium_); }
    void store(const Vector& z, Vector& x) const override {
        x.noalias() = basis_ * z;
        x += equilibrium_;
    }

    void advance(Vector& z, std::span<const double> increments, Eigen::Index count,
                 Eigen::Ref<Matrix> out) const override {
        check_output(*this, out, count, increments);
        if (count == 0) return;
        const bool noisy = has_noise() && !increments.empty();
        const Eigen::Index n2 = z.size();
        thread_local Matrix history;
        history.resize(n2, count);
        Vector next(n2);
        for (Eigen::Index k = 0; k < count; ++k) {
            history.col(k) = z;
            if (noisy) {
                const double s = (modal_probe_.dot(z) + probe_offset_) * increments[static_cast<std::size_t>(k)];
                z += modal_input_ * s;
            }
            for (Eigen::Index i = 0; i < n2; ++i)
                next[i] = alpha_[i] * z[i] + beta_[i] * z[partner_[static_cast<std::size_t>(i)]];
            z.swap(next);
        }
        const Eigen::Index rows = out.rows();
        out.noalias() = basis_.bottomRows(rows) * history;
        out.colwise() += equilibrium_.tail(rows);
    }

private:
    Matrix basis_;
    Matrix basis_inverse_;
    Vector alpha_;
    Vector beta_;
    std::vector<Eigen::Index> partner_;
    Vector modal_input_;
    Vector modal_probe_;
};

}  // namespace

std::shared_ptr<const LinearSegment> make_modal_segment(const Eigensystem& es, const Vector& equilibrium,
                                                        double dt, const Vector& noise_input,
                                                        const Vector& noise_probe) {
    return std::make_shared<ModalSegment>(es, equilibrium, dt, noise_input, noise_probe);
}

std::shared_ptr<const LinearSegment> make_action_segment(SparseMatrix a, const Vector& equilibrium, double dt,
                                                         const Vector& noise_input,
                                                         const Vector& noise_probe) {
    return std::make_shared<DeviationSegment<ActionStep>>(ActionStep{ExpAction(std::move(a), dt)},
                                                          StepBackend::action, equilibrium, dt,
                                                          noise_input, noise_probe);
}

std::shared_ptr<const LinearSegment> make_segment(StepBackend backend, const Matrix& a,
                                                  const Vector& equilibrium, double dt,
                                                  const Vector& noise_input, const Vector& noise_probe) {
    if (backend == StepBackend::action)
        return make_action_segment(a.sparseView(), equilibrium, dt, noise_input, noise_probe);
    if (backend == StepBackend::modal) {
        try {
            return make_modal_segment(eigendecompose(a), equilibrium, dt, noise_input, noise_probe);
        } catch (const DefectiveMatrixError&) {
        }
    }
    return std::make_shared<DeviationSegment<DenseStep>>(DenseStep{matrix_exponential(a * dt)},
                                                         StepBackend::dense, equilibrium, dt,
                                                         noise_input, noise_probe);
}

PiecewisePropagator::PiecewisePropagator(std::shared_ptr<const LinearSegment> fault,
                                         std::shared_ptr<const LinearSegment> nominal)
    : fault_(std::move(fault)), nominal_(std::move(nominal)) {
    if (!fault_ || !nominal_) throw ContractError("propagator segments must be set");
    if (fault_->dimension() != nominal_->dimension() || fault_->dt() != nominal_->dt())
        throw ContractError("propagator segments disagree on dimension or dt");
}

void PiecewisePropagator::run(const Vector& x0, const TimeGrid& grid, std::span<const double> increments,
                              Eigen::Ref<Matrix> out) const {
    const Eigen::Index n2 = nominal_->dimension();
    if (x0.size() != n2) throw ContractError("initial state has wrong length");
    if (std::abs(grid.dt - dt()) > 1e-12 * dt()) throw ContractError("time grid dt differs from propagator dt");
    if (out.cols() != grid.steps && out.cols() != grid.steps + 1)
        throw ContractError("output must have steps or steps + 1 columns");
    if (!increments.empty() && static_cast<Eigen::Index>(increments.size()) != grid.fault_steps)
        throw ContractError("noise path length does not match the fault-on steps");

    const Eigen::Index k_tau = grid.fault_steps;
    Vector z;
    Vector x = x0;
    if (k_tau > 0) {
        fault_->load(x, z);
        fault_->advance(z, increments, k_tau, out.leftCols(k_tau));
        fault_->store(z, x);
    }
    nominal_->load(x, z);
    nominal_->advance(z, {}, grid.steps - k_tau, out.middleCols(k_tau, grid.steps - k_tau));
    if (out.cols() == grid.steps + 1) {
        nominal_->store(z, x);
        write_output(out, grid.steps, x);
    }
}

PiecewisePropagator make_propagator(const StateSpace& ss, double dt, StepBackend backend) {
    auto nominal = make_segment(backend, ss.drift, ss.nominal_equilibrium, dt);
    if (!ss.faulted_branch) return PiecewisePropagator(nominal, nominal);
    auto fault = make_segment(backend, ss.fault_drift(), ss.fault_equilibrium, dt, ss.noise_input,
                              ss.noise_probe);
    return PiecewisePropagator(std::move(fault), std::move(nominal));
}

Trajectory propagate(const PiecewisePropagator& prop, std::size_t n, const Vector& x0,
                     const NoisePath& path, double tau, double horizon) {
    const TimeGrid grid = make_time_grid(tau, horizon, prop.dt());
    if (std::abs(path.dt - grid.dt) > 1e-12 * grid.dt)
        throw ContractError("noise path dt does not match the trajectory grid");
    if (static_cast<Eigen::Index>(path.increments.size()) != grid.fault_steps)
        throw ContractError("noise path has " + std::to_string(path.increments.size()) +
                            " increments, fault-on interval has " + std::to_string(grid.fault_steps) +
                            " steps");
    Trajectory traj;
    traj.grid = grid;
    traj.n = n;
    traj.times.resize(grid.steps + 1);
    for (Eigen::Index k = 0; k <= grid.steps; ++k) traj.times[k] = static_cast<double>(k) * grid.dt;
    traj.states.resize(static_cast<Eigen::Index>(2 * n), grid.steps + 1);
    prop.run(x0, grid, path.increments, traj.states);
    traj.scenario.duration = tau;
    traj.scenario.horizon = horizon;
    return traj;
}

Trajectory propagate_deterministic(const StateSpace& ss, const Vector& x0, double tau, double horizon,
                                   double dt, StepBackend backend) {
    const TimeGrid grid = make_time_grid(tau, horizon, dt);
    NoisePath zero{dt, std::vector<double>(static_cast<std::size_t>(grid.fault_steps), 0.0)};
    Trajectory traj = propagate(make_propagator(ss, dt, backend), ss.n, x0, zero, tau, horizon);
    traj.scenario.faulted_branch = ss.faulted_branch;
    traj.scenario.noise_strength = 0.0;
    return traj;
}

Trajectory propagate_stochastic(const StateSpace& ss, const Vector& x0, const NoisePath& path, double tau,
                                double horizon, StepBackend backend) {
    if (!(path.dt > 0.0)) throw ContractError("noise path dt must be positive");
    Trajectory traj = propagate(make_propagator(ss, path.dt, backend), ss.n, x0, path, tau, horizon);
    traj.scenario.faulted_branch = ss.faulted_branch;
    traj.scenario.noise_strength = ss.noise_strength;
    return traj;
}

Matrix matrix_exponential(const Matrix& a) { return a.exp(); }

}  // namespace dynscreen
