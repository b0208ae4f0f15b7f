#include "support.hpp"

#include "dynscreen/eigensystem.hpp"
#include "dynscreen/errors.hpp"
#include "dynscreen/oracles.hpp"
#include "dynscreen/propagator.hpp"
#include "dynscreen/state_space.hpp"
#include "dynscreen/trajectory_io.hpp"

#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

using namespace dynscreen;
using namespace dynscreen::testing;
using Catch::Approx;

namespace {

StateSpace fault_on(const Grid& g, std::size_t branch, double sigma_scale = 1.0, double horizon = 20.0) {
    const double sigma = sigma_scale * g.branches().at(branch).susceptance;
    return assemble_state_space(g, {branch, 1.0, sigma, horizon});
}

NoisePath brownian(double dt, Eigen::Index steps, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    NoisePath p{dt, {}};
    for (Eigen::Index k = 0; k < steps; ++k) p.increments.push_back(normal(rng));
    return p;
}

/// Sums consecutive blocks of `factor` increments.
NoisePath coarsen(const NoisePath& fine, int factor) {
    NoisePath p{fine.dt * factor, {}};
    for (std::size_t k = 0; k + factor <= fine.increments.size(); k += static_cast<std::size_t>(factor)) {
        double s = 0.0;
        for (int j = 0; j < factor; ++j) s += fine.increments[k + static_cast<std::size_t>(j)];
        p.increments.push_back(s);
    }
    return p;
}

double nilpotency_residual(const StateSpace& ss) {
    const double scale = std::max(ss.noise.cwiseAbs().maxCoeff(), 1e-300);
    return (ss.noise * ss.noise).cwiseAbs().maxCoeff() / (scale * scale);
}

}  // namespace

TEST_CASE("noise structure", "[dynamics]") {
    const Grid g = triangle();
    SECTION("sigma = 0 gives a zero noise matrix") {
        const StateSpace ss = assemble_state_space(g, {1, 1.0, 0.0, 20.0});
        CHECK(ss.noise.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("G * G = 0 on every branch") {
        for (std::size_t b = 0; b < g.branch_count(); ++b) CHECK(nilpotency_residual(fault_on(g, b)) < 1e-14);
        for (std::size_t b : {0u, 50u, 117u, 185u}) CHECK(nilpotency_residual(fault_on(ieee118(), b)) < 1e-14);
    }
    SECTION("two-bus block by hand") {
        const StateSpace ss = assemble_state_space(two_bus(), {0, 1.0, 1.0, 20.0});
        const Matrix block = ss.noise.topRightCorner(2, 2);
        Matrix expect(2, 2);
        expect << 1, -1, -1, 1;
        CHECK((block - expect).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(ss.noise.leftCols(2).cwiseAbs().maxCoeff() == 0.0);
        CHECK(ss.noise.bottomRows(2).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("no fault has no correction and no noise") {
        const StateSpace ss = assemble_state_space(g, {std::nullopt, 0.0, 0.0, 20.0});
        CHECK(ss.drift_correction.cwiseAbs().maxCoeff() == 0.0);
        CHECK(ss.noise.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("eigendecomposition", "[dynamics]") {
    SECTION("diagonal input") {
        const Vector d = (Vector(4) << -0.5, -1.0, -2.0, -3.0).finished();
        const Eigensystem es = eigendecompose(d.asDiagonal().toDenseMatrix());
        for (Eigen::Index i = 0; i < 4; ++i) CHECK(es.values(i).real() == Approx(d(i)));
        const Matrix u = es.vectors.cwiseAbs();
        CHECK((u - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("IEEE-118 drift: one gauge mode, the rest strictly stable") {
        const StateSpace ss = assemble_state_space(ieee118(), {std::nullopt, 0.0, 0.0, 20.0});
        const Eigensystem es = eigendecompose(ss.drift);
        int gauge = 0;
        for (Eigen::Index i = 0; i < es.values.size(); ++i) {
            if (std::abs(es.values(i)) < 1e-8) ++gauge;
            else CHECK(es.values(i).real() < 0.0);
        }
        CHECK(gauge == 1);
        CHECK(es.residual < kReconstructionTolerance);
    }
    SECTION("reconstruction on random stable matrices") {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> normal;
        for (int trial = 0; trial < 100; ++trial) {
            const Eigen::Index n = 2 + trial % 12;
            Matrix a(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) a(i, j) = normal(rng);
            const double shift = a.eigenvalues().real().maxCoeff() + 0.1;
            a.diagonal().array() -= shift;
            const Eigensystem es = eigendecompose(a);
            const Matrix back = (es.vectors * es.values.asDiagonal() * es.inverse).real();
            CHECK(inf_norm(back - a) / inf_norm(a) < 1e-8);
            CHECK(inf_norm(es.real_basis * es.block_matrix() * es.real_basis_inverse - a) / inf_norm(a) < 1e-8);
        }
    }
    SECTION("defective input is rejected") {
        Matrix j(2, 2);
        j << -1, 1, 0, -1;
        CHECK_THROWS_AS(eigendecompose(j), DefectiveMatrixError);
    }
}

TEST_CASE("deterministic propagation", "[dynamics]") {
    const Grid g = triangle();
    SECTION("the nominal equilibrium is a fixed point") {
        const StateSpace ss = assemble_state_space(g, {0, 0.0, 0.0, 20.0});
        const Trajectory t = propagate_deterministic(ss, ss.nominal_equilibrium, 0.0, 20.0, 0.01);
        CHECK((t.states.colwise() - ss.nominal_equilibrium).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("fault pulls toward the faulted equilibrium, clearing returns home") {
        const StateSpace ss = assemble_state_space(g, {2, 20.0, 0.0, 40.0});
        const Trajectory t = propagate_deterministic(ss, ss.nominal_equilibrium, 20.0, 40.0, 0.01);
        // Compare modulo the uniform angle shift, which the dynamics leave free.
        const auto gauge_free = [&](const Vector& x) {
            Vector y = x;
            y.tail(3).array() -= x(3 + static_cast<Eigen::Index>(g.reference_index()));
            return y;
        };
        const double start = (ss.nominal_equilibrium - ss.fault_equilibrium).norm();
        REQUIRE(start > 1e-3);
        CHECK((gauge_free(t.states.col(2000)) - ss.fault_equilibrium).norm() < 1e-6 * start);
        CHECK((gauge_free(t.states.col(4000)) - ss.nominal_equilibrium).norm() < 1e-6 * start);
    }
    SECTION("backends agree") {
        for (const Grid* grid : {&g, &ieee118()}) {
            for (std::size_t b : {0u, 2u}) {
                const StateSpace ss = assemble_state_space(*grid, {b, 0.73, 0.0, 5.0});
                const Trajectory m = propagate_deterministic(ss, ss.nominal_equilibrium, 0.73, 5.0, 0.01, StepBackend::modal);
                const Trajectory a = propagate_deterministic(ss, ss.nominal_equilibrium, 0.73, 5.0, 0.01, StepBackend::action);
                const Trajectory d = propagate_deterministic(ss, ss.nominal_equilibrium, 0.73, 5.0, 0.01, StepBackend::dense);
                CHECK((m.states - d.states).cwiseAbs().maxCoeff() < 1e-9);
                CHECK((a.states - d.states).cwiseAbs().maxCoeff() < 1e-9);
            }
        }
    }
    SECTION("time grid contracts") {
        CHECK_THROWS_AS(make_time_grid(1.0, 20.0, 0.0), ContractError);
        CHECK_THROWS_AS(make_time_grid(21.0, 20.0, 0.01), ContractError);
        CHECK_THROWS_AS(make_time_grid(1.0, 20.005, 0.01), ContractError);
        const TimeGrid tg = make_time_grid(0.734, 20.0, 0.01);
        CHECK(tg.steps == 2000);
        CHECK(tg.fault_steps == 73);
    }
}

TEST_CASE("stochastic propagation", "[dynamics]") {
    const Grid g = triangle();
    const StateSpace ss = fault_on(g, 2, 1.0, 5.0);
    const Vector& x0 = ss.nominal_equilibrium;

    SECTION("zero increments reproduce the deterministic output bitwise") {
        for (StepBackend be : {StepBackend::modal, StepBackend::action, StepBackend::dense}) {
            const NoisePath zero{0.01, std::vector<double>(100, 0.0)};
            const Trajectory s = propagate_stochastic(ss, x0, zero, 1.0, 5.0, be);
            const Trajectory d = propagate_deterministic(ss, x0, 1.0, 5.0, 0.01, be);
            CHECK(s.states == d.states);
        }
    }
    SECTION("after clearing the path is a deterministic function of x(tau)") {
        for (std::uint64_t seed : {1u, 2u}) {
            const Trajectory s = propagate_stochastic(ss, x0, brownian(0.01, 100, seed), 1.0, 5.0);
            const Trajectory rest = propagate_deterministic(ss, s.states.col(100), 0.0, 4.0, 0.01);
            CHECK((s.states.rightCols(401) - rest.states).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SECTION("backends agree on a noisy path") {
        const NoisePath p = brownian(0.01, 100, 3);
        const Trajectory m = propagate_stochastic(ss, x0, p, 1.0, 5.0, StepBackend::modal);
        const Trajectory d = propagate_stochastic(ss, x0, p, 1.0, 5.0, StepBackend::dense);
        CHECK((m.states - d.states).cwiseAbs().maxCoeff() < 1e-9);
    }
    SECTION("wrong path length is rejected") {
        CHECK_THROWS_AS(propagate_stochastic(ss, x0, brownian(0.01, 99, 1), 1.0, 5.0), ContractError);
    }
}

TEST_CASE("Euler-Maruyama reference", "[dynamics]") {
    const Grid g = two_bus();
    SECTION("sigma = 0 converges to the analytic solution at first order") {
        const StateSpace ss = assemble_state_space(g, {0, 1.0, 0.0, 2.0});
        const Vector x0 = ss.nominal_equilibrium;
        std::vector<double> err;
        for (double dt : {1e-2, 1e-3, 1e-4}) {
            const auto k = static_cast<std::size_t>(std::llround(1.0 / dt));
            const Trajectory em = propagate_euler_maruyama(ss, x0, {dt, std::vector<double>(k, 0.0)}, 1.0, 2.0);
            const Trajectory an = propagate_deterministic(ss, x0, 1.0, 2.0, dt);
            err.push_back((em.states - an.states).cwiseAbs().maxCoeff());
        }
        CHECK(err[0] / err[1] > 5.0);
        CHECK(err[0] / err[1] < 20.0);
        CHECK(err[1] / err[2] > 5.0);
        CHECK(err[1] / err[2] < 20.0);
    }
    SECTION("strong difference to the analytic propagator shrinks with dt") {
        const StateSpace ss = assemble_state_space(g, {0, 1.0, 1.0, 1.0});
        const Vector x0 = ss.nominal_equilibrium;
        double mean_prev = std::numeric_limits<double>::infinity();
        for (int factor : {100, 10, 1}) {
            double sum = 0.0;
            for (std::uint64_t seed = 0; seed < 20; ++seed) {
                const NoisePath p = coarsen(brownian(1e-4, 10000, seed), factor);
                const Trajectory em = propagate_euler_maruyama(ss, x0, p, 1.0, 1.0);
                const Trajectory an = propagate_stochastic(ss, x0, p, 1.0, 1.0);
                sum += (em.states.col(em.grid.fault_steps) - an.states.col(an.grid.fault_steps)).norm();
            }
            const double mean = sum / 20.0;
            CHECK(mean < mean_prev);
            mean_prev = mean;
        }
    }
}

TEST_CASE("moment equations", "[dynamics]") {
    const Grid g = triangle();
    SECTION("sigma = 0: zero covariance, deterministic mean") {
        const StateSpace ss = assemble_state_space(g, {1, 1.0, 0.0, 20.0});
        const Moments m = moment_ode_oracle(ss, ss.nominal_equilibrium, 1.0);
        const Trajectory d = propagate_deterministic(ss, ss.nominal_equilibrium, 1.0, 20.0, 0.01);
        CHECK(m.covariance.cwiseAbs().maxCoeff() < 1e-14);
        CHECK((m.mean - d.states.col(100)).cwiseAbs().maxCoeff() < 1e-9);
    }
    SECTION("no noise from the faulted fixed point keeps the mean constant") {
        const StateSpace ss = assemble_state_space(g, {1, 1.0, 0.0, 20.0});
        const Moments m = moment_ode_oracle(ss, ss.fault_equilibrium, 1.0);
        CHECK((m.mean - ss.fault_equilibrium).cwiseAbs().maxCoeff() < 1e-10);
    }
    SECTION("noise adds variance only through the probe direction") {
        const StateSpace ss = fault_on(g, 1);
        const Moments m = moment_ode_oracle(ss, ss.nominal_equilibrium, 1.0);
        CHECK(m.covariance.trace() > 0.0);
        CHECK((m.covariance - m.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("deterministic propagator matches the adaptive reference on small grids", "[dynamics]") {
    const Grid g = triangle();
    for (std::size_t b = 0; b < g.branch_count(); ++b) {
        const StateSpace ss = assemble_state_space(g, {b, 0.8, 0.0, 10.0});
        const Trajectory an = propagate_deterministic(ss, ss.nominal_equilibrium, 0.8, 10.0, 0.01);
        const Trajectory ref = reference_trajectory(ss, ss.nominal_equilibrium, 0.8, 10.0, 0.01);
        CHECK((an.angles() - ref.angles()).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("trajectory binary dump round-trips", "[dynamics]") {
    const Grid g = triangle();
    const StateSpace ss = fault_on(g, 0, 1.0, 2.0);
    const Trajectory t = propagate_stochastic(ss, ss.nominal_equilibrium, brownian(0.01, 50, 9), 0.5, 2.0);
    std::stringstream buf;
    write_trajectory_binary(buf, t);
    const Trajectory back = read_trajectory_binary(buf);
    CHECK(back.n == t.n);
    CHECK(back.states == t.states);
    CHECK(back.times == t.times);

    std::stringstream csv;
    write_trajectory_csv(csv, t);
    std::string header;
    std::getline(csv, header);
    CHECK(header.rfind("t,", 0) == 0);
    std::size_t rows = 0;
    for (std::string line; std::getline(csv, line);) ++rows;
    CHECK(rows == static_cast<std::size_t>(t.times.size()));
}
