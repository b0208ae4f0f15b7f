#include "support.hpp"

#include "dynscreen/errors.hpp"
#include "dynscreen/overload.hpp"
#include "dynscreen/state_space.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace dynscreen;
using namespace dynscreen::testing;
using Catch::Approx;

namespace {

Trajectory blank(std::size_t n, double horizon, double dt, double tau = 0.0, std::optional<std::size_t> branch = {}) {
    Trajectory t;
    t.grid = make_time_grid(tau, horizon, dt);
    t.n = n;
    t.times = Vector::LinSpaced(t.grid.steps + 1, 0.0, horizon);
    t.states = Matrix::Zero(static_cast<Eigen::Index>(2 * n), t.grid.steps + 1);
    t.scenario = {branch, tau, 0.0, horizon};
    return t;
}

Trajectory equilibrium_path(const Grid& g, double horizon = 5.0) {
    Trajectory t = blank(g.bus_count(), horizon, 0.01);
    const Vector x = rest_state(equilibrium_angles(g));
    t.states.colwise() = x;
    return t;
}

Trajectory random_path(const Grid& g, std::uint64_t seed) {
    Trajectory t = blank(g.bus_count(), 2.0, 0.01, 0.5, 1);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.2);
    for (Eigen::Index k = 0; k < t.states.cols(); ++k)
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(g.bus_count()); ++i)
            t.states(static_cast<Eigen::Index>(g.bus_count()) + i, k) = normal(rng);
    return t;
}

}  // namespace

TEST_CASE("line overload", "[overload]") {
    SECTION("equilibrium trajectory never overloads") {
        const Grid& g = ieee118();
        const Trajectory t = equilibrium_path(g);
        CHECK(global_overload(t, g, g.monitored()) == 0.0);
    }
    SECTION("constructed crossing on [1 s, 2 s]") {
        const Grid g = two_bus(1.0, 2, 1.0);
        Trajectory t = blank(2, 5.0, 0.01);
        for (Eigen::Index k = 0; k <= t.grid.steps; ++k) t.states(2, k) = k >= 100 && k <= 200 ? 2.0 : 0.5;
        CHECK(line_overload(t, g, 0) == Approx(1.0).margin(0.01));
    }
    SECTION("fault schedule reduces the faulted flow") {
        const Grid g = two_bus(1.0, 2, 1.0);
        Trajectory t = blank(2, 2.0, 0.01, 1.0, 0);
        t.states.row(2).setConstant(1.2);
        CHECK(line_overload(t, g, 0) == Approx(1.0).margin(1e-12));
        CHECK(line_overload(t, g, 0, SusceptanceSchedule{}) == Approx(2.0).margin(1e-12));
    }
}

TEST_CASE("global overload", "[overload]") {
    const Grid g = triangle();
    const Trajectory t = random_path(g, 4);
    CHECK(global_overload(t, g, std::vector<std::size_t>{}) == 0.0);
    for (std::size_t b = 0; b < g.branch_count(); ++b) {
        const std::vector<std::size_t> one{b};
        CHECK(global_overload(t, g, one) == line_overload(t, g, b));
    }
    double sum = 0.0;
    for (std::size_t b : g.monitored()) sum += line_overload(t, g, b);
    CHECK(global_overload(t, g, g.monitored()) == sum);
    CHECK(sum > 0.0);

    const OverloadResult r = evaluate_overloads(t, g, g.monitored());
    CHECK(r.total == sum);
    for (std::size_t i = 0; i < r.branches.size(); ++i) CHECK(r.seconds[i] == line_overload(t, g, r.branches[i]));
}

TEST_CASE("vectorized kernel agrees with the per-line definition", "[overload]") {
    const Grid g = triangle();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Trajectory t = random_path(g, seed);
        const OverloadKernel kernel(g, g.monitored());
        std::vector<int> steps(kernel.size());
        std::vector<double> ratio(kernel.size());
        kernel.count(t.angles().leftCols(t.grid.steps), schedule_for(t), steps, ratio);
        for (std::size_t i = 0; i < kernel.size(); ++i)
            CHECK(steps[i] * t.grid.dt == Approx(line_overload(t, g, kernel.branches()[i])).margin(1e-12));
    }
}

TEST_CASE("safety polytope", "[overload]") {
    const Grid& g = ieee118();
    const Membership eq = polytope_membership(equilibrium_angles(g), g);
    CHECK(eq.member);
    CHECK(eq.violators.empty());
    CHECK(polytope_membership(Vector::Zero(118), g).member);

    const Grid tri = triangle();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Trajectory t = random_path(tri, seed);
        const SusceptanceSchedule sched = schedule_for(t);
        bool inside = true;
        for (Eigen::Index k = 0; k < t.grid.steps; ++k) {
            std::vector<double> scale(tri.branch_count());
            for (std::size_t b = 0; b < scale.size(); ++b) scale[b] = sched.scale(b, k);
            inside = inside && polytope_membership(t.angles().col(k), tri, scale).member;
        }
        double total = 0.0;
        for (std::size_t b = 0; b < tri.branch_count(); ++b) total += line_overload(t, tri, b);
        CHECK(inside == (total == 0.0));
    }
}

TEST_CASE("risk zones", "[overload]") {
    CHECK(risk_classify(0.05) == RiskZone::emergency);
    CHECK(risk_classify(0.03) == RiskZone::warning);
    CHECK(risk_classify(0.01) == RiskZone::safe);
    CHECK(risk_classify(0.025) == RiskZone::warning);
    CHECK(risk_classify(0.04) == RiskZone::warning);
    CHECK(risk_zone_from_string(to_string(RiskZone::emergency)) == RiskZone::emergency);
    SafetyPolicy bad;
    bad.warning_lower = 0.5;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}
