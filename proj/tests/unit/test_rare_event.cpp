#include "support.hpp"

#include "dynscreen/cross_entropy.hpp"
#include "dynscreen/errors.hpp"
#include "dynscreen/sweep.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <catch_amalgamated.hpp>

#include <random>

using namespace dynscreen;
using namespace dynscreen::testing;
using Catch::Approx;

namespace {

/// Scores a draw as its duration on every target, with no randomness.
class DurationScorer final : public ScenarioScorer {
public:
    explicit DurationScorer(std::size_t targets = 2) : targets_(targets) {}
    std::size_t target_count() const override { return targets_; }
    double score(const ScenarioDraw& d, Rng&, std::span<double> per) const override {
        for (std::size_t i = 0; i < per.size(); ++i) per[i] = d.branch && *d.branch == i ? d.duration : 0.0;
        return d.duration;
    }

private:
    std::size_t targets_;
};

const DynamicsEngine& toy_engine() {
    static const DynamicsEngine e(triangle(), toy_options());
    return e;
}

const Enumeration& toy_enumeration() {
    static const Enumeration e = enumerate(toy_engine(), kToyLevels);
    return e;
}

double toy_max() {
    double m = 0.0;
    for (const auto& row : toy_enumeration().total)
        for (double s : row) m = std::max(m, s);
    return m;
}

}  // namespace

TEST_CASE("scenario sampling", "[rare_event]") {
    SECTION("one-hot law always faults the same branch") {
        const auto d = ScenarioDistribution::one_hot(10, 7);
        Rng rng(1);
        for (int i = 0; i < 1000; ++i) CHECK(sample_scenario(d, rng).branch == std::optional<std::size_t>(7));
    }
    SECTION("nominal branch frequencies are uniform") {
        const std::size_t m = 186, n = 100000;
        const auto d = ScenarioDistribution::nominal(m);
        std::vector<double> counts(m, 0.0);
        double tau_sum = 0.0, tau_sq = 0.0;
        Rng rng(2);
        for (std::size_t i = 0; i < n; ++i) {
            const ScenarioDraw s = sample_scenario(d, rng);
            counts[*s.branch] += 1.0;
            tau_sum += s.duration;
            tau_sq += s.duration * s.duration;
        }
        const double expect = static_cast<double>(n) / static_cast<double>(m);
        double chi2 = 0.0;
        for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
        const boost::math::chi_squared_distribution<double> law(static_cast<double>(m - 1));
        CHECK(chi2 < boost::math::quantile(boost::math::complement(law, 1e-3)));

        const double mean = tau_sum / static_cast<double>(n);
        const double se = std::sqrt((tau_sq / static_cast<double>(n) - mean * mean) / static_cast<double>(n));
        CHECK(std::abs(mean - 10.0) <= 3.0 * se);
    }
    SECTION("no-fault atom") {
        const auto d = ScenarioDistribution::nominal(4, 0.1, 0.25);
        Rng rng(3);
        int none = 0;
        for (int i = 0; i < 20000; ++i) none += !sample_scenario(d, rng).branch;
        CHECK(none / 20000.0 == Approx(0.25).margin(0.015));
    }
    SECTION("invalid laws are rejected") {
        ScenarioDistribution d = ScenarioDistribution::nominal(3);
        d.weights[0] = 0.9;
        CHECK_THROWS_AS(d.validate(), ContractError);
        d = ScenarioDistribution::nominal(3);
        d.rates[1] = 0.0;
        CHECK_THROWS_AS(d.validate(), ContractError);
    }
}

TEST_CASE("scenario density and likelihood ratio", "[rare_event]") {
    const auto nominal = ScenarioDistribution::nominal(186);
    CHECK(scenario_density(nominal, {5, 0.0}) == Approx(0.1 / 186.0).epsilon(1e-14));
    for (std::size_t a : {0u, 100u}) {
        const double mass = boost::math::quadrature::exp_sinh<double>().integrate(
            [&](double t) { return scenario_density(nominal, {a, t}); }, 0.0, std::numeric_limits<double>::infinity());
        CHECK(mass * 186.0 == Approx(1.0).epsilon(1e-10));
    }
    Rng rng(4);
    for (int i = 0; i < 100; ++i) CHECK(likelihood_ratio(nominal, nominal, sample_scenario(nominal, rng)) == 1.0);

    ScenarioDistribution q = ScenarioDistribution::nominal(3);
    q.weights = {1.0, 0.0, 0.0};
    CHECK_THROWS_AS(scenario_density(q, {1, 1.0}), ContractError);
}

TEST_CASE("likelihood-ratio identity by enumeration", "[rare_event]") {
    const Enumeration& en = toy_enumeration();
    const auto p = ScenarioDistribution::nominal(3, kToyRate);
    ScenarioDistribution q = p;
    q.weights = {0.2, 0.3, 0.5};
    q.rates = {0.2, 1.0, 0.05};
    for (double gamma : {0.0, 0.3, 1.0}) {
        double weighted = 0.0;
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t l = 0; l < kToyLevels.size(); ++l) {
                if (!exceeds(en.total[a][l], gamma, Exceedance::above)) continue;
                auto f = [&](double t) { return scenario_density(q, {a, t}) * likelihood_ratio(p, q, {a, t}); };
                if (l + 1 < kToyLevels.size())
                    weighted += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, kToyLevels[l], kToyLevels[l + 1]);
                else
                    weighted += boost::math::quadrature::exp_sinh<double>().integrate(
                        f, kToyLevels[l], std::numeric_limits<double>::infinity());
            }
        CHECK(std::abs(weighted - exact_probability(en, kToyLevels, kToyRate, gamma, Exceedance::above)) < 1e-12);
    }
}

TEST_CASE("estimator edge cases", "[rare_event]") {
    const DynamicsEngine& e = toy_engine();
    const auto nominal = ScenarioDistribution::nominal(3, kToyRate);
    SweepOptions sw;
    sw.seed = 5;
    const EstimatorResult all = monte_carlo_estimate(e, nominal, -1.0, 500, Target::overall(), sw);
    CHECK(all.estimate == 1.0);
    CHECK(all.standard_error == 0.0);
    const EstimatorResult none = monte_carlo_estimate(e, nominal, 20.5, 500, Target::overall(), sw);
    CHECK(none.estimate == 0.0);
    CHECK(none.standard_error == 0.0);
    CHECK(all.method == "MC");

    const ScenarioPool pool = evaluate_pool(e, nominal, 2000, sw);
    const std::vector<double> ones(pool.size(), 1.0);
    double prev = 1.0;
    for (double g : {0.0, 0.1, 0.5, 1.0, 2.0, 4.0}) {
        const EstimatorResult r = estimate_from_pool(pool, ones, g, Target::overall());
        CHECK(r.estimate <= prev);
        CHECK(r.estimate >= 0.0);
        CHECK(r.ess == Approx(static_cast<double>(pool.size())));
        CHECK(r.standard_error == Approx(std::sqrt(r.estimate * (1 - r.estimate) / pool.size())).margin(1e-15));
        prev = r.estimate;
    }
}

TEST_CASE("Monte Carlo matches enumeration on the toy instance", "[rare_event]") {
    const DynamicsEngine& e = toy_engine();
    const auto nominal = ScenarioDistribution::nominal(3, kToyRate);
    SweepOptions sw;
    sw.seed = 11;
    for (Exceedance rule : {Exceedance::at_least, Exceedance::above})
        for (double g : {0.0, 0.5 * toy_max(), 0.25}) {
            const EstimatorResult r = monte_carlo_estimate(e, nominal, g, 4000, Target::overall(), sw, rule);
            const double exact = exact_probability(toy_enumeration(), kToyLevels, kToyRate, g, rule);
            CHECK(within_se(r.estimate, exact, r.standard_error));
            for (std::size_t pos = 0; pos < 3; ++pos) {
                const EstimatorResult m = monte_carlo_estimate(e, nominal, g, 4000, Target::element(pos), sw, rule);
                CHECK(within_se(m.estimate, exact_probability(toy_enumeration(), kToyLevels, kToyRate, g, rule, pos),
                                m.standard_error));
            }
        }
}

TEST_CASE("cross-entropy update", "[rare_event]") {
    CeOptions o;
    o.mixing = 1.0;
    o.smoothing = 0.0;
    o.rho = 0.5;
    const auto prev = ScenarioDistribution::nominal(4);

    SECTION("all elites on one branch give a one-hot law") {
        std::vector<ScenarioDraw> draws;
        std::vector<double> scores;
        for (int i = 0; i < 40; ++i) {
            const bool hit = i % 2 == 0;
            draws.push_back({hit ? 2u : static_cast<std::size_t>(i % 4), 1.0 + i});
            scores.push_back(hit ? 10.0 : 0.0);
        }
        const CeUpdate up = ce_update(draws, scores, std::vector<double>(40, 1.0), 100.0, prev, o);
        CHECK(up.proposal.weights == std::vector<double>{0.0, 0.0, 1.0, 0.0});
        CHECK(up.level == 10.0);
    }
    SECTION("rate MLE is consistent") {
        std::mt19937_64 rng(12);
        std::exponential_distribution<double> exp2(2.0);
        const std::size_t n = 10000;
        std::vector<ScenarioDraw> draws;
        for (std::size_t i = 0; i < n; ++i) draws.push_back({0, exp2(rng)});
        const std::vector<double> scores(n, 1.0), ratios(n, 1.0);
        const CeUpdate up = ce_update(draws, scores, ratios, 1.0, prev, o);
        CHECK(up.elites == n);
        CHECK(std::abs(up.proposal.rates[0] - 2.0) <= 3.0 * 2.0 / std::sqrt(static_cast<double>(n)));
        CHECK(up.proposal.rates[1] == prev.rates[1]);
    }
    SECTION("rho = 1 takes every sample as elite") {
        o.rho = 1.0;
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> u(0.0, 5.0);
        std::vector<ScenarioDraw> draws;
        std::vector<double> scores, w;
        for (int i = 0; i < 200; ++i) {
            draws.push_back({static_cast<std::size_t>(i % 4), u(rng)});
            scores.push_back(u(rng));
            w.push_back(0.5 + u(rng));
        }
        const CeUpdate up = ce_update(draws, scores, w, 100.0, prev, o);
        CHECK(up.level == *std::ranges::min_element(scores));
        CHECK(up.elites == 200);
        std::vector<double> mass(4, 0.0), mt(4, 0.0);
        double total = 0.0;
        for (int i = 0; i < 200; ++i) {
            mass[*draws[i].branch] += w[i];
            mt[*draws[i].branch] += w[i] * draws[i].duration;
            total += w[i];
        }
        for (std::size_t a = 0; a < 4; ++a) {
            CHECK(up.proposal.weights[a] == Approx(mass[a] / total).epsilon(1e-12));
            CHECK(up.proposal.rates[a] == Approx(mass[a] / mt[a]).epsilon(1e-12));
        }
    }
    SECTION("smoothing keeps every branch in support") {
        o.smoothing = -1.0;
        const std::vector<ScenarioDraw> draws(20, ScenarioDraw{1, 2.0});
        const CeUpdate up = ce_update(draws, std::vector<double>(20, 3.0), std::vector<double>(20, 1.0), 1.0, prev, o);
        for (double w : up.proposal.weights) CHECK(w > 0.0);
        CHECK(std::accumulate(up.proposal.weights.begin(), up.proposal.weights.end(), 0.0) == Approx(1.0));
    }
    SECTION("an empty sample is a contract error") {
        CHECK_THROWS_AS(ce_update({}, {}, {}, 1.0, prev, o), ContractError);
    }
}

TEST_CASE("cross-entropy optimization", "[rare_event]") {
    SweepOptions sw;
    sw.seed = 21;
    SECTION("a sure event stops after one iteration at the sample MLE") {
        const DurationScorer scorer;
        const auto nominal = ScenarioDistribution::nominal(2);
        CeOptions o;
        o.samples = 500;
        const CeOutcome ce = ce_optimize(scorer, nominal, 0.0, o, sw);
        REQUIRE(ce.trace.size() == 1);
        CHECK(ce.converged);
        CHECK(ce.trace[0].elites == 500);
        CHECK(ce.proposal.weights[0] == Approx(0.5).margin(0.1));
    }
    SECTION("separable instance concentrates on the only dangerous branch") {
        const DynamicsEngine e(triangle(), [] {
            EngineOptions o;
            o.stochastic = false;
            return o;
        }());
        const auto nominal = ScenarioDistribution::nominal(3);
        CeOptions o;
        o.samples = 300;
        const CeOutcome ce = ce_optimize(e, nominal, 1.0, o, sw);
        CHECK(ce.reached_level);
        CHECK(ce.proposal.weights[2] >= 0.9);
        CHECK(ce.proposal.rates[2] <= nominal.rates[2]);
    }
    SECTION("iteration budget is honored and flagged") {
        const DurationScorer scorer;
        const auto nominal = ScenarioDistribution::nominal(2);
        CeOptions o;
        o.samples = 200;
        o.max_iterations = 2;
        o.tolerance = 1e-12;
        const EstimatorResult r = cross_entropy_estimate(scorer, nominal, 1e6, o, 100, Target::overall(), sw);
        CHECK_FALSE(r.converged);
        CHECK(r.trace.size() == 2);
        CHECK(r.evaluations == 500);
        CHECK_FALSE(r.warnings.empty());
    }
}

TEST_CASE("importance sampling", "[rare_event]") {
    const DynamicsEngine& e = toy_engine();
    const auto nominal = ScenarioDistribution::nominal(3, kToyRate);
    SweepOptions sw;
    sw.seed = 31;
    SECTION("nominal proposal reproduces Monte Carlo") {
        const EstimatorResult mc = monte_carlo_estimate(e, nominal, 1.0, 1000, Target::overall(), sw);
        const EstimatorResult is = importance_estimate(e, nominal, nominal, 1.0, 1000, Target::overall(), sw);
        CHECK(is.estimate == mc.estimate);
        CHECK(is.standard_error == mc.standard_error);
        CHECK(is.method == "CE-IS");
    }
    SECTION("cross-entropy estimate matches enumeration") {
        CeOptions o;
        o.samples = 500;
        for (Exceedance rule : {Exceedance::at_least, Exceedance::above})
            for (double g : {0.0, 0.5 * toy_max()}) {
                o.rule = rule;
                const EstimatorResult r = cross_entropy_estimate(e, nominal, g, o, 2000, Target::overall(), sw);
                const double exact = exact_probability(toy_enumeration(), kToyLevels, kToyRate, g, rule);
                CHECK(within_se(r.estimate, exact, r.standard_error));
                CHECK(r.estimate <= 1.0);
                CHECK(r.ess <= static_cast<double>(r.samples) + 1e-9);
            }
    }
}

TEST_CASE("sweep determinism", "[rare_event]") {
    const DynamicsEngine e(triangle(), EngineOptions{});
    const auto nominal = ScenarioDistribution::nominal(3);
    SweepOptions sw;
    sw.seed = 41;
    const ScenarioPool serial = evaluate_pool_serial(e, nominal, 300, sw);
    for (int workers : {1, 2, 4}) {
        sw.workers = workers;
        const ScenarioPool par = evaluate_pool(e, nominal, 300, sw);
        CHECK(par.draws == serial.draws);
        CHECK(par.totals == serial.totals);
        CHECK(par.per_target == serial.per_target);
    }
    sw.stream = 1;
    CHECK(evaluate_pool(e, nominal, 300, sw).totals != serial.totals);
}
