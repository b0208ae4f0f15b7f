#include "support.hpp"

#include "dynscreen/config.hpp"
#include "dynscreen/errors.hpp"
#include "dynscreen/report.hpp"
#include "dynscreen/screening.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dynscreen;
using namespace dynscreen::testing;
using Catch::Approx;
using nlohmann::json;

namespace {

ScreeningConfig toy_config(Sampler sampler = Sampler::monte_carlo) {
    ScreeningConfig c;
    c.grid_path = data_path("fixtures/triangle3.json");
    c.engine = toy_options();
    c.rate = kToyRate;
    c.gammas = {0.0, 0.25, 1.0};
    c.policy.t_star = 0.1;
    c.sampler = sampler;
    c.ce.samples = 400;
    c.samples = 3000;
    c.seed = 17;
    c.top_k = 50;
    c.curve_bin = 0.5;
    c.curve_max_tau = 5.0;
    return c;
}

const ScreeningRun& toy_run(Sampler sampler) {
    static const ScreeningRun mc = run_screening(toy_config(Sampler::monte_carlo));
    static const ScreeningRun ce = run_screening(toy_config(Sampler::cross_entropy));
    return sampler == Sampler::monte_carlo ? mc : ce;
}

/// Pool with `targets` elements where sample i faults branch i % branches
/// and scores `score(i, target)`.
template <class F>
ScenarioPool make_pool(std::size_t n, std::size_t branches, std::size_t targets, F score) {
    ScenarioPool p;
    p.targets = targets;
    for (std::size_t i = 0; i < n; ++i) {
        p.draws.push_back({i % branches, 1.0});
        double total = 0.0;
        for (std::size_t t = 0; t < targets; ++t) {
            const double s = score(i, t);
            p.per_target.push_back(s);
            total += s;
        }
        p.totals.push_back(total);
    }
    return p;
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

TEST_CASE("config parsing", "[screening]") {
    const ScreeningConfig c = config_from_json(json::parse(R"({
        "grid": "g.json", "horizon": 10, "dt": 0.02, "rate": 0.2, "gammas": [0, 1],
        "noise": {"model": "deterministic"}, "backend": "dense", "monitored": [0, 2],
        "sampler": "mc", "samples": 50, "seed": 9, "workers": 2,
        "ce": {"rho": 0.2, "rule": "above", "cap_rates": false},
        "policy": {"t_star": 0.5}, "curves": {"bin": 0.2, "max_tau": 3}, "output": {"json": "r.json"}})"));
    CHECK(c.grid_path == "g.json");
    CHECK(c.engine.horizon == 10.0);
    CHECK(c.engine.dt == 0.02);
    CHECK_FALSE(c.engine.stochastic);
    CHECK(c.engine.backend == StepBackend::dense);
    CHECK(c.case_options.monitored == std::vector<std::size_t>{0, 2});
    CHECK(c.sampler == Sampler::monte_carlo);
    CHECK(c.ce.rule == Exceedance::above);
    CHECK_FALSE(c.ce.cap_rates);
    CHECK(c.policy.t_star == 0.5);
    CHECK(c.curve_max_tau == 3.0);
    CHECK(c.output_json == "r.json");

    CHECK(config_from_json(config_to_json(c)).samples == 50);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"bogus": 1})")), ParseError);
    CHECK_THROWS_AS(config_from_json(json::parse(R"({"ce": {"rho": "x"}})")), ParseError);

    ScreeningConfig zero = toy_config();
    zero.samples = 0;
    CHECK_THROWS_AS(zero.validate(), ContractError);
    CHECK_THROWS_AS(run_screening(zero), ContractError);
}

TEST_CASE("config hash ignores runtime fields only", "[screening]") {
    const ScreeningConfig a = toy_config();
    const Grid g = load_config_grid(a);
    ScreeningConfig b = a;
    b.workers = 7;
    b.output_json = "elsewhere.json";
    CHECK(config_hash(a, g) == config_hash(b, g));
    b.seed = 99;
    CHECK(config_hash(a, g) != config_hash(b, g));
    CHECK(config_hash(a, g).size() == 16);
}

TEST_CASE("toy screening matches enumeration entrywise", "[screening]") {
    const RiskReport& r = toy_run(Sampler::monte_carlo).report;
    const DynamicsEngine engine(triangle(), toy_options());
    const Enumeration en = enumerate(engine, kToyLevels);
    const double n = static_cast<double>(r.samples);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t pos = 0; pos < r.monitored.size(); ++pos) {
            const double exact = exact_probability(en, kToyLevels, kToyRate, r.policy.t_star, r.rule, pos, a);
            const double q = r.joint_at(a, pos);
            CHECK(within_se(q, exact, std::sqrt(std::max(q * (1 - q), 1.0 / n) / n)));
        }
    for (std::size_t pos = 0; pos < r.monitored.size(); ++pos) {
        const double exact = exact_probability(en, kToyLevels, kToyRate, r.policy.t_star, r.rule, pos);
        CHECK(within_se(r.marginal[pos].probability, exact, r.marginal[pos].standard_error));
        CHECK(r.marginal[pos].zone == risk_classify(r.marginal[pos].probability, r.policy));
    }
    for (const GlobalRisk& g : r.global)
        CHECK(within_se(g.probability, exact_probability(en, kToyLevels, kToyRate, g.gamma, r.rule), g.standard_error));
}

TEST_CASE("cross-entropy screening agrees with enumeration", "[screening]") {
    const RiskReport& r = toy_run(Sampler::cross_entropy).report;
    CHECK(r.ce.used);
    CHECK(r.evaluations == r.samples + r.ce.evaluations);
    const DynamicsEngine engine(triangle(), toy_options());
    const Enumeration en = enumerate(engine, kToyLevels);
    for (std::size_t pos = 0; pos < r.monitored.size(); ++pos)
        CHECK(within_se(r.marginal[pos].probability,
                        exact_probability(en, kToyLevels, kToyRate, r.policy.t_star, r.rule, pos),
                        r.marginal[pos].standard_error));
    for (const GlobalRisk& g : r.global)
        CHECK(within_se(g.probability, exact_probability(en, kToyLevels, kToyRate, g.gamma, r.rule), g.standard_error));
}

TEST_CASE("report structure", "[screening]") {
    const RiskReport& r = toy_run(Sampler::monte_carlo).report;
    CHECK(r.joint.size() == r.branches * r.monitored.size());
    CHECK(r.marginal.size() == r.monitored.size());
    CHECK(r.faulted_ranking.size() == r.branches);
    CHECK(r.vulnerability_ranking.size() == r.monitored.size());
    CHECK(r.top_scenarios.size() == 50);
    CHECK(r.curves.bins() == 10);
    CHECK(r.global.size() == 3);
    for (std::size_t i = 1; i < r.top_scenarios.size(); ++i)
        CHECK(r.top_scenarios[i - 1].overload >= r.top_scenarios[i].overload);
    double mass = 0.0;
    for (double m : r.curves.mass) mass += m;
    CHECK(mass <= 1.0 + 1e-12);
    CHECK(r.model == "deterministic");
    CHECK_FALSE(r.degraded);
}

TEST_CASE("report JSON round trip", "[screening]") {
    for (Sampler s : {Sampler::monte_carlo, Sampler::cross_entropy}) {
        const RiskReport& r = toy_run(s).report;
        const std::string text = emit_report_json(r);
        CHECK(parse_report_json(text) == r);
        CHECK(emit_report_json(parse_report_json(text)) == text);
    }
    CHECK_THROWS_AS(parse_report_json("[]"), ParseError);
}

TEST_CASE("report files", "[screening]") {
    const RiskReport& r = toy_run(Sampler::monte_carlo).report;
    const auto dir = std::filesystem::temp_directory_path() / "dynscreen_test_report";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "r.json").string();
    write_report_json(r, path, Timings{1, 2, 3, 6});
    CHECK(load_report(path) == r);
    std::ifstream in(path);
    const json doc = json::parse(in);
    CHECK(doc["metadata"]["timings"]["total_seconds"] == 6.0);
    write_report_csv(r, (dir / "r").string());
    CHECK(std::filesystem::exists(dir / "r_marginal.csv"));
    CHECK(std::filesystem::exists(dir / "r_matrix.csv"));
    CHECK_THROWS_AS(write_report_json(r, "/nonexistent-dir/x.json"), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("CSV zones agree with the JSON probabilities", "[screening]") {
    const RiskReport& r = toy_run(Sampler::cross_entropy).report;
    const RiskReport back = parse_report_json(emit_report_json(r));
    const auto rows = read_csv(report_to_csv(r).marginal);
    REQUIRE(rows.size() == r.monitored.size() + 1);
    const auto& head = rows[0];
    const auto col = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(head.begin(), head.end(), name) - head.begin());
    };
    for (std::size_t i = 0; i < r.monitored.size(); ++i) {
        const auto& row = rows[i + 1];
        CHECK(std::stoul(row[col("branch")]) == back.marginal[i].branch);
        CHECK(row[col("zone")] == to_string(risk_classify(back.marginal[i].probability, back.policy)));
    }
}

TEST_CASE("curves endpoint payload", "[screening]") {
    const RiskReport& r = toy_run(Sampler::monte_carlo).report;
    const json c = curves_to_json(r, 1);
    CHECK(c["branch"] == 1);
    CHECK(c["probability"].size() == r.curves.bins());
    CHECK_THROWS_AS(curves_to_json(r, 99), ReferenceError);
}

TEST_CASE("empty monitored set gives a valid empty report", "[screening]") {
    ScreeningConfig c = toy_config();
    c.case_options.monitored = std::vector<std::size_t>{};
    c.samples = 100;
    const RiskReport r = run_screening(c).report;
    CHECK(r.monitored.empty());
    CHECK(r.joint.empty());
    CHECK(r.marginal.empty());
    CHECK(r.positive_overload_branches == 0);
    CHECK(parse_report_json(emit_report_json(r)) == r);
}

TEST_CASE("screening is invariant to worker count", "[screening]") {
    ScreeningConfig c = toy_config(Sampler::cross_entropy);
    c.engine = EngineOptions{};
    c.samples = 600;
    c.ce.samples = 200;
    c.workers = 1;
    const RiskReport one = run_screening(c).report;
    c.workers = 3;
    const RiskReport three = run_screening(c).report;
    CHECK(one == three);
    CHECK(emit_report_json(one) == emit_report_json(three));
}

TEST_CASE("faulted-line ranking", "[screening]") {
    SECTION("only branch 2 causes overloads") {
        const ScenarioPool p = make_pool(60, 4, 3, [](std::size_t i, std::size_t t) {
            return i % 4 == 2 && t == 0 ? 2.0 : 0.0;
        });
        const auto rank = rank_faulted_lines(p, std::vector<double>(60, 1.0), 4, 1.0);
        REQUIRE(rank.size() == 4);
        CHECK(rank[0].branch == 2);
        CHECK(rank[0].probability == Approx(0.25));
        for (std::size_t i = 1; i < 4; ++i) {
            CHECK(rank[i].probability == 0.0);
            CHECK(rank[i].mean_overload == 0.0);
        }
        CHECK(rank[1].branch == 0);
        CHECK(rank[2].branch == 1);
        CHECK(rank[3].branch == 3);
    }
    SECTION("no overloads keep index order") {
        const ScenarioPool p = make_pool(30, 5, 2, [](std::size_t, std::size_t) { return 0.0; });
        const auto rank = rank_faulted_lines(p, std::vector<double>(30, 1.0), 5, 1.0);
        for (std::size_t i = 0; i < 5; ++i) CHECK(rank[i].branch == i);
    }
}

TEST_CASE("vulnerable-element ranking", "[screening]") {
    const std::vector<std::size_t> monitored{4, 7, 9};
    const std::vector<bool> transformer{false, true, false};
    SECTION("single overloading element comes first") {
        const ScenarioPool p = make_pool(40, 3, 3, [](std::size_t i, std::size_t t) {
            return t == 1 && i % 2 == 0 ? 3.0 : 0.0;
        });
        const std::vector<double> q{0.0, 0.5, 0.0};
        const auto rank = rank_vulnerable_elements(p, monitored, q, transformer, 10, 1.0);
        CHECK(rank[0].branch == 7);
        CHECK(rank[0].transformer);
        CHECK(rank[0].recurrences == 10);
        CHECK(rank[1].recurrences == 0);
    }
    SECTION("recurrences are bounded by K times the monitored count") {
        const ScenarioPool p = make_pool(100, 3, 3, [](std::size_t i, std::size_t t) {
            return static_cast<double>((i * 7 + t * 3) % 5);
        });
        const std::vector<double> q{0.1, 0.2, 0.3};
        for (std::size_t k : {1u, 10u, 100u, 500u}) {
            const auto rank = rank_vulnerable_elements(p, monitored, q, transformer, k, 2.0);
            std::size_t sum = 0;
            for (const auto& v : rank) sum += v.recurrences;
            CHECK(sum <= std::min<std::size_t>(k, 100) * monitored.size());
        }
    }
    SECTION("top scenarios break ties by index") {
        const ScenarioPool p = make_pool(6, 2, 1, [](std::size_t i, std::size_t) { return i < 3 ? 1.0 : 2.0; });
        CHECK(top_scenarios(p, 4) == std::vector<std::size_t>{3, 4, 5, 0});
    }
}
