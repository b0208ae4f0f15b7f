#include "dynscreen/case_io.hpp"
#include "dynscreen/config.hpp"
#include "dynscreen/cross_entropy.hpp"
#include "dynscreen/engine.hpp"
#include "dynscreen/errors.hpp"
#include "dynscreen/screening.hpp"
#include "dynscreen/service.hpp"
#include "dynscreen/trajectory_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>

using namespace dynscreen;
using nlohmann::json;

namespace {

/// Flags shared by the commands that build an engine; each one overrides the
/// corresponding config-file field only when given.
struct ConfigFlags {
    std::string config_path;
    std::string grid;
    std::optional<double> horizon, dt, rate, noise_scale, t_star, rho, curve_bin, curve_max_tau, margin, min_limit, inertia, damping;
    std::optional<std::string> model, backend, sampler, rule;
    std::vector<double> gammas;
    std::vector<std::size_t> monitored;
    std::optional<std::size_t> samples, ce_samples, top_k;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers, ce_iterations;
    std::optional<std::string> out_json, out_csv;

    void add(CLI::App& app, bool outputs) {
        app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        app.add_option("-g,--grid", grid, "grid file (.m case or .json)");
        app.add_option("--horizon", horizon, "simulation horizon T [s]");
        app.add_option("--dt", dt, "time step [s]");
        app.add_option("--rate", rate, "nominal fault-duration rate lambda [1/s]");
        app.add_option("--model", model, "stochastic | deterministic");
        app.add_option("--noise-scale", noise_scale, "sigma_ij / beta_ij");
        app.add_option("--backend", backend, "modal | action | dense");
        app.add_option("--gammas", gammas, "gamma list [s]")->delimiter(',');
        app.add_option("--t-star", t_star, "per-element overload threshold T* [s]");
        app.add_option("--samples,-N", samples, "final sample count N");
        app.add_option("--sampler", sampler, "ce | mc");
        app.add_option("--ce-samples", ce_samples, "samples per cross-entropy iteration");
        app.add_option("--ce-iterations", ce_iterations, "cross-entropy iteration cap");
        app.add_option("--rho", rho, "elite fraction");
        app.add_option("--rule", rule, "exceedance rule: at_least | above");
        app.add_option("--seed", seed, "master seed");
        app.add_option("--workers,-j", workers, "worker threads (0: all)");
        app.add_option("--monitored", monitored, "monitored branch indices")->delimiter(',');
        app.add_option("--limit-margin", margin, "thermal limit margin over base flow");
        app.add_option("--min-limit", min_limit, "thermal limit floor [p.u.]");
        app.add_option("--inertia-per-rating", inertia, "generator inertia per unit rating");
        app.add_option("--damping-per-rating", damping, "generator damping per unit rating");
        if (outputs) {
            app.add_option("--top-k", top_k, "top scenarios for the vulnerability ranking");
            app.add_option("--curve-bin", curve_bin, "tau bin width for curves [s]");
            app.add_option("--curve-max-tau", curve_max_tau, "curve range [s]");
            app.add_option("-o,--out", out_json, "report JSON path");
            app.add_option("--csv", out_csv, "CSV prefix");
        }
    }

    [[nodiscard]] ScreeningConfig resolve() const {
        ScreeningConfig c = config_path.empty() ? ScreeningConfig{} : load_config(config_path);
        if (!grid.empty()) c.grid_path = grid;
        if (horizon) c.engine.horizon = *horizon;
        if (dt) c.engine.dt = *dt;
        if (rate) c.rate = *rate;
        if (model) {
            if (*model != "stochastic" && *model != "deterministic")
                throw ParseError("--model expects stochastic or deterministic");
            c.engine.stochastic = *model == "stochastic";
        }
        if (noise_scale) c.engine.noise_scale = *noise_scale;
        if (backend) c.engine.backend = step_backend_from_string(*backend);
        if (!gammas.empty()) c.gammas = gammas;
        if (t_star) c.policy.t_star = *t_star;
        if (samples) c.samples = *samples;
        if (sampler) c.sampler = sampler_from_string(*sampler);
        if (ce_samples) c.ce.samples = *ce_samples;
        if (ce_iterations) c.ce.max_iterations = *ce_iterations;
        if (rho) c.ce.rho = *rho;
        if (rule) c.ce.rule = exceedance_from_string(*rule);
        if (seed) c.seed = *seed;
        if (workers) c.workers = *workers;
        if (!monitored.empty()) c.case_options.monitored = monitored;
        if (margin) c.case_options.limit_margin = *margin;
        if (min_limit) c.case_options.min_limit = *min_limit;
        if (inertia) c.case_options.generator_inertia_per_rating = *inertia;
        if (damping) c.case_options.generator_damping_per_rating = *damping;
        if (top_k) c.top_k = *top_k;
        if (curve_bin) c.curve_bin = *curve_bin;
        if (curve_max_tau) c.curve_max_tau = *curve_max_tau;
        if (out_json) c.output_json = *out_json;
        if (out_csv) c.output_csv = *out_csv;
        c.validate();
        return c;
    }
};

void write_json(const json& doc, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << doc.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << doc.dump(2) << '\n';
}

json distribution_json(const ScenarioDistribution& d) {
    return {{"weights", d.weights}, {"rates", d.rates}, {"no_fault", d.no_fault}};
}

json estimate_json(const EstimatorResult& r, bool trace) {
    json doc = {{"method", r.method},   {"gamma", r.gamma},       {"estimate", r.estimate},
                {"standard_error", r.standard_error}, {"ess", r.ess}, {"samples", r.samples},
                {"evaluations", r.evaluations},       {"failed", r.failed}, {"converged", r.converged},
                {"warnings", r.warnings}};
    if (!r.trace.empty()) {
        json its = json::array();
        for (const auto& it : r.trace) {
            json j = {{"iteration", it.iteration}, {"level", it.level}, {"elites", it.elites}, {"change", it.change}};
            if (trace) j["proposal"] = distribution_json(it.proposal);
            its.push_back(std::move(j));
        }
        doc["iterations"] = std::move(its);
    }
    return doc;
}

ScreeningService* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

int cmd_parse(const std::string& path, const std::string& out, double margin) {
    CaseOptions opts;
    opts.limit_margin = margin;
    const Grid grid = load_grid(path, opts);
    std::cerr << "grid: " << grid.bus_count() << " buses, " << grid.branch_count() << " branches, "
              << grid.monitored().size() << " monitored, reference bus " << grid.reference_bus() << '\n';
    const std::string text = emit_grid_json(grid);
    if (out.empty() || out == "-") std::cout << text;
    else {
        std::ofstream f(out);
        if (!f) throw Error("cannot write '" + out + "'");
        f << text;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynscreen: dynamic N-1 contingency screening"};
    app.require_subcommand(1);

    auto* parse = app.add_subcommand("parse", "validate a grid and emit the native JSON form");
    std::string parse_path, parse_out;
    double parse_margin = CaseOptions{}.limit_margin;
    parse->add_option("grid", parse_path, "grid file")->required()->check(CLI::ExistingFile);
    parse->add_option("-o,--out", parse_out, "output JSON path (default stdout)");
    parse->add_option("--limit-margin", parse_margin, "thermal limit margin over base flow");

    auto* simulate = app.add_subcommand("simulate", "propagate one fault scenario");
    ConfigFlags sim_flags;
    sim_flags.add(*simulate, false);
    std::optional<std::size_t> sim_branch;
    double sim_tau = 0.0;
    std::optional<double> sim_sigma;
    std::uint64_t sim_noise_seed = 0;
    std::string sim_csv, sim_bin, sim_summary;
    simulate->add_option("-b,--branch", sim_branch, "faulted branch index (omit for no fault)");
    simulate->add_option("-t,--tau", sim_tau, "fault duration [s]");
    simulate->add_option("--sigma", sim_sigma, "absolute noise strength (default noise-scale * beta)");
    simulate->add_option("--noise-seed", sim_noise_seed, "seed of the noise path");
    simulate->add_option("--csv", sim_csv, "trajectory CSV output");
    simulate->add_option("--bin", sim_bin, "trajectory binary output");
    simulate->add_option("-o,--out", sim_summary, "overload summary JSON (default stdout)");

    auto* estimate = app.add_subcommand("estimate", "estimate P[S >= gamma] for a gamma list");
    ConfigFlags est_flags;
    est_flags.add(*estimate, false);
    std::string est_out, est_trace;
    estimate->add_option("-o,--out", est_out, "result JSON (default stdout)");
    estimate->add_option("--trace", est_trace, "write the per-iteration cross-entropy proposals here");

    auto* screen = app.add_subcommand("screen", "full N-1 sweep to a risk report");
    ConfigFlags scr_flags;
    scr_flags.add(*screen, true);
    bool scr_quiet = false;
    screen->add_flag("-q,--quiet", scr_quiet, "no progress output");

    auto* serve = app.add_subcommand("serve", "serve the JSON API");
    ConfigFlags srv_flags;
    srv_flags.add(*serve, true);
    std::string srv_host = "127.0.0.1", srv_report;
    int srv_port = 8080;
    bool srv_no_screen = false;
    std::size_t srv_sync = ServiceOptions{}.sync_limit;
    serve->add_option("--host", srv_host, "bind address");
    serve->add_option("--port", srv_port, "port (0: any)");
    serve->add_option("--report", srv_report, "publish this report file at startup")->check(CLI::ExistingFile);
    serve->add_flag("--no-screen", srv_no_screen, "do not start a screening run");
    serve->add_option("--sync-limit", srv_sync, "largest what-if N answered synchronously");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*parse) return cmd_parse(parse_path, parse_out, parse_margin);

        if (*simulate) {
            const ScreeningConfig cfg = sim_flags.resolve();
            const DynamicsEngine engine(load_config_grid(cfg), cfg.engine);
            Rng rng = make_stream(sim_noise_seed, 0, 0);
            const ScenarioDraw draw{sim_branch, sim_tau};
            const Trajectory traj = engine.simulate(draw, rng, sim_sigma);
            if (!sim_csv.empty()) save_trajectory(sim_csv, traj);
            if (!sim_bin.empty()) {
                std::ofstream f(sim_bin, std::ios::binary);
                if (!f) throw Error("cannot write '" + sim_bin + "'");
                write_trajectory_binary(f, traj);
            }
            const OverloadResult ov = evaluate_overloads(traj, engine.grid(), engine.monitored());
            json per = json::array();
            for (std::size_t e = 0; e < ov.branches.size(); ++e)
                if (ov.seconds[e] > 0.0)
                    per.push_back({{"branch", ov.branches[e]}, {"seconds", ov.seconds[e]},
                                   {"max_ratio", ov.max_ratio[e]}});
            write_json({{"faulted_branch", sim_branch ? json(*sim_branch) : json(nullptr)},
                        {"tau", sim_tau},
                        {"effective_tau", engine.effective_duration(sim_tau)},
                        {"sigma", traj.scenario.noise_strength},
                        {"overload", ov.total},
                        {"overloaded", std::move(per)}},
                       sim_summary);
            return 0;
        }

        if (*estimate) {
            const ScreeningConfig cfg = est_flags.resolve();
            const DynamicsEngine engine(load_config_grid(cfg), cfg.engine);
            const auto nominal = ScenarioDistribution::nominal(engine.grid().branch_count(), cfg.rate, cfg.no_fault);
            SweepOptions sweep;
            sweep.seed = cfg.seed;
            sweep.workers = cfg.workers;
            json results = json::array();
            json traces = json::array();
            // Plain Monte Carlo scores one pool for the whole gamma list.
            std::optional<ScenarioPool> pool;
            if (cfg.sampler == Sampler::monte_carlo) {
                sweep.keep_targets = false;
                pool = evaluate_pool(engine, nominal, cfg.samples, sweep);
            }
            for (double g : cfg.gammas) {
                EstimatorResult r;
                if (pool) {
                    r = estimate_from_pool(*pool, std::vector<double>(pool->size(), 1.0), g, Target::overall(),
                                           cfg.ce.rule);
                    r.method = "MC";
                } else {
                    r = cross_entropy_estimate(engine, nominal, g, cfg.ce, cfg.samples, Target::overall(), sweep);
                }
                results.push_back(estimate_json(r, false));
                if (!est_trace.empty()) traces.push_back(estimate_json(r, true));
                std::cerr << r.method << " gamma=" << g << " Q=" << r.estimate << " se=" << r.standard_error
                          << " evaluations=" << r.evaluations << '\n';
            }
            write_json({{"config_hash", config_hash(cfg, engine.grid())}, {"results", std::move(results)}}, est_out);
            if (!est_trace.empty()) write_json(traces, est_trace);
            return 0;
        }

        if (*screen) {
            const ScreeningConfig cfg = scr_flags.resolve();
            ProgressFn progress;
            if (!scr_quiet)
                progress = [](std::string_view phase, double f) {
                    std::cerr << (f == 0.0 ? "start " : "done  ") << phase << '\n';
                };
            const ScreeningRun run = run_screening(cfg, progress);
            if (!cfg.output_json.empty()) write_report_json(run.report, cfg.output_json, run.timings);
            else std::cout << emit_report_json(run.report);
            if (!cfg.output_csv.empty()) write_report_csv(run.report, cfg.output_csv);
            const RiskReport& r = run.report;
            std::cerr << "screened " << r.branches << " branches, N=" << r.samples << ", evaluations "
                      << r.evaluations << ", emergency " << r.zone_members(RiskZone::emergency).size()
                      << ", warning " << r.zone_members(RiskZone::warning).size() << ", positive S "
                      << r.positive_overload_branches << (r.degraded ? " [degraded]" : "") << '\n'
                      << "timings: cache " << run.timings.cache_seconds << " s, ce " << run.timings.ce_seconds
                      << " s, sweep " << run.timings.sweep_seconds << " s, total " << run.timings.total_seconds
                      << " s\n";
            return 0;
        }

        if (*serve) {
            const ScreeningConfig cfg = srv_flags.resolve();
            auto engine = std::make_shared<const DynamicsEngine>(load_config_grid(cfg), cfg.engine);
            ServiceOptions opts;
            opts.sync_limit = srv_sync;
            ScreeningService service(engine, cfg, opts);
            if (!srv_report.empty()) service.publish(load_report(srv_report));
            if (!srv_no_screen) service.start_screening();
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "serving on " << srv_host << ':' << srv_port << '\n';
            service.listen(srv_host, srv_port);
            g_service = nullptr;
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
