#include "dynscreen/service.hpp"

#include "dynscreen/case_io.hpp"
#include "dynscreen/errors.hpp"
#include "dynscreen/estimator.hpp"
#include "dynscreen/rng.hpp"
#include "dynscreen/screening.hpp"

#include <httplib.h>
#include <omp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>

namespace dynscreen {

using nlohmann::json;

namespace {

constexpr std::uint64_t kWhatIfStream = 0x7768617469660000ULL;

json versioned(json body) {
    body["api_version"] = kApiVersion;
    return body;
}

template <class T>
T field(const json& doc, const char* key, T fallback) {
    if (!doc.contains(key) || doc[key].is_null()) return fallback;
    try {
        return doc[key].get<T>();
    } catch (const json::exception&) {
        throw ParseError(std::string("field '") + key + "' has the wrong type");
    }
}

json estimate_json(const EstimatorResult& r) {
    return {{"method", r.method},
            {"gamma", r.gamma},
            {"estimate", r.estimate},
            {"standard_error", r.standard_error},
            {"ess", r.ess},
            {"samples", r.samples},
            {"evaluations", r.evaluations},
            {"failed", r.failed},
            {"warnings", r.warnings}};
}

}  // namespace

json error_payload(std::string_view code, std::string_view message) {
    return versioned({{"error", {{"code", std::string(code)}, {"message", std::string(message)}}}});
}

WhatIfRequest WhatIfRequest::from_json(const json& doc) {
    if (!doc.is_object()) throw ParseError("request body must be a JSON object");
    static const std::vector<std::string> known{"faulted_branch", "tau", "sigma", "sigma_scale", "gamma", "N",
                                                "samples", "seed"};
    for (const auto& [k, v] : doc.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw ParseError("unknown field '" + k + "'");
    if (!doc.contains("faulted_branch")) throw ParseError("field 'faulted_branch' is required");
    if (!doc.contains("tau")) throw ParseError("field 'tau' is required");
    WhatIfRequest r;
    const json& fb = doc["faulted_branch"];
    if (!fb.is_number_integer() || fb.get<long long>() < 0)
        throw ParseError("field 'faulted_branch' must be a non-negative integer");
    r.faulted_branch = fb.get<std::size_t>();
    r.tau = field<double>(doc, "tau", 0.0);
    if (!(r.tau >= 0.0) || !std::isfinite(r.tau)) throw ParseError("field 'tau' must be finite and >= 0");
    if (doc.contains("sigma") && !doc["sigma"].is_null()) {
        r.sigma = field<double>(doc, "sigma", 0.0);
        if (!(*r.sigma >= 0.0) || !std::isfinite(*r.sigma)) throw ParseError("field 'sigma' must be finite and >= 0");
    }
    r.sigma_scale = field<double>(doc, "sigma_scale", 1.0);
    if (!(r.sigma_scale >= 0.0) || !std::isfinite(r.sigma_scale))
        throw ParseError("field 'sigma_scale' must be finite and >= 0");
    r.gamma = field<double>(doc, "gamma", 1.0);
    if (!(r.gamma >= 0.0) || !std::isfinite(r.gamma)) throw ParseError("field 'gamma' must be finite and >= 0");
    const char* nkey = doc.contains("N") ? "N" : "samples";
    if (doc.contains(nkey)) {
        const json& n = doc[nkey];
        if (!n.is_number_integer() || n.get<long long>() < 1)
            throw ParseError(std::string("field '") + nkey + "' must be an integer >= 1");
        r.samples = n.get<std::size_t>();
    }
    if (doc.contains("seed") && !doc["seed"].is_null()) {
        if (!doc["seed"].is_number_unsigned()) throw ParseError("field 'seed' must be a non-negative integer");
        r.seed = doc["seed"].get<std::uint64_t>();
    }
    return r;
}

json WhatIfRequest::to_json() const {
    json doc = {{"faulted_branch", faulted_branch}, {"tau", tau},    {"sigma_scale", sigma_scale},
                {"gamma", gamma},                   {"N", samples}};
    doc["sigma"] = sigma ? json(*sigma) : json(nullptr);
    doc["seed"] = seed ? json(*seed) : json(nullptr);
    return doc;
}

json run_whatif(const DynamicsEngine& engine, const WhatIfRequest& req, std::uint64_t master,
                const SafetyPolicy& policy, int threads) {
    const Grid& grid = engine.grid();
    if (req.faulted_branch >= grid.branch_count())
        throw ReferenceError("faulted branch " + std::to_string(req.faulted_branch) + " does not exist");
    const double beta = grid.branches()[req.faulted_branch].susceptance;
    const double sigma = req.sigma.value_or(req.sigma_scale * beta);
    const std::uint64_t seed = derive_seed(req.seed.value_or(master), kWhatIfStream, fnv1a64(req.to_json().dump()));
    const ScenarioDraw draw{req.faulted_branch, req.tau};

    ScenarioPool pool;
    pool.targets = engine.target_count();
    pool.draws.assign(req.samples, draw);
    pool.totals.assign(req.samples, 0.0);
    std::vector<std::string> errors(req.samples);
    const auto count = static_cast<long long>(req.samples);
#pragma omp parallel num_threads(std::max(threads, 1))
    {
        std::vector<double> row(pool.targets);
#pragma omp for schedule(dynamic, 8)
        for (long long i = 0; i < count; ++i) {
            const auto k = static_cast<std::size_t>(i);
            Rng rng = make_stream(seed, 0, k);
            try {
                pool.totals[k] = engine.score_with_noise(draw, sigma, rng, row);
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        }
    }
    for (std::size_t k = 0; k < errors.size(); ++k)
        if (!errors[k].empty()) pool.failures.push_back({k, errors[k]});
    const std::vector<double> w(pool.size(), 1.0);
    EstimatorResult est = estimate_from_pool(pool, w, req.gamma, Target::overall());
    est.method = "MC";

    Rng rng = make_stream(seed, 0, 0);
    const Trajectory traj = engine.simulate(draw, rng, sigma);
    const OverloadResult ov = evaluate_overloads(traj, grid, engine.monitored());
    std::vector<std::size_t> order(ov.branches.size());
    for (std::size_t e = 0; e < order.size(); ++e) order[e] = e;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ov.seconds[a] != ov.seconds[b] ? ov.seconds[a] > ov.seconds[b] : ov.max_ratio[a] > ov.max_ratio[b];
    });
    json top = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(order.size(), 10); ++i) {
        const std::size_t e = order[i];
        top.push_back({{"branch", ov.branches[e]}, {"seconds", ov.seconds[e]}, {"max_ratio", ov.max_ratio[e]}});
    }
    const double peak = ov.max_ratio.empty() ? 0.0 : *std::max_element(ov.max_ratio.begin(), ov.max_ratio.end());

    return versioned({{"request", req.to_json()},
                      {"seed", seed},
                      {"sigma", sigma},
                      {"effective_tau", engine.effective_duration(req.tau)},
                      {"result", estimate_json(est)},
                      {"zone", std::string(to_string(risk_classify(est.estimate, policy)))},
                      {"trajectory",
                       {{"overload", ov.total},
                        {"peak_ratio", peak},
                        {"overloaded_branches",
                         std::count_if(ov.seconds.begin(), ov.seconds.end(), [](double s) { return s > 0.0; })},
                        {"top_branches", std::move(top)}}}});
}

ScreeningService::ScreeningService(std::shared_ptr<const DynamicsEngine> engine, ScreeningConfig config,
                                   ServiceOptions options)
    : engine_(std::move(engine)), config_(std::move(config)), options_(options) {
    if (!engine_) throw ContractError("service needs an engine");
    server_ = std::make_unique<httplib::Server>();
    install_routes();
    for (int i = 0; i < std::max(options_.job_workers, 1); ++i) workers_.emplace_back([this] { worker_loop(); });
}

ScreeningService::~ScreeningService() {
    stop();
    {
        std::lock_guard lock(jobs_mutex_);
        stopping_ = true;
    }
    jobs_cv_.notify_all();
    for (auto& t : workers_) t.join();
    if (screening_thread_.joinable()) screening_thread_.join();
}

void ScreeningService::publish(RiskReport report) {
    auto next = std::make_shared<const RiskReport>(std::move(report));
    std::lock_guard lock(report_mutex_);
    report_ = std::move(next);
}

std::shared_ptr<const RiskReport> ScreeningService::report() const {
    std::lock_guard lock(report_mutex_);
    return report_;
}

void ScreeningService::start_screening() {
    {
        std::lock_guard lock(report_mutex_);
        if (screening_state_ == "running") return;
        screening_state_ = "running";
        screening_error_.clear();
    }
    if (screening_thread_.joinable()) screening_thread_.join();
    screening_thread_ = std::thread([this] {
        try {
            ScreeningRun run = run_screening(config_, *engine_);
            if (!config_.output_json.empty()) write_report_json(run.report, config_.output_json, run.timings);
            if (!config_.output_csv.empty()) write_report_csv(run.report, config_.output_csv);
            publish(std::move(run.report));
            std::lock_guard lock(report_mutex_);
            screening_state_ = "done";
        } catch (const std::exception& e) {
            std::lock_guard lock(report_mutex_);
            screening_state_ = "failed";
            screening_error_ = e.what();
        }
    });
}

std::string ScreeningService::screening_state() const {
    std::lock_guard lock(report_mutex_);
    return screening_state_;
}

void ScreeningService::wait_for_screening() {
    if (screening_thread_.joinable()) screening_thread_.join();
}

int ScreeningService::whatif_threads() const {
    if (options_.whatif_threads > 0) return options_.whatif_threads;
    return std::max(1, omp_get_max_threads() / 4);
}

ApiResponse ScreeningService::get_grid() const {
    json doc = grid_to_json(engine_->grid());
    doc["bus_count"] = engine_->grid().bus_count();
    doc["branch_count"] = engine_->grid().branch_count();
    return {200, versioned(std::move(doc))};
}

ApiResponse ScreeningService::get_report() const {
    const auto rep = report();
    if (!rep) {
        std::string state;
        {
            std::lock_guard lock(report_mutex_);
            state = screening_state_ == "failed" ? "screening failed: " + screening_error_ : screening_state_;
        }
        return {503, error_payload("not_ready", "no report published (screening " + state + ")")};
    }
    return {200, versioned(report_to_json(*rep))};
}

ApiResponse ScreeningService::get_curves(std::string_view text) const {
    std::size_t branch = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), branch);
    if (ec != std::errc() || ptr != text.data() + text.size())
        return {400, error_payload("bad_request", "branch must be a non-negative integer")};
    const auto rep = report();
    if (!rep) return {503, error_payload("not_ready", "no report published")};
    try {
        return {200, versioned(curves_to_json(*rep, branch))};
    } catch (const ReferenceError& e) {
        return {404, error_payload("not_found", e.what())};
    }
}

ApiResponse ScreeningService::post_whatif(std::string_view body) {
    WhatIfRequest req;
    try {
        req = WhatIfRequest::from_json(json::parse(body));
        if (req.faulted_branch >= engine_->grid().branch_count())
            throw ParseError("field 'faulted_branch': branch " + std::to_string(req.faulted_branch) +
                             " does not exist");
        if (req.samples > options_.max_samples)
            throw ParseError("field 'N' exceeds the limit of " + std::to_string(options_.max_samples));
    } catch (const json::parse_error& e) {
        return {400, error_payload("bad_request", std::string("malformed JSON: ") + e.what())};
    } catch (const ParseError& e) {
        return {400, error_payload("bad_request", e.what())};
    }

    if (req.samples <= options_.sync_limit) {
        try {
            return {200, run_whatif(*engine_, req, config_.seed, config_.policy, whatif_threads())};
        } catch (const std::exception& e) {
            return {500, error_payload("compute_failed", e.what())};
        }
    }

    std::lock_guard lock(jobs_mutex_);
    const std::size_t pending = queue_.size() + active_;
    if (pending >= options_.max_pending) {
        json err = error_payload("busy", "what-if queue is full; retry later");
        err["queue_depth"] = pending;
        err["retry_after_seconds"] = 1;
        return {503, std::move(err)};
    }
    const std::string id = "job-" + std::to_string(next_job_++);
    Job job;
    job.request = req;
    jobs_.emplace(id, std::move(job));
    queue_.push_back(id);
    jobs_cv_.notify_one();
    return {202, versioned({{"job_id", id}, {"status", "queued"}, {"queue_depth", pending + 1}})};
}

ApiResponse ScreeningService::get_job(std::string_view id) const {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(std::string(id));
    if (it == jobs_.end()) return {404, error_payload("not_found", "unknown job '" + std::string(id) + "'")};
    json doc = {{"job_id", it->first}, {"status", it->second.status}, {"request", it->second.request.to_json()}};
    if (it->second.status == "done") doc["result"] = it->second.result;
    if (it->second.status == "failed") doc["error"] = it->second.error;
    return {200, versioned(std::move(doc))};
}

void ScreeningService::worker_loop() {
    for (;;) {
        std::string id;
        WhatIfRequest req;
        {
            std::unique_lock lock(jobs_mutex_);
            jobs_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            id = queue_.front();
            queue_.pop_front();
            ++active_;
            jobs_[id].status = "running";
            req = jobs_[id].request;
        }
        json result, error;
        bool ok = true;
        try {
            result = run_whatif(*engine_, req, config_.seed, config_.policy, whatif_threads());
        } catch (const std::exception& e) {
            ok = false;
            error = {{"code", "compute_failed"}, {"message", e.what()}};
        }
        std::lock_guard lock(jobs_mutex_);
        --active_;
        Job& job = jobs_[id];
        job.status = ok ? "done" : "failed";
        job.result = std::move(result);
        job.error = std::move(error);
    }
}

void ScreeningService::install_routes() {
    auto reply = [](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        if (r.status == 503 && r.body.contains("retry_after_seconds")) res.set_header("Retry-After", "1");
        res.set_content(r.body.dump(), "application/json");
    };
    server_->Get("/grid", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, get_grid()); });
    server_->Get("/report",
                 [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, get_report()); });
    server_->Get(R"(/curves/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, get_curves(req.matches[1].str()));
    });
    server_->Post("/whatif", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, post_whatif(req.body));
    });
    server_->Get(R"(/jobs/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, get_job(req.matches[1].str()));
    });
    server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        res.set_content(error_payload(res.status == 404 ? "not_found" : "http_error",
                                      "HTTP status " + std::to_string(res.status))
                            .dump(),
                        "application/json");
    });
}

void ScreeningService::listen(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
    } else {
        if (!server_->bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
        port_ = port;
    }
    if (port_ <= 0) throw Error("cannot bind " + host);
    server_->listen_after_bind();
}

void ScreeningService::wait_until_listening() const {
    while (!server_->is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
}

void ScreeningService::stop() { server_->stop(); }

}  // namespace dynscreen
