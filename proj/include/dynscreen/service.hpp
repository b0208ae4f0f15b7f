#pragma once

#include "dynscreen/config.hpp"
#include "dynscreen/engine.hpp"
#include "dynscreen/report.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace dynscreen {

inline constexpr int kApiVersion = 1;

struct WhatIfRequest {
    std::size_t faulted_branch = 0;
    double tau = 0.0;
    std::optional<double> sigma;  // absolute; otherwise sigma_scale * beta
    double sigma_scale = 1.0;
    double gamma = 1.0;
    std::size_t samples = 100;
    std::optional<std::uint64_t> seed;

    /// Throws ParseError naming the offending field.
    [[nodiscard]] static WhatIfRequest from_json(const nlohmann::json& doc);
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Conditional estimate P[S >= gamma | branch, tau] over noise paths, plus a
/// summary of the first sample path. Seeded by
/// derive_seed(request seed or `master`, what-if stream, hash of the request).
[[nodiscard]] nlohmann::json run_whatif(const DynamicsEngine& engine, const WhatIfRequest& request,
                                        std::uint64_t master, const SafetyPolicy& policy, int threads);

struct ServiceOptions {
    std::size_t sync_limit = 256;      // larger N becomes a job
    std::size_t max_samples = 200000;  // per request
    std::size_t max_pending = 4;       // queued + running jobs
    int job_workers = 1;
    int whatif_threads = 0;  // 0: a quarter of the OpenMP threads, at least one
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Holds the engine, the latest published report and the what-if job queue.
/// Handlers are plain functions of the request so they can be exercised
/// without a socket; listen() wires them to HTTP routes.
class ScreeningService {
public:
    ScreeningService(std::shared_ptr<const DynamicsEngine> engine, ScreeningConfig config,
                     ServiceOptions options = {});
    ~ScreeningService();
    ScreeningService(const ScreeningService&) = delete;
    ScreeningService& operator=(const ScreeningService&) = delete;

    void publish(RiskReport report);
    [[nodiscard]] std::shared_ptr<const RiskReport> report() const;

    /// Runs the configured screening on a background thread and publishes
    /// (and writes, when an output path is configured) the result.
    void start_screening();
    [[nodiscard]] std::string screening_state() const;
    void wait_for_screening();

    [[nodiscard]] ApiResponse get_grid() const;
    [[nodiscard]] ApiResponse get_report() const;
    [[nodiscard]] ApiResponse get_curves(std::string_view branch) const;
    [[nodiscard]] ApiResponse post_whatif(std::string_view body);
    [[nodiscard]] ApiResponse get_job(std::string_view id) const;

    /// Binds and serves until stop(). `port` 0 picks a free port, reported
    /// through bound_port() once listening.
    void listen(const std::string& host, int port);
    void stop();
    [[nodiscard]] int bound_port() const noexcept { return port_; }
    /// Blocks until the server is accepting connections.
    void wait_until_listening() const;

private:
    struct Job {
        std::string status = "queued";  // queued | running | done | failed
        WhatIfRequest request;
        nlohmann::json result;
        nlohmann::json error;
    };

    void worker_loop();
    void install_routes();
    [[nodiscard]] int whatif_threads() const;

    std::shared_ptr<const DynamicsEngine> engine_;
    ScreeningConfig config_;
    ServiceOptions options_;

    mutable std::mutex report_mutex_;
    std::shared_ptr<const RiskReport> report_;
    std::string screening_state_ = "idle";
    std::string screening_error_;
    std::thread screening_thread_;

    mutable std::mutex jobs_mutex_;
    std::condition_variable jobs_cv_;
    std::map<std::string, Job> jobs_;
    std::deque<std::string> queue_;
    std::size_t active_ = 0;
    std::uint64_t next_job_ = 1;
    bool stopping_ = false;
    std::vector<std::thread> workers_;

    std::unique_ptr<httplib::Server> server_;
    std::atomic<int> port_{0};
};

[[nodiscard]] nlohmann::json error_payload(std::string_view code, std::string_view message);

}  // namespace dynscreen
