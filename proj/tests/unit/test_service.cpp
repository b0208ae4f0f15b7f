#include "support.hpp"

#include "dynscreen/screening.hpp"
#include "dynscreen/service.hpp"

#include <catch_amalgamated.hpp>
#include <httplib.h>

#include <thread>

using namespace dynscreen;
using namespace dynscreen::testing;
using nlohmann::json;

namespace {

ScreeningConfig triangle_config() {
    ScreeningConfig c;
    c.grid_path = data_path("fixtures/triangle3.json");
    c.samples = 200;
    c.ce.samples = 100;
    c.seed = 3;
    return c;
}

std::shared_ptr<const DynamicsEngine> ieee118_engine() {
    static const auto e = std::make_shared<const DynamicsEngine>(ieee118(), EngineOptions{});
    return e;
}

}  // namespace

TEST_CASE("what-if requests", "[service]") {
    ScreeningService svc(ieee118_engine(), ScreeningConfig{});
    SECTION("no fault time and no noise never overloads") {
        const ApiResponse r = svc.post_whatif(R"({"faulted_branch": 7, "tau": 0, "sigma": 0, "gamma": 0.5, "N": 4})");
        REQUIRE(r.status == 200);
        CHECK(r.body["result"]["estimate"] == 0.0);
        CHECK(r.body["trajectory"]["overload"] == 0.0);
        CHECK(r.body["zone"] == "safe");
        CHECK(r.body["api_version"] == kApiVersion);
    }
    SECTION("identical requests give identical responses") {
        const std::string body = R"({"faulted_branch": 3, "tau": 1.2, "gamma": 0.1, "N": 6, "seed": 5})";
        const ApiResponse a = svc.post_whatif(body);
        const ApiResponse b = svc.post_whatif(body);
        REQUIRE(a.status == 200);
        CHECK(a.body.dump() == b.body.dump());
        const ApiResponse c = svc.post_whatif(R"({"faulted_branch": 3, "tau": 1.2, "gamma": 0.1, "N": 6, "seed": 6})");
        CHECK(c.body["seed"] != a.body["seed"]);
    }
    SECTION("bad requests name the field") {
        for (const char* body : {R"({"tau": 1})", R"({"faulted_branch": -1, "tau": 1})",
                                 R"({"faulted_branch": 1, "tau": -2})", R"({"faulted_branch": 1, "tau": 1, "N": 0})",
                                 R"({"faulted_branch": 1, "tau": 1, "zzz": 0})", "not json"}) {
            const ApiResponse r = svc.post_whatif(body);
            CHECK(r.status == 400);
            CHECK(r.body["error"]["code"] == "bad_request");
        }
        CHECK(svc.post_whatif(R"({"faulted_branch": 999, "tau": 1})").status == 400);
    }
}

TEST_CASE("asynchronous what-if jobs", "[service]") {
    const auto engine = std::make_shared<const DynamicsEngine>(triangle(), EngineOptions{});
    ServiceOptions opts;
    opts.sync_limit = 2;
    opts.max_pending = 1;
    ScreeningService svc(engine, triangle_config(), opts);
    const ApiResponse queued = svc.post_whatif(R"({"faulted_branch": 2, "tau": 2, "N": 2000})");
    REQUIRE(queued.status == 202);
    const std::string id = queued.body["job_id"];
    const ApiResponse busy = svc.post_whatif(R"({"faulted_branch": 2, "tau": 2, "N": 2000})");
    CHECK((busy.status == 503 || busy.status == 202));
    if (busy.status == 503) CHECK(busy.body.contains("retry_after_seconds"));
    json job;
    for (int i = 0; i < 2000; ++i) {
        job = svc.get_job(id).body;
        if (job["status"] == "done" || job["status"] == "failed") break;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    CHECK(job["status"] == "done");
    CHECK(job["result"]["result"]["samples"] == 2000);
    CHECK(svc.get_job("nope").status == 404);
}

TEST_CASE("grid, report and curves endpoints", "[service]") {
    ScreeningService big(ieee118_engine(), ScreeningConfig{});
    const ApiResponse g = big.get_grid();
    CHECK(g.status == 200);
    CHECK(g.body["bus_count"] == 118);
    CHECK(g.body["branch_count"] == 186);
    CHECK(big.get_report().status == 503);
    CHECK(big.get_curves("3").status == 503);

    const ScreeningConfig cfg = triangle_config();
    const auto engine = std::make_shared<const DynamicsEngine>(triangle(), EngineOptions{});
    ScreeningService svc(engine, cfg);
    svc.start_screening();
    svc.wait_for_screening();
    CHECK(svc.screening_state() == "done");
    const ApiResponse rep = svc.get_report();
    REQUIRE(rep.status == 200);
    CHECK(report_from_json(rep.body) == run_screening(cfg, *engine).report);
    CHECK(svc.get_curves("1").status == 200);
    CHECK(svc.get_curves("x").status == 400);
    CHECK(svc.get_curves("17").status == 404);
}

TEST_CASE("HTTP routes", "[service]") {
    const auto engine = std::make_shared<const DynamicsEngine>(triangle(), EngineOptions{});
    ScreeningService svc(engine, triangle_config());
    std::thread server([&] { svc.listen("127.0.0.1", 0); });
    svc.wait_until_listening();
    httplib::Client cli("127.0.0.1", svc.bound_port());

    auto grid = cli.Get("/grid");
    REQUIRE(grid);
    CHECK(grid->status == 200);
    CHECK(json::parse(grid->body)["bus_count"] == 3);

    auto report = cli.Get("/report");
    REQUIRE(report);
    CHECK(report->status == 503);
    CHECK(json::parse(report->body)["error"]["code"] == "not_ready");

    auto whatif = cli.Post("/whatif", R"({"faulted_branch": 2, "tau": 1.5, "N": 8, "seed": 1})", "application/json");
    REQUIRE(whatif);
    CHECK(whatif->status == 200);
    CHECK(json::parse(whatif->body)["result"]["samples"] == 8);

    auto missing = cli.Get("/nowhere");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body)["error"]["code"] == "not_found");

    svc.stop();
    server.join();
}
