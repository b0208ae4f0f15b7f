#include "dynscreen/case_io.hpp"
#include "dynscreen/engine.hpp"
#include "dynscreen/sweep.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace dynscreen;

namespace {

const DynamicsEngine& engine(int which) {
    static const char* paths[] = {"/fixtures/ieee118_sub10.json", "/fixtures/ieee118_sub50.json", "/case118.m"};
    static std::unique_ptr<DynamicsEngine> cache[3];
    if (!cache[which]) {
        cache[which] = std::make_unique<DynamicsEngine>(load_grid(std::string(DYNSCREEN_DATA_DIR) + paths[which]),
                                                        EngineOptions{});
        cache[which]->warm();
    }
    return *cache[which];
}

template <bool Parallel>
void sweep(benchmark::State& state) {
    const DynamicsEngine& e = engine(static_cast<int>(state.range(0)));
    const auto dist = ScenarioDistribution::nominal(e.grid().branch_count(), 0.5);
    const auto n = static_cast<std::size_t>(state.range(1));
    SweepOptions opts;
    opts.seed = 1;
    for (auto _ : state) {
        ScenarioPool pool = Parallel ? evaluate_pool(e, dist, n, opts) : evaluate_pool_serial(e, dist, n, opts);
        benchmark::DoNotOptimize(pool.totals.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(1));
    state.counters["branches"] = static_cast<double>(e.grid().branch_count());
}

}  // namespace

BENCHMARK(sweep<false>)->Name("sweep/serial")->ArgsProduct({{0, 1, 2}, {200}})->Unit(benchmark::kMillisecond);
BENCHMARK(sweep<true>)->Name("sweep/openmp")->ArgsProduct({{0, 1, 2}, {200}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
