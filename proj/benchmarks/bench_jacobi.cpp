#include <benchmark/benchmark.h>

#include "tilechain/apps.hpp"

using namespace tilechain;

namespace {

apps::AppConfig jacobi_config(int64_t n) {
  apps::AppConfig cfg;
  cfg.nx = cfg.ny = n;
  cfg.iters = 10;
  cfg.variant = "noncopy";
  return cfg;
}

void run_jacobi(benchmark::State& state, const ExecMode& mode) {
  const apps::AppConfig cfg = jacobi_config(state.range(0));
  for (auto _ : state) {
    Runtime rt(Block{"jacobi", 2});
    apps::JacobiIds ids = apps::jacobi_setup(rt, cfg);
    apps::jacobi_enqueue(rt, ids, cfg);
    rt.flush(mode);
    benchmark::DoNotOptimize(rt.fields()[ids.a].read(pt(cfg.nx / 2, cfg.ny / 2)));
  }
  state.SetItemsProcessed(state.iterations() * cfg.nx * cfg.ny * cfg.iters);
}

void BM_JacobiUntiled(benchmark::State& state) {
  run_jacobi(state, ExecMode::untiled());
}

void BM_JacobiTiledAuto(benchmark::State& state) {
  run_jacobi(state, ExecMode::tiled_auto());
}

// Plan construction alone, across chain depth; the executor never runs.
void BM_PlanConstruction(benchmark::State& state) {
  const int loops = static_cast<int>(state.range(0));
  Runtime rt(Block{"jacobi", 2});
  apps::AppConfig cfg = jacobi_config(512);
  cfg.iters = loops;
  apps::JacobiIds ids = apps::jacobi_setup(rt, cfg);
  apps::jacobi_enqueue(rt, ids, cfg);
  LoopChain chain = rt.take_pending();
  for (auto _ : state) {
    TilingPlan plan = construct_plan(chain, {64, 64, 1});
    benchmark::DoNotOptimize(plan.num_tiles());
  }
  state.SetItemsProcessed(state.iterations() * loops);
}

}  // namespace

BENCHMARK(BM_JacobiUntiled)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_JacobiTiledAuto)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PlanConstruction)->Arg(10)->Arg(50)->Arg(150)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
