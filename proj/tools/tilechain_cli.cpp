#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tilechain/apps.hpp"
#include "tilechain/runtime.hpp"

namespace {

using namespace tilechain;
using namespace tilechain::apps;

constexpr int kExitVerifyMismatch = 2;

struct CliOptions {
  std::string app = "jacobi2d";
  std::string variant = "noncopy";
  std::vector<int64_t> size{64};
  int iters = 10;
  std::vector<int64_t> tile;
  bool auto_tile = false;
  int64_t cache_kb = 8192;
  int threads = 1;
  std::vector<int> ranks;
  bool untiled = false;
  bool verify = false;
  std::string dump_plan;
  bool report = false;
};

AppConfig make_app_config(const CliOptions& opt) {
  AppConfig cfg;
  if (opt.size.empty() || opt.size.size() > 3)
    throw InvalidArgument("--size takes 1 to 3 extents");
  if (opt.size.size() == 3 && opt.size[2] != 1)
    throw InvalidArgument("apps are 2D; a third extent must be 1");
  cfg.nx = opt.size[0];
  cfg.ny = opt.size.size() > 1 ? opt.size[1] : opt.size[0];
  cfg.iters = opt.iters;
  cfg.variant = opt.variant;
  return cfg;
}

ExecMode make_mode(const CliOptions& opt) {
  if (opt.auto_tile) return ExecMode::tiled_auto();
  if (!opt.tile.empty()) {
    if (opt.tile.size() > 3) throw InvalidArgument("--tile takes 1 to 3 sizes");
    std::array<int64_t, kMaxDims> ts{0, 0, 0};
    for (size_t d = 0; d < 3; ++d)
      ts[d] = d < opt.tile.size() ? opt.tile[d] : opt.tile.back();
    return ExecMode::tiled(ts);
  }
  return ExecMode::untiled();
}

void write_plan_dump(Runtime& rt, const std::string& path) {
  std::string text;
  if (rt.distributed()) {
    DistContext* ctx = rt.dist();
    for (int r = 0; r < ctx->rank_count(); ++r) {
      auto plan = ctx->last_rank_plan(r);
      if (!plan) throw InvalidArgument("--dump-plan needs a tiled run");
      text += "rank=" + std::to_string(r) + "\n" + plan->dump();
    }
  } else {
    auto plan = rt.last_plan();
    if (!plan) throw InvalidArgument("--dump-plan needs a tiled run");
    text = plan->dump();
  }
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open dump path: " + path);
  out << text;
}

void print_monitors(const std::vector<double>& monitors) {
  for (size_t i = 0; i < monitors.size(); ++i)
    std::printf("monitor_%zu=%.17g\n", i, monitors[i]);
}

int verify_fields(const FieldsDiff& diff, double monitor_rel) {
  std::printf("max_abs_diff=%.17g\n", diff.exact_match() ? 0.0 : diff.max_abs);
  std::printf("mismatched_points=%" PRId64 "\n", diff.mismatched_points);
  if (monitor_rel >= 0) std::printf("monitor_max_rel=%.17g\n", monitor_rel);
  const bool pass = diff.exact_match() && monitor_rel <= 1e-12;
  std::printf("verify=%s\n", pass ? "pass" : "fail");
  return pass ? 0 : kExitVerifyMismatch;
}

int run(const CliOptions& opt) {
  const AppConfig cfg = make_app_config(opt);
  const ExecMode mode = make_mode(opt);

  RuntimeConfig rc;
  rc.threads = opt.threads;
  rc.cache_bytes = opt.cache_kb * 1024;
  Runtime rt(Block{"cli", 2}, rc);
  if (!opt.ranks.empty()) {
    if (opt.ranks.size() > 2) throw InvalidArgument("--ranks takes PX[,PY]");
    rt.set_rank_grid({opt.ranks[0],
                      opt.ranks.size() > 1 ? opt.ranks[1] : 1, 1});
  }
  rt.set_default_mode(mode);

  ExecutionReport total;
  std::vector<double> monitors;
  double monitor_rel = -1;

  if (opt.app == "jacobi2d") {
    const JacobiIds ids = jacobi_setup(rt, cfg);
    jacobi_enqueue(rt, ids, cfg);
    total = rt.flush(mode);
  } else if (opt.app == "minihydro") {
    const MiniHydroIds ids = minihydro_setup(rt, cfg);
    for (int it = 0; it < cfg.iters; ++it) {
      const ReductionHandle h = minihydro_enqueue_iteration(rt, ids, cfg);
      monitors.push_back(rt.fetch_reduction(h));
      if (it == 0)
        total = rt.last_report();
      else
        total.merge(rt.last_report());
    }
  } else {
    throw InvalidArgument("unknown --app (expected jacobi2d or minihydro)");
  }

  if (!opt.dump_plan.empty()) write_plan_dump(rt, opt.dump_plan);

  if (opt.report) {
    std::fputs(total.to_text().c_str(), stdout);
    if (!monitors.empty()) print_monitors(monitors);
  }

  if (opt.verify) {
    if (opt.app == "jacobi2d") {
      return verify_fields(compare_fields(rt.fields(), jacobi_reference(cfg)),
                           -1);
    }
    const auto [ref_fields, ref_monitors] = minihydro_reference(cfg);
    monitor_rel = 0;
    for (size_t i = 0; i < monitors.size(); ++i) {
      const double denom = std::max(std::abs(ref_monitors[i]), 1.0);
      monitor_rel =
          std::max(monitor_rel, std::abs(monitors[i] - ref_monitors[i]) / denom);
    }
    return verify_fields(compare_fields(rt.fields(), ref_fields), monitor_rel);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured-mesh loop-chain runtime driver"};
  CliOptions opt;

  app.add_option("--app", opt.app, "Application: jacobi2d | minihydro");
  app.add_option("--variant", opt.variant, "jacobi2d: copy | noncopy");
  app.add_option("--size", opt.size, "Domain extents NX[,NY[,NZ]]")
      ->delimiter(',');
  app.add_option("--iters", opt.iters, "Iteration count");
  auto* tile_opt =
      app.add_option("--tile", opt.tile, "Tile sizes TX[,TY[,TZ]]")
          ->delimiter(',');
  auto* auto_opt =
      app.add_flag("--auto-tile", opt.auto_tile, "Derive tile sizes from cache");
  app.add_option("--cache-kb", opt.cache_kb, "Cache capacity for --auto-tile");
  app.add_option("--threads", opt.threads, "Worker threads per rank");
  app.add_option("--ranks", opt.ranks, "Simulated rank grid PX[,PY]")
      ->delimiter(',');
  auto* untiled_opt =
      app.add_flag("--untiled", opt.untiled, "Loop-at-a-time baseline");
  app.add_flag("--verify", opt.verify,
               "Compare against the sequential reference");
  app.add_option("--dump-plan", opt.dump_plan, "Write the tiling plan here");
  app.add_flag("--report", opt.report, "Print the execution report");

  tile_opt->excludes(auto_opt)->excludes(untiled_opt);
  auto_opt->excludes(untiled_opt);

  CLI11_PARSE(app, argc, argv);

  try {
    return run(opt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
