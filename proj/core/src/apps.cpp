#include "tilechain/apps.hpp"

#include <cmath>

namespace tilechain::apps {

namespace {

// Kernel ids are stable per kernel function; the chain signature depends on
// them, so re-running an app yields identical signatures and cache hits.
enum KernelId : int32_t {
  kJacobiStencil = 0,
  kJacobiCopy = 1,
  kHydroEos = 10,
  kHydroBcX = 11,
  kHydroBcY = 12,
  kHydroAccelX = 13,
  kHydroAccelY = 14,
  kHydroFluxX = 15,
  kHydroFluxY = 16,
  kHydroAdvectRho = 17,
  kHydroAdvectE = 18,
  kHydroSmooth = 19,
  kHydroBlend = 20,
  kHydroMonitor = 21,
};

void check_2d_size(const AppConfig& cfg, int64_t min_extent) {
  if (cfg.nx < min_extent || cfg.ny < min_extent)
    throw InvalidArgument("app domain too small: need at least " +
                          std::to_string(min_extent) + " points per dimension");
  if (cfg.iters < 1) throw InvalidArgument("app needs iters >= 1");
}

void fill_jacobi_initial(Field& f, int64_t nx, int64_t ny) {
  for (int64_t y = 0; y < ny; ++y)
    for (int64_t x = 0; x < nx; ++x) {
      const bool ring = x == 0 || x == nx - 1 || y == 0 || y == ny - 1;
      f.write(pt(x, y), ring ? 0.0 : 1.0);
    }
}

KernelHandle jacobi_stencil_kernel() {
  return KernelHandle{kJacobiStencil, "jacobi_stencil", [](KernelCtx& ctx) {
                        const double v = 0.5 * ctx.read(0) +
                                         0.125 * (ctx.read(0, 1, 0) +
                                                  ctx.read(0, -1, 0) +
                                                  ctx.read(0, 0, 1) +
                                                  ctx.read(0, 0, -1));
                        ctx.write(1, v);
                      }};
}

KernelHandle jacobi_copy_kernel() {
  return KernelHandle{kJacobiCopy, "jacobi_copy",
                      [](KernelCtx& ctx) { ctx.write(1, ctx.read(0)); }};
}

}  // namespace

JacobiIds jacobi_setup(Runtime& rt, const AppConfig& cfg) {
  check_2d_size(cfg, 3);
  JacobiIds ids;
  ids.five = rt.declare_stencil(
      "five", {pt(0, 0), pt(1, 0), pt(-1, 0), pt(0, 1), pt(0, -1)});
  ids.identity = rt.declare_stencil("identity", {pt(0, 0)});
  ids.a = rt.declare_field("a", Range::d2(0, cfg.nx, 0, cfg.ny));
  ids.b = rt.declare_field("b", Range::d2(0, cfg.nx, 0, cfg.ny));
  fill_jacobi_initial(rt.fields()[ids.a], cfg.nx, cfg.ny);
  fill_jacobi_initial(rt.fields()[ids.b], cfg.nx, cfg.ny);
  return ids;
}

void jacobi_enqueue(Runtime& rt, const JacobiIds& ids, const AppConfig& cfg) {
  const Range interior = Range::d2(1, cfg.nx - 1, 1, cfg.ny - 1);
  if (cfg.variant == "copy") {
    for (int it = 0; it < cfg.iters; ++it) {
      rt.par_loop(jacobi_stencil_kernel(), interior,
                  {{ids.a, ids.five, AccessMode::Read},
                   {ids.b, ids.identity, AccessMode::Write}});
      rt.par_loop(jacobi_copy_kernel(), interior,
                  {{ids.b, ids.identity, AccessMode::Read},
                   {ids.a, ids.identity, AccessMode::Write}});
    }
  } else if (cfg.variant == "noncopy") {
    for (int it = 0; it < cfg.iters; ++it) {
      const DatasetId src = it % 2 == 0 ? ids.a : ids.b;
      const DatasetId dst = it % 2 == 0 ? ids.b : ids.a;
      rt.par_loop(jacobi_stencil_kernel(), interior,
                  {{src, ids.five, AccessMode::Read},
                   {dst, ids.identity, AccessMode::Write}});
    }
  } else {
    throw InvalidArgument("jacobi variant must be 'copy' or 'noncopy'");
  }
}

FieldTable jacobi_reference(const AppConfig& cfg) {
  Runtime rt(Block{"ref", 2});
  const JacobiIds ids = jacobi_setup(rt, cfg);
  jacobi_enqueue(rt, ids, cfg);
  LoopChain chain = rt.take_pending();
  FieldTable fields = rt.fields();
  oracle::sequential_reference(chain, fields);
  return fields;
}

MiniHydroIds minihydro_setup(Runtime& rt, const AppConfig& cfg) {
  check_2d_size(cfg, 4);
  MiniHydroIds ids;
  ids.identity = rt.declare_stencil("identity", {pt(0, 0)});
  ids.right = rt.declare_stencil("right", {pt(1, 0)});
  ids.up = rt.declare_stencil("up", {pt(0, 1)});
  ids.left_pair = rt.declare_stencil("left_pair", {pt(-1, 0), pt(0, 0)});
  ids.down_pair = rt.declare_stencil("down_pair", {pt(0, -1), pt(0, 0)});
  ids.right_pair = rt.declare_stencil("right_pair", {pt(0, 0), pt(1, 0)});
  ids.up_pair = rt.declare_stencil("up_pair", {pt(0, 0), pt(0, 1)});
  ids.five = rt.declare_stencil(
      "five", {pt(0, 0), pt(1, 0), pt(-1, 0), pt(0, 1), pt(0, -1)});

  const Range domain = Range::d2(0, cfg.nx, 0, cfg.ny);
  ids.rho = rt.declare_field("rho", domain);
  ids.e = rt.declare_field("e", domain);
  ids.p = rt.declare_field("p", domain);
  ids.u = rt.declare_field("u", domain);
  ids.v = rt.declare_field("v", domain);
  ids.fx = rt.declare_field("fx", domain);
  ids.fy = rt.declare_field("fy", domain);
  ids.w = rt.declare_field("w", domain);

  // Dyadic-rational pattern so any schedule-equivalent run is bit-identical.
  Field& rho = rt.fields()[ids.rho];
  Field& e = rt.fields()[ids.e];
  for (int64_t y = 0; y < cfg.ny; ++y)
    for (int64_t x = 0; x < cfg.nx; ++x) {
      rho.write(pt(x, y), 1.0 + 0.25 * static_cast<double>((x + 2 * y) % 4));
      e.write(pt(x, y), 2.0 + 0.125 * static_cast<double>((3 * x + y) % 8));
    }
  return ids;
}

ReductionHandle minihydro_enqueue_iteration(Runtime& rt, const MiniHydroIds& ids,
                                            const AppConfig& cfg) {
  const int64_t nx = cfg.nx, ny = cfg.ny;
  const Range full = Range::d2(0, nx, 0, ny);
  const Range inner = Range::d2(1, nx - 1, 1, ny - 1);
  const Range col0 = Range::d2(0, 1, 0, ny);
  const Range row0 = Range::d2(0, nx, 0, 1);
  const Range xpair = Range::d2(0, nx - 1, 0, ny);
  const Range ypair = Range::d2(0, nx, 0, ny - 1);

  // 1. Equation of state, pointwise.
  rt.par_loop(KernelHandle{kHydroEos, "eos",
                           [](KernelCtx& c) {
                             c.write(2, 0.4 * c.read(0) * c.read(1));
                           }},
              full,
              {{ids.rho, ids.identity, AccessMode::Read},
               {ids.e, ids.identity, AccessMode::Read},
               {ids.p, ids.identity, AccessMode::Write}});

  // 2-3. Thin one-sided boundary loops (1-wide ranges).
  rt.par_loop(KernelHandle{kHydroBcX, "bc_x",
                           [](KernelCtx& c) { c.write(1, c.read(0, 1, 0)); }},
              col0,
              {{ids.p, ids.right, AccessMode::Read},
               {ids.p, ids.identity, AccessMode::Write}});
  rt.par_loop(KernelHandle{kHydroBcY, "bc_y",
                           [](KernelCtx& c) { c.write(1, c.read(0, 0, 1)); }},
              row0,
              {{ids.p, ids.up, AccessMode::Read},
               {ids.p, ids.identity, AccessMode::Write}});

  // 4-5. One-sided acceleration increments (staggered-grid flavor).
  rt.par_loop(KernelHandle{kHydroAccelX, "accel_x",
                           [](KernelCtx& c) {
                             c.increment(1, 0.01 * (c.read(0, 1, 0) - c.read(0)));
                           }},
              xpair,
              {{ids.p, ids.right_pair, AccessMode::Read},
               {ids.u, ids.identity, AccessMode::Increment}});
  rt.par_loop(KernelHandle{kHydroAccelY, "accel_y",
                           [](KernelCtx& c) {
                             c.increment(1, 0.01 * (c.read(0, 0, 1) - c.read(0)));
                           }},
              ypair,
              {{ids.p, ids.up_pair, AccessMode::Read},
               {ids.v, ids.identity, AccessMode::Increment}});

  // 6-7. Forward-pair flux sweeps.
  rt.par_loop(KernelHandle{kHydroFluxX, "flux_x",
                           [](KernelCtx& c) {
                             c.write(2, 0.5 * (c.read(0) * c.read(1) +
                                               c.read(0, 1, 0) * c.read(1, 1, 0)));
                           }},
              xpair,
              {{ids.u, ids.right_pair, AccessMode::Read},
               {ids.rho, ids.right_pair, AccessMode::Read},
               {ids.fx, ids.identity, AccessMode::Write}});
  rt.par_loop(KernelHandle{kHydroFluxY, "flux_y",
                           [](KernelCtx& c) {
                             c.write(2, 0.5 * (c.read(0) * c.read(1) +
                                               c.read(0, 0, 1) * c.read(1, 0, 1)));
                           }},
              ypair,
              {{ids.v, ids.up_pair, AccessMode::Read},
               {ids.rho, ids.up_pair, AccessMode::Read},
               {ids.fy, ids.identity, AccessMode::Write}});

  // 8-9. Backward-pair advection increments.
  rt.par_loop(KernelHandle{kHydroAdvectRho, "advect_rho",
                           [](KernelCtx& c) {
                             c.increment(2, 0.01 * (c.read(0, -1, 0) - c.read(0) +
                                                    c.read(1, 0, -1) - c.read(1)));
                           }},
              inner,
              {{ids.fx, ids.left_pair, AccessMode::Read},
               {ids.fy, ids.down_pair, AccessMode::Read},
               {ids.rho, ids.identity, AccessMode::Increment}});
  rt.par_loop(KernelHandle{kHydroAdvectE, "advect_e",
                           [](KernelCtx& c) {
                             c.increment(2, 0.005 * (c.read(0, -1, 0) - c.read(0) +
                                                     c.read(1, 0, -1) - c.read(1)));
                           }},
              inner,
              {{ids.fx, ids.left_pair, AccessMode::Read},
               {ids.fy, ids.down_pair, AccessMode::Read},
               {ids.e, ids.identity, AccessMode::Increment}});

  // 10. Symmetric smoother into a scratch dataset.
  rt.par_loop(KernelHandle{kHydroSmooth, "smooth",
                           [](KernelCtx& c) {
                             c.write(1, 0.25 * (c.read(0, 1, 0) + c.read(0, -1, 0) +
                                                c.read(0, 0, 1) + c.read(0, 0, -1)));
                           }},
              inner,
              {{ids.rho, ids.five, AccessMode::Read},
               {ids.w, ids.identity, AccessMode::Write}});

  // 11. Blend the smoothed value back (read-modify-write).
  rt.par_loop(KernelHandle{kHydroBlend, "blend",
                           [](KernelCtx& c) {
                             c.write(0, 0.9 * c.read(0) + 0.1 * c.read(1));
                           }},
              inner,
              {{ids.rho, ids.identity, AccessMode::ReadWrite},
               {ids.w, ids.identity, AccessMode::Read}});

  // 12. Monitor reduction closes the chain and forces the flush.
  return rt.par_loop(KernelHandle{kHydroMonitor, "monitor",
                                  [](KernelCtx& c) { c.contribute(c.read(0)); }},
                     full, {{ids.e, ids.identity, AccessMode::Read}},
                     ReduceOp::Sum);
}

std::vector<double> minihydro_run(Runtime& rt, const MiniHydroIds& ids,
                                  const AppConfig& cfg) {
  std::vector<double> monitors;
  monitors.reserve(static_cast<size_t>(cfg.iters));
  for (int it = 0; it < cfg.iters; ++it) {
    const ReductionHandle h = minihydro_enqueue_iteration(rt, ids, cfg);
    monitors.push_back(rt.fetch_reduction(h));
  }
  return monitors;
}

std::pair<FieldTable, std::vector<double>> minihydro_reference(
    const AppConfig& cfg) {
  Runtime rt(Block{"ref", 2});
  const MiniHydroIds ids = minihydro_setup(rt, cfg);
  for (int it = 0; it < cfg.iters; ++it) minihydro_enqueue_iteration(rt, ids, cfg);
  LoopChain chain = rt.take_pending();
  FieldTable fields = rt.fields();
  const auto results = oracle::sequential_reference(chain, fields);
  std::vector<double> monitors;
  monitors.reserve(results.size());
  for (const ReductionResult& r : results) monitors.push_back(r.value);
  return {std::move(fields), std::move(monitors)};
}

FieldsDiff compare_fields(const FieldTable& x, const FieldTable& y) {
  if (x.size() != y.size())
    throw InvalidArgument("compare_fields: different dataset counts");
  FieldsDiff diff;
  for (size_t i = 0; i < x.size(); ++i) {
    const DatasetId ds = static_cast<DatasetId>(i);
    const Field& fx = x[ds];
    const Field& fy = y[ds];
    if (fx.logical_range() != fy.logical_range())
      throw InvalidArgument("compare_fields: dataset " + fx.name() +
                            " logical ranges differ");
    const Range& r = fx.logical_range();
    const int64_t n0 = r.extent(0);
    const int64_t n1 = r.dim() > 1 ? r.extent(1) : 1;
    const int64_t n2 = r.dim() > 2 ? r.extent(2) : 1;
    for (int64_t k = 0; k < n2; ++k)
      for (int64_t j = 0; j < n1; ++j)
        for (int64_t i0 = 0; i0 < n0; ++i0) {
          const Point p{r.start(0) + i0,
                        r.dim() > 1 ? r.start(1) + j : 0,
                        r.dim() > 2 ? r.start(2) + k : 0};
          const double a = fx.read(p);
          const double b = fy.read(p);
          if (a == b) continue;
          ++diff.mismatched_points;
          const double d = std::abs(a - b);
          if (!(d <= diff.max_abs)) {
            diff.max_abs = d;
            diff.worst_dataset = ds;
          }
        }
  }
  return diff;
}

}  // namespace tilechain::apps
