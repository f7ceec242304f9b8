#pragma once

#include "tilechain/runtime.hpp"

namespace tilechain::apps {

struct AppConfig {
  int64_t nx = 64, ny = 64;
  int iters = 10;
  std::string variant = "noncopy";  // jacobi: "copy" | "noncopy"
};

// 2D 5-point damped-average smoother over [0,nx) x [0,ny) with a one-point
// Dirichlet ring: interior starts at 1.0, ring at 0.0, weights
// (center, n, s, e, w) = (0.5, 0.125, 0.125, 0.125, 0.125).
//
// copy variant: per iteration, stencil a->b then copy b->a (2 loops/iter).
// noncopy variant: per iteration one stencil loop with alternating roles
// (iters loops total).
struct JacobiIds {
  DatasetId a = -1, b = -1;
  StencilId five = -1, identity = -1;
};

JacobiIds jacobi_setup(Runtime& rt, const AppConfig& cfg);
void jacobi_enqueue(Runtime& rt, const JacobiIds& ids, const AppConfig& cfg);
// Strictly sequential ground truth for the same configuration.
FieldTable jacobi_reference(const AppConfig& cfg);

// Synthetic hydro-like chain: per iteration >= 12 heterogeneous loops over 8
// datasets — pointwise equation of state, two thin (1-wide) boundary loops,
// one-sided acceleration and flux sweeps (forward/backward directional
// pairs), a symmetric smoother, a blend, and a sum reduction ending the
// chain. The reduction forces a flush every iteration.
struct MiniHydroIds {
  DatasetId rho = -1, e = -1, p = -1, u = -1, v = -1, fx = -1, fy = -1, w = -1;
  StencilId identity = -1, right = -1, up = -1, left_pair = -1, down_pair = -1,
            right_pair = -1, up_pair = -1, five = -1;
};

MiniHydroIds minihydro_setup(Runtime& rt, const AppConfig& cfg);
// Enqueues one iteration; returns the handle of the closing sum reduction.
ReductionHandle minihydro_enqueue_iteration(Runtime& rt, const MiniHydroIds& ids,
                                            const AppConfig& cfg);
// Runs all iterations through the runtime's default mode; each iteration's
// reduction fetch triggers the flush. Returns the per-iteration monitors.
std::vector<double> minihydro_run(Runtime& rt, const MiniHydroIds& ids,
                                  const AppConfig& cfg);
// Sequential ground truth: final fields plus per-iteration monitors.
std::pair<FieldTable, std::vector<double>> minihydro_reference(const AppConfig& cfg);

// Max-abs difference over logical ranges, all datasets; exact_match demands
// bit-identical storage.
struct FieldsDiff {
  double max_abs = 0;
  int64_t mismatched_points = 0;
  DatasetId worst_dataset = -1;
  bool exact_match() const { return mismatched_points == 0; }
};
FieldsDiff compare_fields(const FieldTable& x, const FieldTable& y);

}  // namespace tilechain::apps
