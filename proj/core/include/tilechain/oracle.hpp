#pragma once

#include "tilechain/executor.hpp"
#include "tilechain/planner.hpp"

namespace tilechain::oracle {

// Ground-truth references, deliberately simple and strictly sequential.
// These share the per-point kernel plumbing (KernelCtx) with the executor but
// none of its scheduling: no pool, no tiles, no plan. They are sized for
// small instances (<= 64 points per dimension by policy).

// Executes loops in chain order, points in lexicographic order, one thread.
// Returns reduction values in chain order.
std::vector<ReductionResult> sequential_reference(const LoopChain& chain,
                                                  FieldTable& fields);

enum class ViolationKind {
  ReadBeforeProduce,  // tiled order reads a value whose sequential producer
                      // has not run yet, or reads one already clobbered
  DoubleWrite,        // two tiles write the same (loop, point)
  CoverageGap,
  CoverageOverlap,
};

struct Violation {
  ViolationKind kind = ViolationKind::ReadBeforeProduce;
  int32_t loop = -1;
  int64_t tile = -1;
  DatasetId dataset = -1;
  Point point{0, 0, 0};
  std::string detail;

  std::string to_string() const;
};

// Symbolic simulation of the tiled schedule: walks tiles in plan order,
// tracking the last (tile, loop) writer per (dataset, point), and flags reads
// whose sequential producer (last earlier loop writing that point) has not
// executed yet or has been overwritten by a sequentially-later loop. Also
// flags any point written twice for one loop.
std::vector<Violation> validate_dependencies(const TilingPlan& plan,
                                             const LoopChain& chain,
                                             size_t max_violations = 32);

// Exact partition check (shared memory): per loop, every point of the
// recorded range is covered by exactly one tile, and no tile escapes the
// recorded range. Also verifies per-dimension slab consistency (a tile's
// interval in d depends only on t_d) and slab monotonicity.
std::vector<Violation> validate_coverage(const TilingPlan& plan,
                                         const LoopChain& chain,
                                         size_t max_violations = 32);

// Replication-aware check for per-rank plans: the union over ranks covers
// every loop range; multiply-covered points must lie within `band_d` of some
// interior partition boundary along some dimension.
std::vector<Violation> validate_coverage_replicated(
    std::span<const TilingPlan* const> rank_plans, const LoopChain& chain,
    std::span<const Range> owned, const std::array<int64_t, kMaxDims>& band,
    size_t max_violations = 32);

}  // namespace tilechain::oracle
