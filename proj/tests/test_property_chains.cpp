#include <cmath>

#include <gtest/gtest.h>

#include "support/chain_gen.hpp"
#include "tilechain/apps.hpp"
#include "tilechain/oracle.hpp"

namespace tilechain {
namespace {

using testing::GenConfig;
using testing::GeneratedChain;

struct ChainRun {
  FieldTable fields;
  std::vector<double> reductions;
};

ChainRun run_chain(const GeneratedChain& gc, const ExecMode& mode,
                   const RuntimeConfig& rc = {},
                   const std::array<int, kMaxDims>& rank_grid = {0, 0, 0},
                   std::shared_ptr<const TilingPlan>* plan_out = nullptr) {
  Runtime rt(Block{"gen", gc.cfg.dim}, rc);
  if (rank_grid != std::array<int, kMaxDims>{0, 0, 0}) rt.set_rank_grid(rank_grid);
  testing::declare_chain(rt, gc);
  std::vector<ReductionHandle> handles = testing::enqueue_chain(rt, gc);
  rt.flush(mode);
  ChainRun out{rt.fields(), {}};
  for (ReductionHandle h : handles) out.reductions.push_back(rt.fetch_reduction(h));
  if (plan_out != nullptr) *plan_out = rt.last_plan();
  return out;
}

ChainRun reference_run(const GeneratedChain& gc,
                       std::vector<ReduceOp>* ops_out = nullptr) {
  Runtime rt(Block{"gen", gc.cfg.dim});
  testing::declare_chain(rt, gc);
  testing::enqueue_chain(rt, gc);
  LoopChain chain = rt.take_pending();
  auto results = oracle::sequential_reference(chain, rt.fields());
  ChainRun out{rt.fields(), {}};
  for (const ReductionResult& r : results) {
    out.reductions.push_back(r.value);
    if (ops_out != nullptr) ops_out->push_back(r.op);
  }
  return out;
}

void expect_reductions_close(const std::vector<double>& got,
                             const std::vector<double>& want,
                             const std::vector<ReduceOp>& ops, uint64_t seed) {
  ASSERT_EQ(got.size(), want.size()) << "seed " << seed;
  for (size_t i = 0; i < got.size(); ++i) {
    if (ops[i] == ReduceOp::Sum) {
      const double denom = std::max(1.0, std::abs(want[i]));
      EXPECT_LE(std::abs(got[i] - want[i]), 1e-12 * denom)
          << "seed " << seed << " reduction " << i;
    } else {
      // Min/Max are order-insensitive: exact.
      EXPECT_EQ(got[i], want[i]) << "seed " << seed << " reduction " << i;
    }
  }
}

// Random chains, shared memory: the tiled schedule must be bit-identical to
// the untiled one on every field, and its plan must survive both validators.
void shared_memory_property(uint64_t seed, const GenConfig& cfg) {
  SCOPED_TRACE(::testing::Message() << "seed " << seed);
  GeneratedChain gc = testing::generate_chain(seed, cfg);

  std::vector<ReduceOp> ops;
  ChainRun ref = reference_run(gc, &ops);
  ChainRun untiled = run_chain(gc, ExecMode::untiled());
  EXPECT_TRUE(apps::compare_fields(ref.fields, untiled.fields).exact_match());

  const auto ts = testing::random_tile_sizes(seed, gc);
  std::shared_ptr<const TilingPlan> plan;
  ChainRun tiled = run_chain(gc, ExecMode::tiled(ts), {}, {0, 0, 0}, &plan);

  apps::FieldsDiff diff = apps::compare_fields(untiled.fields, tiled.fields);
  EXPECT_TRUE(diff.exact_match())
      << "tiles " << ts[0] << "," << ts[1] << ": " << diff.mismatched_points
      << " mismatches, max " << diff.max_abs;

  expect_reductions_close(tiled.reductions, ref.reductions, ops, seed);

  ASSERT_NE(plan, nullptr);
  Runtime scratch(Block{"gen", gc.cfg.dim});
  testing::declare_chain(scratch, gc);
  testing::enqueue_chain(scratch, gc);
  LoopChain chain = scratch.take_pending();
  EXPECT_TRUE(oracle::validate_coverage(*plan, chain).empty());
  EXPECT_TRUE(oracle::validate_dependencies(*plan, chain).empty());
}

TEST(PropertyChains, TwoDimensionalSeeds) {
  GenConfig cfg;  // 2D defaults
  for (uint64_t seed = 1; seed <= 40; ++seed) shared_memory_property(seed, cfg);
}

TEST(PropertyChains, OneDimensionalSeeds) {
  GenConfig cfg;
  cfg.dim = 1;
  cfg.extent_min = 32;
  cfg.extent_max = 96;
  for (uint64_t seed = 101; seed <= 120; ++seed)
    shared_memory_property(seed, cfg);
}

TEST(PropertyChains, DistributedSeedsMatchSharedUntiled) {
  GenConfig cfg;
  cfg.reads_within_logical = true;  // padding contents are rank-dependent
  cfg.max_loops = 8;

  // Deep chains of radius-2 loops can legally require more replication
  // padding than the default allowance.
  RuntimeConfig rc;
  rc.skew_allowance = 24;

  for (uint64_t seed = 201; seed <= 212; ++seed) {
    SCOPED_TRACE(::testing::Message() << "seed " << seed);
    GeneratedChain gc = testing::generate_chain(seed, cfg);

    std::vector<ReduceOp> ops;
    ChainRun ref = reference_run(gc, &ops);
    const auto ts = testing::random_tile_sizes(seed, gc);

    for (const auto& grid :
         std::vector<std::array<int, kMaxDims>>{{2, 1, 1}, {2, 2, 1}}) {
      ChainRun dist = run_chain(gc, ExecMode::tiled(ts), rc, grid);
      apps::FieldsDiff diff = apps::compare_fields(ref.fields, dist.fields);
      EXPECT_TRUE(diff.exact_match())
          << "grid " << grid[0] << "x" << grid[1] << ": "
          << diff.mismatched_points << " mismatches, max " << diff.max_abs;
      expect_reductions_close(dist.reductions, ref.reductions, ops, seed);
    }
  }
}

}  // namespace
}  // namespace tilechain
