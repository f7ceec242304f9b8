#include <cmath>

#include <gtest/gtest.h>

#include "tilechain/apps.hpp"
#include "tilechain/dist.hpp"

namespace tilechain {
namespace {

KernelHandle noop_kernel(int32_t id) {
  return {id, "noop", [](KernelCtx&) {}};
}

// Producer/consumer pair over [0,8): loop 0 copies f0 into f1, loop 1 applies
// a radius-1 stencil of f1 back into f0.
LoopChain two_loop_chain() {
  LoopChain chain;
  chain.dim = 1;
  chain.stencils = {Stencil::identity(1),
                    Stencil(1, {Point{-1, 0, 0}, Point{0, 0, 0}, Point{1, 0, 0}})};
  LoopRecord produce;
  produce.loop_id = 0;
  produce.kernel = {0, "produce",
                    [](KernelCtx& ctx) { ctx.write(1, ctx.read(0)); }};
  produce.range = Range::d1(0, 8);
  produce.args = {{DatasetId{0}, StencilId{0}, AccessMode::Read},
                  {DatasetId{1}, StencilId{0}, AccessMode::Write}};
  LoopRecord consume;
  consume.loop_id = 1;
  consume.kernel = {1, "consume", [](KernelCtx& ctx) {
                      ctx.write(1, 0.25 * (ctx.read(0, -1) + ctx.read(0) +
                                           ctx.read(0, 1)));
                    }};
  consume.range = Range::d1(0, 8);
  consume.args = {{DatasetId{1}, StencilId{1}, AccessMode::Read},
                  {DatasetId{0}, StencilId{0}, AccessMode::Write}};
  chain.loops = {produce, consume};
  return chain;
}

// Alternating radius-1 smoother f0 <-> f1 over [0,n); num_loops deep.
LoopChain smoothing_chain_1d(int num_loops, int64_t n,
                             bool with_reduction = false) {
  LoopChain chain;
  chain.dim = 1;
  chain.stencils = {Stencil::identity(1),
                    Stencil(1, {Point{-1, 0, 0}, Point{0, 0, 0}, Point{1, 0, 0}})};
  for (int l = 0; l < num_loops; ++l) {
    LoopRecord rec;
    rec.loop_id = l;
    rec.kernel = {l, "smooth", [](KernelCtx& ctx) {
                    ctx.write(1, 0.5 * ctx.read(0) +
                                     0.25 * (ctx.read(0, -1) + ctx.read(0, 1)));
                  }};
    rec.range = Range::d1(0, n);
    rec.args = {{DatasetId{l % 2}, StencilId{1}, AccessMode::Read},
                {DatasetId{(l + 1) % 2}, StencilId{0}, AccessMode::Write}};
    chain.loops.push_back(rec);
  }
  if (with_reduction) {
    LoopRecord rec;
    rec.loop_id = num_loops;
    rec.kernel = {100, "monitor",
                  [](KernelCtx& ctx) { ctx.contribute(ctx.read(0)); }};
    rec.range = Range::d1(0, n);
    rec.args = {{DatasetId{num_loops % 2}, StencilId{0}, AccessMode::Read}};
    rec.reduction = ReductionSpec{ReduceOp::Sum, ReductionHandle{0}};
    chain.loops.push_back(rec);
  }
  return chain;
}

FieldTable fields_1d(int64_t n, int64_t pad) {
  FieldTable fields;
  fields.add("f0", Range::d1(0, n), pad);
  fields.add("f1", Range::d1(0, n), pad);
  for (DatasetId ds : {DatasetId{0}, DatasetId{1}}) {
    Field& f = fields[ds];
    const Range& alloc = f.alloc_range();
    for (int64_t x = alloc.start(0); x < alloc.end(0); ++x)
      f.write(Point{x, 0, 0},
              static_cast<double>((5 * x + 3 * ds) & 7) / 8.0);
  }
  return fields;
}

TEST(Dist, DecomposeSplitsNearEqually) {
  RankLayout even = decompose(Range::d1(0, 8), {2, 1, 1});
  ASSERT_EQ(even.rank_count(), 2);
  EXPECT_EQ(even.owned[0], Range::d1(0, 4));
  EXPECT_EQ(even.owned[1], Range::d1(4, 8));

  // Remainder goes to the lowest coordinates.
  RankLayout odd = decompose(Range::d1(0, 7), {2, 1, 1});
  EXPECT_EQ(odd.owned[0], Range::d1(0, 4));
  EXPECT_EQ(odd.owned[1], Range::d1(4, 7));

  RankLayout grid = decompose(Range::d2(0, 8, 0, 6), {2, 3, 1});
  ASSERT_EQ(grid.rank_count(), 6);
  // Rank ids linearize with dimension 0 slowest.
  EXPECT_EQ(grid.rank_of({0, 0, 0}), 0);
  EXPECT_EQ(grid.rank_of({0, 2, 0}), 2);
  EXPECT_EQ(grid.rank_of({1, 0, 0}), 3);
  EXPECT_EQ(grid.owned[grid.rank_of({1, 2, 0})], Range::d2(4, 8, 4, 6));
  for (int r = 0; r < grid.rank_count(); ++r)
    EXPECT_EQ(grid.rank_of(grid.coords_of(r)), r);

  EXPECT_EQ(grid.neighbor(0, 0, -1), -1);
  EXPECT_EQ(grid.neighbor(0, 0, +1), 3);
  EXPECT_EQ(grid.neighbor(0, 1, +1), 1);
  EXPECT_EQ(grid.neighbor(5, 1, +1), -1);

  EXPECT_THROW(decompose(Range::d1(0, 3), {4, 1, 1}), InvalidArgument);
}

TEST(Dist, RankPlanExtendsAcrossSeam) {
  LoopChain chain = two_loop_chain();
  RankLayout layout = decompose(Range::d1(0, 8), {2, 1, 1});

  // Rank 0 overruns the seam by the consumer's reach; rank 1 starts early to
  // replicate the producer values its first interior reads need.
  TilingPlan r0 = construct_rank_plan(chain, layout, 0, {4, 1, 1});
  EXPECT_EQ(r0.dump(),
            "tile=0 loop=0 d=0 [0,5)\n"
            "tile=0 loop=1 d=0 [0,4)\n");
  TilingPlan r1 = construct_rank_plan(chain, layout, 1, {4, 1, 1});
  EXPECT_EQ(r1.dump(),
            "tile=0 loop=0 d=0 [3,8)\n"
            "tile=0 loop=1 d=0 [4,8)\n");
}

TEST(Dist, SingleRankPlanMatchesSharedMemory) {
  LoopChain chain = smoothing_chain_1d(4, 23);
  RankLayout solo = decompose(Range::d1(0, 23), {1, 1, 1});
  TilingPlan rank_plan = construct_rank_plan(chain, solo, 0, {6, 1, 1});
  TilingPlan shared = construct_plan(chain, {6, 1, 1});
  EXPECT_EQ(rank_plan.dump(), shared.dump());
}

TEST(Dist, HaloDepthsFollowReadDependencies) {
  LoopChain chain = two_loop_chain();
  RankLayout layout = decompose(Range::d1(0, 8), {2, 1, 1});

  TilingPlan r0 = construct_rank_plan(chain, layout, 0, {4, 1, 1});
  HaloSpec h0 = compute_halo_depths(r0, chain, layout, 0);
  // f0 is read before any write: exchanged, one point deep at the seam.
  EXPECT_TRUE(h0.needed(DatasetId{0}));
  EXPECT_EQ(h0.depth_lo(DatasetId{0}, 0), 0);
  EXPECT_EQ(h0.depth_hi(DatasetId{0}, 0), 1);
  // f1's first access is a write: replicated computation, never exchanged.
  EXPECT_FALSE(h0.needed(DatasetId{1}));

  TilingPlan r1 = construct_rank_plan(chain, layout, 1, {4, 1, 1});
  HaloSpec h1 = compute_halo_depths(r1, chain, layout, 1);
  EXPECT_EQ(h1.depth_lo(DatasetId{0}, 0), 1);
  EXPECT_EQ(h1.depth_hi(DatasetId{0}, 0), 0);
}

TEST(Dist, ExchangeCopiesDepthStrips) {
  RankLayout layout = decompose(Range::d1(0, 8), {2, 1, 1});

  std::vector<FieldTable> rank_fields(2);
  for (int r = 0; r < 2; ++r) {
    rank_fields[r].add("f", layout.owned[r], 2);
    rank_fields[r][DatasetId{0}].fill(r == 0 ? 1.0 : 2.0);
  }

  std::vector<HaloSpec> specs(2);
  specs[0].entries[DatasetId{0}].needed = true;
  specs[0].entries[DatasetId{0}].faces[0] = {0, 1};
  specs[1].entries[DatasetId{0}].needed = true;
  specs[1].entries[DatasetId{0}].faces[0] = {1, 0};

  std::vector<FieldTable*> tables = {&rank_fields[0], &rank_fields[1]};
  MessageLog log;
  exchange_halos(tables, specs, layout, &log);

  EXPECT_EQ(rank_fields[0][DatasetId{0}].read(Point{4, 0, 0}), 2.0);
  EXPECT_EQ(rank_fields[1][DatasetId{0}].read(Point{3, 0, 0}), 1.0);

  ASSERT_EQ(log.count(), 2);
  EXPECT_EQ(log.bytes(), 16);
  for (const MessageRecord& m : log.messages) {
    EXPECT_EQ(m.points, 1);
    EXPECT_EQ(m.bytes, 8);
    EXPECT_EQ(m.dim, 0);
    EXPECT_EQ(m.phase, CommPhase::HaloExchange);
    EXPECT_EQ(m.dataset, DatasetId{0});
  }
  EXPECT_EQ(log.count_in(CommPhase::TileExecution), 0);
}

TEST(Dist, TiledRunExchangesOnceThenComputesSilently) {
  LoopChain chain = smoothing_chain_1d(4, 24);
  FieldTable global = fields_1d(24, 6);
  RankLayout layout = decompose(Range::d1(0, 24), {3, 1, 1});

  FieldTable expect = fields_1d(24, 6);
  ThreadPool pool(1);
  execute_untiled(chain, expect, pool);

  DistContext ctx(layout, global, 1);
  ctx.scatter(global);
  ExecutionReport rep = ctx.run_tiled(chain, {4, 1, 1}, nullptr);
  ctx.gather(global);

  EXPECT_TRUE(apps::compare_fields(expect, global).exact_match());
  EXPECT_TRUE(rep.distributed);
  EXPECT_EQ(rep.halo_exchanges, 1);
  EXPECT_GT(rep.halo_messages, 0);
  // Every message belongs to the single up-front exchange.
  EXPECT_EQ(ctx.log().count_in(CommPhase::TileExecution), 0);
  EXPECT_EQ(ctx.log().count(), rep.halo_messages);
}

TEST(Dist, UntiledLockstepMatchesReferenceWithMoreMessages) {
  LoopChain chain = smoothing_chain_1d(6, 24);
  FieldTable expect = fields_1d(24, 8);
  ThreadPool pool(1);
  execute_untiled(chain, expect, pool);

  FieldTable global = fields_1d(24, 8);
  RankLayout layout = decompose(Range::d1(0, 24), {2, 1, 1});
  DistContext ctx(layout, global, 1);
  ctx.scatter(global);
  ExecutionReport untiled_rep = ctx.run_untiled(chain, nullptr);
  ctx.gather(global);
  EXPECT_TRUE(apps::compare_fields(expect, global).exact_match());

  ctx.clear_log();
  FieldTable global2 = fields_1d(24, 8);
  ctx.scatter(global2);
  ExecutionReport tiled_rep = ctx.run_tiled(chain, {6, 1, 1}, nullptr);
  ctx.gather(global2);
  EXPECT_TRUE(apps::compare_fields(expect, global2).exact_match());

  // On-demand per-loop exchange pays a message per loop; the tiled path pays
  // once for the whole chain at greater depth.
  EXPECT_GT(untiled_rep.halo_messages, tiled_rep.halo_messages);
  EXPECT_GT(untiled_rep.halo_exchanges, tiled_rep.halo_exchanges);
}

TEST(Dist, ThinTilesEmptyEarlyLoopSlabsYetStayExact) {
  // Ten radius-1 loops with 2-wide tiles: the skew exceeds several tile
  // widths, so early loops of later slabs lose their iteration space
  // entirely through the ascending start chain.
  LoopChain chain = smoothing_chain_1d(10, 16);
  TilingPlan plan = construct_plan(chain, {2, 1, 1});

  bool found_empty = false;
  for (int64_t t = 0; t < plan.num_tiles(); ++t)
    found_empty = found_empty || plan.range(t, 0).empty();
  EXPECT_TRUE(found_empty);
  EXPECT_TRUE(oracle::validate_coverage(plan, chain).empty());
  EXPECT_TRUE(oracle::validate_dependencies(plan, chain).empty());

  FieldTable expect = fields_1d(16, 12);
  ThreadPool pool(1);
  execute_untiled(chain, expect, pool);
  FieldTable got = fields_1d(16, 12);
  execute_plan(plan, chain, got, pool);
  EXPECT_TRUE(apps::compare_fields(expect, got).exact_match());

  // Same chain across two ranks: per-rank plans replicate near the seam but
  // cover everything exactly elsewhere, and execution stays bit-exact.
  RankLayout layout = decompose(Range::d1(0, 16), {2, 1, 1});
  TilingPlan r0 = construct_rank_plan(chain, layout, 0, {2, 1, 1});
  TilingPlan r1 = construct_rank_plan(chain, layout, 1, {2, 1, 1});
  const std::vector<const TilingPlan*> plans = {&r0, &r1};
  EXPECT_TRUE(oracle::validate_coverage_replicated(plans, chain, layout.owned,
                                                   {12, 0, 0})
                  .empty());

  FieldTable global = fields_1d(16, 12);
  run_distributed(chain, layout, {2, 1, 1}, global);
  EXPECT_TRUE(apps::compare_fields(expect, global).exact_match());
}

TEST(Dist, PoisonMarksOnlyChainWrittenHaloPoints) {
  LoopChain chain;
  chain.dim = 1;
  chain.stencils = {Stencil::identity(1)};
  LoopRecord w;
  w.loop_id = 0;
  w.kernel = {0, "writer", [](KernelCtx& ctx) { ctx.write(0, 7.0); }};
  w.range = Range::d1(0, 5);  // stops short of x=5
  w.args = {{DatasetId{0}, StencilId{0}, AccessMode::Write}};
  chain.loops = {w};

  FieldTable global = fields_1d(8, 2);
  RankLayout layout = decompose(Range::d1(0, 8), {2, 1, 1});
  DistContext ctx(layout, global, 1);
  ctx.scatter(global);

  const Field& f0 = ctx.rank_fields(0)[DatasetId{0}];
  const Field& f1r = ctx.rank_fields(0)[DatasetId{1}];
  const double seeded_x5 = f0.read(Point{5, 0, 0});
  const double seeded_left = f0.read(Point{-1, 0, 0});

  ctx.poison_stale_halos(chain);
  // x=4 lies in rank 0's interior-face halo and the chain writes it: stale.
  EXPECT_TRUE(std::isnan(f0.read(Point{4, 0, 0})));
  // x=5 is in the halo but never written by the chain: keeps its seed.
  EXPECT_EQ(f0.read(Point{5, 0, 0}), seeded_x5);
  // Domain-edge padding has no neighbor; never poisoned.
  EXPECT_EQ(f0.read(Point{-1, 0, 0}), seeded_left);
  // f1 is never written by this chain: untouched everywhere.
  EXPECT_EQ(f1r.read(Point{4, 0, 0}),
            static_cast<double>((5 * 4 + 3) & 7) / 8.0);
}

TEST(Dist, ReductionsCountOwnedPointsOnce) {
  LoopChain chain = smoothing_chain_1d(4, 20, /*with_reduction=*/true);
  FieldTable ref_fields = fields_1d(20, 6);
  auto ref = oracle::sequential_reference(chain, ref_fields);
  ASSERT_EQ(ref.size(), 1u);

  FieldTable global = fields_1d(20, 6);
  RankLayout layout = decompose(Range::d1(0, 20), {2, 1, 1});
  std::vector<ReductionResult> results;
  run_distributed(chain, layout, {5, 1, 1}, global, &results);

  ASSERT_EQ(results.size(), 1u);
  const double rel_denom = std::max(1.0, std::abs(ref[0].value));
  EXPECT_LE(std::abs(results[0].value - ref[0].value), 1e-12 * rel_denom);
  EXPECT_TRUE(apps::compare_fields(ref_fields, global).exact_match());
}

}  // namespace
}  // namespace tilechain
