#include <atomic>
#include <memory>

#include <gtest/gtest.h>

#include "tilechain/runtime.hpp"

namespace tilechain {
namespace {

// Kernel whose only observable effect is bumping a counter and writing a
// constant, used to detect whether recording alone runs anything.
KernelHandle counting_kernel(int32_t id, std::shared_ptr<std::atomic<int64_t>> hits,
                             double value) {
  return {id, "count",
          [hits, value](KernelCtx& ctx) {
            hits->fetch_add(1, std::memory_order_relaxed);
            ctx.write(0, value);
          }};
}

struct QueueFixture {
  Runtime rt{Block{"lazy", 1}};
  StencilId ident;
  StencilId three;
  DatasetId f0;
  DatasetId f1;

  QueueFixture() {
    ident = rt.declare_stencil("ident", {Point{0, 0, 0}});
    three = rt.declare_stencil("three",
                               {Point{-1, 0, 0}, Point{0, 0, 0}, Point{1, 0, 0}});
    f0 = rt.declare_field("f0", Range::d1(0, 16));
    f1 = rt.declare_field("f1", Range::d1(0, 16));
    rt.fill_logical(f0, 0.0);
    rt.fill_logical(f1, 0.0);
  }
};

TEST(LazyQueue, RecordingDoesNotExecute) {
  QueueFixture fx;
  auto hits = std::make_shared<std::atomic<int64_t>>(0);
  fx.rt.par_loop(counting_kernel(0, hits, 3.0), Range::d1(0, 16),
                 {{fx.f0, fx.ident, AccessMode::Write}});

  EXPECT_EQ(hits->load(), 0);
  EXPECT_EQ(fx.rt.pending_loops(), 1u);
  // Inspect the field without get(), which would flush.
  EXPECT_EQ(fx.rt.fields()[fx.f0].read(Point{5, 0, 0}), 0.0);

  ExecutionReport rep = fx.rt.flush(ExecMode::untiled());
  EXPECT_EQ(hits->load(), 16);
  EXPECT_EQ(fx.rt.pending_loops(), 0u);
  EXPECT_EQ(fx.rt.fields()[fx.f0].read(Point{5, 0, 0}), 3.0);
  ASSERT_EQ(rep.loops.size(), 1u);
  EXPECT_EQ(rep.loops[0].points, 16);
  EXPECT_EQ(rep.loops[0].kernel_invocations, 16);
}

TEST(LazyQueue, TakePendingSnapshotsChain) {
  QueueFixture fx;
  auto hits = std::make_shared<std::atomic<int64_t>>(0);
  fx.rt.par_loop(counting_kernel(0, hits, 1.0), Range::d1(0, 8),
                 {{fx.f0, fx.ident, AccessMode::Write}});
  fx.rt.par_loop(counting_kernel(1, hits, 2.0), Range::d1(0, 8),
                 {{fx.f1, fx.ident, AccessMode::Write}});

  LoopChain chain = fx.rt.take_pending();
  EXPECT_EQ(fx.rt.pending_loops(), 0u);
  EXPECT_EQ(hits->load(), 0);
  ASSERT_EQ(chain.size(), 2u);
  EXPECT_EQ(chain.loops[0].loop_id, 0);
  EXPECT_EQ(chain.loops[1].loop_id, 1);
  EXPECT_EQ(chain.dim, 1);
  // Stencil table snapshot travels with the chain.
  ASSERT_EQ(chain.stencils.size(), 2u);
  EXPECT_TRUE(chain.stencil(fx.ident).is_identity());
  EXPECT_EQ(chain.stencil(fx.three).points().size(), 3u);
}

TEST(LazyQueue, EmptyFlushIsNoOp) {
  QueueFixture fx;
  ExecutionReport rep = fx.rt.flush(ExecMode::tiled({4, 0, 0}));
  EXPECT_EQ(rep.loops.size(), 0u);
  EXPECT_EQ(rep.tiles_executed, 0);
  EXPECT_EQ(rep.total_points(), 0);
}

TEST(LazyQueue, FetchReductionFlushesPrefixOnly) {
  QueueFixture fx;
  auto tail_hits = std::make_shared<std::atomic<int64_t>>(0);

  fx.rt.par_loop(counting_kernel(0, std::make_shared<std::atomic<int64_t>>(0),
                                 1.0),
                 Range::d1(0, 8), {{fx.f0, fx.ident, AccessMode::Write}});
  ReductionHandle sum = fx.rt.par_loop(
      KernelHandle{1, "sum",
                   [](KernelCtx& ctx) { ctx.contribute(ctx.read(0)); }},
      Range::d1(0, 8), {{fx.f0, fx.ident, AccessMode::Read}}, ReduceOp::Sum);
  fx.rt.par_loop(counting_kernel(2, tail_hits, 5.0), Range::d1(0, 16),
                 {{fx.f1, fx.ident, AccessMode::Write}});

  ASSERT_TRUE(sum.valid());
  EXPECT_EQ(fx.rt.fetch_reduction(sum), 8.0);
  // The loop after the reduction stays recorded, renumbered from zero.
  EXPECT_EQ(tail_hits->load(), 0);
  ASSERT_EQ(fx.rt.pending_loops(), 1u);
  LoopChain rest = fx.rt.take_pending();
  EXPECT_EQ(rest.loops[0].loop_id, 0);
  EXPECT_EQ(rest.loops[0].kernel.id, 2);
}

TEST(LazyQueue, FetchReductionCanFlushWholeQueue) {
  RuntimeConfig cfg;
  cfg.flush_whole_queue_on_fetch = true;
  Runtime rt(Block{"lazy", 1}, cfg);
  StencilId ident = rt.declare_stencil("ident", {Point{0, 0, 0}});
  DatasetId f0 = rt.declare_field("f0", Range::d1(0, 8));
  DatasetId f1 = rt.declare_field("f1", Range::d1(0, 8));
  rt.fill_logical(f0, 2.0);
  rt.fill_logical(f1, 0.0);

  auto tail_hits = std::make_shared<std::atomic<int64_t>>(0);
  ReductionHandle sum = rt.par_loop(
      KernelHandle{0, "sum",
                   [](KernelCtx& ctx) { ctx.contribute(ctx.read(0)); }},
      Range::d1(0, 8), {{f0, ident, AccessMode::Read}}, ReduceOp::Sum);
  rt.par_loop(counting_kernel(1, tail_hits, 7.0), Range::d1(0, 8),
              {{f1, ident, AccessMode::Write}});

  EXPECT_EQ(rt.fetch_reduction(sum), 16.0);
  EXPECT_EQ(rt.pending_loops(), 0u);
  EXPECT_EQ(tail_hits->load(), 8);
}

TEST(LazyQueue, FetchTwiceThrows) {
  QueueFixture fx;
  fx.rt.fill_logical(fx.f0, 1.0);
  ReductionHandle sum = fx.rt.par_loop(
      KernelHandle{0, "sum",
                   [](KernelCtx& ctx) { ctx.contribute(ctx.read(0)); }},
      Range::d1(0, 4), {{fx.f0, fx.ident, AccessMode::Read}}, ReduceOp::Sum);
  EXPECT_EQ(fx.rt.fetch_reduction(sum), 4.0);
  EXPECT_THROW(fx.rt.fetch_reduction(sum), InvalidArgument);
}

TEST(LazyQueue, FetchUnknownHandleThrows) {
  QueueFixture fx;
  EXPECT_THROW(fx.rt.fetch_reduction(ReductionHandle{}), InvalidArgument);
  EXPECT_THROW(fx.rt.fetch_reduction(ReductionHandle{42}), InvalidArgument);
}

TEST(LazyQueue, HostReadsFlushPendingWork) {
  QueueFixture fx;
  auto hits = std::make_shared<std::atomic<int64_t>>(0);
  fx.rt.par_loop(counting_kernel(0, hits, 9.0), Range::d1(0, 16),
                 {{fx.f0, fx.ident, AccessMode::Write}});
  EXPECT_EQ(fx.rt.get(fx.f0, Point{3, 0, 0}), 9.0);
  EXPECT_EQ(hits->load(), 16);
  EXPECT_EQ(fx.rt.pending_loops(), 0u);
}

TEST(LazyQueue, RejectsMultiPointWriteStencil) {
  QueueFixture fx;
  EXPECT_THROW(
      fx.rt.par_loop(KernelHandle{0, "bad", [](KernelCtx&) {}},
                     Range::d1(1, 15), {{fx.f0, fx.three, AccessMode::Write}}),
      InvalidArgument);
}

TEST(LazyQueue, RejectsRacyReadOfWrittenDataset) {
  QueueFixture fx;
  // Reading f0 at +-1 while writing f0 over the same range races.
  EXPECT_THROW(
      fx.rt.par_loop(KernelHandle{0, "bad", [](KernelCtx&) {}},
                     Range::d1(1, 15),
                     {{fx.f0, fx.three, AccessMode::Read},
                      {fx.f0, fx.ident, AccessMode::Write}}),
      InvalidArgument);
  // A one-point range whose shifted image misses itself is legal: the read
  // lands outside every written point.
  EXPECT_NO_THROW(fx.rt.par_loop(
      KernelHandle{1, "edge",
                   [](KernelCtx& ctx) { ctx.write(1, ctx.read(0, 1)); }},
      Range::d1(0, 1),
      {{fx.f0, fx.three, AccessMode::Read},
       {fx.f0, fx.ident, AccessMode::Write}}));
}

TEST(LazyQueue, RejectsMalformedLoops) {
  QueueFixture fx;
  EXPECT_THROW(fx.rt.par_loop(KernelHandle{-1, "noid", [](KernelCtx&) {}},
                              Range::d1(0, 4),
                              {{fx.f0, fx.ident, AccessMode::Write}}),
               InvalidArgument);
  EXPECT_THROW(fx.rt.par_loop(KernelHandle{0, "nofn", nullptr},
                              Range::d1(0, 4),
                              {{fx.f0, fx.ident, AccessMode::Write}}),
               InvalidArgument);
  EXPECT_THROW(fx.rt.par_loop(KernelHandle{0, "badds", [](KernelCtx&) {}},
                              Range::d1(0, 4),
                              {{DatasetId{99}, fx.ident, AccessMode::Write}}),
               InvalidArgument);
  EXPECT_THROW(fx.rt.par_loop(KernelHandle{0, "badrange", [](KernelCtx&) {}},
                              Range::d2(0, 4, 0, 4),
                              {{fx.f0, fx.ident, AccessMode::Write}}),
               InvalidArgument);
}

// Re-running a structurally identical chain must reuse the cached plan.
TEST(LazyQueue, PlanCacheHitOnRepeatedChain) {
  QueueFixture fx;
  auto enqueue = [&] {
    fx.rt.par_loop(
        KernelHandle{0, "shift",
                     [](KernelCtx& ctx) { ctx.write(1, ctx.read(0, 1)); }},
        Range::d1(0, 15),
        {{fx.f0, fx.three, AccessMode::Read},
         {fx.f1, fx.ident, AccessMode::Write}});
    fx.rt.par_loop(
        KernelHandle{1, "copyback",
                     [](KernelCtx& ctx) { ctx.write(1, ctx.read(0)); }},
        Range::d1(0, 15),
        {{fx.f1, fx.ident, AccessMode::Read},
         {fx.f0, fx.ident, AccessMode::Write}});
  };

  enqueue();
  ExecutionReport first = fx.rt.flush(ExecMode::tiled({4, 0, 0}));
  EXPECT_FALSE(first.plan_cache_hit);
  EXPECT_EQ(first.plan_constructions, 1);

  enqueue();
  ExecutionReport second = fx.rt.flush(ExecMode::tiled({4, 0, 0}));
  EXPECT_TRUE(second.plan_cache_hit);
  EXPECT_EQ(second.plan_constructions, 0);
  EXPECT_EQ(fx.rt.plan_cache().constructions(), 1u);
  EXPECT_EQ(fx.rt.plan_cache().hits(), 1u);

  // Different tile sizes form a distinct cache key.
  enqueue();
  ExecutionReport third = fx.rt.flush(ExecMode::tiled({8, 0, 0}));
  EXPECT_FALSE(third.plan_cache_hit);
  EXPECT_EQ(fx.rt.plan_cache().constructions(), 2u);
}

}  // namespace
}  // namespace tilechain
