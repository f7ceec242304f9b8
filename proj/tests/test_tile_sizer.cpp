#include <gtest/gtest.h>

#include "tilechain/tile_sizer.hpp"

namespace tilechain {
namespace {

SizerInput make_input(int dim, int64_t cache_bytes, int threads, int64_t bpp,
                      Range domain) {
  SizerInput in;
  in.dim = dim;
  in.cache_bytes = cache_bytes;
  in.threads = threads;
  in.bytes_per_point = bpp;
  in.domain_extent = domain;
  return in;
}

TEST(TileSizer, OneDimensionClampsToCapacityAndExtent) {
  // capacity = 64KB / 16B = 4096 points.
  auto ts = auto_tile_size(make_input(1, 64 << 10, 1, 16, Range::d1(0, 100000)));
  EXPECT_EQ(ts[0], 4096);
  EXPECT_EQ(ts[1], 1);

  ts = auto_tile_size(make_input(1, 64 << 10, 1, 16, Range::d1(0, 500)));
  EXPECT_EQ(ts[0], 500);
}

TEST(TileSizer, TwoDimensionShape) {
  // capacity = 32768 points, threads 4: y = isqrt(16384)/4*4 = 128,
  // x = min(extent, max(256, 32768/128 = 256)) = 256.
  auto ts =
      auto_tile_size(make_input(2, 512 << 10, 4, 16, Range::d2(0, 4096, 0, 4096)));
  EXPECT_EQ(ts[1], 128);
  EXPECT_EQ(ts[0], 256);

  // Footprint within cache, x at least 2y, y a thread multiple.
  EXPECT_LE(ts[0] * ts[1] * 16, 512 << 10);
  EXPECT_GE(ts[0], 2 * ts[1]);
  EXPECT_EQ(ts[1] % 4, 0);
}

TEST(TileSizer, TwoDimensionShortExtentFallsBackToThreads) {
  // Domain only 6 rows tall with 4 threads: y snaps to 4.
  auto ts =
      auto_tile_size(make_input(2, 512 << 10, 4, 16, Range::d2(0, 4096, 0, 6)));
  EXPECT_EQ(ts[1], 4);
  // Degenerate 2-row domain cannot fit a thread multiple; y = extent.
  ts = auto_tile_size(make_input(2, 512 << 10, 4, 16, Range::d2(0, 4096, 0, 2)));
  EXPECT_EQ(ts[1], 2);
}

TEST(TileSizer, ThreeDimensionKeepsXFullAndYZSquare) {
  // 64^3 domain, capacity = 1MB/8 = 131072 points, threads 2:
  // x = 64, bound = min(isqrt(131072/64) = 45, 64, 64, 32) = 32; largest
  // c <= 32 with c*c % 2 == 0 is 32.
  auto ts = auto_tile_size(
      make_input(3, 1 << 20, 2, 8, Range::d3(0, 64, 0, 64, 0, 64)));
  EXPECT_EQ(ts[0], 64);
  EXPECT_EQ(ts[1], 32);
  EXPECT_EQ(ts[2], 32);
  EXPECT_LE(ts[0] * ts[1] * ts[2] * 8, 1 << 20);
  EXPECT_EQ((ts[1] * ts[2]) % 2, 0);
  EXPECT_GE(ts[0], 2 * ts[1]);
}

TEST(TileSizer, ErrorsOnImpossibleInputs) {
  EXPECT_THROW(auto_tile_size(make_input(0, 1 << 20, 1, 8, Range::d1(0, 8))),
               SizerError);
  EXPECT_THROW(auto_tile_size(make_input(1, 0, 1, 8, Range::d1(0, 8))),
               SizerError);
  EXPECT_THROW(auto_tile_size(make_input(1, 1 << 20, 0, 8, Range::d1(0, 8))),
               SizerError);
  EXPECT_THROW(auto_tile_size(make_input(1, 1 << 20, 1, 0, Range::d1(0, 8))),
               SizerError);
  EXPECT_THROW(auto_tile_size(make_input(1, 1 << 20, 1, 8, Range::d1(4, 4))),
               SizerError);
  // Cache holds fewer points than threads.
  EXPECT_THROW(auto_tile_size(make_input(2, 64, 16, 8, Range::d2(0, 64, 0, 64))),
               SizerError);
}

TEST(TileSizer, InputFromChainSumsDistinctDatasets) {
  LoopChain chain;
  chain.dim = 2;
  chain.stencils = {Stencil::identity(2)};
  LoopRecord a;
  a.loop_id = 0;
  a.kernel = {0, "a", [](KernelCtx&) {}};
  a.range = Range::d2(0, 10, 0, 10);
  a.args = {{DatasetId{0}, StencilId{0}, AccessMode::Read},
            {DatasetId{1}, StencilId{0}, AccessMode::Write}};
  LoopRecord b;
  b.loop_id = 1;
  b.kernel = {1, "b", [](KernelCtx&) {}};
  b.range = Range::d2(0, 12, 2, 10);
  // Dataset 1 appears twice across the chain; counted once.
  b.args = {{DatasetId{1}, StencilId{0}, AccessMode::Read},
            {DatasetId{2}, StencilId{0}, AccessMode::Write}};
  chain.loops = {a, b};

  const std::vector<int> elem_bytes{8, 8, 4};
  SizerInput in = sizer_input_from_chain(chain, elem_bytes, 1 << 20, 3);
  EXPECT_EQ(in.dim, 2);
  EXPECT_EQ(in.cache_bytes, 1 << 20);
  EXPECT_EQ(in.threads, 3);
  EXPECT_EQ(in.bytes_per_point, 20);
  EXPECT_EQ(in.domain_extent.start(0), 0);
  EXPECT_EQ(in.domain_extent.end(0), 12);
  EXPECT_EQ(in.domain_extent.start(1), 0);
  EXPECT_EQ(in.domain_extent.end(1), 10);
}

}  // namespace
}  // namespace tilechain
