#pragma once

#include <cstdint>
#include <vector>

#include "tilechain/runtime.hpp"

namespace tilechain::testing {

struct GenConfig {
  int dim = 2;
  int min_loops = 2;
  int max_loops = 10;
  int64_t extent_min = 24;
  int64_t extent_max = 48;
  int max_radius = 2;
  int min_datasets = 3;
  int max_datasets = 5;
  bool allow_reductions = true;
  bool allow_thin_loops = true;
  // Keep every stencil read inside logical ranges (required for distributed
  // value-equivalence runs, where padding contents are rank-dependent).
  bool reads_within_logical = false;
};

// A reproducible random loop chain: datasets, stencils (radius-bounded point
// sets always containing the identity stencil at id 0), and loops whose
// kernels compute contracting dyadic combinations of exactly the declared
// reads. A loop never reads a dataset it writes except through the identity
// center (ReadWrite / Increment), so the per-point parallelism contract holds
// by construction.
struct GeneratedChain {
  GenConfig cfg;
  uint64_t seed = 0;
  std::vector<Range> field_ranges;
  std::vector<std::vector<Point>> stencil_offsets;

  struct GenLoop {
    Range range;
    std::vector<ArgSpec> args;
    std::optional<ReduceOp> reduce;
  };
  std::vector<GenLoop> loops;
};

GeneratedChain generate_chain(uint64_t seed, const GenConfig& cfg = {});

// Declares stencils and fields on `rt` and fills deterministic dyadic initial
// values (a function of the point and dataset id, not of the seed).
void declare_chain(Runtime& rt, const GeneratedChain& gc);

// Enqueues every loop; returns handles of reducing loops in order.
std::vector<ReductionHandle> enqueue_chain(Runtime& rt, const GeneratedChain& gc);

// Random tile sizes in [1, extent + slack] for each used dimension.
std::array<int64_t, kMaxDims> random_tile_sizes(uint64_t seed,
                                                const GeneratedChain& gc);

}  // namespace tilechain::testing
