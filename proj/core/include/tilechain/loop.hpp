#pragma once

#include <optional>
#include <span>

#include "tilechain/kernel_ctx.hpp"
#include "tilechain/types.hpp"

namespace tilechain {

// One recorded parallel loop: kernel, iteration range, access descriptors.
// The kernel contract is order-insensitivity across grid points within the
// loop; the runtime schedules points in any order and concurrently.
struct LoopRecord {
  int32_t loop_id = -1;  // position in its chain
  KernelHandle kernel;
  Range range;
  std::vector<ArgSpec> args;
  std::optional<ReductionSpec> reduction;
};

// Ordered loop sequence analyzed as a unit, with a snapshot of the stencil
// table so the chain stays self-contained after the runtime moves on.
struct LoopChain {
  int dim = 1;
  std::vector<LoopRecord> loops;
  std::vector<Stencil> stencils;

  bool empty() const { return loops.empty(); }
  size_t size() const { return loops.size(); }
  const Stencil& stencil(StencilId id) const {
    return stencils.at(static_cast<size_t>(id));
  }

  // Hash over per-loop (kernel id, range, arg dataset/stencil ids, access
  // modes). Identical structure gives identical signatures; any structural
  // difference, including iteration bounds, changes it.
  uint64_t signature() const;

  DatasetId max_dataset_id() const;
};

// Traffic estimate for one loop over `executed`: sum over args of
// |executed| * elem_bytes * w, with w = 2 for ReadWrite/Increment and 1
// otherwise. Multi-point-stencil reuse is deliberately ignored.
int64_t estimate_bytes_moved(const LoopRecord& loop, const Range& executed,
                             std::span<const int> elem_bytes_by_dataset);

}  // namespace tilechain
