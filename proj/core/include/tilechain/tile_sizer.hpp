#pragma once

#include "tilechain/loop.hpp"
#include "tilechain/types.hpp"

namespace tilechain {

struct SizerInput {
  int dim = 2;
  int64_t cache_bytes = 0;
  int threads = 1;
  int64_t bytes_per_point = 0;  // sum of elem_bytes over datasets the chain touches
  Range domain_extent;
};

struct SizerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic tile-shape selection targeting: (i) footprint within cache,
// (ii) X at least twice Y, (iii) Y (2D) or Y*Z (3D) a multiple of the thread
// count, (iv) sizes clamped to the domain extents. 2D picks Y as the largest
// multiple of `threads` with 2*Y*Y within capacity_points, then
// X = min(extent_X, max(2Y, capacity_points / Y)). 3D keeps X untiled (full
// extent) and picks Y = Z maximal with Y*Z a thread multiple within capacity.
// Errors when the cache cannot hold even one point per thread.
std::array<int64_t, kMaxDims> auto_tile_size(const SizerInput& input);

// Footprint inputs derived from a chain: domain = union bounds hull,
// bytes_per_point = sum of elem_bytes over distinct datasets accessed.
SizerInput sizer_input_from_chain(const LoopChain& chain,
                                  std::span<const int> elem_bytes_by_dataset,
                                  int64_t cache_bytes, int threads);

}  // namespace tilechain
