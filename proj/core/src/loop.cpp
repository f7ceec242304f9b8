#include "tilechain/loop.hpp"

namespace tilechain {

namespace {

// FNV-1a, 64-bit.
struct Hasher {
  uint64_t h = 14695981039346656037ull;
  void mix(uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (i * 8)) & 0xff;
      h *= 1099511628211ull;
    }
  }
};

}  // namespace

uint64_t LoopChain::signature() const {
  Hasher hs;
  hs.mix(static_cast<uint64_t>(dim));
  hs.mix(loops.size());
  for (const LoopRecord& l : loops) {
    hs.mix(static_cast<uint64_t>(l.kernel.id));
    for (int d = 0; d < dim; ++d) {
      hs.mix(static_cast<uint64_t>(l.range.start(d)));
      hs.mix(static_cast<uint64_t>(l.range.end(d)));
    }
    hs.mix(l.args.size());
    for (const ArgSpec& a : l.args) {
      hs.mix(static_cast<uint64_t>(a.dataset));
      hs.mix(static_cast<uint64_t>(a.stencil));
      hs.mix(static_cast<uint64_t>(a.mode));
    }
    hs.mix(l.reduction.has_value()
               ? 0x9e3779b9u + static_cast<uint64_t>(l.reduction->op)
               : 0ull);
  }
  return hs.h;
}

DatasetId LoopChain::max_dataset_id() const {
  DatasetId m = -1;
  for (const LoopRecord& l : loops)
    for (const ArgSpec& a : l.args) m = std::max(m, a.dataset);
  return m;
}

int64_t estimate_bytes_moved(const LoopRecord& loop, const Range& executed,
                             std::span<const int> elem_bytes_by_dataset) {
  const int64_t points = executed.volume();
  int64_t bytes = 0;
  for (const ArgSpec& a : loop.args) {
    const int w =
        (a.mode == AccessMode::ReadWrite || a.mode == AccessMode::Increment) ? 2
                                                                             : 1;
    bytes += points * elem_bytes_by_dataset[static_cast<size_t>(a.dataset)] * w;
  }
  return bytes;
}

}  // namespace tilechain
