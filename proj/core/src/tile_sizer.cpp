#include "tilechain/tile_sizer.hpp"

#include <cmath>
#include <set>

namespace tilechain {

namespace {

int64_t isqrt(int64_t v) {
  if (v <= 0) return 0;
  int64_t r = static_cast<int64_t>(std::sqrt(static_cast<double>(v)));
  while ((r + 1) * (r + 1) <= v) ++r;
  while (r * r > v) --r;
  return r;
}

// Smallest y >= 1 with y*y divisible by T; y = T always qualifies.
int64_t min_square_multiple(int64_t T) {
  for (int64_t y = 1; y < T; ++y)
    if ((y * y) % T == 0) return y;
  return T;
}

}  // namespace

std::array<int64_t, kMaxDims> auto_tile_size(const SizerInput& in) {
  if (in.dim < 1 || in.dim > kMaxDims)
    throw SizerError("auto_tile_size: dim must be in [1,3]");
  if (in.cache_bytes <= 0 || in.threads <= 0 || in.bytes_per_point <= 0)
    throw SizerError(
        "auto_tile_size: cache_bytes, threads, bytes_per_point must be positive");
  if (in.domain_extent.empty())
    throw SizerError("auto_tile_size: empty domain extent");

  const int64_t capacity = in.cache_bytes / in.bytes_per_point;
  const int64_t T = in.threads;
  if (capacity < T)
    throw SizerError("auto_tile_size: cache cannot hold one point per thread");

  std::array<int64_t, kMaxDims> extent{1, 1, 1};
  for (int d = 0; d < in.dim; ++d) extent[d] = in.domain_extent.extent(d);

  std::array<int64_t, kMaxDims> sizes{1, 1, 1};

  if (in.dim == 1) {
    sizes[0] = std::min(extent[0], capacity);
    return sizes;
  }

  if (in.dim == 2) {
    // Y: largest multiple of T with 2*Y*Y <= capacity, fallback T.
    int64_t y = isqrt(capacity / 2) / T * T;
    if (y < T) y = T;
    if (extent[1] < y) {
      y = extent[1] / T * T;
      if (y < T) y = std::min<int64_t>(T, extent[1]);
    }
    sizes[1] = y;
    sizes[0] = std::min(extent[0], std::max(2 * y, capacity / y));
    return sizes;
  }

  // 3D: X stays untiled; Y = Z maximal with Y*Z a multiple of T and
  // X*Y*Z within capacity, also keeping X >= 2Y.
  const int64_t x = extent[0];
  int64_t bound = isqrt(capacity / x);
  bound = std::min({bound, extent[1], extent[2], std::max<int64_t>(1, x / 2)});
  int64_t y = 0;
  for (int64_t c = bound; c >= 1; --c) {
    if ((c * c) % T == 0) {
      y = c;
      break;
    }
  }
  if (y == 0) y = min_square_multiple(T);
  sizes[0] = x;
  sizes[1] = y;
  sizes[2] = y;
  return sizes;
}

SizerInput sizer_input_from_chain(const LoopChain& chain,
                                  std::span<const int> elem_bytes_by_dataset,
                                  int64_t cache_bytes, int threads) {
  SizerInput in;
  in.dim = chain.dim;
  in.cache_bytes = cache_bytes;
  in.threads = threads;

  std::set<DatasetId> touched;
  bool first = true;
  Range hull;
  for (const LoopRecord& loop : chain.loops) {
    for (const ArgSpec& a : loop.args) touched.insert(a.dataset);
    hull = first ? loop.range : hull.hull(loop.range);
    first = false;
  }
  in.domain_extent = hull;

  int64_t bpp = 0;
  for (DatasetId id : touched) {
    if (static_cast<size_t>(id) >= elem_bytes_by_dataset.size())
      throw InvalidArgument("sizer_input_from_chain: dataset id out of range");
    bpp += elem_bytes_by_dataset[static_cast<size_t>(id)];
  }
  in.bytes_per_point = bpp;
  return in;
}

}  // namespace tilechain
