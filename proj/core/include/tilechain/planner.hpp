#pragma once

#include <map>
#include <memory>
#include <tuple>

#include "tilechain/field.hpp"
#include "tilechain/loop.hpp"

namespace tilechain {

// Tile grid derived from the union of all loop ranges in a chain.
struct PlanConfig {
  int dim = 1;
  Range union_bounds;
  std::array<int64_t, kMaxDims> tile_sizes{1, 1, 1};
  std::array<int64_t, kMaxDims> num_tiles{1, 1, 1};

  int64_t total_tiles() const {
    int64_t n = 1;
    for (int d = 0; d < dim; ++d) n *= num_tiles[d];
    return n;
  }
};

// Per-dataset, per-dimension, per-tile-slab read/write extents accumulated by
// the reverse-order sweep. Extents only widen as the sweep proceeds; an entry
// stays empty until some non-empty tile range touches the dataset.
struct DepExtent {
  int64_t start = std::numeric_limits<int64_t>::max();
  int64_t end = std::numeric_limits<int64_t>::min();
  bool set() const { return end != std::numeric_limits<int64_t>::min(); }
};

struct DatasetDeps {
  // Indexed [dim][slab].
  std::array<std::vector<DepExtent>, kMaxDims> read;
  std::array<std::vector<DepExtent>, kMaxDims> write;
};

using DependencyExtents = std::map<DatasetId, DatasetDeps>;

// Skewed per-tile, per-loop iteration ranges for one chain signature.
// Tiles linearize lexicographically by (t_0, t_1, t_2), t_0 slowest.
class TilingPlan {
 public:
  TilingPlan(PlanConfig config, uint64_t signature, int32_t num_loops,
             std::vector<Range> ranges, DependencyExtents deps,
             double build_seconds);

  const PlanConfig& config() const { return config_; }
  uint64_t signature() const { return signature_; }
  int32_t num_loops() const { return num_loops_; }
  int64_t num_tiles() const { return config_.total_tiles(); }
  double build_seconds() const { return build_seconds_; }

  const Range& range(int64_t tile, int32_t loop) const {
    return ranges_[static_cast<size_t>(tile) * num_loops_ + loop];
  }
  std::array<int64_t, kMaxDims> tile_coords(int64_t tile) const;

  // Dependency extents retained for halo-depth computation.
  const DependencyExtents& deps() const { return deps_; }

  // Hull of every access any (tile, loop, arg) can make, per dataset; the
  // halo-sufficiency check compares this against allocated extents.
  const std::map<DatasetId, Range>& required_extents() const {
    return required_extents_;
  }

  // Deterministic text: one line per (tile, loop, dim),
  //   tile=<t> loop=<l> d=<d> [<start>,<end>)
  // in lexicographic tile order.
  std::string dump() const;

  void set_required_extents(std::map<DatasetId, Range> re) {
    required_extents_ = std::move(re);
  }

  // Largest end-extension past the nominal slab boundary, per dimension.
  const std::array<int64_t, kMaxDims>& max_skew() const { return max_skew_; }
  void set_max_skew(const std::array<int64_t, kMaxDims>& s) { max_skew_ = s; }

 private:
  PlanConfig config_;
  uint64_t signature_;
  int32_t num_loops_;
  std::vector<Range> ranges_;
  DependencyExtents deps_;
  std::map<DatasetId, Range> required_extents_;
  std::array<int64_t, kMaxDims> max_skew_{0, 0, 0};
  double build_seconds_;
};

// Union of index sets plus the tile grid: num_tiles_d =
// (end_d - start_d - 1) / tilesize_d + 1. Tile sizes clamp to at least 1;
// entries beyond the chain dim are ignored.
PlanConfig compute_union_bounds(const LoopChain& chain,
                                const std::array<int64_t, kMaxDims>& tile_sizes);

// Reverse-order dependency analysis producing skewed tile ranges. Each
// dimension is analyzed independently; multi-dimensional tiles take the
// Cartesian product of per-dimension slab intervals (hyper-trapezoids).
TilingPlan construct_plan(const LoopChain& chain, const PlanConfig& config);

inline TilingPlan construct_plan(const LoopChain& chain,
                                 const std::array<int64_t, kMaxDims>& tile_sizes) {
  return construct_plan(chain, compute_union_bounds(chain, tile_sizes));
}

// Throws PlanError if any dataset's required extent escapes its allocation;
// the message names the dataset and the shortfall per face.
void verify_plan_extents(const TilingPlan& plan, const FieldTable& fields);

// Plans keyed by (chain signature, tile sizes); hits skip re-analysis.
class PlanCache {
 public:
  std::shared_ptr<const TilingPlan> get_or_build(
      const LoopChain& chain, const std::array<int64_t, kMaxDims>& tile_sizes,
      bool* cache_hit = nullptr);

  // Variant for externally built plans (rank plans share the cache logic).
  std::shared_ptr<const TilingPlan> get_or_build(
      uint64_t signature, const std::array<int64_t, kMaxDims>& tile_sizes,
      const std::function<TilingPlan()>& build, bool* cache_hit = nullptr);

  int64_t constructions() const { return constructions_; }
  int64_t hits() const { return hits_; }
  void clear() { entries_.clear(); }

 private:
  using Key = std::tuple<uint64_t, int64_t, int64_t, int64_t>;
  std::map<Key, std::shared_ptr<const TilingPlan>> entries_;
  int64_t constructions_ = 0;
  int64_t hits_ = 0;
};

}  // namespace tilechain
