#include "tilechain/planner.hpp"

#include <chrono>
#include <cstdio>

namespace tilechain {

namespace {

constexpr int64_t kUnset = std::numeric_limits<int64_t>::min();

struct Interval {
  int64_t start = 0, end = 0;
  bool empty() const { return end <= start; }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

PlanConfig compute_union_bounds(const LoopChain& chain,
                                const std::array<int64_t, kMaxDims>& tile_sizes) {
  if (chain.empty()) throw PlanError("compute_union_bounds: empty chain");
  PlanConfig cfg;
  cfg.dim = chain.dim;
  cfg.union_bounds = chain.loops.front().range;
  for (const LoopRecord& l : chain.loops)
    cfg.union_bounds = cfg.union_bounds.hull(l.range);
  for (int d = 0; d < cfg.dim; ++d) {
    cfg.tile_sizes[d] = std::max<int64_t>(1, tile_sizes[d]);
    const int64_t extent = cfg.union_bounds.extent(d);
    cfg.num_tiles[d] =
        extent > 0 ? (extent - 1) / cfg.tile_sizes[d] + 1 : 1;
  }
  return cfg;
}

// Reverse-order dependency analysis, one dimension at a time.
//
// Sweeping loops from the last to the first, per tile slab t along d:
//   end: the last non-empty slab closes at the loop's end; otherwise reads of
//        the loop's written datasets by later loops pull the end right
//        (read-after-write), then later writes push it further so this slab's
//        reads/writes complete before being clobbered (write-after-read/write,
//        skipped for the final slab), and an untouched slab defaults to the
//        grid boundary. Every extension clamps at the loop's end.
//   start: slab 0 starts at the loop's start; each later slab starts at the
//        previous slab's end, clamping end below start to the empty range.
// After a loop's slab ranges are final, its args widen the running read/write
// extents that earlier (= later-analyzed) loops must satisfy. Empty slabs
// execute nothing, so they contribute no extents.
TilingPlan construct_plan(const LoopChain& chain, const PlanConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const int dim = cfg.dim;
  const int32_t L = static_cast<int32_t>(chain.size());
  if (L == 0) throw PlanError("construct_plan: empty chain");

  DependencyExtents deps;
  auto dep_slot = [&](DatasetId ds) -> DatasetDeps& {
    auto it = deps.find(ds);
    if (it == deps.end()) {
      DatasetDeps dd;
      for (int d = 0; d < dim; ++d) {
        dd.read[d].assign(static_cast<size_t>(cfg.num_tiles[d]), DepExtent{});
        dd.write[d].assign(static_cast<size_t>(cfg.num_tiles[d]), DepExtent{});
      }
      it = deps.emplace(ds, std::move(dd)).first;
    }
    return it->second;
  };

  // ivals[d][l * T_d + t]
  std::array<std::vector<Interval>, kMaxDims> ivals;
  std::array<int64_t, kMaxDims> max_skew{0, 0, 0};

  for (int d = 0; d < dim; ++d) {
    const int64_t T = cfg.num_tiles[d];
    const int64_t ts = cfg.tile_sizes[d];
    const int64_t ustart = cfg.union_bounds.start(d);
    ivals[d].assign(static_cast<size_t>(L) * T, Interval{});

    std::vector<int64_t> ends(static_cast<size_t>(T));
    for (int32_t l = L - 1; l >= 0; --l) {
      const LoopRecord& loop = chain.loops[static_cast<size_t>(l)];
      const int64_t ls = loop.range.start(d);
      const int64_t le = loop.range.end(d);

      int64_t last_nonempty = -1;
      for (int64_t t = T - 1; t >= 0; --t)
        if (ustart + t * ts < le) {
          last_nonempty = t;
          break;
        }

      for (int64_t t = 0; t < T; ++t) {
        int64_t end = kUnset;
        if (t == last_nonempty) {
          end = le;
        } else {
          // Read-after-write: this slab must produce everything the same
          // slab of later loops reads.
          for (const ArgSpec& a : loop.args) {
            if (!mode_writes(a.mode)) continue;
            const DepExtent& rd = dep_slot(a.dataset).read[d][static_cast<size_t>(t)];
            if (rd.set()) end = std::max(end, rd.end);
          }
          if (end != kUnset) end = std::min(end, le);
        }
        if (t != T - 1) {
          // Write-after-read/write: later writes must not clobber what this
          // slab still reads; m is the most negative stencil offset.
          int64_t war = kUnset;
          for (const ArgSpec& a : loop.args) {
            const DepExtent& wd = dep_slot(a.dataset).write[d][static_cast<size_t>(t)];
            if (!wd.set()) continue;
            const int64_t m = chain.stencil(a.stencil).min_offset(d);
            war = std::max(war, wd.end - m);
          }
          if (war != kUnset) end = std::max(end, std::min(war, le));
        }
        if (end == kUnset) end = std::min(le, ustart + (t + 1) * ts);
        ends[static_cast<size_t>(t)] = end;
      }

      int64_t start = ls;
      for (int64_t t = 0; t < T; ++t) {
        const int64_t e = std::max(ends[static_cast<size_t>(t)], start);
        ivals[d][static_cast<size_t>(l) * T + t] = {start, e};
        const int64_t nominal = std::min(le, ustart + (t + 1) * ts);
        max_skew[d] = std::max(max_skew[d], e - nominal);
        start = e;
      }

      for (int64_t t = 0; t < T; ++t) {
        const Interval iv = ivals[d][static_cast<size_t>(l) * T + t];
        if (iv.empty()) continue;
        for (const ArgSpec& a : loop.args) {
          DatasetDeps& dd = dep_slot(a.dataset);
          const Stencil& st = chain.stencil(a.stencil);
          if (mode_reads(a.mode)) {
            DepExtent& rd = dd.read[d][static_cast<size_t>(t)];
            rd.end = std::max(rd.end, iv.end + st.max_offset(d));
            rd.start = std::min(rd.start, iv.start + st.min_offset(d));
          }
          if (mode_writes(a.mode)) {
            DepExtent& wr = dd.write[d][static_cast<size_t>(t)];
            wr.end = std::max(wr.end, iv.end);
            wr.start = std::min(wr.start, iv.start);
          }
        }
      }
    }
  }

  // Cartesian product of per-dimension slabs, tiles lexicographic (t_0 slowest).
  const int64_t total = cfg.total_tiles();
  std::vector<Range> ranges;
  ranges.reserve(static_cast<size_t>(total) * L);
  std::map<DatasetId, Range> required;
  for (int64_t tile = 0; tile < total; ++tile) {
    std::array<int64_t, kMaxDims> tc{0, 0, 0};
    int64_t rem = tile;
    for (int d = dim - 1; d >= 0; --d) {
      tc[d] = rem % cfg.num_tiles[d];
      rem /= cfg.num_tiles[d];
    }
    for (int32_t l = 0; l < L; ++l) {
      Range r(dim);
      for (int d = 0; d < dim; ++d) {
        const Interval iv =
            ivals[d][static_cast<size_t>(l) * cfg.num_tiles[d] + tc[d]];
        r.set(d, iv.start, std::max(iv.start, iv.end));
      }
      if (!r.empty()) {
        for (const ArgSpec& a : chain.loops[static_cast<size_t>(l)].args) {
          const Stencil& st = chain.stencil(a.stencil);
          std::array<int64_t, kMaxDims> lo{0, 0, 0}, hi{0, 0, 0};
          for (int d = 0; d < dim; ++d) {
            if (mode_reads(a.mode)) {
              lo[d] = std::min<int64_t>(st.min_offset(d), 0);
              hi[d] = std::max<int64_t>(st.max_offset(d), 0);
              if (a.mode == AccessMode::Read) {
                lo[d] = st.min_offset(d);
                hi[d] = st.max_offset(d);
              }
            }
          }
          const Range touched = r.dilated(lo, hi);
          auto it = required.find(a.dataset);
          if (it == required.end())
            required.emplace(a.dataset, touched);
          else
            it->second = it->second.hull(touched);
        }
      }
      ranges.push_back(r);
    }
  }

  TilingPlan plan(cfg, chain.signature(), L, std::move(ranges), std::move(deps),
                  seconds_since(t0));
  plan.set_required_extents(std::move(required));
  plan.set_max_skew(max_skew);
  return plan;
}

TilingPlan::TilingPlan(PlanConfig config, uint64_t signature, int32_t num_loops,
                       std::vector<Range> ranges, DependencyExtents deps,
                       double build_seconds)
    : config_(std::move(config)),
      signature_(signature),
      num_loops_(num_loops),
      ranges_(std::move(ranges)),
      deps_(std::move(deps)),
      build_seconds_(build_seconds) {
  if (ranges_.size() !=
      static_cast<size_t>(config_.total_tiles()) * static_cast<size_t>(num_loops_))
    throw PlanError("TilingPlan: ranges size mismatch");
}

std::array<int64_t, kMaxDims> TilingPlan::tile_coords(int64_t tile) const {
  std::array<int64_t, kMaxDims> tc{0, 0, 0};
  int64_t rem = tile;
  for (int d = config_.dim - 1; d >= 0; --d) {
    tc[d] = rem % config_.num_tiles[d];
    rem /= config_.num_tiles[d];
  }
  return tc;
}

std::string TilingPlan::dump() const {
  std::string out;
  char line[96];
  const int64_t total = config_.total_tiles();
  for (int64_t t = 0; t < total; ++t)
    for (int32_t l = 0; l < num_loops_; ++l) {
      const Range& r = range(t, l);
      for (int d = 0; d < config_.dim; ++d) {
        std::snprintf(line, sizeof line, "tile=%lld loop=%d d=%d [%lld,%lld)\n",
                      static_cast<long long>(t), l, d,
                      static_cast<long long>(r.start(d)),
                      static_cast<long long>(r.end(d)));
        out += line;
      }
    }
  return out;
}

void verify_plan_extents(const TilingPlan& plan, const FieldTable& fields) {
  for (const auto& [ds, req] : plan.required_extents()) {
    const Field& f = fields[ds];
    const Range& alloc = f.alloc_range();
    if (alloc.contains(req)) continue;
    std::string msg = "plan requires dataset " + f.name() + " over " +
                      req.to_string() + " but allocation is " +
                      alloc.to_string() + " (per-face shortfall:";
    for (int d = 0; d < alloc.dim(); ++d) {
      const int64_t lo = std::max<int64_t>(0, alloc.start(d) - req.start(d));
      const int64_t hi = std::max<int64_t>(0, req.end(d) - alloc.end(d));
      msg += " d" + std::to_string(d) + "=-" + std::to_string(lo) + "/+" +
             std::to_string(hi);
    }
    msg += "); declare wider stencils first or raise the skew allowance";
    throw PlanError(msg);
  }
}

std::shared_ptr<const TilingPlan> PlanCache::get_or_build(
    const LoopChain& chain, const std::array<int64_t, kMaxDims>& tile_sizes,
    bool* cache_hit) {
  return get_or_build(
      chain.signature(), tile_sizes,
      [&] { return construct_plan(chain, tile_sizes); }, cache_hit);
}

std::shared_ptr<const TilingPlan> PlanCache::get_or_build(
    uint64_t signature, const std::array<int64_t, kMaxDims>& tile_sizes,
    const std::function<TilingPlan()>& build, bool* cache_hit) {
  const Key key{signature, tile_sizes[0], tile_sizes[1], tile_sizes[2]};
  auto it = entries_.find(key);
  if (it != entries_.end()) {
    ++hits_;
    if (cache_hit) *cache_hit = true;
    return it->second;
  }
  if (cache_hit) *cache_hit = false;
  ++constructions_;
  auto plan = std::make_shared<const TilingPlan>(build());
  entries_.emplace(key, plan);
  return plan;
}

}  // namespace tilechain
