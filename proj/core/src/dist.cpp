#include "tilechain/dist.hpp"

#include <chrono>

namespace tilechain {

namespace {

constexpr int64_t kUnset = std::numeric_limits<int64_t>::min();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

template <typename F>
void for_each_point(const Range& r, F&& f) {
  if (r.empty()) return;
  const int64_t n0 = r.extent(0);
  const int64_t n1 = r.dim() > 1 ? r.extent(1) : 1;
  const int64_t n2 = r.dim() > 2 ? r.extent(2) : 1;
  for (int64_t k = 0; k < n2; ++k)
    for (int64_t j = 0; j < n1; ++j)
      for (int64_t i = 0; i < n0; ++i)
        f(Point{r.start(0) + i,
                r.dim() > 1 ? r.start(1) + j : 0,
                r.dim() > 2 ? r.start(2) + k : 0});
}

// Appends frag minus cover to out as disjoint boxes; frag must intersect cover.
void subtract_box(Range frag, const Range& cover, int dim,
                  std::vector<Range>& out) {
  for (int d = 0; d < dim; ++d) {
    if (frag.start(d) < cover.start(d)) {
      Range lo = frag;
      lo.set(d, frag.start(d), cover.start(d));
      out.push_back(lo);
      frag.set(d, cover.start(d), frag.end(d));
    }
    if (frag.end(d) > cover.end(d)) {
      Range hi = frag;
      hi.set(d, cover.end(d), frag.end(d));
      out.push_back(hi);
      frag.set(d, frag.start(d), cover.end(d));
    }
  }
}

bool covered_by(const Range& box, const std::vector<Range>& covers, int dim) {
  std::vector<Range> uncovered{box};
  for (const Range& c : covers) {
    std::vector<Range> next;
    for (const Range& frag : uncovered) {
      if (frag.intersect(c).empty())
        next.push_back(frag);
      else
        subtract_box(frag, c, dim, next);
    }
    uncovered = std::move(next);
    if (uncovered.empty()) return true;
  }
  return uncovered.empty();
}

bool box_contains(const Range& outer, const Range& inner, int dim) {
  for (int d = 0; d < dim; ++d)
    if (inner.start(d) < outer.start(d) || inner.end(d) > outer.end(d))
      return false;
  return true;
}

// A dataset's halo must be exchanged when some read touches dirty points
// (written by an earlier run or anywhere in this chain) that no chain-earlier
// write recomputes locally first. Reads fully covered by earlier writes ride
// on the plan's replicated slabs; reads of never-written points see the
// scattered seed values, identical on every rank. Within one loop reads are
// classified before writes, so a read-modify-write access needs its prior
// value like any other read.
std::map<DatasetId, bool> exchange_flags(
    const LoopChain& chain,
    const std::map<DatasetId, std::vector<Range>>* prior_writes) {
  std::map<DatasetId, std::vector<Range>> dirty;
  if (prior_writes != nullptr) dirty = *prior_writes;
  for (const LoopRecord& loop : chain.loops)
    for (const ArgSpec& a : loop.args)
      if (mode_writes(a.mode)) dirty[a.dataset].push_back(loop.range);

  std::map<DatasetId, bool> needed;
  std::map<DatasetId, std::vector<Range>> covered;
  for (const LoopRecord& loop : chain.loops) {
    for (const ArgSpec& a : loop.args) {
      if (!mode_reads(a.mode)) continue;
      bool& flag = needed[a.dataset];
      if (flag) continue;
      const Stencil& st = chain.stencil(a.stencil);
      Range reads = loop.range;
      for (int d = 0; d < chain.dim; ++d)
        reads.set(d, reads.start(d) + st.min_offset(d),
                  reads.end(d) + st.max_offset(d));
      const auto it = dirty.find(a.dataset);
      if (it == dirty.end()) continue;
      for (const Range& w : it->second) {
        const Range hazard = reads.intersect(w);
        if (hazard.empty()) continue;
        if (!covered_by(hazard, covered[a.dataset], chain.dim)) {
          flag = true;
          break;
        }
      }
    }
    for (const ArgSpec& a : loop.args)
      if (mode_writes(a.mode)) covered[a.dataset].push_back(loop.range);
  }
  return needed;
}

}  // namespace

std::array<int, kMaxDims> RankLayout::coords_of(int rank) const {
  std::array<int, kMaxDims> c{0, 0, 0};
  int rem = rank;
  for (int d = dim - 1; d >= 0; --d) {
    c[d] = rem % grid[d];
    rem /= grid[d];
  }
  return c;
}

int RankLayout::rank_of(const std::array<int, kMaxDims>& coords) const {
  int r = 0;
  for (int d = 0; d < dim; ++d) r = r * grid[d] + coords[d];
  return r;
}

int RankLayout::neighbor(int rank, int d, int dir) const {
  std::array<int, kMaxDims> c = coords_of(rank);
  c[d] += dir;
  if (c[d] < 0 || c[d] >= grid[d]) return -1;
  return rank_of(c);
}

RankLayout decompose(const Range& global,
                     const std::array<int, kMaxDims>& grid) {
  RankLayout layout;
  layout.dim = global.dim();
  layout.grid = grid;
  layout.global = global;
  int total = 1;
  for (int d = 0; d < kMaxDims; ++d) {
    if (grid[d] < 1)
      throw InvalidArgument("decompose: rank counts must be >= 1");
    if (d >= layout.dim) {
      if (grid[d] != 1)
        throw InvalidArgument("decompose: grid uses dimension beyond domain");
      continue;
    }
    if (grid[d] > global.extent(d))
      throw InvalidArgument("decompose: more ranks than points in dim " +
                            std::to_string(d));
    total *= grid[d];
  }
  layout.owned.resize(static_cast<size_t>(total), Range(layout.dim));
  for (int r = 0; r < total; ++r) {
    const auto c = layout.coords_of(r);
    Range own(layout.dim);
    for (int d = 0; d < layout.dim; ++d) {
      const int64_t ext = global.extent(d);
      const int64_t base = ext / grid[d];
      const int64_t rem = ext % grid[d];
      const int64_t s =
          global.start(d) + c[d] * base + std::min<int64_t>(c[d], rem);
      own.set(d, s, s + base + (c[d] < rem ? 1 : 0));
    }
    layout.owned[static_cast<size_t>(r)] = own;
  }
  return layout;
}

// Shared-memory sweep with the distributed modifications, per dimension:
//   - union bounds come from the rank's owned intersection of every loop;
//   - ends extend past the owned boundary through read deps (clamped at the
//     GLOBAL loop end) so the rank computes replicated boundary points; the
//     loop end is taken directly only by the last non-empty slab of the rank
//     owning the loop's right boundary; untouched slabs close at the owned
//     boundary;
//   - the overshoot guard clamps each slab's end to the next slab's end,
//     which can empty early-loop slabs of thin tiles;
//   - a rank with a left neighbor extends its first slab LEFT to the read
//     dependencies of the datasets the loop writes, clamped at the global
//     loop start.
TilingPlan construct_rank_plan(const LoopChain& chain, const RankLayout& layout,
                               int rank,
                               const std::array<int64_t, kMaxDims>& tile_sizes) {
  const auto t0 = std::chrono::steady_clock::now();
  const int dim = chain.dim;
  const int32_t L = static_cast<int32_t>(chain.size());
  if (L == 0) throw PlanError("construct_rank_plan: empty chain");
  const Range& owned = layout.owned[static_cast<size_t>(rank)];

  PlanConfig cfg;
  cfg.dim = dim;
  bool have = false;
  for (const LoopRecord& l : chain.loops) {
    const Range c = l.range.intersect(owned);
    if (c.empty()) continue;
    cfg.union_bounds = have ? cfg.union_bounds.hull(c) : c;
    have = true;
  }
  if (!have) {
    cfg.union_bounds = Range(dim);
    for (int d = 0; d < dim; ++d)
      cfg.union_bounds.set(d, owned.start(d), owned.start(d));
  }
  for (int d = 0; d < dim; ++d) {
    cfg.tile_sizes[d] = std::max<int64_t>(1, tile_sizes[d]);
    const int64_t extent = cfg.union_bounds.extent(d);
    cfg.num_tiles[d] = extent > 0 ? (extent - 1) / cfg.tile_sizes[d] + 1 : 1;
  }

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

  struct Interval {
    int64_t start = 0, end = 0;
    bool empty() const { return end <= start; }
  };
  std::array<std::vector<Interval>, kMaxDims> ivals;
  std::array<int64_t, kMaxDims> max_skew{0, 0, 0};

  for (int d = 0; d < dim; ++d) {
    const int64_t T = cfg.num_tiles[d];
    const int64_t ts = cfg.tile_sizes[d];
    const int64_t ustart = cfg.union_bounds.start(d);
    const int64_t owned_s = owned.start(d);
    const int64_t owned_e = owned.end(d);
    const bool has_left = layout.neighbor(rank, d, -1) >= 0;
    ivals[d].assign(static_cast<size_t>(L) * T, Interval{});

    std::vector<int64_t> ends(static_cast<size_t>(T));
    for (int32_t l = L - 1; l >= 0; --l) {
      const LoopRecord& loop = chain.loops[static_cast<size_t>(l)];
      const int64_t gls = loop.range.start(d);
      const int64_t gle = loop.range.end(d);
      const int64_t rls = std::max(gls, owned_s);
      const int64_t rank_le = std::min(gle, owned_e);
      const bool owns_end = owned_e >= gle;

      int64_t last_nonempty = -1;
      for (int64_t t = T - 1; t >= 0; --t)
        if (ustart + t * ts < rank_le) {
          last_nonempty = t;
          break;
        }

      for (int64_t t = 0; t < T; ++t) {
        int64_t end = kUnset;
        if (t == last_nonempty && owns_end) {
          end = gle;
        } else {
          for (const ArgSpec& a : loop.args) {
            if (!mode_writes(a.mode)) continue;
            const DepExtent& rd =
                dep_slot(a.dataset).read[d][static_cast<size_t>(t)];
            if (rd.set()) end = std::max(end, rd.end);
          }
          if (end != kUnset) end = std::min(end, gle);
        }
        if (t != T - 1) {
          int64_t war = kUnset;
          for (const ArgSpec& a : loop.args) {
            const DepExtent& wd =
                dep_slot(a.dataset).write[d][static_cast<size_t>(t)];
            if (!wd.set()) continue;
            const int64_t m = chain.stencil(a.stencil).min_offset(d);
            war = std::max(war, wd.end - m);
          }
          if (war != kUnset) end = std::max(end, std::min(war, gle));
        }
        if (end == kUnset) end = std::min(rank_le, ustart + (t + 1) * ts);
        // A dependency-shrunk end must still cover the owned remainder: once
        // the start chain passes rank_le no later slab revisits those points.
        if (t == last_nonempty) end = std::max(end, rank_le);
        ends[static_cast<size_t>(t)] = end;
      }
      // No descending end clamp: when a slab's dependency-required end
      // overshoots the next slab, the ascending start chain below turns the
      // next slab into an empty range instead of losing the extension.

      int64_t start = rls;
      if (has_left) {
        int64_t rd_min = std::numeric_limits<int64_t>::max();
        for (const ArgSpec& a : loop.args) {
          if (!mode_writes(a.mode)) continue;
          const DepExtent& rd = dep_slot(a.dataset).read[d][0];
          if (rd.set()) rd_min = std::min(rd_min, rd.start);
        }
        if (rd_min != std::numeric_limits<int64_t>::max())
          start = std::max(gls, std::min(start, rd_min));
      }

      for (int64_t t = 0; t < T; ++t) {
        const int64_t e = std::max(ends[static_cast<size_t>(t)], start);
        ivals[d][static_cast<size_t>(l) * T + t] = {start, e};
        const int64_t nominal = std::min(rank_le, ustart + (t + 1) * ts);
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

int64_t HaloSpec::depth_lo(DatasetId ds, int d) const {
  auto it = entries.find(ds);
  return it == entries.end() ? 0 : it->second.faces[d].lo;
}

int64_t HaloSpec::depth_hi(DatasetId ds, int d) const {
  auto it = entries.find(ds);
  return it == entries.end() ? 0 : it->second.faces[d].hi;
}

bool HaloSpec::needed(DatasetId ds) const {
  auto it = entries.find(ds);
  return it != entries.end() && it->second.needed;
}

HaloSpec compute_halo_depths(
    const TilingPlan& rank_plan, const LoopChain& chain, const RankLayout& layout,
    int rank, const std::map<DatasetId, std::vector<Range>>* prior_writes) {
  HaloSpec spec;
  const Range& owned = layout.owned[static_cast<size_t>(rank)];

  const std::map<DatasetId, bool> flags = exchange_flags(chain, prior_writes);

  // A dataset first accessed by a read always exchanges (conservative: the
  // start-of-chain halo content is not assumed synchronized); a first-written
  // dataset still exchanges when the coverage analysis finds a dirty read.
  std::map<DatasetId, AccessMode> first_access;
  for (const LoopRecord& loop : chain.loops)
    for (const ArgSpec& a : loop.args)
      first_access.emplace(a.dataset, a.mode);

  for (const auto& kv : first_access) {
    const DatasetId ds = kv.first;
    HaloSpec::Entry entry;
    const auto fit = flags.find(ds);
    entry.needed =
        mode_reads(kv.second) || (fit != flags.end() && fit->second);
    if (entry.needed) {
      auto it = rank_plan.deps().find(ds);
      if (it != rank_plan.deps().end()) {
        for (int d = 0; d < chain.dim; ++d) {
          // Outermost read-dependency index across slabs: when a boundary
          // slab has emptied, its reads live in an interior slab's extent.
          for (const DepExtent& slab : it->second.read[d]) {
            if (!slab.set()) continue;
            entry.faces[d].lo = std::max(entry.faces[d].lo,
                                         owned.start(d) - slab.start);
            entry.faces[d].hi =
                std::max(entry.faces[d].hi, slab.end - owned.end(d));
          }
        }
      }
    }
    spec.entries.emplace(ds, entry);
  }
  return spec;
}

int64_t MessageLog::count_in(CommPhase p) const {
  int64_t n = 0;
  for (const MessageRecord& m : messages)
    if (m.phase == p) ++n;
  return n;
}

int64_t MessageLog::bytes() const {
  int64_t n = 0;
  for (const MessageRecord& m : messages) n += m.bytes;
  return n;
}

void exchange_halos(std::span<FieldTable* const> rank_fields,
                    std::span<const HaloSpec> specs, const RankLayout& layout,
                    MessageLog* log, CommPhase phase) {
  const int R = layout.rank_count();
  // Dimension-ordered sweep: strips in dimension d span halo-widened extents
  // in dimensions already exchanged, so corner regions propagate.
  for (int d = 0; d < layout.dim; ++d) {
    for (int r = 0; r < R; ++r) {
      const Range& own = layout.owned[static_cast<size_t>(r)];
      for (int dir : {-1, +1}) {
        const int s = layout.neighbor(r, d, dir);
        if (s < 0) continue;
        for (const auto& [ds, entry] : specs[static_cast<size_t>(r)].entries) {
          if (!entry.needed) continue;
          const int64_t depth = dir < 0 ? entry.faces[d].lo : entry.faces[d].hi;
          if (depth <= 0) continue;

          Range strip(layout.dim);
          for (int dd = 0; dd < layout.dim; ++dd) {
            if (dd == d) {
              if (dir < 0)
                strip.set(dd, own.start(dd) - depth, own.start(dd));
              else
                strip.set(dd, own.end(dd), own.end(dd) + depth);
            } else if (dd < d) {
              int64_t lo = own.start(dd), hi = own.end(dd);
              if (layout.neighbor(r, dd, -1) >= 0) lo -= entry.faces[dd].lo;
              if (layout.neighbor(r, dd, +1) >= 0) hi += entry.faces[dd].hi;
              strip.set(dd, lo, hi);
            } else {
              strip.set(dd, own.start(dd), own.end(dd));
            }
          }

          Field& dst = (*rank_fields[static_cast<size_t>(r)])[ds];
          const Field& src = (*rank_fields[static_cast<size_t>(s)])[ds];
          const Range box =
              strip.intersect(dst.alloc_range()).intersect(src.alloc_range());
          if (box.empty()) continue;
          for_each_point(box, [&](const Point& p) { dst.write(p, src.read(p)); });
          if (log)
            log->messages.push_back(MessageRecord{
                s, r, ds, d, dir, box.volume(),
                box.volume() * src.elem_bytes(), phase});
        }
      }
    }
  }
}

std::vector<FieldTable*> DistContext::rank_field_tables() {
  std::vector<FieldTable*> tables;
  tables.reserve(ranks_.size());
  for (RankState& state : ranks_) tables.push_back(&state.fields);
  return tables;
}

DistContext::DistContext(const RankLayout& layout,
                         const FieldTable& global_template, int threads)
    : layout_(layout), pool_(threads) {
  ranks_.resize(static_cast<size_t>(layout_.rank_count()));
  for (int r = 0; r < layout_.rank_count(); ++r) {
    for (const Field& f : global_template)
      ranks_[static_cast<size_t>(r)].fields.add(
          f.name(), layout_.owned[static_cast<size_t>(r)], f.pad(),
          f.elem_bytes());
  }
}

void DistContext::scatter(const FieldTable& global) {
  for (auto& state : ranks_) {
    for (size_t i = 0; i < state.fields.size(); ++i) {
      const DatasetId ds = static_cast<DatasetId>(i);
      Field& rf = state.fields[ds];
      const Field& gf = global[ds];
      // Seed the whole allocation from the global picture; domain-edge
      // padding behaves exactly as in the single-rank case.
      const Range seed = rf.alloc_range().intersect(gf.alloc_range());
      for_each_point(seed, [&](const Point& p) { rf.write(p, gf.read(p)); });
    }
  }
}

// Poison interior-face halo points the chain writes somewhere: their correct
// values can arrive only through an exchange or a local recompute, so a gap
// in either shows up loudly as NaN. Halo points no loop writes keep their
// seeded values (they stay correct forever: nothing ever changes them).
void DistContext::poison_stale_halos(const LoopChain& chain) {
  std::vector<std::vector<const Range*>> writes(ranks_[0].fields.size());
  for (const LoopRecord& loop : chain.loops)
    for (const ArgSpec& a : loop.args)
      if (mode_writes(a.mode))
        writes[static_cast<size_t>(a.dataset)].push_back(&loop.range);
  for (const auto& [ds, boxes] : written_history_)
    if (static_cast<size_t>(ds) < writes.size())
      for (const Range& b : boxes) writes[static_cast<size_t>(ds)].push_back(&b);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int r = 0; r < layout_.rank_count(); ++r) {
    const Range& own = layout_.owned[static_cast<size_t>(r)];
    for (size_t i = 0; i < ranks_[static_cast<size_t>(r)].fields.size(); ++i) {
      if (writes[i].empty()) continue;
      Field& rf = ranks_[static_cast<size_t>(r)].fields[static_cast<DatasetId>(i)];
      const Range& alloc = rf.alloc_range();
      for (int d = 0; d < layout_.dim; ++d) {
        for (int dir : {-1, +1}) {
          if (layout_.neighbor(r, d, dir) < 0) continue;
          Range strip = alloc;
          if (dir < 0)
            strip.set(d, alloc.start(d), own.start(d));
          else
            strip.set(d, own.end(d), alloc.end(d));
          for_each_point(strip, [&](const Point& p) {
            for (const Range* w : writes[i])
              if (w->contains(p)) {
                rf.write(p, nan);
                return;
              }
          });
        }
      }
    }
  }
}

void DistContext::note_writes(const LoopChain& chain) {
  for (const LoopRecord& loop : chain.loops) {
    for (const ArgSpec& a : loop.args) {
      if (!mode_writes(a.mode)) continue;
      std::vector<Range>& boxes = written_history_[a.dataset];
      bool held = false;
      for (const Range& b : boxes)
        if (box_contains(b, loop.range, chain.dim)) {
          held = true;
          break;
        }
      if (!held) boxes.push_back(loop.range);
    }
  }
}

void DistContext::gather(FieldTable& global) const {
  for (int r = 0; r < layout_.rank_count(); ++r) {
    const Range& own = layout_.owned[static_cast<size_t>(r)];
    for (size_t i = 0; i < ranks_[static_cast<size_t>(r)].fields.size(); ++i) {
      const DatasetId ds = static_cast<DatasetId>(i);
      const Field& rf = ranks_[static_cast<size_t>(r)].fields[ds];
      Field& gf = global[ds];
      const Range box = own.intersect(gf.logical_range());
      for_each_point(box, [&](const Point& p) { gf.write(p, rf.read(p)); });
    }
  }
}

ExecutionReport DistContext::run_tiled(
    const LoopChain& chain, const std::array<int64_t, kMaxDims>& tile_sizes,
    std::vector<ReductionResult>* reductions) {
  const auto t0 = std::chrono::steady_clock::now();
  const int R = layout_.rank_count();
  const int64_t msgs_before = log_.count();
  const int64_t bytes_before = log_.bytes();
  poison_stale_halos(chain);

  // Plan + halo analysis per rank, all before any data moves.
  std::vector<std::shared_ptr<const TilingPlan>> plans(static_cast<size_t>(R));
  std::vector<HaloSpec> specs(static_cast<size_t>(R));
  ExecutionReport rep;
  rep.distributed = true;
  rep.plan_cache_hit = true;
  for (int r = 0; r < R; ++r) {
    RankState& state = ranks_[static_cast<size_t>(r)];
    bool hit = false;
    plans[static_cast<size_t>(r)] = state.cache.get_or_build(
        chain.signature(), tile_sizes,
        [&] { return construct_rank_plan(chain, layout_, r, tile_sizes); }, &hit);
    specs[static_cast<size_t>(r)] = compute_halo_depths(
        *plans[static_cast<size_t>(r)], chain, layout_, r, &written_history_);
    state.last_plan = plans[static_cast<size_t>(r)];
    state.last_halos = specs[static_cast<size_t>(r)];
    rep.plan_cache_hit = rep.plan_cache_hit && hit;
    if (!hit) {
      rep.plan_constructions += 1;
      rep.plan_seconds += plans[static_cast<size_t>(r)]->build_seconds();
    }
  }

  // One wide exchange; tiles then run with zero communication.
  const auto tables = rank_field_tables();
  exchange_halos(tables, specs, layout_, &log_, CommPhase::HaloExchange);

  std::vector<double> accums(chain.size());
  for (size_t l = 0; l < chain.size(); ++l)
    if (chain.loops[l].reduction.has_value())
      accums[l] = reduce_identity(chain.loops[l].reduction->op);

  for (int r = 0; r < R; ++r) {
    std::vector<ReductionResult> rank_results;
    ExecutionReport rank_rep =
        execute_plan(*plans[static_cast<size_t>(r)], chain,
                     ranks_[static_cast<size_t>(r)].fields, pool_, &rank_results,
                     &layout_.owned[static_cast<size_t>(r)]);
    rank_rep.plan_constructions = 0;
    rank_rep.plan_seconds = 0;
    rep.merge(rank_rep);
    size_t next = 0;
    for (size_t l = 0; l < chain.size(); ++l) {
      if (!chain.loops[l].reduction.has_value()) continue;
      accums[l] = reduce_combine(chain.loops[l].reduction->op, accums[l],
                                 rank_results[next++].value);
    }
  }

  if (reductions != nullptr) {
    for (size_t l = 0; l < chain.size(); ++l)
      if (chain.loops[l].reduction.has_value())
        reductions->push_back(ReductionResult{chain.loops[l].reduction->handle,
                                              chain.loops[l].reduction->op,
                                              accums[l]});
  }

  note_writes(chain);
  rep.halo_messages = log_.count() - msgs_before;
  rep.halo_bytes = log_.bytes() - bytes_before;
  rep.halo_exchanges = rep.halo_messages > 0 ? 1 : 0;
  rep.total_seconds = seconds_since(t0);
  return rep;
}

ExecutionReport DistContext::run_untiled(
    const LoopChain& chain, std::vector<ReductionResult>* reductions) {
  const auto t0 = std::chrono::steady_clock::now();
  const int R = layout_.rank_count();
  const int64_t msgs_before = log_.count();
  const int64_t bytes_before = log_.bytes();
  poison_stale_halos(chain);

  ExecutionReport rep;
  rep.distributed = true;
  rep.loops.resize(chain.size());

  std::vector<double> accums(chain.size());
  for (size_t l = 0; l < chain.size(); ++l)
    if (chain.loops[l].reduction.has_value())
      accums[l] = reduce_identity(chain.loops[l].reduction->op);

  // Freshness of exchanged halo data, per dataset per face; any write to the
  // dataset invalidates every face.
  std::map<DatasetId, std::array<HaloSpec::FaceDepths, kMaxDims>> valid;

  for (size_t l = 0; l < chain.size(); ++l) {
    const LoopRecord& loop = chain.loops[l];
    rep.loops[l].loop_id = loop.loop_id;

    // On-demand exchange: exactly what this loop reads and is stale.
    HaloSpec spec;
    for (const ArgSpec& a : loop.args) {
      if (!mode_reads(a.mode)) continue;
      const Stencil& st = chain.stencil(a.stencil);
      auto& have = valid[a.dataset];
      HaloSpec::Entry entry;
      bool stale = false;
      for (int d = 0; d < chain.dim; ++d) {
        const int64_t lo = std::max<int64_t>(0, -st.min_offset(d));
        const int64_t hi = std::max<int64_t>(0, st.max_offset(d));
        entry.faces[d].lo = lo;
        entry.faces[d].hi = hi;
        stale = stale || lo > have[d].lo || hi > have[d].hi;
      }
      if (!stale) continue;
      entry.needed = true;
      auto [it, inserted] = spec.entries.emplace(a.dataset, entry);
      if (!inserted) {
        for (int d = 0; d < chain.dim; ++d) {
          it->second.faces[d].lo = std::max(it->second.faces[d].lo, entry.faces[d].lo);
          it->second.faces[d].hi = std::max(it->second.faces[d].hi, entry.faces[d].hi);
        }
      }
    }
    if (!spec.entries.empty()) {
      const int64_t before = log_.count();
      std::vector<HaloSpec> specs(static_cast<size_t>(R), spec);
      const auto tables = rank_field_tables();
      exchange_halos(tables, specs, layout_, &log_, CommPhase::HaloExchange);
      if (log_.count() > before) rep.halo_exchanges += 1;
      for (const auto& [ds, entry] : spec.entries) {
        auto& have = valid[ds];
        for (int d = 0; d < chain.dim; ++d) {
          have[d].lo = std::max(have[d].lo, entry.faces[d].lo);
          have[d].hi = std::max(have[d].hi, entry.faces[d].hi);
        }
      }
    }

    // Loop-level lockstep: every rank exchanged above, now every rank runs l.
    for (int r = 0; r < R; ++r) {
      const Range executed =
          loop.range.intersect(layout_.owned[static_cast<size_t>(r)]);
      if (executed.empty()) continue;
      double rank_accum = loop.reduction.has_value()
                              ? reduce_identity(loop.reduction->op)
                              : 0.0;
      execute_loop_range(loop, chain, executed,
                         ranks_[static_cast<size_t>(r)].fields, pool_,
                         &rank_accum, nullptr, &rep.loops[l]);
      if (loop.reduction.has_value())
        accums[l] = reduce_combine(loop.reduction->op, accums[l], rank_accum);
    }

    for (const ArgSpec& a : loop.args)
      if (mode_writes(a.mode)) valid[a.dataset] = {};
  }

  if (reductions != nullptr) {
    for (size_t l = 0; l < chain.size(); ++l)
      if (chain.loops[l].reduction.has_value())
        reductions->push_back(ReductionResult{chain.loops[l].reduction->handle,
                                              chain.loops[l].reduction->op,
                                              accums[l]});
  }

  note_writes(chain);
  rep.halo_messages = log_.count() - msgs_before;
  rep.halo_bytes = log_.bytes() - bytes_before;
  rep.total_seconds = rep.exec_seconds = seconds_since(t0);
  return rep;
}

ExecutionReport run_distributed(const LoopChain& chain, const RankLayout& layout,
                                const std::array<int64_t, kMaxDims>& tile_sizes,
                                FieldTable& fields,
                                std::vector<ReductionResult>* reductions,
                                int threads) {
  DistContext ctx(layout, fields, threads);
  ctx.scatter(fields);
  ExecutionReport rep = ctx.run_tiled(chain, tile_sizes, reductions);
  ctx.gather(fields);
  return rep;
}

}  // namespace tilechain
