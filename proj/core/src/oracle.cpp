#include "tilechain/oracle.hpp"

#include <cstdio>

namespace tilechain::oracle {

namespace {

const char* kind_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::ReadBeforeProduce: return "ReadBeforeProduce";
    case ViolationKind::DoubleWrite: return "DoubleWrite";
    case ViolationKind::CoverageGap: return "CoverageGap";
    case ViolationKind::CoverageOverlap: return "CoverageOverlap";
  }
  return "?";
}

// Dense int32 grid over a box, default -1.
class PointMap {
 public:
  explicit PointMap(const Range& box) : box_(box) {
    strides_[0] = 1;
    for (int d = 1; d < kMaxDims; ++d)
      strides_[d] = strides_[d - 1] * std::max<int64_t>(1, box.extent(d - 1));
    cells_.assign(static_cast<size_t>(std::max<int64_t>(1, box.volume())), -1);
  }

  bool covers(const Point& p) const { return box_.contains(p); }

  int32_t& at(const Point& p) {
    size_t idx = 0;
    for (int d = 0; d < box_.dim(); ++d)
      idx += static_cast<size_t>((p[d] - box_.start(d)) * strides_[d]);
    return cells_[idx];
  }

 private:
  Range box_;
  std::array<int64_t, kMaxDims> strides_{1, 1, 1};
  std::vector<int32_t> cells_;
};

// Walks every point of `r` in memory order (dim 0 fastest).
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

// Hull of every access a plan can make to one dataset, recomputed here so the
// validators do not trust the plan's own bookkeeping.
std::map<DatasetId, Range> access_hulls(const TilingPlan& plan,
                                        const LoopChain& chain) {
  std::map<DatasetId, Range> hulls;
  const int64_t tiles = plan.num_tiles();
  for (int32_t l = 0; l < plan.num_loops(); ++l) {
    const LoopRecord& loop = chain.loops[static_cast<size_t>(l)];
    Range loop_hull(chain.dim);
    bool have = false;
    for (int64_t t = 0; t < tiles; ++t) {
      const Range& r = plan.range(t, l);
      if (r.empty()) continue;
      loop_hull = have ? loop_hull.hull(r) : r;
      have = true;
    }
    // Sequential semantics also touch the recorded range.
    loop_hull = have ? loop_hull.hull(loop.range) : loop.range;
    for (const ArgSpec& a : loop.args) {
      const Stencil& s = chain.stencil(a.stencil);
      std::array<int64_t, kMaxDims> lo{0, 0, 0}, hi{0, 0, 0};
      for (int d = 0; d < chain.dim; ++d) {
        lo[d] = std::min<int64_t>(s.min_offset(d), 0);
        hi[d] = std::max<int64_t>(s.max_offset(d), 0);
      }
      Range touched = loop_hull.dilated(lo, hi);
      auto it = hulls.find(a.dataset);
      if (it == hulls.end())
        hulls.emplace(a.dataset, touched);
      else
        it->second = it->second.hull(touched);
    }
  }
  return hulls;
}

struct WriterList {
  // (loop id, recorded range) for every loop writing the dataset, ascending.
  std::vector<std::pair<int32_t, Range>> writers;

  // Last writer strictly before loop l whose recorded range holds q; -1 if
  // the value is initial data.
  int32_t producer_before(const Point& q, int32_t l) const {
    for (auto it = writers.rbegin(); it != writers.rend(); ++it)
      if (it->first < l && it->second.contains(q)) return it->first;
    return -1;
  }
};

}  // namespace

std::string Violation::to_string() const {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%s loop=%d tile=%lld dataset=%d point=(%lld,%lld,%lld)",
                kind_name(kind), loop, static_cast<long long>(tile), dataset,
                static_cast<long long>(point[0]), static_cast<long long>(point[1]),
                static_cast<long long>(point[2]));
  std::string s = buf;
  if (!detail.empty()) {
    s += ": ";
    s += detail;
  }
  return s;
}

std::vector<ReductionResult> sequential_reference(const LoopChain& chain,
                                                  FieldTable& fields) {
  std::vector<ReductionResult> results;
  for (const LoopRecord& loop : chain.loops) {
    std::vector<KernelCtx::Binding> bindings;
    bindings.reserve(loop.args.size());
    for (const ArgSpec& a : loop.args) {
      Field& f = fields[a.dataset];
      bindings.push_back(KernelCtx::Binding{f.raw(), f.strides(), f.alloc_range(),
                                            a.mode, &chain.stencil(a.stencil),
                                            f.name().c_str()});
    }
    KernelCtx ctx;
    ctx.bind(loop.kernel.name.c_str(), loop.loop_id, bindings);
    double accum = 0;
    if (loop.reduction.has_value()) {
      accum = reduce_identity(loop.reduction->op);
      ctx.set_reduction(loop.reduction->op, &accum, nullptr);
    }
    for_each_point(loop.range, [&](const Point& p) {
      ctx.set_point(p);
      loop.kernel.fn(ctx);
    });
    if (loop.reduction.has_value())
      results.push_back(
          ReductionResult{loop.reduction->handle, loop.reduction->op, accum});
  }
  return results;
}

std::vector<Violation> validate_dependencies(const TilingPlan& plan,
                                             const LoopChain& chain,
                                             size_t max_violations) {
  std::vector<Violation> out;
  if (plan.signature() != chain.signature()) {
    out.push_back(Violation{ViolationKind::ReadBeforeProduce, -1, -1, -1,
                            Point{0, 0, 0}, "plan/chain signature mismatch"});
    return out;
  }

  const auto hulls = access_hulls(plan, chain);
  std::map<DatasetId, PointMap> last_writer;
  std::map<DatasetId, WriterList> writers;
  for (const auto& [id, box] : hulls) last_writer.emplace(id, PointMap(box));
  for (size_t l = 0; l < chain.size(); ++l)
    for (const ArgSpec& a : chain.loops[l].args)
      if (mode_writes(a.mode))
        writers[a.dataset].writers.emplace_back(static_cast<int32_t>(l),
                                                chain.loops[l].range);

  const int64_t tiles = plan.num_tiles();
  for (int64_t t = 0; t < tiles && out.size() < max_violations; ++t) {
    for (int32_t l = 0; l < plan.num_loops() && out.size() < max_violations; ++l) {
      const Range& r = plan.range(t, l);
      if (r.empty()) continue;
      const LoopRecord& loop = chain.loops[static_cast<size_t>(l)];
      for_each_point(r, [&](const Point& p) {
        if (out.size() >= max_violations) return;
        // Reads first, then the center write, mirroring per-point kernels.
        for (const ArgSpec& a : loop.args) {
          if (!mode_reads(a.mode)) continue;
          PointMap& lw = last_writer.at(a.dataset);
          const WriterList& wl = writers[a.dataset];
          for (const Point& off : chain.stencil(a.stencil).points()) {
            const Point q{p[0] + off[0], p[1] + off[1], p[2] + off[2]};
            const int32_t expected = wl.producer_before(q, l);
            const int32_t actual = lw.covers(q) ? lw.at(q) : -1;
            if (actual != expected) {
              char d[96];
              std::snprintf(d, sizeof d,
                            "expected producer loop %d, last writer so far %d",
                            expected, actual);
              out.push_back(Violation{ViolationKind::ReadBeforeProduce, l, t,
                                      a.dataset, q, d});
              if (out.size() >= max_violations) return;
            }
          }
        }
        for (const ArgSpec& a : loop.args) {
          if (!mode_writes(a.mode)) continue;
          PointMap& lw = last_writer.at(a.dataset);
          if (!lw.covers(p)) continue;
          int32_t& cell = lw.at(p);
          if (cell == l) {
            out.push_back(Violation{ViolationKind::DoubleWrite, l, t, a.dataset,
                                    p, "two tiles write this (loop, point)"});
            if (out.size() >= max_violations) return;
          } else if (cell > l) {
            out.push_back(
                Violation{ViolationKind::DoubleWrite, l, t, a.dataset, p,
                          "write lands after a sequentially-later loop's write"});
            if (out.size() >= max_violations) return;
          }
          cell = l;
        }
      });
    }
  }
  return out;
}

std::vector<Violation> validate_coverage(const TilingPlan& plan,
                                         const LoopChain& chain,
                                         size_t max_violations) {
  std::vector<Violation> out;
  const int64_t tiles = plan.num_tiles();

  for (int32_t l = 0; l < plan.num_loops() && out.size() < max_violations; ++l) {
    const Range& rec = chain.loops[static_cast<size_t>(l)].range;
    PointMap count(rec);
    for_each_point(rec, [&](const Point& p) { count.at(p) = 0; });

    for (int64_t t = 0; t < tiles && out.size() < max_violations; ++t) {
      const Range& r = plan.range(t, l);
      for_each_point(r, [&](const Point& p) {
        if (out.size() >= max_violations) return;
        if (!rec.contains(p)) {
          out.push_back(Violation{ViolationKind::CoverageOverlap, l, t, -1, p,
                                  "tile range escapes the recorded range"});
          return;
        }
        if (++count.at(p) > 1)
          out.push_back(Violation{ViolationKind::CoverageOverlap, l, t, -1, p,
                                  "point covered by more than one tile"});
      });
    }

    for_each_point(rec, [&](const Point& p) {
      if (out.size() >= max_violations) return;
      if (count.at(p) == 0)
        out.push_back(Violation{ViolationKind::CoverageGap, l, -1, -1, p,
                                "point covered by no tile"});
    });

    // Structural check: the interval in dimension d may depend only on t_d.
    const auto& nt = plan.config().num_tiles;
    for (int d = 0; d < chain.dim && out.size() < max_violations; ++d) {
      std::vector<std::pair<int64_t, int64_t>> slab(
          static_cast<size_t>(nt[d]), {std::numeric_limits<int64_t>::min(), 0});
      for (int64_t t = 0; t < tiles; ++t) {
        const Range& r = plan.range(t, l);
        if (r.empty()) continue;
        const int64_t td = plan.tile_coords(t)[d];
        auto& s = slab[static_cast<size_t>(td)];
        if (s.first == std::numeric_limits<int64_t>::min()) {
          s = {r.start(d), r.end(d)};
        } else if (s.first != r.start(d) || s.second != r.end(d)) {
          char msg[96];
          std::snprintf(msg, sizeof msg,
                        "slab interval in d=%d differs across tiles sharing "
                        "coordinate %lld",
                        d, static_cast<long long>(td));
          out.push_back(Violation{ViolationKind::CoverageGap, l, t, -1,
                                  Point{0, 0, 0}, msg});
          break;
        }
      }
    }
  }
  return out;
}

std::vector<Violation> validate_coverage_replicated(
    std::span<const TilingPlan* const> rank_plans, const LoopChain& chain,
    std::span<const Range> owned, const std::array<int64_t, kMaxDims>& band,
    size_t max_violations) {
  std::vector<Violation> out;
  if (rank_plans.empty()) return out;

  // Interior partition cuts per dimension (global faces excluded).
  Range global = owned.empty() ? Range(chain.dim) : owned[0];
  for (const Range& r : owned) global = global.hull(r);
  std::array<std::vector<int64_t>, kMaxDims> cuts;
  for (const Range& r : owned)
    for (int d = 0; d < chain.dim; ++d) {
      if (r.start(d) > global.start(d)) cuts[d].push_back(r.start(d));
      if (r.end(d) < global.end(d)) cuts[d].push_back(r.end(d));
    }

  auto in_band = [&](const Point& p) {
    for (int d = 0; d < chain.dim; ++d)
      for (int64_t c : cuts[d])
        if (p[d] >= c - band[d] && p[d] < c + band[d]) return true;
    return false;
  };

  const int32_t L = rank_plans[0]->num_loops();
  for (int32_t l = 0; l < L && out.size() < max_violations; ++l) {
    const Range& rec = chain.loops[static_cast<size_t>(l)].range;
    PointMap count(rec);
    for_each_point(rec, [&](const Point& p) { count.at(p) = 0; });

    for (size_t r = 0; r < rank_plans.size(); ++r) {
      const TilingPlan& plan = *rank_plans[r];
      for (int64_t t = 0; t < plan.num_tiles(); ++t) {
        const Range& tr = plan.range(t, l);
        for_each_point(tr, [&](const Point& p) {
          if (out.size() >= max_violations) return;
          if (!rec.contains(p)) {
            out.push_back(Violation{ViolationKind::CoverageOverlap, l, t, -1, p,
                                    "rank tile escapes the recorded range"});
            return;
          }
          ++count.at(p);
        });
      }
    }

    for_each_point(rec, [&](const Point& p) {
      if (out.size() >= max_violations) return;
      const int32_t c = count.at(p);
      if (c == 0)
        out.push_back(Violation{ViolationKind::CoverageGap, l, -1, -1, p,
                                "point covered by no rank"});
      else if (c > 1 && !in_band(p))
        out.push_back(Violation{ViolationKind::CoverageOverlap, l, -1, -1, p,
                                "replicated outside the boundary band"});
    });
  }
  return out;
}

}  // namespace tilechain::oracle
