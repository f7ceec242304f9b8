#include "tilechain/runtime.hpp"

namespace tilechain {

Runtime::Runtime(Block block, RuntimeConfig config)
    : block_(std::move(block)), config_(config) {
  if (block_.dim < 1 || block_.dim > kMaxDims)
    throw InvalidArgument("Runtime: block dim must be 1, 2, or 3");
  if (config_.threads < 1)
    throw InvalidArgument("Runtime: threads must be >= 1");
  if (config_.skew_allowance < 0)
    throw InvalidArgument("Runtime: skew_allowance must be >= 0");
  pool_ = std::make_unique<ThreadPool>(config_.threads);
}

StencilId Runtime::declare_stencil(std::string name, std::vector<Point> offsets) {
  Stencil s(block_.dim, std::move(offsets));
  max_stencil_reach_ = std::max(max_stencil_reach_, s.max_abs_offset());
  stencils_.push_back(std::move(s));
  stencil_names_.push_back(std::move(name));
  return static_cast<StencilId>(stencils_.size() - 1);
}

DatasetId Runtime::declare_field(std::string name, const Range& logical,
                                 int elem_bytes) {
  if (logical.dim() != block_.dim)
    throw InvalidArgument("declare_field: range dim does not match block");
  if (logical.empty())
    throw InvalidArgument("declare_field: empty logical range");
  const int64_t pad = max_stencil_reach_ + config_.skew_allowance;
  dist_.reset();  // rank partitions are rebuilt with the new field set
  return fields_.add(std::move(name), logical, pad, elem_bytes);
}

ReductionHandle Runtime::par_loop(KernelHandle kernel, const Range& range,
                                  std::vector<ArgSpec> args,
                                  std::optional<ReduceOp> reduction) {
  if (!kernel.fn) throw InvalidArgument("par_loop: kernel has no body");
  if (kernel.id < 0) throw InvalidArgument("par_loop: kernel id must be >= 0");
  if (range.dim() != block_.dim)
    throw InvalidArgument("par_loop: range dim does not match block");

  for (const ArgSpec& a : args) {
    if (a.dataset < 0 || static_cast<size_t>(a.dataset) >= fields_.size())
      throw InvalidArgument("par_loop: unknown dataset id " +
                            std::to_string(a.dataset));
    if (a.stencil < 0 || static_cast<size_t>(a.stencil) >= stencils_.size())
      throw InvalidArgument("par_loop: unknown stencil id " +
                            std::to_string(a.stencil));
    if (mode_writes(a.mode) && !stencil(a.stencil).is_identity())
      throw InvalidArgument("par_loop: dataset " + fields_[a.dataset].name() +
                            " written through a multi-point stencil; writes "
                            "must land on the iteration point");
  }

  // Per-point parallelism makes a same-loop read of another point's write a
  // race. Reject a read at offset o of a written dataset only when the range
  // shifted by o meets the range; one-sided boundary reads stay legal.
  for (const ArgSpec& r : args) {
    if (!mode_reads(r.mode)) continue;
    bool written = false;
    for (const ArgSpec& w : args)
      written = written || (w.dataset == r.dataset && mode_writes(w.mode));
    if (!written) continue;
    for (const Point& off : stencil(r.stencil).points()) {
      if (off == Point{0, 0, 0}) continue;
      Range shifted = range.dilated(off, off);
      if (!shifted.intersect(range).empty())
        throw InvalidArgument(
            "par_loop: kernel reads dataset " + fields_[r.dataset].name() +
            " at offset (" + std::to_string(off[0]) + "," +
            std::to_string(off[1]) + "," + std::to_string(off[2]) +
            ") while writing it over an overlapping range; this races under "
            "per-point parallelism");
    }
  }

  LoopRecord rec;
  rec.loop_id = static_cast<int32_t>(pending_.size());
  rec.kernel = std::move(kernel);
  rec.range = range;
  rec.args = std::move(args);

  ReductionHandle handle;
  if (reduction.has_value()) {
    handle.id = static_cast<int32_t>(reductions_.size());
    reductions_.push_back(ReductionSlot{*reduction, 0.0, false, false});
    rec.reduction = ReductionSpec{*reduction, handle};
  }
  pending_.push_back(std::move(rec));
  return handle;
}

LoopChain Runtime::take_pending() {
  LoopChain chain;
  chain.dim = block_.dim;
  chain.loops = std::move(pending_);
  chain.stencils = stencils_;
  pending_.clear();
  return chain;
}

ExecutionReport Runtime::flush(const ExecMode& mode) {
  if (pending_.empty()) {
    last_report_ = ExecutionReport{};
    return last_report_;
  }
  return execute_chain(take_pending(), mode);
}

std::array<int64_t, kMaxDims> Runtime::resolve_tile_sizes(const LoopChain& chain,
                                                          const ExecMode& mode) {
  if (mode.kind == ExecMode::Kind::Tiled) return mode.tile_sizes;
  return auto_tile_size(sizer_input_from_chain(chain, elem_bytes_table(),
                                               config_.cache_bytes,
                                               config_.threads));
}

ExecutionReport Runtime::execute_chain(LoopChain chain, const ExecMode& mode) {
  std::vector<ReductionResult> results;
  ExecutionReport report;

  if (distributed()) {
    ensure_dist();
    dist_->scatter(fields_);
    if (mode.kind == ExecMode::Kind::Untiled) {
      report = dist_->run_untiled(chain, &results);
    } else {
      report = dist_->run_tiled(chain, resolve_tile_sizes(chain, mode), &results);
      last_plan_ = dist_->last_rank_plan(0);
    }
    dist_->gather(fields_);
  } else if (mode.kind == ExecMode::Kind::Untiled) {
    report = execute_untiled(chain, fields_, *pool_, &results);
  } else {
    const auto ts = resolve_tile_sizes(chain, mode);
    bool hit = false;
    std::shared_ptr<const TilingPlan> plan =
        plan_cache_.get_or_build(chain, ts, &hit);
    last_plan_ = plan;
    report = execute_plan(*plan, chain, fields_, *pool_, &results);
    report.plan_cache_hit = hit;
    report.plan_constructions = hit ? 0 : 1;
    report.plan_seconds = hit ? 0.0 : plan->build_seconds();
    report.total_seconds = report.plan_seconds + report.exec_seconds;
  }

  store_reductions(results);
  last_report_ = report;
  return report;
}

void Runtime::store_reductions(const std::vector<ReductionResult>& results) {
  for (const ReductionResult& r : results) {
    if (!r.handle.valid() ||
        static_cast<size_t>(r.handle.id) >= reductions_.size())
      continue;
    ReductionSlot& slot = reductions_[static_cast<size_t>(r.handle.id)];
    slot.value = r.value;
    slot.ready = true;
  }
}

double Runtime::fetch_reduction(ReductionHandle handle) {
  if (!handle.valid() || static_cast<size_t>(handle.id) >= reductions_.size())
    throw InvalidArgument("fetch_reduction: unknown handle");
  ReductionSlot& slot = reductions_[static_cast<size_t>(handle.id)];
  if (slot.consumed)
    throw InvalidArgument("fetch_reduction: handle already fetched");

  if (!slot.ready) {
    size_t k = pending_.size();
    for (size_t i = 0; i < pending_.size(); ++i)
      if (pending_[i].reduction.has_value() &&
          pending_[i].reduction->handle.id == handle.id)
        k = i;
    if (k == pending_.size())
      throw InvalidArgument(
          "fetch_reduction: reducing loop neither pending nor executed");
    if (config_.flush_whole_queue_on_fetch) {
      flush();
    } else {
      // Flush exactly the prefix ending at the reducing loop.
      std::vector<LoopRecord> suffix(pending_.begin() + k + 1, pending_.end());
      pending_.resize(k + 1);
      execute_chain(take_pending(), default_mode_);
      for (size_t i = 0; i < suffix.size(); ++i)
        suffix[i].loop_id = static_cast<int32_t>(i);
      pending_ = std::move(suffix);
    }
  }

  if (!slot.ready)
    throw PlanError("fetch_reduction: flush did not produce the value");
  slot.consumed = true;
  return slot.value;
}

double Runtime::get(DatasetId ds, const Point& p) {
  flush();
  return fields_[ds].read(p);
}

void Runtime::put(DatasetId ds, const Point& p, double v) {
  flush();
  fields_[ds].write(p, v);
}

void Runtime::fill_logical(DatasetId ds, double v) {
  flush();
  fields_[ds].fill_logical(v);
}

void Runtime::set_rank_grid(const std::array<int, kMaxDims>& grid) {
  for (int d = 0; d < kMaxDims; ++d) {
    if (grid[d] < 1)
      throw InvalidArgument("set_rank_grid: grid entries must be >= 1");
    if (d >= block_.dim && grid[d] != 1)
      throw InvalidArgument("set_rank_grid: grid uses dimension beyond block");
  }
  rank_grid_ = grid;
  dist_.reset();
}

void Runtime::ensure_dist() {
  if (dist_) return;
  if (fields_.size() == 0)
    throw InvalidArgument("distributed execution requires declared fields");
  bool first = true;
  Range global(block_.dim);
  for (const Field& f : fields_) {
    global = first ? f.logical_range() : global.hull(f.logical_range());
    first = false;
  }
  dist_ = std::make_unique<DistContext>(decompose(global, rank_grid_), fields_,
                                        config_.threads);
}

std::vector<int> Runtime::elem_bytes_table() const {
  std::vector<int> t;
  t.reserve(fields_.size());
  for (const Field& f : fields_) t.push_back(f.elem_bytes());
  return t;
}

}  // namespace tilechain
