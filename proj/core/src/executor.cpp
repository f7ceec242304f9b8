#include "tilechain/executor.hpp"

#include <chrono>
#include <cstdio>

namespace tilechain {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::vector<int> elem_bytes_table(const FieldTable& fields) {
  std::vector<int> t(fields.size());
  for (size_t i = 0; i < fields.size(); ++i)
    t[i] = fields[static_cast<DatasetId>(i)].elem_bytes();
  return t;
}

}  // namespace

void KernelCtx::fail(size_t arg, int64_t dx, int64_t dy, int64_t dz,
                     const char* why) const {
  const Binding& b = bindings_[arg];
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "loop %s (id %d), dataset %s: access at point (%lld,%lld,%lld) "
                "offset (%lld,%lld,%lld): %s",
                loop_name_, loop_id_, b.dataset_name,
                static_cast<long long>(point_[0]),
                static_cast<long long>(point_[1]),
                static_cast<long long>(point_[2]), static_cast<long long>(dx),
                static_cast<long long>(dy), static_cast<long long>(dz), why);
  throw AccessError(buf);
}

ThreadPool::ThreadPool(int threads) {
  if (threads < 1) throw InvalidArgument("ThreadPool: threads must be >= 1");
  workers_.reserve(static_cast<size_t>(threads - 1));
  for (int i = 1; i < threads; ++i)
    workers_.emplace_back([this, i] { worker_main(i); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard<std::mutex> lk(mu_);
    stop_ = true;
  }
  cv_start_.notify_all();
  for (std::thread& w : workers_) w.join();
}

ThreadPool::Span ThreadPool::slice(int64_t n, int index) const {
  const int64_t T = size();
  const int64_t base = n / T;
  const int64_t rem = n % T;
  const int64_t begin = index * base + std::min<int64_t>(index, rem);
  return {begin, begin + base + (index < rem ? 1 : 0)};
}

void ThreadPool::worker_main(int index) {
  uint64_t seen = 0;
  for (;;) {
    const std::function<void(int, int64_t, int64_t)>* job = nullptr;
    int64_t n = 0;
    {
      std::unique_lock<std::mutex> lk(mu_);
      cv_start_.wait(lk, [&] { return stop_ || epoch_ != seen; });
      if (stop_) return;
      seen = epoch_;
      job = job_;
      n = job_n_;
    }
    const Span s = slice(n, index);
    try {
      if (s.begin < s.end) (*job)(index, s.begin, s.end);
    } catch (...) {
      std::lock_guard<std::mutex> lk(mu_);
      if (!first_error_) first_error_ = std::current_exception();
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      if (--pending_ == 0) cv_done_.notify_all();
    }
  }
}

void ThreadPool::parallel_for(
    int64_t n, const std::function<void(int, int64_t, int64_t)>& f) {
  if (n <= 0) return;
  if (workers_.empty()) {
    f(0, 0, n);
    return;
  }
  {
    std::lock_guard<std::mutex> lk(mu_);
    job_ = &f;
    job_n_ = n;
    pending_ = static_cast<int>(workers_.size());
    first_error_ = nullptr;
    ++epoch_;
  }
  cv_start_.notify_all();
  const Span mine = slice(n, 0);
  std::exception_ptr own_error;
  try {
    if (mine.begin < mine.end) f(0, mine.begin, mine.end);
  } catch (...) {
    own_error = std::current_exception();
  }
  std::unique_lock<std::mutex> lk(mu_);
  cv_done_.wait(lk, [&] { return pending_ == 0; });
  job_ = nullptr;
  if (own_error) std::rethrow_exception(own_error);
  if (first_error_) {
    auto e = first_error_;
    first_error_ = nullptr;
    std::rethrow_exception(e);
  }
}

void execute_loop_range(const LoopRecord& loop, const LoopChain& chain,
                        const Range& executed, FieldTable& fields,
                        ThreadPool& pool, double* accum,
                        const Range* reduction_mask, LoopExecStats* stats) {
  const int64_t volume = executed.volume();
  if (volume == 0) return;
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<KernelCtx::Binding> bindings;
  bindings.reserve(loop.args.size());
  for (const ArgSpec& a : loop.args) {
    Field& f = fields[a.dataset];
    bindings.push_back(KernelCtx::Binding{f.raw(), f.strides(), f.alloc_range(),
                                          a.mode, &chain.stencil(a.stencil),
                                          f.name().c_str()});
  }

  const bool has_reduction = loop.reduction.has_value();
  const ReduceOp op = has_reduction ? loop.reduction->op : ReduceOp::Sum;
  std::vector<double> partials(static_cast<size_t>(pool.size()),
                               reduce_identity(op));

  const int dim = executed.dim();
  const int64_t n0 = executed.extent(0);
  const int64_t n1 = dim > 1 ? executed.extent(1) : 1;
  const Point base{executed.start(0), dim > 1 ? executed.start(1) : 0,
                   dim > 2 ? executed.start(2) : 0};

  pool.parallel_for(volume, [&](int worker, int64_t begin, int64_t end) {
    KernelCtx ctx;
    ctx.bind(loop.kernel.name.c_str(), loop.loop_id, bindings);
    if (has_reduction)
      ctx.set_reduction(op, &partials[static_cast<size_t>(worker)],
                        reduction_mask);
    // Memory-order walk (dimension 0 fastest) over this worker's block.
    int64_t i = begin % n0;
    int64_t j = (begin / n0) % n1;
    int64_t k = begin / (n0 * n1);
    for (int64_t idx = begin; idx < end; ++idx) {
      ctx.set_point(Point{base[0] + i, base[1] + j, base[2] + k});
      loop.kernel.fn(ctx);
      if (++i == n0) {
        i = 0;
        if (++j == n1) {
          j = 0;
          ++k;
        }
      }
    }
  });

  if (has_reduction && accum != nullptr)
    for (double p : partials) *accum = reduce_combine(op, *accum, p);

  if (stats != nullptr) {
    stats->points += volume;
    stats->kernel_invocations += volume;
    stats->seconds += seconds_since(t0);
  }
}

namespace {

// Shared tail: collect reduction results in chain order.
void collect_reductions(const LoopChain& chain, const std::vector<double>& accums,
                        std::vector<ReductionResult>* out) {
  if (out == nullptr) return;
  for (size_t l = 0; l < chain.size(); ++l) {
    const LoopRecord& loop = chain.loops[l];
    if (!loop.reduction.has_value()) continue;
    out->push_back(ReductionResult{loop.reduction->handle, loop.reduction->op,
                                   accums[l]});
  }
}

std::vector<double> init_accums(const LoopChain& chain) {
  std::vector<double> accums(chain.size(), 0.0);
  for (size_t l = 0; l < chain.size(); ++l)
    if (chain.loops[l].reduction.has_value())
      accums[l] = reduce_identity(chain.loops[l].reduction->op);
  return accums;
}

}  // namespace

ExecutionReport execute_plan(const TilingPlan& plan, const LoopChain& chain,
                             FieldTable& fields, ThreadPool& pool,
                             std::vector<ReductionResult>* reductions,
                             const Range* reduction_mask) {
  if (plan.signature() != chain.signature())
    throw PlanError("execute_plan: plan signature does not match chain");
  verify_plan_extents(plan, fields);

  const auto t0 = std::chrono::steady_clock::now();
  const auto ebytes = elem_bytes_table(fields);
  const int32_t L = static_cast<int32_t>(chain.size());

  ExecutionReport rep;
  rep.tiled = true;
  rep.dim = plan.config().dim;
  rep.tile_sizes = plan.config().tile_sizes;
  rep.max_skew = plan.max_skew();
  rep.tiles_executed = plan.num_tiles();
  rep.loops.resize(static_cast<size_t>(L));
  for (int32_t l = 0; l < L; ++l) rep.loops[static_cast<size_t>(l)].loop_id = l;

  std::vector<double> accums = init_accums(chain);

  const int64_t tiles = plan.num_tiles();
  for (int64_t t = 0; t < tiles; ++t) {
    for (int32_t l = 0; l < L; ++l) {
      const Range& r = plan.range(t, l);
      if (r.empty()) continue;
      const LoopRecord& loop = chain.loops[static_cast<size_t>(l)];
      execute_loop_range(loop, chain, r, fields, pool,
                         &accums[static_cast<size_t>(l)], reduction_mask,
                         &rep.loops[static_cast<size_t>(l)]);
      rep.loops[static_cast<size_t>(l)].bytes_moved +=
          estimate_bytes_moved(loop, r, ebytes);
    }
  }

  collect_reductions(chain, accums, reductions);
  rep.exec_seconds = seconds_since(t0);
  rep.total_seconds = rep.exec_seconds;
  return rep;
}

ExecutionReport execute_untiled(const LoopChain& chain, FieldTable& fields,
                                ThreadPool& pool,
                                std::vector<ReductionResult>* reductions) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ebytes = elem_bytes_table(fields);

  ExecutionReport rep;
  rep.tiled = false;
  rep.dim = chain.dim;
  rep.tiles_executed = chain.empty() ? 0 : 1;
  rep.loops.resize(chain.size());

  std::vector<double> accums = init_accums(chain);
  for (size_t l = 0; l < chain.size(); ++l) {
    const LoopRecord& loop = chain.loops[l];
    rep.loops[l].loop_id = loop.loop_id;
    execute_loop_range(loop, chain, loop.range, fields, pool, &accums[l],
                       nullptr, &rep.loops[l]);
    rep.loops[l].bytes_moved += estimate_bytes_moved(loop, loop.range, ebytes);
  }

  collect_reductions(chain, accums, reductions);
  rep.exec_seconds = seconds_since(t0);
  rep.total_seconds = rep.exec_seconds;
  return rep;
}

int64_t ExecutionReport::total_points() const {
  int64_t n = 0;
  for (const LoopExecStats& s : loops) n += s.points;
  return n;
}

int64_t ExecutionReport::total_bytes_moved() const {
  int64_t n = 0;
  for (const LoopExecStats& s : loops) n += s.bytes_moved;
  return n;
}

void ExecutionReport::merge(const ExecutionReport& o) {
  tiled = tiled || o.tiled;
  distributed = distributed || o.distributed;
  plan_cache_hit = plan_cache_hit && o.plan_cache_hit;
  tiles_executed += o.tiles_executed;
  plan_constructions += o.plan_constructions;
  plan_seconds += o.plan_seconds;
  exec_seconds += o.exec_seconds;
  total_seconds += o.total_seconds;
  halo_messages += o.halo_messages;
  halo_bytes += o.halo_bytes;
  halo_exchanges += o.halo_exchanges;
  if (o.tiled) {
    dim = o.dim;
    tile_sizes = o.tile_sizes;
    for (int d = 0; d < kMaxDims; ++d)
      max_skew[d] = std::max(max_skew[d], o.max_skew[d]);
  }
  for (const LoopExecStats& s : o.loops) {
    if (static_cast<size_t>(s.loop_id) >= loops.size())
      loops.resize(static_cast<size_t>(s.loop_id) + 1);
    LoopExecStats& mine = loops[static_cast<size_t>(s.loop_id)];
    mine.loop_id = s.loop_id;
    mine.points += s.points;
    mine.kernel_invocations += s.kernel_invocations;
    mine.bytes_moved += s.bytes_moved;
    mine.seconds += s.seconds;
  }
}

std::string ExecutionReport::to_text() const {
  std::string out;
  char buf[160];
  auto kv = [&](const char* k, const std::string& v) {
    out += k;
    out += "=";
    out += v;
    out += "\n";
  };
  kv("tiled", std::to_string(tiled ? 1 : 0));
  kv("distributed", std::to_string(distributed ? 1 : 0));
  if (tiled) {
    std::string ts, sk;
    for (int d = 0; d < dim; ++d) {
      ts += (d ? "," : "") + std::to_string(tile_sizes[d]);
      sk += (d ? "," : "") + std::to_string(max_skew[d]);
    }
    kv("tile_sizes", ts);
    kv("max_skew", sk);
    kv("plan_cache_hit", std::to_string(plan_cache_hit ? 1 : 0));
  }
  kv("tiles", std::to_string(tiles_executed));
  kv("loops", std::to_string(loops.size()));
  kv("points", std::to_string(total_points()));
  kv("bytes_moved", std::to_string(total_bytes_moved()));
  kv("plan_constructions", std::to_string(plan_constructions));
  std::snprintf(buf, sizeof buf, "%.6f", plan_seconds);
  kv("plan_seconds", buf);
  std::snprintf(buf, sizeof buf, "%.6f", exec_seconds);
  kv("exec_seconds", buf);
  std::snprintf(buf, sizeof buf, "%.6f", total_seconds);
  kv("total_seconds", buf);
  if (distributed) {
    kv("halo_messages", std::to_string(halo_messages));
    kv("halo_bytes", std::to_string(halo_bytes));
    kv("halo_exchanges", std::to_string(halo_exchanges));
  }
  for (const LoopExecStats& s : loops) {
    std::snprintf(buf, sizeof buf,
                  "loop%d_points=%lld\nloop%d_bytes=%lld\nloop%d_seconds=%.6f\n",
                  s.loop_id, static_cast<long long>(s.points), s.loop_id,
                  static_cast<long long>(s.bytes_moved), s.loop_id, s.seconds);
    out += buf;
  }
  return out;
}

}  // namespace tilechain
