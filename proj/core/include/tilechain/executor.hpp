#pragma once

#include <condition_variable>
#include <mutex>
#include <thread>

#include "tilechain/planner.hpp"

namespace tilechain {

// Persistent worker pool with deterministic static partitioning: task i of a
// parallel_for always covers the same contiguous index block for a given
// thread count, so per-thread reduction partials are reproducible.
class ThreadPool {
 public:
  explicit ThreadPool(int threads);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return static_cast<int>(workers_.size()) + 1; }

  // Runs f(worker_index, begin, end) over a static partition of [0, n);
  // worker 0 is the calling thread. Blocks until every worker finishes.
  void parallel_for(int64_t n,
                    const std::function<void(int, int64_t, int64_t)>& f);

 private:
  void worker_main(int index);

  struct Span {
    int64_t begin = 0, end = 0;
  };
  Span slice(int64_t n, int index) const;

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_start_;
  std::condition_variable cv_done_;
  const std::function<void(int, int64_t, int64_t)>* job_ = nullptr;
  int64_t job_n_ = 0;
  uint64_t epoch_ = 0;
  int pending_ = 0;
  bool stop_ = false;
  std::exception_ptr first_error_;
};

struct LoopExecStats {
  int32_t loop_id = 0;
  int64_t points = 0;
  int64_t bytes_moved = 0;
  int64_t kernel_invocations = 0;
  double seconds = 0;
};

struct ExecutionReport {
  bool tiled = false;
  bool distributed = false;
  bool plan_cache_hit = false;
  int dim = 1;
  std::array<int64_t, kMaxDims> tile_sizes{0, 0, 0};
  std::array<int64_t, kMaxDims> max_skew{0, 0, 0};
  int64_t tiles_executed = 0;
  int64_t plan_constructions = 0;
  double plan_seconds = 0;
  double exec_seconds = 0;
  double total_seconds = 0;
  std::vector<LoopExecStats> loops;
  // Distributed accounting; zero in shared-memory runs.
  int64_t halo_messages = 0;
  int64_t halo_bytes = 0;
  int64_t halo_exchanges = 0;

  int64_t total_points() const;
  int64_t total_bytes_moved() const;
  void merge(const ExecutionReport& o);
  // Machine-readable key=value lines.
  std::string to_text() const;
};

struct ReductionResult {
  ReductionHandle handle;
  ReduceOp op = ReduceOp::Sum;
  double value = 0;
};

// Runs one loop over `executed` (skipped if empty): binds kernel args over
// `fields`, iterates points in deterministic chunks across the pool, and
// folds per-thread reduction partials in worker order into `accum`. When
// `reduction_mask` is set, only points inside it contribute to reductions
// (replicated boundary points on simulated ranks are masked out).
void execute_loop_range(const LoopRecord& loop, const LoopChain& chain,
                        const Range& executed, FieldTable& fields,
                        ThreadPool& pool, double* accum,
                        const Range* reduction_mask, LoopExecStats* stats);

// Tile-major execution: for each tile (lexicographic), for each loop, run the
// plan's range. Strictly sequential across loops and tiles; parallelism only
// inside one (tile, loop). Requires plan.signature() == chain.signature().
ExecutionReport execute_plan(const TilingPlan& plan, const LoopChain& chain,
                             FieldTable& fields, ThreadPool& pool,
                             std::vector<ReductionResult>* reductions = nullptr,
                             const Range* reduction_mask = nullptr);

// Loop-at-a-time baseline over full recorded ranges.
ExecutionReport execute_untiled(const LoopChain& chain, FieldTable& fields,
                                ThreadPool& pool,
                                std::vector<ReductionResult>* reductions = nullptr);

}  // namespace tilechain
