#pragma once

#include <memory>

#include "tilechain/dist.hpp"
#include "tilechain/executor.hpp"
#include "tilechain/oracle.hpp"
#include "tilechain/planner.hpp"
#include "tilechain/tile_sizer.hpp"

namespace tilechain {

struct RuntimeConfig {
  int threads = 1;
  // Extra halo padding per face beyond the widest declared stencil offset,
  // reserved for tile skew. Plan construction verifies sufficiency.
  int64_t skew_allowance = 16;
  // Cache capacity assumed by automatic tile sizing (no hardware probing).
  int64_t cache_bytes = int64_t{8} << 20;
  // When true, fetch_reduction flushes the whole pending queue instead of
  // just the prefix ending at the reducing loop.
  bool flush_whole_queue_on_fetch = false;
};

struct ExecMode {
  enum class Kind : uint8_t { Untiled, Tiled, TiledAuto };
  Kind kind = Kind::Untiled;
  std::array<int64_t, kMaxDims> tile_sizes{0, 0, 0};

  static ExecMode untiled() { return {}; }
  static ExecMode tiled(const std::array<int64_t, kMaxDims>& ts) {
    return {Kind::Tiled, ts};
  }
  static ExecMode tiled_auto() { return {Kind::TiledAuto, {0, 0, 0}}; }
};

// Front door of the runtime: declares stencils and fields on one block,
// records par_loop invocations lazily, and executes pending chains on demand
// through the tiled or untiled paths, shared-memory or simulated-distributed.
//
// Declaration order matters for padding: fields allocate halo padding from
// the stencils declared so far, so declare stencils first. A too-tight
// allocation is caught at plan time, never silently grown.
class Runtime {
 public:
  Runtime(Block block, RuntimeConfig config = {});

  StencilId declare_stencil(std::string name, std::vector<Point> offsets);
  DatasetId declare_field(std::string name, const Range& logical,
                          int elem_bytes = 8);

  // Records one parallel loop; no computation happens. Validation rejects
  // multi-point write stencils and same-loop read-at-offset of a dataset the
  // loop writes when the shifted range overlaps the written range (a race
  // under the per-point parallelism contract).
  ReductionHandle par_loop(KernelHandle kernel, const Range& range,
                           std::vector<ArgSpec> args,
                           std::optional<ReduceOp> reduction = std::nullopt);

  // Executes and empties the pending chain. Empty queue is a no-op report.
  ExecutionReport flush(const ExecMode& mode);
  ExecutionReport flush() { return flush(default_mode_); }
  void set_default_mode(const ExecMode& mode) { default_mode_ = mode; }
  const ExecMode& default_mode() const { return default_mode_; }

  // Demand-driven trigger: if the reducing loop is still pending, flushes the
  // prefix up to and including it (whole queue when configured), then returns
  // the value. A handle can be fetched once.
  double fetch_reduction(ReductionHandle handle);

  // Host-side data access; flushes pending work first so reads observe the
  // lazy semantics' sequential story.
  double get(DatasetId ds, const Point& p);
  void put(DatasetId ds, const Point& p, double v);
  void fill_logical(DatasetId ds, double v);

  // Simulated distributed execution over a rank grid; field partitions are
  // scattered at the first distributed flush and gathered after each one.
  void set_rank_grid(const std::array<int, kMaxDims>& grid);
  bool distributed() const { return !rank_grid_unset(); }
  DistContext* dist() { return dist_.get(); }

  const Block& block() const { return block_; }
  const RuntimeConfig& config() const { return config_; }
  FieldTable& fields() { return fields_; }
  const FieldTable& fields() const { return fields_; }
  const Stencil& stencil(StencilId id) const {
    return stencils_.at(static_cast<size_t>(id));
  }
  const std::vector<Stencil>& stencils() const { return stencils_; }
  std::vector<int> elem_bytes_table() const;

  size_t pending_loops() const { return pending_.size(); }
  // Hands over the pending chain (with a stencil snapshot) without executing.
  LoopChain take_pending();

  PlanCache& plan_cache() { return plan_cache_; }
  ThreadPool& pool() { return *pool_; }
  std::shared_ptr<const TilingPlan> last_plan() const { return last_plan_; }
  const ExecutionReport& last_report() const { return last_report_; }

 private:
  bool rank_grid_unset() const {
    return rank_grid_ == std::array<int, kMaxDims>{0, 0, 0};
  }
  ExecutionReport execute_chain(LoopChain chain, const ExecMode& mode);
  void ensure_dist();
  std::array<int64_t, kMaxDims> resolve_tile_sizes(const LoopChain& chain,
                                                   const ExecMode& mode);
  void store_reductions(const std::vector<ReductionResult>& results);

  Block block_;
  RuntimeConfig config_;
  std::vector<Stencil> stencils_;
  std::vector<std::string> stencil_names_;
  int64_t max_stencil_reach_ = 0;
  FieldTable fields_;
  std::vector<LoopRecord> pending_;
  ExecMode default_mode_;
  PlanCache plan_cache_;
  std::unique_ptr<ThreadPool> pool_;
  std::shared_ptr<const TilingPlan> last_plan_;
  ExecutionReport last_report_;

  struct ReductionSlot {
    ReduceOp op = ReduceOp::Sum;
    double value = 0;
    bool ready = false;
    bool consumed = false;
  };
  std::vector<ReductionSlot> reductions_;

  std::array<int, kMaxDims> rank_grid_{0, 0, 0};
  std::unique_ptr<DistContext> dist_;
};

}  // namespace tilechain
