#pragma once

#include "tilechain/executor.hpp"
#include "tilechain/oracle.hpp"
#include "tilechain/planner.hpp"

namespace tilechain {

// Simulated process grid over one global domain. Ranks linearize
// lexicographically by grid coordinate (dimension 0 slowest).
struct RankLayout {
  int dim = 1;
  std::array<int, kMaxDims> grid{1, 1, 1};
  Range global;
  std::vector<Range> owned;

  int rank_count() const { return static_cast<int>(owned.size()); }
  std::array<int, kMaxDims> coords_of(int rank) const;
  int rank_of(const std::array<int, kMaxDims>& coords) const;
  // Neighbor rank along dimension d in direction dir (-1 or +1); -1 if none.
  int neighbor(int rank, int d, int dir) const;
};

// Near-equal block partition; the remainder goes to the lowest-coordinate
// ranks. Errors if a dimension has more ranks than points.
RankLayout decompose(const Range& global, const std::array<int, kMaxDims>& grid);

// Per-dataset exchange requirements for one rank. Datasets whose first access
// in the chain is a write need no exchange (their boundary region is computed
// redundantly instead); everything else exchanges the per-face depth, which
// may be asymmetric.
struct HaloSpec {
  struct FaceDepths {
    int64_t lo = 0, hi = 0;
  };
  struct Entry {
    bool needed = false;  // false: first access is a write, no exchange
    std::array<FaceDepths, kMaxDims> faces{};
  };
  std::map<DatasetId, Entry> entries;

  int64_t depth_lo(DatasetId ds, int d) const;
  int64_t depth_hi(DatasetId ds, int d) const;
  bool needed(DatasetId ds) const;
};

// Shared-memory analysis with the distributed modifications: rank-local union
// bounds, first-tile left extension through read dependencies of written
// datasets, and read-dependency extension past the owned boundary. A slab
// whose dependency-required end overshoots the next slab empties that slab
// through the start chain (early loops of thin tiles may have no iteration
// space). With a 1x1 layout the result is identical to construct_plan.
TilingPlan construct_rank_plan(const LoopChain& chain, const RankLayout& layout,
                               int rank,
                               const std::array<int64_t, kMaxDims>& tile_sizes);

// Exchange depth per face: distance from the owned boundary to the outermost
// read-dependency index of the boundary tile, zero-clamped. A dataset first
// accessed by a read always exchanges; one first accessed by a write
// exchanges only when some read reaches points that a write dirties
// (`prior_writes` from earlier runs, or any write in this chain) before a
// chain-earlier write has recomputed them locally.
HaloSpec compute_halo_depths(
    const TilingPlan& rank_plan, const LoopChain& chain, const RankLayout& layout,
    int rank,
    const std::map<DatasetId, std::vector<Range>>* prior_writes = nullptr);

enum class CommPhase : uint8_t { HaloExchange, TileExecution };

struct MessageRecord {
  int from = -1, to = -1;
  DatasetId dataset = -1;
  int dim = 0, dir = 0;
  int64_t points = 0;
  int64_t bytes = 0;
  CommPhase phase = CommPhase::HaloExchange;
};

struct MessageLog {
  std::vector<MessageRecord> messages;
  int64_t count() const { return static_cast<int64_t>(messages.size()); }
  int64_t count_in(CommPhase p) const;
  int64_t bytes() const;
};

// One-shot wide exchange: for each needed dataset and face, copy depth-wide
// strips of the sender's valid region into the receiver's padding.
// Dimension-ordered so corner regions propagate. Each (sender, receiver,
// dataset, dimension) strip is one message.
void exchange_halos(std::span<FieldTable* const> rank_fields,
                    std::span<const HaloSpec> specs, const RankLayout& layout,
                    MessageLog* log, CommPhase phase = CommPhase::HaloExchange);

// In-process simulation of distributed execution: per-rank field partitions
// (owned region plus padding), per-rank plan caches, and message accounting.
// Ranks execute sequentially in rank-id order; loop-level lockstep in the
// untiled baseline keeps exchanged values faithful to a real transport.
class DistContext {
 public:
  DistContext(const RankLayout& layout, const FieldTable& global_template,
              int threads);

  const RankLayout& layout() const { return layout_; }
  int rank_count() const { return layout_.rank_count(); }

  void scatter(const FieldTable& global);
  void gather(FieldTable& global) const;
  // NaN-poisons interior-face halo points that some loop (this chain or an
  // earlier run) writes; a read there before the exchange or local recompute
  // that should refresh it trips NaN.
  void poison_stale_halos(const LoopChain& chain);

  // Tiled: per rank, build or reuse the rank plan, compute halo depths,
  // exchange once, then execute every tile with zero communication.
  // Reductions combine across ranks in rank-id order; replicated boundary
  // points contribute only on their owning rank.
  ExecutionReport run_tiled(const LoopChain& chain,
                            const std::array<int64_t, kMaxDims>& tile_sizes,
                            std::vector<ReductionResult>* reductions);

  // On-demand baseline: before each loop, exchange exactly the halos that
  // loop reads and that a prior write invalidated, then execute the loop over
  // the owned intersection on every rank.
  ExecutionReport run_untiled(const LoopChain& chain,
                              std::vector<ReductionResult>* reductions);

  const MessageLog& log() const { return log_; }
  void clear_log() { log_.messages.clear(); }

  FieldTable& rank_fields(int rank) { return ranks_[rank].fields; }
  PlanCache& rank_cache(int rank) { return ranks_[rank].cache; }
  std::shared_ptr<const TilingPlan> last_rank_plan(int rank) const {
    return ranks_[rank].last_plan;
  }
  const HaloSpec& last_rank_halos(int rank) const { return ranks_[rank].last_halos; }

 private:
  struct RankState {
    FieldTable fields;
    PlanCache cache;
    std::shared_ptr<const TilingPlan> last_plan;
    HaloSpec last_halos;
  };

  std::vector<FieldTable*> rank_field_tables();
  void note_writes(const LoopChain& chain);

  RankLayout layout_;
  std::vector<RankState> ranks_;
  ThreadPool pool_;
  MessageLog log_;
  // Write footprints of every chain run so far; halo copies inside these
  // boxes may have diverged from the owner and must be re-exchanged before
  // an uncovered read in a later chain.
  std::map<DatasetId, std::vector<Range>> written_history_;
};

// Scatter `fields` across the layout, run the chain tiled, gather owned
// regions back. The returned report carries message accounting.
ExecutionReport run_distributed(const LoopChain& chain, const RankLayout& layout,
                                const std::array<int64_t, kMaxDims>& tile_sizes,
                                FieldTable& fields,
                                std::vector<ReductionResult>* reductions = nullptr,
                                int threads = 1);

}  // namespace tilechain
