#pragma once

#include <functional>

#include "tilechain/field.hpp"
#include "tilechain/types.hpp"

namespace tilechain {

class KernelCtx;
using Kernel = std::function<void(KernelCtx&)>;

// Named kernel with a stable id; the id feeds the chain signature, so apps
// should use fixed ids per kernel, not per instantiation.
struct KernelHandle {
  int32_t id = -1;
  std::string name;
  Kernel fn;
};

// Per-point view handed to kernels. Arguments are bound per (tile, loop) by
// whichever driver runs the kernel (parallel executor or sequential oracle);
// the scheduling logic around this class is what differs between them.
//
// Reads are validated against both the declared stencil (exact offset
// membership) and the allocated extent; failures name the loop, dataset, and
// point, which is the primary correctness tripwire of the whole runtime.
class KernelCtx {
 public:
  struct Binding {
    double* base = nullptr;
    std::array<int64_t, kMaxDims> strides{};
    Range alloc;
    AccessMode mode = AccessMode::Read;
    const Stencil* stencil = nullptr;
    const char* dataset_name = "";
  };

  void bind(const char* loop_name, int32_t loop_id, std::vector<Binding> bindings) {
    loop_name_ = loop_name;
    loop_id_ = loop_id;
    bindings_ = std::move(bindings);
  }

  void set_reduction(ReduceOp op, double* slot, const Range* mask) {
    red_op_ = op;
    red_slot_ = slot;
    red_mask_ = mask;
  }

  void set_point(const Point& p) { point_ = p; }

  int64_t x() const { return point_[0]; }
  int64_t y() const { return point_[1]; }
  int64_t z() const { return point_[2]; }
  const Point& point() const { return point_; }

  double read(size_t arg, int64_t dx = 0, int64_t dy = 0, int64_t dz = 0) const {
    const Binding& b = bindings_[arg];
    if (!mode_reads(b.mode)) fail(arg, dx, dy, dz, "read through write-only arg");
    if (!b.stencil->has_offset(dx, dy, dz))
      fail(arg, dx, dy, dz, "offset not in declared stencil");
    Point q{point_[0] + dx, point_[1] + dy, point_[2] + dz};
    if (!b.alloc.contains(q)) fail(arg, dx, dy, dz, "outside allocated extent");
    return b.base[flat(b, q)];
  }

  void write(size_t arg, double v) const {
    const Binding& b = bindings_[arg];
    if (!mode_writes(b.mode)) fail(arg, 0, 0, 0, "write through read-only arg");
    if (!b.alloc.contains(point_)) fail(arg, 0, 0, 0, "outside allocated extent");
    b.base[flat(b, point_)] = v;
  }

  void increment(size_t arg, double v) const {
    const Binding& b = bindings_[arg];
    if (!mode_writes(b.mode) || !mode_reads(b.mode))
      fail(arg, 0, 0, 0, "increment needs a readwrite/increment arg");
    if (!b.alloc.contains(point_)) fail(arg, 0, 0, 0, "outside allocated extent");
    b.base[flat(b, point_)] += v;
  }

  void contribute(double v) const {
    if (red_slot_ == nullptr)
      throw AccessError(std::string("loop ") + loop_name_ +
                        ": contribute() without a declared reduction");
    if (red_mask_ != nullptr && !red_mask_->contains(point_)) return;
    *red_slot_ = reduce_combine(red_op_, *red_slot_, v);
  }

 private:
  static size_t flat(const Binding& b, const Point& q) {
    size_t idx = 0;
    for (int d = 0; d < b.alloc.dim(); ++d)
      idx += static_cast<size_t>((q[d] - b.alloc.start(d)) * b.strides[d]);
    return idx;
  }

  [[noreturn]] void fail(size_t arg, int64_t dx, int64_t dy, int64_t dz,
                         const char* why) const;

  const char* loop_name_ = "";
  int32_t loop_id_ = -1;
  Point point_{0, 0, 0};
  std::vector<Binding> bindings_;
  ReduceOp red_op_ = ReduceOp::Sum;
  double* red_slot_ = nullptr;
  const Range* red_mask_ = nullptr;
};

}  // namespace tilechain
