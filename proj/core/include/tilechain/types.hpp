#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace tilechain {

inline constexpr int kMaxDims = 3;

using DatasetId = int32_t;
using StencilId = int32_t;

// Index-space point. Unused trailing coordinates are zero.
using Point = std::array<int64_t, kMaxDims>;

inline Point pt(int64_t x, int64_t y = 0, int64_t z = 0) { return {x, y, z}; }

// Errors raised by declaration-time validation (bad stencils, bad args, ...).
struct InvalidArgument : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Errors raised when a kernel touches storage outside the allocated extent or
// outside its declared stencil. The message names the loop, dataset, and point.
struct AccessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Errors raised at plan time (insufficient halo padding, signature mismatch).
struct PlanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One block per runtime; datasets and loops all live on it.
struct Block {
  std::string name;
  int dim = 1;
};

// Half-open box [start, end) per dimension. Dimensions at index >= dim are
// fixed to [0, 1) so volume and linearization are uniform across 1D/2D/3D.
class Range {
 public:
  Range() : Range(1) {}

  explicit Range(int dim) : dim_(dim) {
    check_dim(dim);
    start_.fill(0);
    end_.fill(1);
    for (int d = 0; d < dim_; ++d) end_[d] = 0;
  }

  static Range d1(int64_t s0, int64_t e0) {
    Range r(1);
    r.set(0, s0, e0);
    return r;
  }
  static Range d2(int64_t s0, int64_t e0, int64_t s1, int64_t e1) {
    Range r(2);
    r.set(0, s0, e0);
    r.set(1, s1, e1);
    return r;
  }
  static Range d3(int64_t s0, int64_t e0, int64_t s1, int64_t e1, int64_t s2,
                  int64_t e2) {
    Range r(3);
    r.set(0, s0, e0);
    r.set(1, s1, e1);
    r.set(2, s2, e2);
    return r;
  }
  static Range cube(int dim, int64_t s, int64_t e) {
    Range r(dim);
    for (int d = 0; d < dim; ++d) r.set(d, s, e);
    return r;
  }

  int dim() const { return dim_; }
  int64_t start(int d) const { return start_[d]; }
  int64_t end(int d) const { return end_[d]; }
  int64_t extent(int d) const { return end_[d] - start_[d]; }

  void set(int d, int64_t s, int64_t e) {
    if (s > e)
      throw InvalidArgument("Range: start " + std::to_string(s) + " > end " +
                            std::to_string(e) + " in dim " + std::to_string(d));
    start_[d] = s;
    end_[d] = e;
  }
  void set_start(int d, int64_t s) { start_[d] = s; }
  void set_end(int d, int64_t e) { end_[d] = e; }

  bool empty() const {
    for (int d = 0; d < dim_; ++d)
      if (end_[d] <= start_[d]) return true;
    return false;
  }

  int64_t volume() const {
    int64_t v = 1;
    for (int d = 0; d < dim_; ++d) {
      int64_t e = extent(d);
      if (e <= 0) return 0;
      v *= e;
    }
    return v;
  }

  bool contains(const Point& p) const {
    for (int d = 0; d < dim_; ++d)
      if (p[d] < start_[d] || p[d] >= end_[d]) return false;
    return true;
  }

  bool contains(const Range& inner) const {
    if (inner.empty()) return true;
    for (int d = 0; d < dim_; ++d)
      if (inner.start_[d] < start_[d] || inner.end_[d] > end_[d]) return false;
    return true;
  }

  Range intersect(const Range& o) const {
    Range r(dim_);
    for (int d = 0; d < dim_; ++d) {
      int64_t s = std::max(start_[d], o.start_[d]);
      int64_t e = std::min(end_[d], o.end_[d]);
      r.start_[d] = s;
      r.end_[d] = std::max(s, e);
    }
    return r;
  }

  Range hull(const Range& o) const {
    Range r(dim_);
    for (int d = 0; d < dim_; ++d) {
      r.start_[d] = std::min(start_[d], o.start_[d]);
      r.end_[d] = std::max(end_[d], o.end_[d]);
    }
    return r;
  }

  // Box grown by per-dimension offsets: [start + lo_d, end + hi_d).
  Range dilated(const std::array<int64_t, kMaxDims>& lo,
                const std::array<int64_t, kMaxDims>& hi) const {
    Range r(dim_);
    for (int d = 0; d < dim_; ++d) {
      r.start_[d] = start_[d] + lo[d];
      r.end_[d] = std::max(r.start_[d], end_[d] + hi[d]);
    }
    return r;
  }

  bool operator==(const Range& o) const {
    if (dim_ != o.dim_) return false;
    for (int d = 0; d < dim_; ++d)
      if (start_[d] != o.start_[d] || end_[d] != o.end_[d]) return false;
    return true;
  }
  bool operator!=(const Range& o) const { return !(*this == o); }

  std::string to_string() const {
    std::string s;
    for (int d = 0; d < dim_; ++d) {
      if (d) s += "x";
      s += "[" + std::to_string(start_[d]) + "," + std::to_string(end_[d]) + ")";
    }
    return s;
  }

 private:
  static void check_dim(int dim) {
    if (dim < 1 || dim > kMaxDims)
      throw InvalidArgument("Range: dim must be 1, 2, or 3");
  }

  int dim_;
  std::array<int64_t, kMaxDims> start_;
  std::array<int64_t, kMaxDims> end_;
};

enum class AccessMode : uint8_t { Read, Write, ReadWrite, Increment };

// Increment is commutative accumulation; dependency analysis treats it as
// ReadWrite (conservative).
inline bool mode_reads(AccessMode m) { return m != AccessMode::Write; }
inline bool mode_writes(AccessMode m) { return m != AccessMode::Read; }

inline const char* mode_name(AccessMode m) {
  switch (m) {
    case AccessMode::Read: return "read";
    case AccessMode::Write: return "write";
    case AccessMode::ReadWrite: return "readwrite";
    case AccessMode::Increment: return "increment";
  }
  return "?";
}

// Fixed set of relative offsets a kernel may read around each iteration point.
// One-sided stencils are legal: min/max offsets are the elementwise extremes
// of the declared points, with no requirement to straddle zero.
class Stencil {
 public:
  Stencil(int dim, std::vector<Point> points) : dim_(dim), points_(std::move(points)) {
    if (dim < 1 || dim > kMaxDims)
      throw InvalidArgument("Stencil: dim must be 1, 2, or 3");
    if (points_.empty()) throw InvalidArgument("Stencil: empty point set");
    min_.fill(0);
    max_.fill(0);
    for (int d = 0; d < kMaxDims; ++d) {
      min_[d] = std::numeric_limits<int64_t>::max();
      max_[d] = std::numeric_limits<int64_t>::min();
    }
    for (const Point& p : points_) {
      for (int d = dim_; d < kMaxDims; ++d)
        if (p[d] != 0)
          throw InvalidArgument("Stencil: offset uses dimension beyond stencil dim");
      for (int d = 0; d < kMaxDims; ++d) {
        min_[d] = std::min(min_[d], p[d]);
        max_[d] = std::max(max_[d], p[d]);
      }
    }
  }

  static Stencil identity(int dim) { return Stencil(dim, {pt(0, 0, 0)}); }

  int dim() const { return dim_; }
  const std::vector<Point>& points() const { return points_; }
  int64_t min_offset(int d) const { return min_[d]; }
  int64_t max_offset(int d) const { return max_[d]; }

  bool is_identity() const {
    return points_.size() == 1 && points_[0] == Point{0, 0, 0};
  }

  bool has_offset(int64_t dx, int64_t dy, int64_t dz) const {
    for (const Point& p : points_)
      if (p[0] == dx && p[1] == dy && p[2] == dz) return true;
    return false;
  }

  int64_t max_abs_offset() const {
    int64_t m = 0;
    for (int d = 0; d < dim_; ++d) {
      m = std::max(m, std::abs(min_[d]));
      m = std::max(m, std::abs(max_[d]));
    }
    return m;
  }

 private:
  int dim_;
  std::vector<Point> points_;
  std::array<int64_t, kMaxDims> min_;
  std::array<int64_t, kMaxDims> max_;
};

// Access descriptor: which dataset a kernel argument touches, through which
// stencil, and how. Write-mode args must use the identity stencil; writes
// always land on the iteration point.
struct ArgSpec {
  DatasetId dataset = -1;
  StencilId stencil = -1;
  AccessMode mode = AccessMode::Read;
};

enum class ReduceOp : uint8_t { Sum, Min, Max };

inline double reduce_identity(ReduceOp op) {
  switch (op) {
    case ReduceOp::Sum: return 0.0;
    case ReduceOp::Min: return std::numeric_limits<double>::infinity();
    case ReduceOp::Max: return -std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

inline double reduce_combine(ReduceOp op, double a, double b) {
  switch (op) {
    case ReduceOp::Sum: return a + b;
    case ReduceOp::Min: return a < b ? a : b;
    case ReduceOp::Max: return a > b ? a : b;
  }
  return a;
}

struct ReductionHandle {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

struct ReductionSpec {
  ReduceOp op = ReduceOp::Sum;
  ReductionHandle handle;
};

}  // namespace tilechain
