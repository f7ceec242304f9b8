#pragma once

#include <vector>

#include "tilechain/types.hpp"

namespace tilechain {

// Dense f64 dataset storage over a padded allocation. The logical range is
// what the user declared; the allocated range adds `pad` points per face so
// stencil reads near edges and skewed tile extensions stay in bounds. Plan
// construction verifies the padding is sufficient before anything executes.
class Field {
 public:
  Field(DatasetId id, std::string name, const Range& logical, int64_t pad,
        int elem_bytes = 8);

  DatasetId id() const { return id_; }
  const std::string& name() const { return name_; }
  int dim() const { return logical_.dim(); }
  int elem_bytes() const { return elem_bytes_; }
  int64_t pad() const { return pad_; }
  const Range& logical_range() const { return logical_; }
  const Range& alloc_range() const { return alloc_; }

  // Checked point access; offset form implements stencil reads. Out-of-extent
  // access throws AccessError naming the dataset and point.
  double read(const Point& p) const { return data_[checked_index(p)]; }
  double read(const Point& p, const Point& offset) const;
  void write(const Point& p, double v) { data_[checked_index(p)] = v; }

  void fill(double v);
  void fill_logical(double v);
  // Quiet-NaN everywhere; un-exchanged halo reads then poison results visibly.
  void poison();

  // Layout plumbing for the kernel access path (which does its own bounds
  // checks to attach loop context to diagnostics).
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }
  const std::array<int64_t, kMaxDims>& strides() const { return strides_; }
  size_t flat_index_unchecked(const Point& p) const {
    size_t idx = 0;
    for (int d = 0; d < logical_.dim(); ++d)
      idx += static_cast<size_t>((p[d] - alloc_.start(d)) * strides_[d]);
    return idx;
  }

  bool operator==(const Field& o) const {
    return logical_ == o.logical_ && data_ == o.data_;
  }

 private:
  size_t checked_index(const Point& p) const;

  DatasetId id_;
  std::string name_;
  Range logical_;
  Range alloc_;
  int64_t pad_;
  int elem_bytes_;
  std::array<int64_t, kMaxDims> strides_{};
  std::vector<double> data_;
};

// Datasets of one runtime (or one simulated rank), indexed by DatasetId.
class FieldTable {
 public:
  DatasetId add(std::string name, const Range& logical, int64_t pad,
                int elem_bytes = 8);

  Field& operator[](DatasetId id) { return fields_.at(static_cast<size_t>(id)); }
  const Field& operator[](DatasetId id) const {
    return fields_.at(static_cast<size_t>(id));
  }
  size_t size() const { return fields_.size(); }

  auto begin() { return fields_.begin(); }
  auto end() { return fields_.end(); }
  auto begin() const { return fields_.begin(); }
  auto end() const { return fields_.end(); }

 private:
  std::vector<Field> fields_;
};

}  // namespace tilechain
