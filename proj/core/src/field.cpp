#include "tilechain/field.hpp"

#include <cmath>

namespace tilechain {

Field::Field(DatasetId id, std::string name, const Range& logical, int64_t pad,
             int elem_bytes)
    : id_(id),
      name_(std::move(name)),
      logical_(logical),
      alloc_(logical.dim()),
      pad_(pad),
      elem_bytes_(elem_bytes) {
  if (pad < 0) throw InvalidArgument("Field: negative padding");
  if (elem_bytes <= 0) throw InvalidArgument("Field: elem_bytes must be positive");
  for (int d = 0; d < logical_.dim(); ++d) {
    if (logical_.extent(d) <= 0)
      throw InvalidArgument("Field " + name_ + ": empty logical range");
    alloc_.set(d, logical_.start(d) - pad, logical_.end(d) + pad);
  }
  int64_t stride = 1;
  for (int d = 0; d < logical_.dim(); ++d) {
    strides_[d] = stride;
    stride *= alloc_.extent(d);
  }
  data_.assign(static_cast<size_t>(stride), 0.0);
}

size_t Field::checked_index(const Point& p) const {
  if (!alloc_.contains(p)) {
    std::string msg = "dataset " + name_ + ": point (";
    for (int d = 0; d < logical_.dim(); ++d)
      msg += (d ? "," : "") + std::to_string(p[d]);
    msg += ") outside allocated extent " + alloc_.to_string();
    throw AccessError(msg);
  }
  return flat_index_unchecked(p);
}

double Field::read(const Point& p, const Point& offset) const {
  return read(Point{p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]});
}

void Field::fill(double v) { data_.assign(data_.size(), v); }

void Field::fill_logical(double v) {
  const int dim = logical_.dim();
  Point p{logical_.start(0), dim > 1 ? logical_.start(1) : 0,
          dim > 2 ? logical_.start(2) : 0};
  // Walk the logical box; unused dims hold a single iteration.
  const int64_t n0 = logical_.extent(0);
  const int64_t n1 = dim > 1 ? logical_.extent(1) : 1;
  const int64_t n2 = dim > 2 ? logical_.extent(2) : 1;
  for (int64_t k = 0; k < n2; ++k)
    for (int64_t j = 0; j < n1; ++j)
      for (int64_t i = 0; i < n0; ++i) {
        Point q{logical_.start(0) + i, dim > 1 ? logical_.start(1) + j : 0,
                dim > 2 ? logical_.start(2) + k : 0};
        data_[flat_index_unchecked(q)] = v;
      }
  (void)p;
}

void Field::poison() { fill(std::nan("")); }

DatasetId FieldTable::add(std::string name, const Range& logical, int64_t pad,
                          int elem_bytes) {
  DatasetId id = static_cast<DatasetId>(fields_.size());
  fields_.emplace_back(id, std::move(name), logical, pad, elem_bytes);
  return id;
}

}  // namespace tilechain
