#pragma once

#include "otcurve/types.hpp"

#include <numeric>
#include <vector>

namespace otcurve {

// Flat indexing of the product grid X^1 x ... x X^n. Row-major with the
// first marginal slowest; this layout is part of the file formats and must
// not change.
class ProductGrid {
 public:
  ProductGrid() = default;

  explicit ProductGrid(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
    strides_.assign(sizes_.size(), 1);
    m_ = 1;
    for (int i = static_cast<int>(sizes_.size()) - 1; i >= 0; --i) {
      if (sizes_[i] <= 0) throw std::invalid_argument("grid axis size must be positive");
      strides_[i] = m_;
      m_ *= sizes_[i];
    }
  }

  Index size() const { return m_; }
  int axes() const { return static_cast<int>(sizes_.size()); }
  Index axis_size(int axis) const { return sizes_[axis]; }
  const std::vector<Index>& sizes() const { return sizes_; }

  Index flatten(const std::vector<Index>& multi) const {
    Index ell = 0;
    for (int i = 0; i < axes(); ++i) ell += multi[i] * strides_[i];
    return ell;
  }

  void unflatten(Index ell, std::vector<Index>& multi) const {
    multi.resize(sizes_.size());
    for (int i = 0; i < axes(); ++i) {
      multi[i] = (ell / strides_[i]) % sizes_[i];
    }
  }

  // Coordinate of flat index `ell` along one axis.
  Index index_of(Index ell, int axis) const { return (ell / strides_[axis]) % sizes_[axis]; }

  Index stride(int axis) const { return strides_[axis]; }

 private:
  std::vector<Index> sizes_;
  std::vector<Index> strides_;
  Index m_ = 0;
};

}  // namespace otcurve
