#pragma once

#include "otcurve/types.hpp"

#include <string>
#include <vector>

namespace otcurve {

// One basis vector q^j over the flat grid, stored by nonzero entries.
struct SparseGridVector {
  std::vector<Index> idx;
  std::vector<double> val;

  void push(Index i, double v) {
    if (v != 0.0) {
      idx.push_back(i);
      val.push_back(v);
    }
  }
  Index nnz() const { return static_cast<Index>(idx.size()); }
};

// Basis {q^j} of the constraint subspace Q; each vector has grid length m.
struct ConstraintBasis {
  Index m = 0;
  std::vector<SparseGridVector> vectors;
  std::vector<std::string> labels;

  Index size() const { return static_cast<Index>(vectors.size()); }

  void add(SparseGridVector v, std::string label) {
    vectors.push_back(std::move(v));
    labels.push_back(std::move(label));
  }

  static ConstraintBasis none(Index m) {
    ConstraintBasis b;
    b.m = m;
    return b;
  }

  static ConstraintBasis from_dense(const std::vector<Vector>& dense, Index m);

  Vector dense_vector(Index j) const {
    Vector v = Vector::Zero(m);
    const auto& s = vectors[j];
    for (Index k = 0; k < s.nnz(); ++k) v[s.idx[k]] = s.val[k];
    return v;
  }
};

}  // namespace otcurve
