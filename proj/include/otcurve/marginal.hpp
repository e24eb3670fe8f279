#pragma once

#include "otcurve/types.hpp"

#include <vector>

namespace otcurve {

// One discrete marginal: N support points in R^d with positive weights
// summing to one.
struct DiscreteMarginal {
  Matrix points;   // N x d
  Vector weights;  // N

  Index size() const { return weights.size(); }
  Index dim() const { return points.cols(); }

  // Throws std::invalid_argument on: non-positive weight, weight sum off by
  // more than 1e-12, duplicate support points, shape mismatch.
  void validate() const;

  // Scalar support values; requires dim() == 1.
  Vector scalar_points() const;

  double mean_scalar() const;
};

DiscreteMarginal uniform_marginal_1d(Index n, double lo, double hi);
DiscreteMarginal make_marginal_1d(const Vector& points, const Vector& weights);

}  // namespace otcurve
