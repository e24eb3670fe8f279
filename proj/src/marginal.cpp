#include "otcurve/marginal.hpp"

#include <cmath>
#include <sstream>

namespace otcurve {

void DiscreteMarginal::validate() const {
  if (points.rows() != weights.size())
    throw std::invalid_argument("marginal: points/weights size mismatch");
  if (weights.size() == 0) throw std::invalid_argument("marginal: empty support");
  for (Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) {
      std::ostringstream os;
      os << "marginal: weight " << i << " not positive";
      throw std::invalid_argument(os.str());
    }
  }
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("marginal: weights do not sum to 1");
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index j = i + 1; j < points.rows(); ++j) {
      if ((points.row(i) - points.row(j)).cwiseAbs().maxCoeff() == 0.0)
        throw std::invalid_argument("marginal: duplicate support points");
    }
  }
}

Vector DiscreteMarginal::scalar_points() const {
  if (dim() != 1) throw std::invalid_argument("marginal: scalar support requires d=1");
  return points.col(0);
}

double DiscreteMarginal::mean_scalar() const { return scalar_points().dot(weights); }

DiscreteMarginal uniform_marginal_1d(Index n, double lo, double hi) {
  DiscreteMarginal mu;
  mu.points.resize(n, 1);
  if (n == 1) {
    mu.points(0, 0) = 0.5 * (lo + hi);
  } else {
    for (Index i = 0; i < n; ++i) mu.points(i, 0) = lo + (hi - lo) * double(i) / double(n - 1);
  }
  mu.weights = Vector::Constant(n, 1.0 / double(n));
  mu.validate();
  return mu;
}

DiscreteMarginal make_marginal_1d(const Vector& points, const Vector& weights) {
  DiscreteMarginal mu;
  mu.points = points;
  mu.weights = weights;
  mu.validate();
  return mu;
}

std::string family_name(Family f) {
  switch (f) {
    case Family::generic: return "generic";
    case Family::two_marginal: return "two_marginal";
    case Family::three_marginal: return "three_marginal";
    case Family::martingale: return "martingale";
    case Family::multi_period_martingale: return "multi_period_martingale";
    case Family::geodesic: return "geodesic";
    case Family::barycenter: return "barycenter";
  }
  return "?";
}

}  // namespace otcurve
