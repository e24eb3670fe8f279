#pragma once

#include "otcurve/constraint_basis.hpp"
#include "otcurve/cost_path.hpp"
#include "otcurve/linear_system.hpp"
#include "otcurve/marginal.hpp"
#include "otcurve/types.hpp"

#include <optional>
#include <vector>

namespace otcurve {

// Fully assembled instance: marginals, cost path, constraint basis,
// regularization strength, reference product measure and the rank-reduced
// constraint system. Immutable after assembly.
struct Problem {
  std::vector<DiscreteMarginal> marginals;
  std::vector<bool> free_marginal;
  ProductGrid grid;
  CostPath cost;
  ConstraintBasis basis;
  double eta = 1.0;
  Family family = Family::generic;

  Vector ref;      // product reference measure (uniform factor on free axes)
  Vector ref_log;  // log of the above

  LinearSystem sys;  // rank-reduced

  Index m() const { return grid.size(); }
  int n_marginals() const { return static_cast<int>(marginals.size()); }

  // Relative entropy of a coupling with respect to the reference measure.
  double entropy(const Vector& gamma) const;
  // cost(eps)^T gamma + eta * H(gamma | ref)
  double primal_value(const Vector& gamma, double eps) const;
  // Marginal of a coupling along one grid axis.
  Vector axis_marginal(const Vector& gamma, int axis) const;
};

// Build reference measure, assemble A and b, run the rank reduction.
Problem assemble_problem(std::vector<DiscreteMarginal> marginals, std::vector<bool> free_flags,
                         CostPath cost, ConstraintBasis basis, double eta,
                         Family family = Family::generic);

}  // namespace otcurve
