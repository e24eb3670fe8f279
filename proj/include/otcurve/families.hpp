#pragma once

#include "otcurve/problem.hpp"

#include <functional>

namespace otcurve {

// Built-in cost tables over the product grid (flat row-major order).
Vector cost_table_squared_distance(const DiscreteMarginal& mu, const DiscreteMarginal& nu);
Vector cost_table_neg_log_distance(const DiscreteMarginal& mu, const DiscreteMarginal& nu);
Vector cost_table_pairwise_neg_log(const DiscreteMarginal& m1, const DiscreteMarginal& m2,
                                   const DiscreteMarginal& m3);
// exp(-x) y^2 (one-period) and y^2 exp(-x) + z^2 exp(-x) (three-period)
Vector cost_table_spence_mirrlees(const DiscreteMarginal& mu, const DiscreteMarginal& nu);
Vector cost_table_spence_mirrlees3(const DiscreteMarginal& m1, const DiscreteMarginal& m2,
                                   const DiscreteMarginal& m3);

// Martingale test-function basis {(y - x_i) on the rows with x = x_i}; in
// d > 1 one column per coordinate.
ConstraintBasis martingale_basis(const DiscreteMarginal& mu, const DiscreteMarginal& nu);
ConstraintBasis multi_period_basis(const DiscreteMarginal& mu, const DiscreteMarginal& theta,
                                   const DiscreteMarginal& nu);

// Convex-order check for one-dimensional discrete measures: equal means and
// call-function dominance on the union of supports. Throws
// std::invalid_argument("convex-order check unsupported in d>1") for
// multidimensional supports.
bool check_convex_order(const DiscreteMarginal& mu, const DiscreteMarginal& nu);

Problem make_two_marginal(DiscreteMarginal mu, DiscreteMarginal nu, Vector cost_table, double eta);
Problem make_three_marginal(DiscreteMarginal m1, DiscreteMarginal m2, DiscreteMarginal m3,
                            Vector cost_table, double eta);

// One-period martingale problem; requires mu <=_c nu (raises
// SolverError("infeasible: mu not dominated in convex order")).
Problem make_martingale(DiscreteMarginal mu, DiscreteMarginal nu, Vector cost_table, double eta);

// Three-period martingale problem; requires mu <=_c theta <=_c nu.
Problem make_multi_period(DiscreteMarginal mu, DiscreteMarginal theta, DiscreteMarginal nu,
                          Vector cost_table, double eta);

// Displacement interpolant: marginals (mu1, z, mu2) with free middle
// marginal (uniform reference on z_points) and cost path
// (1-eps)|x1-z|^2 + eps|z-x2|^2.
Problem make_geodesic(DiscreteMarginal mu1, DiscreteMarginal mu2, Matrix z_points, double eta);

// Weight path for barycenters: simplex weights lambda(eps) with derivative.
struct LambdaPath {
  std::function<Vector(double)> weights;
  std::function<Vector(double)> derivative;

  // ((1-eps), eps/(n-1), ..., eps/(n-1))
  static LambdaPath linear_from_vertex(int n);
};

// Barycenter problem: marginals (mu^1..mu^n, z) with free z and cost
// sum_i lambda_i(eps) |x^i - z|^2. lambda(0) must put full weight on the
// first marginal; the path must stay on the simplex (checked on a sample
// grid, violation raises SolverError("invalid weight path")).
Problem make_barycenter(std::vector<DiscreteMarginal> marginals, Matrix z_points,
                        const LambdaPath& path, double eta);
Problem make_barycenter(std::vector<DiscreteMarginal> marginals, Matrix z_points, double eta);

}  // namespace otcurve
