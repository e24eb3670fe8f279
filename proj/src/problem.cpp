#include "otcurve/problem.hpp"

#include <cmath>

namespace otcurve {

double Problem::entropy(const Vector& gamma) const {
  double h = 0.0;
  for (Index ell = 0; ell < gamma.size(); ++ell) {
    if (gamma[ell] > 0.0) h += gamma[ell] * (std::log(gamma[ell]) - ref_log[ell]);
  }
  return h;
}

double Problem::primal_value(const Vector& gamma, double eps) const {
  Vector c(m());
  cost.value(eps, c);
  return c.dot(gamma) + eta * entropy(gamma);
}

Vector Problem::axis_marginal(const Vector& gamma, int axis) const {
  Vector out = Vector::Zero(grid.axis_size(axis));
  for (Index ell = 0; ell < gamma.size(); ++ell) out[grid.index_of(ell, axis)] += gamma[ell];
  return out;
}

Problem assemble_problem(std::vector<DiscreteMarginal> marginals, std::vector<bool> free_flags,
                         CostPath cost, ConstraintBasis basis, double eta, Family family) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  Problem p;
  p.marginals = std::move(marginals);
  p.free_marginal = std::move(free_flags);
  p.cost = std::move(cost);
  p.basis = std::move(basis);
  p.eta = eta;
  p.family = family;

  LinearSystem unreduced = build_system(p.marginals, p.free_marginal, p.basis);
  p.grid = unreduced.grid();
  if (p.cost.size() != p.grid.size()) throw std::invalid_argument("cost table does not match grid size");

  p.ref_log.resize(p.grid.size());
  std::vector<Vector> axis_logw(p.marginals.size());
  for (size_t i = 0; i < p.marginals.size(); ++i) {
    if (p.free_marginal[i]) {
      axis_logw[i] = Vector::Constant(p.marginals[i].size(), -std::log(double(p.marginals[i].size())));
    } else {
      axis_logw[i] = p.marginals[i].weights.array().log();
    }
  }
  for (Index ell = 0; ell < p.grid.size(); ++ell) {
    double s = 0.0;
    for (int a = 0; a < p.grid.axes(); ++a) s += axis_logw[a][p.grid.index_of(ell, a)];
    p.ref_log[ell] = s;
  }
  p.ref = p.ref_log.array().exp();

  p.sys = reduce_full_rank(unreduced);
  return p;
}

}  // namespace otcurve
