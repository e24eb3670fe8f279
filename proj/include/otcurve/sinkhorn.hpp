#pragma once

#include "otcurve/problem.hpp"

#include <optional>

namespace otcurve {

struct SinkhornConfig {
  int max_iters = 20000;
  double tol = 1e-8;         // stop on max primal-constraint residual
  double newton_tol = 1e-13; // scalar root solves, relative to the weight scale
  int newton_max = 50;       // Newton steps before pure bisection
  double damping = 1.0;      // block step scaling in (0, 1]
  bool check_descent = false;  // verify Phi never increases across block updates

  void validate() const {
    if (!(tol > 0.0) || max_iters < 1 || !(damping > 0.0) || damping > 1.0)
      throw std::invalid_argument("invalid sinkhorn config");
  }
};

struct SinkhornResult {
  std::vector<Vector> psi;  // per marginal (empty vector on free marginals)
  Vector p;                 // constraint multipliers
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  double phi_value = 0.0;  // Phi at the returned potentials
  Vector coupling;         // Gibbs coupling of the returned potentials

  // Potentials in the unreduced [psi-blocks, p] layout of the problem's
  // linear system.
  Vector full_layout(const Problem& p) const;
};

// Cyclic exact block minimization of Phi(., eps): closed-form log-sum-exp
// updates on the marginal blocks, safeguarded scalar Newton (bisection
// fallback) on each constraint coordinate. Stops when the recovered
// coupling satisfies the reduced constraints to cfg.tol. Returns the best
// iterate with converged=false when the iteration cap is reached.
SinkhornResult sinkhorn_solve(const Problem& problem, double eps, const SinkhornConfig& cfg,
                              const std::optional<Vector>& warm_full = std::nullopt);

// -Phi at the Sinkhorn optimum (the dual value of the maximization form).
double dual_value_at_optimum(const Problem& problem, double eps, const SinkhornConfig& cfg);

}  // namespace otcurve
