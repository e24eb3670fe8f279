#pragma once

#include "otcurve/problem.hpp"
#include "otcurve/sinkhorn.hpp"

#include <string>

namespace otcurve {

struct DerivativeReport {
  double eps = 0.0;
  double c_value = 0.0;
  double c_prime = 0.0;
  double c_second = 0.0;
  std::string method;  // closed_form_zero | along_curve | finite_difference
};

// C'(eps) at a minimizer of the reduced two-marginal objective (envelope
// identity: equals -cdot^T gamma(eps)). `u` are the retained potentials of
// the two-marginal kernel; their stationarity is checked to 1e-8 and
// violation raises SolverError("envelope precondition violated").
double c_prime(const Problem& two_marginal, const Vector& u, double eps);

// Closed form at eps = 0 for the unconstrained two-marginal problem:
//   C''(0) = ( (E c)^2 + E c^2 - E (E[c|X])^2 - E (E[c|Y])^2 ) / eta
// with expectations under mu (x) nu. Requires n=2, K=0 and a plain eps*c
// cost path; otherwise SolverError("closed form valid only for
// unconstrained two-marginal").
double c_second_zero(const Problem& two_marginal);

// C''(eps) along the curve: [grad_u d_eps Phi]^T [-D^2 Phi]^{-1} [...] +
// d^2_eps Phi, evaluated with the reduced kernel at a minimizer.
double c_second_along_curve(const Problem& two_marginal, const Vector& u, double eps);

DerivativeReport derivative_report_zero(const Problem& two_marginal);
DerivativeReport derivative_report_along_curve(const Problem& two_marginal, const Vector& u,
                                               double eps);

// One-sided finite-difference oracle on eps >= 0 (stencil {0, h, 2h}); each
// C(eps) comes from a tight Sinkhorn solve.
DerivativeReport c_second_finite_difference(const Problem& two_marginal, double h,
                                            const SinkhornConfig& cfg);

}  // namespace otcurve
