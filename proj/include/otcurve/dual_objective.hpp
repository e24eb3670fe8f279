#pragma once

#include "otcurve/kernel.hpp"
#include "otcurve/problem.hpp"

namespace otcurve {

// Potentials of the reduced system at a path position.
struct DualState {
  Vector phi;
  double epsilon = 0.0;
};

// Exponential weights w_l = exp((A_l phi - c_l(eps))/eta) * ref_l of one
// evaluation, kept in both linear and log form.
struct EvalCache {
  Vector weights;
  Vector log_weights;
  double max_exponent = 0.0;
};

// Dual objective on the generic reduced system:
//   Phi(phi, eps) = -b^T phi + eta * sum_l exp((A_l phi - c_l(eps))/eta) ref_l.
// The exponential sum is always accumulated max-shifted; past the
// representable range the evaluation raises SolverError("objective
// overflow at eps=...").
class GenericKernel : public DualKernel {
 public:
  explicit GenericKernel(const Problem& p) : p_(&p) {}

  Index dim() const override { return p_->sys.cols(); }
  std::string name() const override { return "generic"; }

  void eval(const Vector& phi, double eps, const EvalRequest& req, EvalResult& out) const override;
  Vector coupling(const Vector& phi, double eps) const override;

  EvalCache cache(const Vector& phi, double eps) const;

  const Problem& problem() const { return *p_; }

 private:
  const Problem* p_;
};

double phi_value(const Problem& p, const DualState& s);
Vector gradient(const Problem& p, const DualState& s);
Matrix hessian(const Problem& p, const DualState& s);
Vector mixed_eps_gradient(const Problem& p, const DualState& s);
Vector recover_primal(const Problem& p, const DualState& s);

}  // namespace otcurve
