#include "otcurve/dual_objective.hpp"

#include <cmath>
#include <sstream>

namespace otcurve {

namespace {

[[noreturn]] void throw_overflow(double eps) {
  std::ostringstream os;
  os << "objective overflow at eps=" << eps;
  throw SolverError(os.str());
}

}  // namespace

EvalCache GenericKernel::cache(const Vector& phi, double eps) const {
  const Problem& p = *p_;
  const Index m = p.m();
  EvalCache c;
  c.log_weights.resize(m);
  Vector cost(m);
  p.cost.value(eps, cost);
  for (Index ell = 0; ell < m; ++ell) {
    c.log_weights[ell] = (p.sys.row_dot(ell, phi) - cost[ell]) / p.eta + p.ref_log[ell];
  }
  c.max_exponent = c.log_weights.maxCoeff();
  if (c.max_exponent > 700.0) throw_overflow(eps);
  c.weights = c.log_weights.array().exp();
  return c;
}

void GenericKernel::eval(const Vector& phi, double eps, const EvalRequest& req, EvalResult& out) const {
  const Problem& p = *p_;
  if (phi.size() != dim()) throw std::invalid_argument("potential length does not match reduced system");
  const Index m = p.m();
  EvalCache c = cache(phi, eps);

  if (req.value) {
    // max-shifted accumulation of the exponential sum
    double s = 0.0;
    for (Index ell = 0; ell < m; ++ell) s += std::exp(c.log_weights[ell] - c.max_exponent);
    if (c.max_exponent + std::log(s) > 700.0) throw_overflow(eps);
    out.value = -p.sys.rhs().dot(phi) + p.eta * std::exp(c.max_exponent) * s;
  }
  if (req.gradient) {
    out.gradient = -p.sys.rhs();
    for (Index ell = 0; ell < m; ++ell) p.sys.add_row_scaled(ell, c.weights[ell], out.gradient);
  }
  if (req.hessian) {
    out.hessian = Matrix::Zero(dim(), dim());
    for (Index ell = 0; ell < m; ++ell) p.sys.add_row_outer(ell, c.weights[ell], out.hessian);
    out.hessian /= p.eta;
  }
  if (req.mixed || req.partial_eps) {
    Vector cdot(m);
    p.cost.derivative(eps, cdot);
    if (req.mixed) {
      out.mixed = Vector::Zero(dim());
      for (Index ell = 0; ell < m; ++ell) {
        p.sys.add_row_scaled(ell, cdot[ell] * c.weights[ell], out.mixed);
      }
      out.mixed /= -p.eta;
    }
    if (req.partial_eps) out.partial_eps = -cdot.dot(c.weights);
  }
}

Vector GenericKernel::coupling(const Vector& phi, double eps) const {
  return cache(phi, eps).weights;
}

double phi_value(const Problem& p, const DualState& s) {
  return GenericKernel(p).value(s.phi, s.epsilon);
}
Vector gradient(const Problem& p, const DualState& s) {
  return GenericKernel(p).gradient(s.phi, s.epsilon);
}
Matrix hessian(const Problem& p, const DualState& s) {
  return GenericKernel(p).hessian(s.phi, s.epsilon);
}
Vector mixed_eps_gradient(const Problem& p, const DualState& s) {
  return GenericKernel(p).mixed_eps_gradient(s.phi, s.epsilon);
}
Vector recover_primal(const Problem& p, const DualState& s) {
  return GenericKernel(p).coupling(s.phi, s.epsilon);
}

}  // namespace otcurve
