#include "otcurve/derivatives.hpp"

#include "otcurve/reduced_kernels.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace otcurve {

namespace {

constexpr double kEnvelopeTol = 1e-8;

TwoMarginalKernel checked_kernel(const Problem& p) {
  if (p.n_marginals() != 2 || p.basis.size() != 0 || p.free_marginal[0] || p.free_marginal[1])
    throw SolverError("closed form valid only for unconstrained two-marginal");
  return TwoMarginalKernel(p);
}

void check_stationary(const TwoMarginalKernel& k, const Vector& u, double eps) {
  if (u.size() != k.dim()) throw std::invalid_argument("potential length mismatch");
  double g = k.dim() ? k.gradient(u, eps).cwiseAbs().maxCoeff() : 0.0;
  if (!(g <= kEnvelopeTol)) throw SolverError("envelope precondition violated");
}

}  // namespace

double c_prime(const Problem& two_marginal, const Vector& u, double eps) {
  TwoMarginalKernel k = checked_kernel(two_marginal);
  check_stationary(k, u, eps);
  return k.partial_eps(u, eps);
}

double c_second_zero(const Problem& p) {
  checked_kernel(p);
  if (!p.cost.is_affine() || p.cost.base().cwiseAbs().maxCoeff() != 0.0)
    throw SolverError("closed form valid only for unconstrained two-marginal");
  const Vector& mu = p.marginals[0].weights;
  const Vector& nu = p.marginals[1].weights;
  const Index nx = mu.size(), ny = nu.size();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> c(
      p.cost.slope().data(), nx, ny);

  const double ec = mu.transpose() * c * nu;
  const double ec2 = mu.transpose() * c.cwiseProduct(c) * nu;
  Vector cond_x = c * nu;                // E[c | X = x_r]
  Vector cond_y = c.transpose() * mu;    // E[c | Y = y_s]
  const double ex2 = cond_x.cwiseProduct(cond_x).dot(mu);
  const double ey2 = cond_y.cwiseProduct(cond_y).dot(nu);
  return (ec * ec + ec2 - ex2 - ey2) / p.eta;
}

double c_second_along_curve(const Problem& p, const Vector& u, double eps) {
  TwoMarginalKernel k = checked_kernel(p);
  check_stationary(k, u, eps);
  EvalResult r;
  k.eval(u, eps, {.hessian = true, .mixed = true}, r);
  double quad = 0.0;
  if (k.dim() > 0) {
    Eigen::LLT<Matrix> llt(r.hessian);
    if (llt.info() != Eigen::Success) {
      Matrix hj = r.hessian;
      hj.diagonal().array() += 1e-12 * r.hessian.trace() / double(r.hessian.rows());
      llt.compute(hj);
      if (llt.info() != Eigen::Success) throw SolverError("Hessian indefinite (numerical)");
    }
    quad = -r.mixed.dot(llt.solve(r.mixed));
  }
  return quad + k.partial_eps2(u, eps);
}

DerivativeReport derivative_report_zero(const Problem& p) {
  TwoMarginalKernel k = checked_kernel(p);
  Vector u0 = Vector::Zero(k.dim());
  DerivativeReport rep;
  rep.eps = 0.0;
  rep.method = "closed_form_zero";
  rep.c_value = k.value(u0, 0.0);
  rep.c_prime = c_prime(p, u0, 0.0);
  rep.c_second = c_second_zero(p);
  return rep;
}

DerivativeReport derivative_report_along_curve(const Problem& p, const Vector& u, double eps) {
  TwoMarginalKernel k = checked_kernel(p);
  DerivativeReport rep;
  rep.eps = eps;
  rep.method = "along_curve";
  rep.c_value = k.value(u, eps);
  rep.c_prime = c_prime(p, u, eps);
  rep.c_second = c_second_along_curve(p, u, eps);
  return rep;
}

DerivativeReport c_second_finite_difference(const Problem& p, double h, const SinkhornConfig& cfg) {
  checked_kernel(p);
  double c0, c1, c2;
  std::optional<Vector> warm;
  {
    SinkhornResult r = sinkhorn_solve(p, 0.0, cfg);
    c0 = r.phi_value;
    warm = r.full_layout(p);
  }
  {
    SinkhornResult r = sinkhorn_solve(p, h, cfg, warm);
    c1 = r.phi_value;
    warm = r.full_layout(p);
  }
  {
    SinkhornResult r = sinkhorn_solve(p, 2.0 * h, cfg, warm);
    c2 = r.phi_value;
  }
  DerivativeReport rep;
  rep.eps = 0.0;
  rep.method = "finite_difference";
  rep.c_value = c0;
  rep.c_prime = (-3.0 * c0 + 4.0 * c1 - c2) / (2.0 * h);
  rep.c_second = (c0 - 2.0 * c1 + c2) / (h * h);
  return rep;
}

}  // namespace otcurve
