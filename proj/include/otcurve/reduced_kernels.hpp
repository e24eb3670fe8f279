#pragma once

#include "otcurve/kernel.hpp"
#include "otcurve/problem.hpp"

#include <memory>

namespace otcurve {

// Two-marginal objective with the second potential eliminated:
//   Phi(u, eps) = -sum_r u_r mu_r
//                 + eta * sum_s log(sum_r exp((u_r - c_rs(eps))/eta) mu_r) nu_s + eta,
// gauge u_0 = 0. Retained variables: u_1..u_{Nx-1}.
class TwoMarginalKernel : public ReducedKernel {
 public:
  explicit TwoMarginalKernel(const Problem& p);

  Index dim() const override { return nx_ - 1; }
  std::string name() const override { return "two_marginal"; }
  void eval(const Vector& phi, double eps, const EvalRequest& req, EvalResult& out) const override;
  Vector coupling(const Vector& phi, double eps) const override;
  ReducedLayout layout() const override;
  Vector eliminate(const Vector& phi, double eps) const override;
  Vector full_potentials(const Vector& phi, double eps) const override;
  Vector from_full_potentials(const Vector& phi_full) const override;

  // d^2/deps^2 of the objective at fixed potentials (affine cost paths).
  double partial_eps2(const Vector& phi, double eps) const;

  const Problem& problem() const { return *p_; }

 private:
  struct Slabs;
  void compute(const Vector& phi, double eps, bool with_cdot, Slabs& s) const;

  const Problem* p_;
  Index nx_, ny_;
};

// Three-marginal objective with the third potential eliminated; gauge
// u_0 = v_0 = 0.
class ThreeMarginalKernel : public ReducedKernel {
 public:
  explicit ThreeMarginalKernel(const Problem& p);

  Index dim() const override { return nx_ + ny_ - 2; }
  std::string name() const override { return "three_marginal"; }
  void eval(const Vector& phi, double eps, const EvalRequest& req, EvalResult& out) const override;
  Vector coupling(const Vector& phi, double eps) const override;
  ReducedLayout layout() const override;
  Vector eliminate(const Vector& phi, double eps) const override;
  Vector full_potentials(const Vector& phi, double eps) const override;
  Vector from_full_potentials(const Vector& phi_full) const override;

 private:
  const Problem* p_;
  Index nx_, ny_, nz_;
};

// One-period martingale objective over (v, g) with u eliminated; gauge
// v_0 = g_0 = 0.
class MartingaleKernel : public ReducedKernel {
 public:
  explicit MartingaleKernel(const Problem& p);

  Index dim() const override { return (ny_ - 1) + (nx_ - 1); }
  std::string name() const override { return "martingale"; }
  void eval(const Vector& phi, double eps, const EvalRequest& req, EvalResult& out) const override;
  Vector coupling(const Vector& phi, double eps) const override;
  ReducedLayout layout() const override;
  Vector eliminate(const Vector& phi, double eps) const override;
  Vector full_potentials(const Vector& phi, double eps) const override;
  Vector from_full_potentials(const Vector& phi_full) const override;

 private:
  const Problem* p_;
  Index nx_, ny_;
  Vector x_, y_;
};

// Multi-period martingale objective over (v, w, g, h) with u eliminated;
// gauge v_0 = w_0 = g_0 = h_00 = 0. The h block is indexed h_{ij} flattened
// as i*Ny + j.
class MultiPeriodKernel : public ReducedKernel {
 public:
  explicit MultiPeriodKernel(const Problem& p);

  Index dim() const override { return (ny_ - 1) + (nz_ - 1) + (nx_ - 1) + (nx_ * ny_ - 1); }
  std::string name() const override { return "multi_period_martingale"; }
  void eval(const Vector& phi, double eps, const EvalRequest& req, EvalResult& out) const override;
  Vector coupling(const Vector& phi, double eps) const override;
  ReducedLayout layout() const override;
  Vector eliminate(const Vector& phi, double eps) const override;
  Vector full_potentials(const Vector& phi, double eps) const override;
  Vector from_full_potentials(const Vector& phi_full) const override;

 private:
  const Problem* p_;
  Index nx_, ny_, nz_;
  Vector x_, y_, z_;
};

// Kernel for a problem: the family form when one exists (and use_reduced is
// set), the generic reduced-system objective otherwise.
std::unique_ptr<DualKernel> make_kernel(const Problem& p, bool use_reduced = true);

}  // namespace otcurve
