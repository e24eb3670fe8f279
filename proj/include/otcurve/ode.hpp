#pragma once

#include "otcurve/kernel.hpp"
#include "otcurve/problem.hpp"
#include "otcurve/sinkhorn.hpp"

namespace otcurve {

struct IntegrateOptions {
  int steps = 100;
  double eps_max = 1.0;
  int snapshots = 0;      // coupling snapshots, evenly spread over the grid
  int polish_every = 0;   // damped Newton step at every k-th grid point
  double init_tol = 1e-10;
  SinkhornConfig init_sinkhorn{.max_iters = 200000, .tol = 2.5e-11};
};

struct CurveSample {
  double eps = 0.0;
  Vector phi;
  double dual_value = 0.0;
  double grad_inf = 0.0;
  bool has_coupling = false;
  Vector coupling;
};

struct SolutionCurve {
  std::vector<CurveSample> samples;
  int steps = 0;
  double eps_max = 0.0;
  int jitter_count = 0;  // Cholesky factorizations that needed the diagonal jitter
  int rhs_evals = 0;

  const CurveSample& back() const { return samples.back(); }
};

// phi0 = argmin Phi(., 0). Zero for the unconstrained families, closed form
// for geodesic/barycenter starts, Sinkhorn at eps=0 otherwise. The result
// is verified to satisfy |grad Phi|_inf <= opts.init_tol; failure raises
// SolverError("initial condition failed").
Vector initial_potential(const Problem& problem, const DualKernel& kernel,
                         const IntegrateOptions& opts = {});

// Right-hand side -[D^2 Phi]^{-1} d/deps grad Phi via an SPD factorization;
// one diagonal-jitter retry (1e-12 tr(H)/e), then SolverError("ODE stalled
// at eps=...").
Vector rhs(const DualKernel& kernel, const Vector& phi, double eps);

// Classical RK4 with uniform steps from eps=0 to eps_max, recording every
// grid point (dual value and stationarity drift; couplings at the snapshot
// points).
SolutionCurve integrate(const Problem& problem, const DualKernel& kernel,
                        const IntegrateOptions& opts);

// One damped (backtracking) Newton step on Phi(., eps).
Vector newton_polish(const DualKernel& kernel, const Vector& phi, double eps);

}  // namespace otcurve
