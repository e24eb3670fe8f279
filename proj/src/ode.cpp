#include "otcurve/ode.hpp"

#include "otcurve/reduced_kernels.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>

namespace otcurve {

namespace {

[[noreturn]] void throw_stalled(double eps) {
  std::ostringstream os;
  os << "ODE stalled at eps=" << eps;
  throw SolverError(os.str());
}

Vector solve_spd(const Matrix& h, const Vector& rhs_vec, double eps, int* jitter_count) {
  if (h.rows() == 0) return Vector();
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) {
    if (jitter_count) ++*jitter_count;
    const double jitter = 1e-12 * h.trace() / double(h.rows());
    Matrix hj = h;
    hj.diagonal().array() += jitter;
    llt.compute(hj);
    if (llt.info() != Eigen::Success) throw_stalled(eps);
  }
  Vector x = llt.solve(rhs_vec);
  // iterative refinement until the residual meets the contract (or the
  // floating-point floor for this system)
  const double gnorm = rhs_vec.cwiseAbs().maxCoeff();
  if (gnorm == 0.0) return x;
  for (int pass = 0; pass < 3; ++pass) {
    Vector r = rhs_vec - h.selfadjointView<Eigen::Lower>() * x;
    if (r.cwiseAbs().maxCoeff() <= 1e-10 * gnorm) return x;
    x += llt.solve(r);
  }
  Vector r = rhs_vec - h.selfadjointView<Eigen::Lower>() * x;
  const double floor = 16.0 * std::numeric_limits<double>::epsilon() *
                       (h.cwiseAbs().rowwise().sum().maxCoeff() * x.cwiseAbs().maxCoeff() + gnorm);
  if (r.cwiseAbs().maxCoeff() > std::max(1e-10 * gnorm, floor)) throw_stalled(eps);
  return x;
}

// Closed-form start for geodesic/barycenter problems: all potentials zero
// except the block of the first marginal,
//   u_r = -eta * log( sum_s exp(-|x^1_r - z_s|^2/eta) / Nz ).
Vector interpolant_initial(const Problem& p) {
  int free_axis = -1;
  for (int i = 0; i < p.n_marginals(); ++i) {
    if (p.free_marginal[i]) free_axis = i;
  }
  if (free_axis < 0) throw std::invalid_argument("interpolant start needs a free marginal");
  const Matrix& x1 = p.marginals[0].points;
  const Matrix& zp = p.marginals[free_axis].points;
  const Index nz = zp.rows();
  Vector full = Vector::Zero(p.sys.full_cols());
  for (Index r = 0; r < x1.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    Vector ex(nz);
    for (Index s = 0; s < nz; ++s) {
      ex[s] = -(x1.row(r) - zp.row(s)).squaredNorm() / p.eta - std::log(double(nz));
      mx = std::max(mx, ex[s]);
    }
    double sum = 0.0;
    for (Index s = 0; s < nz; ++s) sum += std::exp(ex[s] - mx);
    full[r] = -p.eta * (mx + std::log(sum));  // block 0 starts at column 0
  }
  return p.sys.reduce_potentials(std::move(full));
}

Vector sinkhorn_initial(const Problem& p, const DualKernel& kernel, const IntegrateOptions& opts) {
  SinkhornConfig cfg = opts.init_sinkhorn;
  cfg.tol = std::min(cfg.tol, 0.25 * opts.init_tol);
  SinkhornResult res = sinkhorn_solve(p, 0.0, cfg);
  if (!res.converged) throw SolverError("initial condition failed");
  Vector full = res.full_layout(p);
  if (const auto* rk = dynamic_cast<const ReducedKernel*>(&kernel)) {
    return rk->from_full_potentials(full);
  }
  return p.sys.reduce_potentials(std::move(full));
}

}  // namespace

Vector initial_potential(const Problem& problem, const DualKernel& kernel,
                         const IntegrateOptions& opts) {
  Vector phi0;
  switch (problem.family) {
    case Family::two_marginal:
    case Family::three_marginal:
      phi0 = Vector::Zero(kernel.dim());
      break;
    case Family::geodesic:
    case Family::barycenter:
      phi0 = interpolant_initial(problem);
      break;
    case Family::generic:
      if (problem.basis.size() == 0) {
        bool any_free = false;
        for (bool f : problem.free_marginal) any_free = any_free || f;
        if (!any_free) {
          phi0 = Vector::Zero(kernel.dim());
          break;
        }
      }
      phi0 = sinkhorn_initial(problem, kernel, opts);
      break;
    default:
      phi0 = sinkhorn_initial(problem, kernel, opts);
      break;
  }
  auto grad_inf = [&](const Vector& v) {
    Vector g = kernel.gradient(v, 0.0);
    return g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
  };
  double g = grad_inf(phi0);
  if (!(g <= opts.init_tol)) {
    // one tighter retry for the solver-based starts
    if (problem.family == Family::martingale ||
        problem.family == Family::multi_period_martingale || problem.family == Family::generic) {
      IntegrateOptions tighter = opts;
      tighter.init_sinkhorn.tol = opts.init_sinkhorn.tol * 1e-2;
      phi0 = sinkhorn_initial(problem, kernel, tighter);
      g = grad_inf(phi0);
    }
    if (!(g <= opts.init_tol)) throw SolverError("initial condition failed");
  }
  return phi0;
}

Vector rhs(const DualKernel& kernel, const Vector& phi, double eps) {
  EvalResult r;
  kernel.eval(phi, eps, {.hessian = true, .mixed = true}, r);
  return solve_spd(r.hessian, -r.mixed, eps, nullptr);
}

Vector newton_polish(const DualKernel& kernel, const Vector& phi, double eps) {
  EvalResult r;
  kernel.eval(phi, eps, {.value = true, .gradient = true, .hessian = true}, r);
  Vector d = solve_spd(r.hessian, -r.gradient, eps, nullptr);
  // near the optimum the decrease falls below value rounding; accept within
  // rounding slack so the step still contracts the gradient
  const double slack = 1e-14 * (1.0 + std::abs(r.value));
  double alpha = 1.0;
  for (int k = 0; k < 30; ++k) {
    Vector cand = phi + alpha * d;
    if (kernel.value(cand, eps) <= r.value + slack) return cand;
    alpha *= 0.5;
  }
  return phi;
}

SolutionCurve integrate(const Problem& problem, const DualKernel& kernel,
                        const IntegrateOptions& opts) {
  if (opts.steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
  SolutionCurve curve;
  curve.steps = opts.steps;
  curve.eps_max = opts.eps_max;
  const double h = opts.eps_max / double(opts.steps);

  std::vector<bool> snap(opts.steps + 1, false);
  if (opts.snapshots == 1) {
    snap[opts.steps] = true;
  } else if (opts.snapshots > 1) {
    for (int k = 0; k < opts.snapshots; ++k) {
      double pos = double(k) * double(opts.steps) / double(opts.snapshots - 1);
      snap[static_cast<int>(std::lround(pos))] = true;
    }
  }

  Vector phi = initial_potential(problem, kernel, opts);

  auto record = [&](int k, const Vector& state) {
    const double eps = double(k) * opts.eps_max / double(opts.steps);
    EvalResult r;
    kernel.eval(state, eps, {.value = true, .gradient = true}, r);
    CurveSample s;
    s.eps = eps;
    s.phi = state;
    s.dual_value = r.value;
    s.grad_inf = r.gradient.size() ? r.gradient.cwiseAbs().maxCoeff() : 0.0;
    if (snap[k]) {
      s.has_coupling = true;
      s.coupling = kernel.coupling(state, eps);
    }
    curve.samples.push_back(std::move(s));
  };

  record(0, phi);

  auto f = [&](const Vector& state, double eps) {
    EvalResult r;
    kernel.eval(state, eps, {.hessian = true, .mixed = true}, r);
    ++curve.rhs_evals;
    return solve_spd(r.hessian, -r.mixed, eps, &curve.jitter_count);
  };

  for (int k = 1; k <= opts.steps; ++k) {
    const double eps0 = double(k - 1) * opts.eps_max / double(opts.steps);
    Vector k1 = f(phi, eps0);
    Vector k2 = f(phi + 0.5 * h * k1, eps0 + 0.5 * h);
    Vector k3 = f(phi + 0.5 * h * k2, eps0 + 0.5 * h);
    Vector k4 = f(phi + h * k3, eps0 + h);
    phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (opts.polish_every > 0 && k % opts.polish_every == 0) {
      phi = newton_polish(kernel, phi, double(k) * opts.eps_max / double(opts.steps));
    }
    record(k, phi);
  }
  return curve;
}

}  // namespace otcurve
