#include "otcurve/sinkhorn.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace otcurve {

namespace {

struct Workspace {
  const Problem* p;
  double eps;
  Vector cost;              // c(eps)
  Vector z;                 // log Gibbs weights
  std::vector<Vector> psi;  // per marginal
  Vector pcons;

  double phi() const {
    double lin = 0.0;
    for (int i = 0; i < p->n_marginals(); ++i) {
      if (!p->free_marginal[i]) lin += psi[i].dot(p->marginals[i].weights);
    }
    double s = 0.0;
    for (Index ell = 0; ell < z.size(); ++ell) s += std::exp(z[ell]);
    return -lin + p->eta * s;
  }

  void rebuild_z() {
    const ProductGrid& grid = p->grid;
    const Index m = grid.size();
    for (Index ell = 0; ell < m; ++ell) {
      double s = 0.0;
      for (int i = 0; i < p->n_marginals(); ++i) {
        if (!p->free_marginal[i]) s += psi[i][grid.index_of(ell, i)];
      }
      z[ell] = (s - cost[ell]) / p->eta + p->ref_log[ell];
    }
    for (Index j = 0; j < p->basis.size(); ++j) {
      if (pcons[j] == 0.0) continue;
      const auto& q = p->basis.vectors[j];
      for (Index k = 0; k < q.nnz(); ++k) z[q.idx[k]] += q.val[k] * pcons[j] / p->eta;
    }
  }
};

// Exact minimization over one marginal block: psi_q += eta*(log mu_q - lse_q).
void update_marginal_block(Workspace& w, int axis, double damping) {
  const ProductGrid& grid = w.p->grid;
  const Index n = grid.axis_size(axis);
  const Index stride = grid.stride(axis);
  const Index repeat = grid.size() / (stride * n);
  const Vector& mu = w.p->marginals[axis].weights;

  Vector mx = Vector::Constant(n, -std::numeric_limits<double>::infinity());
  for (Index outer = 0; outer < repeat; ++outer) {
    for (Index q = 0; q < n; ++q) {
      const Index base = (outer * n + q) * stride;
      double m = mx[q];
      for (Index inner = 0; inner < stride; ++inner) m = std::max(m, w.z[base + inner]);
      mx[q] = m;
    }
  }
  Vector sum = Vector::Zero(n);
  for (Index outer = 0; outer < repeat; ++outer) {
    for (Index q = 0; q < n; ++q) {
      const Index base = (outer * n + q) * stride;
      double s = 0.0;
      for (Index inner = 0; inner < stride; ++inner) s += std::exp(w.z[base + inner] - mx[q]);
      sum[q] += s;
    }
  }
  Vector delta(n);
  for (Index q = 0; q < n; ++q) {
    delta[q] = damping * w.p->eta * (std::log(mu[q]) - (mx[q] + std::log(sum[q])));
  }
  w.psi[axis] += delta;
  for (Index outer = 0; outer < repeat; ++outer) {
    for (Index q = 0; q < n; ++q) {
      const Index base = (outer * n + q) * stride;
      const double dq = delta[q] / w.p->eta;
      for (Index inner = 0; inner < stride; ++inner) w.z[base + inner] += dq;
    }
  }
}

// Root of f(d) = sum_l q_l exp(z_l + q_l d / eta) over the support of one
// constraint vector; f is strictly increasing. Safeguarded Newton with an
// expanding bracket and bisection fallback.
double constraint_root(const SparseGridVector& q, const Vector& z, double eta, double newton_tol,
                       int newton_max) {
  const Index nz = q.nnz();
  if (nz == 0) return 0.0;
  double shift = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < nz; ++k) shift = std::max(shift, z[q.idx[k]]);

  auto eval = [&](double d, double& f, double& fp, double& scale) {
    f = 0.0;
    fp = 0.0;
    scale = 0.0;
    for (Index k = 0; k < nz; ++k) {
      const double e = std::exp(z[q.idx[k]] - shift + q.val[k] * d / eta);
      f += q.val[k] * e;
      fp += q.val[k] * q.val[k] * e / eta;
      scale += std::abs(q.val[k]) * e;
    }
  };

  double f0, fp0, sc0;
  eval(0.0, f0, fp0, sc0);
  if (f0 == 0.0 || sc0 == 0.0) return 0.0;

  // bracket [lo, hi] with f(lo) <= 0 <= f(hi)
  double lo, hi;
  if (f0 > 0.0) {
    hi = 0.0;
    double step = eta;
    lo = -step;
    double f, fp, sc;
    eval(lo, f, fp, sc);
    int guard = 0;
    while (f > 0.0 && guard++ < 80) {
      hi = lo;
      step *= 2.0;
      lo = -step;
      eval(lo, f, fp, sc);
    }
    if (f > 0.0) return lo;  // no finite root in range; clamp
  } else {
    lo = 0.0;
    double step = eta;
    hi = step;
    double f, fp, sc;
    eval(hi, f, fp, sc);
    int guard = 0;
    while (f < 0.0 && guard++ < 80) {
      lo = hi;
      step *= 2.0;
      hi = step;
      eval(hi, f, fp, sc);
    }
    if (f < 0.0) return hi;
  }

  double x = 0.5 * (lo + hi);
  double f, fp, sc;
  const int cap = newton_max + 120;
  for (int it = 0; it < cap; ++it) {
    eval(x, f, fp, sc);
    if (std::abs(f) <= newton_tol * sc) return x;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    double xn;
    if (it < newton_max && fp > 0.0) {
      xn = x - f / fp;
      if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);  // bisection fallback
    } else {
      xn = 0.5 * (lo + hi);
    }
    if (std::abs(xn - x) <= 1e-16 * (1.0 + std::abs(x))) return xn;
    x = xn;
  }
  return x;
}

}  // namespace

Vector SinkhornResult::full_layout(const Problem& prob) const {
  Vector out(prob.sys.full_cols());
  for (const auto& blk : prob.sys.blocks()) out.segment(blk.offset, blk.size) = psi[blk.marginal];
  out.tail(p.size()) = p;
  return out;
}

SinkhornResult sinkhorn_solve(const Problem& problem, double eps, const SinkhornConfig& cfg,
                              const std::optional<Vector>& warm_full) {
  cfg.validate();
  if (!problem.sys.reduced()) throw std::invalid_argument("sinkhorn: problem must be rank-reduced");

  Workspace w;
  w.p = &problem;
  w.eps = eps;
  w.cost.resize(problem.m());
  problem.cost.value(eps, w.cost);
  w.z.resize(problem.m());
  w.psi.resize(problem.n_marginals());
  for (int i = 0; i < problem.n_marginals(); ++i) {
    if (!problem.free_marginal[i]) w.psi[i] = Vector::Zero(problem.marginals[i].size());
  }
  w.pcons = Vector::Zero(problem.basis.size());
  if (warm_full) {
    if (warm_full->size() != problem.sys.full_cols())
      throw std::invalid_argument("sinkhorn: warm start has wrong length");
    for (const auto& blk : problem.sys.blocks())
      w.psi[blk.marginal] = warm_full->segment(blk.offset, blk.size);
    w.pcons = warm_full->tail(problem.basis.size());
  }
  w.rebuild_z();

  SinkhornResult res;
  double last_phi = cfg.check_descent ? w.phi() : 0.0;
  Vector gamma(problem.m());

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    // marginal blocks in order, then the constraint coordinates
    for (int i = 0; i < problem.n_marginals(); ++i) {
      if (problem.free_marginal[i]) continue;
      update_marginal_block(w, i, cfg.damping);
      if (cfg.check_descent) {
        double ph = w.phi();
        if (ph > last_phi + 1e-9 * (1.0 + std::abs(last_phi)))
          throw SolverError("sinkhorn: block update increased the objective");
        last_phi = ph;
      }
    }
    for (Index j = 0; j < problem.basis.size(); ++j) {
      const auto& q = problem.basis.vectors[j];
      double d = constraint_root(q, w.z, problem.eta, cfg.newton_tol, cfg.newton_max);
      d *= cfg.damping;
      if (d != 0.0) {
        w.pcons[j] += d;
        for (Index k = 0; k < q.nnz(); ++k) w.z[q.idx[k]] += q.val[k] * d / problem.eta;
      }
      if (cfg.check_descent) {
        double ph = w.phi();
        if (ph > last_phi + 1e-9 * (1.0 + std::abs(last_phi)))
          throw SolverError("sinkhorn: constraint update increased the objective");
        last_phi = ph;
      }
    }

    double zmax = w.z.maxCoeff();
    if (zmax > 700.0) {
      std::ostringstream os;
      os << "objective overflow at eps=" << eps;
      throw SolverError(os.str());
    }
    gamma = w.z.array().exp();
    Vector r = problem.sys.apply_transpose(gamma) - problem.sys.rhs();
    res.residual = r.cwiseAbs().maxCoeff();
    if (res.residual <= cfg.tol) {
      ++it;
      res.converged = true;
      break;
    }
  }

  res.iterations = std::min(it, cfg.max_iters);
  res.psi = std::move(w.psi);
  res.p = std::move(w.pcons);
  res.coupling = std::move(gamma);
  res.phi_value = [&] {
    double lin = 0.0;
    for (const auto& blk : problem.sys.blocks())
      lin += res.psi[blk.marginal].dot(problem.marginals[blk.marginal].weights);
    return -lin + problem.eta * res.coupling.sum();
  }();
  return res;
}

double dual_value_at_optimum(const Problem& problem, double eps, const SinkhornConfig& cfg) {
  return -sinkhorn_solve(problem, eps, cfg).phi_value;
}

}  // namespace otcurve
