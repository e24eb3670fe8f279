#include "otcurve/reduced_kernels.hpp"

#include "otcurve/dual_objective.hpp"

#include <cmath>

namespace otcurve {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_two_constrained(const Problem& p, Index n) {
  require(p.n_marginals() == n, "kernel: wrong marginal count");
  for (bool f : p.free_marginal) require(!f, "kernel: free marginals not supported here");
}

}  // namespace

// ---------------------------------------------------------------- two marginal

struct TwoMarginalKernel::Slabs {
  Vector u;     // nx, gauge entry included
  Matrix P;     // nx x ny, P(r,s) = e_rs / sum_r e_rs
  Vector logS;  // ny, log of the column sums (max-shifted)
  Matrix cd;    // nx x ny cost-derivative table (only when requested)
  Vector colc;  // ny, sum_r P(r,s) cd(r,s)
};

TwoMarginalKernel::TwoMarginalKernel(const Problem& p) : p_(&p) {
  check_two_constrained(p, 2);
  require(p.basis.size() == 0, "two-marginal kernel: constraints present");
  nx_ = p.marginals[0].size();
  ny_ = p.marginals[1].size();
}

void TwoMarginalKernel::compute(const Vector& phi, double eps, bool with_cdot, Slabs& s) const {
  const Problem& p = *p_;
  require(phi.size() == dim(), "potential length mismatch");
  const Vector& mu = p.marginals[0].weights;
  s.u.setZero(nx_);
  if (nx_ > 1) s.u.tail(nx_ - 1) = phi;
  Vector c(p.m());
  p.cost.value(eps, c);
  Vector logmu = mu.array().log();

  s.P.resize(nx_, ny_);
  s.logS.resize(ny_);
  for (Index j = 0; j < ny_; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index r = 0; r < nx_; ++r) {
      double z = (s.u[r] - c[r * ny_ + j]) / p.eta + logmu[r];
      s.P(r, j) = z;
      mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (Index r = 0; r < nx_; ++r) {
      double e = std::exp(s.P(r, j) - mx);
      s.P(r, j) = e;
      sum += e;
    }
    s.P.col(j) /= sum;
    s.logS[j] = mx + std::log(sum);
  }
  if (with_cdot) {
    Vector cd(p.m());
    p.cost.derivative(eps, cd);
    s.cd = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cd.data(), nx_, ny_);
    s.colc = (s.P.array() * s.cd.array()).colwise().sum().transpose();
  }
}

void TwoMarginalKernel::eval(const Vector& phi, double eps, const EvalRequest& req,
                             EvalResult& out) const {
  const Problem& p = *p_;
  const Vector& mu = p.marginals[0].weights;
  const Vector& nu = p.marginals[1].weights;
  Slabs s;
  compute(phi, eps, req.mixed || req.partial_eps, s);

  if (req.value) {
    out.value = -s.u.dot(mu) + p.eta * (s.logS.dot(nu) + 1.0);
  }
  if (req.gradient) {
    Vector g = s.P * nu - mu;
    out.gradient = g.tail(nx_ - 1);
  }
  if (req.hessian) {
    Vector pn = s.P * nu;
    Matrix h = Matrix::Zero(nx_, nx_);
    h.diagonal() = pn;
    h.noalias() -= s.P * nu.asDiagonal() * s.P.transpose();
    out.hessian = h.bottomRightCorner(nx_ - 1, nx_ - 1) / p.eta;
  }
  if (req.mixed) {
    Vector m = (s.P.array() * s.cd.array()).matrix() * nu -
               s.P * (nu.array() * s.colc.array()).matrix();
    out.mixed = -m.tail(nx_ - 1) / p.eta;
  }
  if (req.partial_eps) {
    out.partial_eps = -s.colc.dot(nu);
  }
}

double TwoMarginalKernel::partial_eps2(const Vector& phi, double eps) const {
  require(p_->cost.is_affine(), "partial_eps2 requires an affine cost path");
  const Vector& nu = p_->marginals[1].weights;
  Slabs s;
  compute(phi, eps, true, s);
  Vector col2 = (s.P.array() * s.cd.array() * s.cd.array()).colwise().sum().transpose();
  double acc = 0.0;
  for (Index j = 0; j < ny_; ++j) acc += (col2[j] - s.colc[j] * s.colc[j]) * nu[j];
  return acc / p_->eta;
}

Vector TwoMarginalKernel::coupling(const Vector& phi, double eps) const {
  const Vector& nu = p_->marginals[1].weights;
  Slabs s;
  compute(phi, eps, false, s);
  Vector g(p_->m());
  for (Index r = 0; r < nx_; ++r)
    for (Index j = 0; j < ny_; ++j) g[r * ny_ + j] = s.P(r, j) * nu[j];
  return g;
}

ReducedLayout TwoMarginalKernel::layout() const {
  ReducedLayout l;
  l.family = Family::two_marginal;
  l.retained_blocks = {{"u", nx_ - 1}};
  l.eliminated_block = "v";
  l.eliminated_size = ny_;
  l.pinned = {"u[0]"};
  return l;
}

Vector TwoMarginalKernel::eliminate(const Vector& phi, double eps) const {
  Slabs s;
  compute(phi, eps, false, s);
  return -p_->eta * s.logS;
}

Vector TwoMarginalKernel::full_potentials(const Vector& phi, double eps) const {
  Vector v = eliminate(phi, eps);
  Vector full(nx_ + ny_);
  full[0] = 0.0;
  full.segment(1, nx_ - 1) = phi;
  full.tail(ny_) = v;
  return full;
}

Vector TwoMarginalKernel::from_full_potentials(const Vector& phi_full) const {
  require(phi_full.size() == nx_ + ny_, "full potential length mismatch");
  Vector u = phi_full.head(nx_);
  return (u.array() - u[0]).matrix().tail(nx_ - 1);
}

// -------------------------------------------------------------- three marginal

ThreeMarginalKernel::ThreeMarginalKernel(const Problem& p) : p_(&p) {
  check_two_constrained(p, 3);
  require(p.basis.size() == 0, "three-marginal kernel: constraints present");
  nx_ = p.marginals[0].size();
  ny_ = p.marginals[1].size();
  nz_ = p.marginals[2].size();
}

void ThreeMarginalKernel::eval(const Vector& phi, double eps, const EvalRequest& req,
                               EvalResult& out) const {
  const Problem& p = *p_;
  require(phi.size() == dim(), "potential length mismatch");
  const Vector& mu = p.marginals[0].weights;
  const Vector& th = p.marginals[1].weights;
  const Vector& nu = p.marginals[2].weights;

  Vector u = Vector::Zero(nx_), v = Vector::Zero(ny_);
  u.tail(nx_ - 1) = phi.head(nx_ - 1);
  v.tail(ny_ - 1) = phi.tail(ny_ - 1);

  Vector c(p.m());
  p.cost.value(eps, c);
  Vector cd;
  const bool with_cd = req.mixed || req.partial_eps;
  if (with_cd) {
    cd.resize(p.m());
    p.cost.derivative(eps, cd);
  }
  Vector logmu = mu.array().log(), logth = th.array().log();

  double value_acc = 0.0;
  Vector gu = Vector::Zero(nx_), gv = Vector::Zero(ny_);
  Matrix huu, hvv, huv;
  if (req.hessian) {
    huu = Matrix::Zero(nx_, nx_);
    hvv = Matrix::Zero(ny_, ny_);
    huv = Matrix::Zero(nx_, ny_);
  }
  Vector mu_mix, mv_mix;
  if (req.mixed) {
    mu_mix = Vector::Zero(nx_);
    mv_mix = Vector::Zero(ny_);
  }
  double peps = 0.0;

  Matrix slab(nx_, ny_), slabc;
  Vector a(nx_), b(ny_), rowc(nx_), colc(ny_);
  for (Index t = 0; t < nz_; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index r = 0; r < nx_; ++r) {
      const Index base = (r * ny_) * nz_ + t;
      for (Index ss = 0; ss < ny_; ++ss) {
        double z = (u[r] + v[ss] - c[base + ss * nz_]) / p.eta + logmu[r] + logth[ss];
        slab(r, ss) = z;
        mx = std::max(mx, z);
      }
    }
    double sum = 0.0;
    for (Index r = 0; r < nx_; ++r)
      for (Index ss = 0; ss < ny_; ++ss) {
        double e = std::exp(slab(r, ss) - mx);
        slab(r, ss) = e;
        sum += e;
      }
    slab /= sum;  // now P_t
    value_acc += (mx + std::log(sum)) * nu[t];

    a = slab.rowwise().sum();
    b = slab.colwise().sum().transpose();
    gu += a * nu[t];
    gv += b * nu[t];
    if (req.hessian) {
      huu.diagonal() += a * nu[t];
      huu.noalias() -= (a * a.transpose()) * nu[t];
      hvv.diagonal() += b * nu[t];
      hvv.noalias() -= (b * b.transpose()) * nu[t];
      huv += slab * nu[t];
      huv.noalias() -= (a * b.transpose()) * nu[t];
    }
    if (with_cd) {
      double totc = 0.0;
      rowc.setZero();
      colc.setZero();
      for (Index r = 0; r < nx_; ++r) {
        const Index base = (r * ny_) * nz_ + t;
        for (Index ss = 0; ss < ny_; ++ss) {
          double pc = slab(r, ss) * cd[base + ss * nz_];
          rowc[r] += pc;
          colc[ss] += pc;
          totc += pc;
        }
      }
      peps -= totc * nu[t];
      if (req.mixed) {
        mu_mix += (rowc - a * totc) * nu[t];
        mv_mix += (colc - b * totc) * nu[t];
      }
    }
  }

  if (req.value) {
    out.value = -u.dot(mu) - v.dot(th) + p.eta * (value_acc + 1.0);
  }
  if (req.gradient) {
    out.gradient.resize(dim());
    out.gradient.head(nx_ - 1) = (gu - mu).tail(nx_ - 1);
    out.gradient.tail(ny_ - 1) = (gv - th).tail(ny_ - 1);
  }
  if (req.hessian) {
    out.hessian.resize(dim(), dim());
    out.hessian.topLeftCorner(nx_ - 1, nx_ - 1) = huu.bottomRightCorner(nx_ - 1, nx_ - 1);
    out.hessian.bottomRightCorner(ny_ - 1, ny_ - 1) = hvv.bottomRightCorner(ny_ - 1, ny_ - 1);
    out.hessian.topRightCorner(nx_ - 1, ny_ - 1) = huv.bottomRightCorner(nx_ - 1, ny_ - 1);
    out.hessian.bottomLeftCorner(ny_ - 1, nx_ - 1) =
        huv.bottomRightCorner(nx_ - 1, ny_ - 1).transpose();
    out.hessian /= p.eta;
  }
  if (req.mixed) {
    out.mixed.resize(dim());
    out.mixed.head(nx_ - 1) = mu_mix.tail(nx_ - 1);
    out.mixed.tail(ny_ - 1) = mv_mix.tail(ny_ - 1);
    out.mixed /= -p.eta;
  }
  if (req.partial_eps) out.partial_eps = peps;
}

Vector ThreeMarginalKernel::coupling(const Vector& phi, double eps) const {
  const Problem& p = *p_;
  const Vector& mu = p.marginals[0].weights;
  const Vector& th = p.marginals[1].weights;
  const Vector& nu = p.marginals[2].weights;
  Vector u = Vector::Zero(nx_), v = Vector::Zero(ny_);
  u.tail(nx_ - 1) = phi.head(nx_ - 1);
  v.tail(ny_ - 1) = phi.tail(ny_ - 1);
  Vector c(p.m());
  p.cost.value(eps, c);
  Vector logmu = mu.array().log(), logth = th.array().log();
  Vector g(p.m());
  Matrix slab(nx_, ny_);
  for (Index t = 0; t < nz_; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index r = 0; r < nx_; ++r)
      for (Index ss = 0; ss < ny_; ++ss) {
        double z = (u[r] + v[ss] - c[(r * ny_ + ss) * nz_ + t]) / p.eta + logmu[r] + logth[ss];
        slab(r, ss) = z;
        mx = std::max(mx, z);
      }
    double sum = 0.0;
    for (Index r = 0; r < nx_; ++r)
      for (Index ss = 0; ss < ny_; ++ss) {
        double e = std::exp(slab(r, ss) - mx);
        slab(r, ss) = e;
        sum += e;
      }
    for (Index r = 0; r < nx_; ++r)
      for (Index ss = 0; ss < ny_; ++ss) g[(r * ny_ + ss) * nz_ + t] = slab(r, ss) / sum * nu[t];
  }
  return g;
}

ReducedLayout ThreeMarginalKernel::layout() const {
  ReducedLayout l;
  l.family = Family::three_marginal;
  l.retained_blocks = {{"u", nx_ - 1}, {"v", ny_ - 1}};
  l.eliminated_block = "w";
  l.eliminated_size = nz_;
  l.pinned = {"u[0]", "v[0]"};
  return l;
}

Vector ThreeMarginalKernel::eliminate(const Vector& phi, double eps) const {
  const Problem& p = *p_;
  const Vector& mu = p.marginals[0].weights;
  const Vector& th = p.marginals[1].weights;
  Vector u = Vector::Zero(nx_), v = Vector::Zero(ny_);
  u.tail(nx_ - 1) = phi.head(nx_ - 1);
  v.tail(ny_ - 1) = phi.tail(ny_ - 1);
  Vector c(p.m());
  p.cost.value(eps, c);
  Vector logmu = mu.array().log(), logth = th.array().log();
  Vector w(nz_);
  for (Index t = 0; t < nz_; ++t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index r = 0; r < nx_; ++r)
      for (Index ss = 0; ss < ny_; ++ss)
        mx = std::max(mx, (u[r] + v[ss] - c[(r * ny_ + ss) * nz_ + t]) / p.eta + logmu[r] + logth[ss]);
    double sum = 0.0;
    for (Index r = 0; r < nx_; ++r)
      for (Index ss = 0; ss < ny_; ++ss)
        sum += std::exp((u[r] + v[ss] - c[(r * ny_ + ss) * nz_ + t]) / p.eta + logmu[r] + logth[ss] - mx);
    w[t] = -p.eta * (mx + std::log(sum));
  }
  return w;
}

Vector ThreeMarginalKernel::full_potentials(const Vector& phi, double eps) const {
  Vector w = eliminate(phi, eps);
  Vector full = Vector::Zero(nx_ + ny_ + nz_);
  full.segment(1, nx_ - 1) = phi.head(nx_ - 1);
  full.segment(nx_ + 1, ny_ - 1) = phi.tail(ny_ - 1);
  full.tail(nz_) = w;
  return full;
}

Vector ThreeMarginalKernel::from_full_potentials(const Vector& phi_full) const {
  require(phi_full.size() == nx_ + ny_ + nz_, "full potential length mismatch");
  Vector u = phi_full.head(nx_);
  Vector v = phi_full.segment(nx_, ny_);
  Vector out(dim());
  out.head(nx_ - 1) = (u.array() - u[0]).matrix().tail(nx_ - 1);
  out.tail(ny_ - 1) = (v.array() - v[0]).matrix().tail(ny_ - 1);
  return out;
}

}  // namespace otcurve
