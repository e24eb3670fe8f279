#include "otcurve/dual_objective.hpp"
#include "otcurve/reduced_kernels.hpp"

#include <cmath>

namespace otcurve {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Verify one basis vector equals `val(k)` on the contiguous rows
// base + k*stride, zeros elsewhere (structural zeros skipped).
template <typename F>
void check_basis_column(const SparseGridVector& q, Index base, Index count, Index stride, F&& val,
                        const char* what) {
  Index pos = 0;
  for (Index k = 0; k < count; ++k) {
    double expect = val(k);
    Index row = base + k * stride;
    if (expect == 0.0) continue;
    require(pos < q.nnz() && q.idx[pos] == row && q.val[pos] == expect, what);
    ++pos;
  }
  require(pos == q.nnz(), what);
}

}  // namespace

// ------------------------------------------------------------------ martingale

MartingaleKernel::MartingaleKernel(const Problem& p) : p_(&p) {
  require(p.n_marginals() == 2, "martingale kernel: needs two marginals");
  for (bool f : p.free_marginal) require(!f, "martingale kernel: free marginals unsupported");
  require(p.marginals[0].dim() == 1 && p.marginals[1].dim() == 1,
          "martingale kernel: one-dimensional supports required");
  nx_ = p.marginals[0].size();
  ny_ = p.marginals[1].size();
  x_ = p.marginals[0].scalar_points();
  y_ = p.marginals[1].scalar_points();
  require(p.basis.size() == nx_, "martingale kernel: basis is not the martingale family");
  for (Index i = 0; i < nx_; ++i) {
    check_basis_column(
        p.basis.vectors[i], i * ny_, ny_, 1, [&](Index s) { return y_[s] - x_[i]; },
        "martingale kernel: basis is not the martingale family");
  }
}

void MartingaleKernel::eval(const Vector& phi, double eps, const EvalRequest& req,
                            EvalResult& out) const {
  const Problem& p = *p_;
  require(phi.size() == dim(), "potential length mismatch");
  const Vector& mu = p.marginals[0].weights;
  const Vector& nu = p.marginals[1].weights;

  Vector v = Vector::Zero(ny_), g = Vector::Zero(nx_);
  v.tail(ny_ - 1) = phi.head(ny_ - 1);
  g.tail(nx_ - 1) = phi.tail(nx_ - 1);

  Vector c(p.m());
  p.cost.value(eps, c);
  Vector lognu = nu.array().log();

  Matrix P(nx_, ny_);
  Vector logT(nx_);
  for (Index r = 0; r < nx_; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index s = 0; s < ny_; ++s) {
      double z = (v[s] + g[r] * (y_[s] - x_[r]) - c[r * ny_ + s]) / p.eta + lognu[s];
      P(r, s) = z;
      mx = std::max(mx, z);
    }
    double sum = 0.0;
    for (Index s = 0; s < ny_; ++s) {
      double e = std::exp(P(r, s) - mx);
      P(r, s) = e;
      sum += e;
    }
    P.row(r) /= sum;
    logT[r] = mx + std::log(sum);
  }

  Vector py = P * y_;        // E[Y | X=x_r]
  Vector xy = py - x_;       // conditional drift
  if (req.value) out.value = -v.dot(nu) + p.eta * (logT.dot(mu) + 1.0);
  if (req.gradient) {
    Vector gv = P.transpose() * mu - nu;
    Vector gg = mu.array() * xy.array();
    out.gradient.resize(dim());
    out.gradient.head(ny_ - 1) = gv.tail(ny_ - 1);
    out.gradient.tail(nx_ - 1) = gg.tail(nx_ - 1);
  }
  if (req.hessian) {
    Vector py2 = P * y_.cwiseProduct(y_);
    Vector xy2 = py2 - 2.0 * x_.cwiseProduct(py) + x_.cwiseProduct(x_);
    Matrix hvv = Matrix::Zero(ny_, ny_);
    hvv.diagonal() = P.transpose() * mu;
    hvv.noalias() -= P.transpose() * mu.asDiagonal() * P;
    Matrix hvg(ny_, nx_);
    for (Index i = 0; i < nx_; ++i) {
      hvg.col(i) = mu[i] * (P.row(i).transpose().cwiseProduct(
                                (y_.array() - x_[i]).matrix().eval()) -
                            P.row(i).transpose() * xy[i]);
    }
    Vector hgg = mu.array() * (xy2 - xy.cwiseProduct(xy)).array();
    out.hessian = Matrix::Zero(dim(), dim());
    out.hessian.topLeftCorner(ny_ - 1, ny_ - 1) = hvv.bottomRightCorner(ny_ - 1, ny_ - 1);
    out.hessian.topRightCorner(ny_ - 1, nx_ - 1) = hvg.bottomRightCorner(ny_ - 1, nx_ - 1);
    out.hessian.bottomLeftCorner(nx_ - 1, ny_ - 1) =
        hvg.bottomRightCorner(ny_ - 1, nx_ - 1).transpose();
    out.hessian.bottomRightCorner(nx_ - 1, nx_ - 1) = hgg.tail(nx_ - 1).asDiagonal();
    out.hessian /= p.eta;
  }
  if (req.mixed || req.partial_eps) {
    Vector cd(p.m());
    p.cost.derivative(eps, cd);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cdm(
        cd.data(), nx_, ny_);
    Matrix pc = P.cwiseProduct(cdm);
    Vector crow = pc.rowwise().sum();
    if (req.partial_eps) out.partial_eps = -crow.dot(mu);
    if (req.mixed) {
      Vector mv = pc.transpose() * mu - P.transpose() * mu.cwiseProduct(crow);
      Vector xyc = pc * y_ - x_.cwiseProduct(crow);
      Vector mg = mu.array() * (xyc - xy.cwiseProduct(crow)).array();
      out.mixed.resize(dim());
      out.mixed.head(ny_ - 1) = mv.tail(ny_ - 1);
      out.mixed.tail(nx_ - 1) = mg.tail(nx_ - 1);
      out.mixed /= -p.eta;
    }
  }
}

Vector MartingaleKernel::coupling(const Vector& phi, double eps) const {
  const Problem& p = *p_;
  const Vector& mu = p.marginals[0].weights;
  const Vector& nu = p.marginals[1].weights;
  Vector v = Vector::Zero(ny_), g = Vector::Zero(nx_);
  v.tail(ny_ - 1) = phi.head(ny_ - 1);
  g.tail(nx_ - 1) = phi.tail(nx_ - 1);
  Vector c(p.m());
  p.cost.value(eps, c);
  Vector lognu = nu.array().log();
  Vector out(p.m());
  Vector row(ny_);
  for (Index r = 0; r < nx_; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index s = 0; s < ny_; ++s) {
      row[s] = (v[s] + g[r] * (y_[s] - x_[r]) - c[r * ny_ + s]) / p.eta + lognu[s];
      mx = std::max(mx, row[s]);
    }
    double sum = 0.0;
    for (Index s = 0; s < ny_; ++s) {
      row[s] = std::exp(row[s] - mx);
      sum += row[s];
    }
    for (Index s = 0; s < ny_; ++s) out[r * ny_ + s] = mu[r] * row[s] / sum;
  }
  return out;
}

ReducedLayout MartingaleKernel::layout() const {
  ReducedLayout l;
  l.family = Family::martingale;
  l.retained_blocks = {{"v", ny_ - 1}, {"g", nx_ - 1}};
  l.eliminated_block = "u";
  l.eliminated_size = nx_;
  l.pinned = {"v[0]", "g[0]"};
  return l;
}

Vector MartingaleKernel::eliminate(const Vector& phi, double eps) const {
  const Problem& p = *p_;
  const Vector& nu = p.marginals[1].weights;
  Vector v = Vector::Zero(ny_), g = Vector::Zero(nx_);
  v.tail(ny_ - 1) = phi.head(ny_ - 1);
  g.tail(nx_ - 1) = phi.tail(nx_ - 1);
  Vector c(p.m());
  p.cost.value(eps, c);
  Vector lognu = nu.array().log();
  Vector u(nx_);
  for (Index r = 0; r < nx_; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index s = 0; s < ny_; ++s)
      mx = std::max(mx, (v[s] + g[r] * (y_[s] - x_[r]) - c[r * ny_ + s]) / p.eta + lognu[s]);
    double sum = 0.0;
    for (Index s = 0; s < ny_; ++s)
      sum += std::exp((v[s] + g[r] * (y_[s] - x_[r]) - c[r * ny_ + s]) / p.eta + lognu[s] - mx);
    u[r] = -p.eta * (mx + std::log(sum));
  }
  return u;
}

Vector MartingaleKernel::full_potentials(const Vector& phi, double eps) const {
  Vector u = eliminate(phi, eps);
  Vector full = Vector::Zero(nx_ + ny_ + nx_);
  full.head(nx_) = u;
  full.segment(nx_ + 1, ny_ - 1) = phi.head(ny_ - 1);
  full.segment(nx_ + ny_ + 1, nx_ - 1) = phi.tail(nx_ - 1);
  return full;
}

Vector MartingaleKernel::from_full_potentials(const Vector& phi_full) const {
  require(phi_full.size() == 2 * nx_ + ny_, "full potential length mismatch");
  Vector v = phi_full.segment(nx_, ny_);
  Vector g = phi_full.tail(nx_);
  // remove the tilt, then the shift
  double a = g[0];
  g.array() -= a;
  v += a * y_;
  v.array() -= v[0];
  Vector out(dim());
  out.head(ny_ - 1) = v.tail(ny_ - 1);
  out.tail(nx_ - 1) = g.tail(nx_ - 1);
  return out;
}

// ---------------------------------------------------------------- multi-period

MultiPeriodKernel::MultiPeriodKernel(const Problem& p) : p_(&p) {
  require(p.n_marginals() == 3, "multi-period kernel: needs three marginals");
  for (bool f : p.free_marginal) require(!f, "multi-period kernel: free marginals unsupported");
  for (int i = 0; i < 3; ++i)
    require(p.marginals[i].dim() == 1, "multi-period kernel: one-dimensional supports required");
  nx_ = p.marginals[0].size();
  ny_ = p.marginals[1].size();
  nz_ = p.marginals[2].size();
  x_ = p.marginals[0].scalar_points();
  y_ = p.marginals[1].scalar_points();
  z_ = p.marginals[2].scalar_points();
  require(p.basis.size() == nx_ + nx_ * ny_,
          "multi-period kernel: basis is not the multi-period martingale family");
  const char* bad = "multi-period kernel: basis is not the multi-period martingale family";
  for (Index i = 0; i < nx_; ++i) {
    // g_i column: value (y_s - x_i) on rows (i, s, t)
    const SparseGridVector& q = p.basis.vectors[i];
    Index pos = 0;
    for (Index s = 0; s < ny_; ++s) {
      double expect = y_[s] - x_[i];
      if (expect == 0.0) continue;
      for (Index t = 0; t < nz_; ++t) {
        Index row = (i * ny_ + s) * nz_ + t;
        require(pos < q.nnz() && q.idx[pos] == row && q.val[pos] == expect, bad);
        ++pos;
      }
    }
    require(pos == q.nnz(), bad);
  }
  for (Index i = 0; i < nx_; ++i)
    for (Index j = 0; j < ny_; ++j) {
      check_basis_column(
          p.basis.vectors[nx_ + i * ny_ + j], (i * ny_ + j) * nz_, nz_, 1,
          [&](Index t) { return z_[t] - y_[j]; }, bad);
    }
}

void MultiPeriodKernel::eval(const Vector& phi, double eps, const EvalRequest& req,
                             EvalResult& out) const {
  const Problem& p = *p_;
  require(phi.size() == dim(), "potential length mismatch");
  const Vector& mu = p.marginals[0].weights;
  const Vector& th = p.marginals[1].weights;
  const Vector& nu = p.marginals[2].weights;

  Vector v = Vector::Zero(ny_), w = Vector::Zero(nz_), g = Vector::Zero(nx_);
  Vector h = Vector::Zero(nx_ * ny_);
  {
    Index o = 0;
    v.tail(ny_ - 1) = phi.segment(o, ny_ - 1);
    o += ny_ - 1;
    w.tail(nz_ - 1) = phi.segment(o, nz_ - 1);
    o += nz_ - 1;
    g.tail(nx_ - 1) = phi.segment(o, nx_ - 1);
    o += nx_ - 1;
    h.tail(nx_ * ny_ - 1) = phi.segment(o, nx_ * ny_ - 1);
  }

  Vector c(p.m());
  p.cost.value(eps, c);
  Vector cd;
  const bool with_cd = req.mixed || req.partial_eps;
  if (with_cd) {
    cd.resize(p.m());
    p.cost.derivative(eps, cd);
  }
  Vector logth = th.array().log(), lognu = nu.array().log();

  const Index ov = 0, ow = ny_, og = ny_ + nz_, oh = ny_ + nz_ + nx_;
  const Index nf = ny_ + nz_ + nx_ + nx_ * ny_;

  double value_acc = 0.0;
  Vector grad, mix;
  Matrix hess;
  if (req.gradient) grad = Vector::Zero(nf);
  if (req.mixed) mix = Vector::Zero(nf);
  if (req.hessian) hess = Matrix::Zero(nf, nf);
  double peps = 0.0;

  Matrix P(ny_, nz_);
  for (Index r = 0; r < nx_; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index s = 0; s < ny_; ++s) {
      const double gy = g[r] * (y_[s] - x_[r]);
      const double hrs = h[r * ny_ + s];
      const Index base = (r * ny_ + s) * nz_;
      for (Index t = 0; t < nz_; ++t) {
        double zz = (v[s] + w[t] + gy + hrs * (z_[t] - y_[s]) - c[base + t]) / p.eta + logth[s] +
                    lognu[t];
        P(s, t) = zz;
        mx = std::max(mx, zz);
      }
    }
    double sum = 0.0;
    for (Index s = 0; s < ny_; ++s)
      for (Index t = 0; t < nz_; ++t) {
        double e = std::exp(P(s, t) - mx);
        P(s, t) = e;
        sum += e;
      }
    P /= sum;
    value_acc += (mx + std::log(sum)) * mu[r];

    Vector V = P.rowwise().sum();
    Vector W = P.colwise().sum().transpose();
    Vector pz = P * z_;
    Vector yz = pz - y_.cwiseProduct(V);                      // YZ_r(s)
    double xy = V.dot(y_) - x_[r];                            // XY_r (V sums to 1)
    if (req.gradient) {
      grad.segment(ov, ny_) += mu[r] * V;
      grad.segment(ow, nz_) += mu[r] * W;
      grad[og + r] = mu[r] * xy;
      grad.segment(oh + r * ny_, ny_) = mu[r] * yz;
    }
    if (req.hessian) {
      Vector dy = y_.array() - x_[r];
      Vector pz2 = P * z_.cwiseProduct(z_);
      Vector yz2 = pz2 - 2.0 * y_.cwiseProduct(pz) + y_.cwiseProduct(y_).cwiseProduct(V);
      double xy2 = dy.cwiseProduct(dy).dot(V);

      auto vv = hess.block(ov, ov, ny_, ny_);
      vv.diagonal() += mu[r] * V;
      vv.noalias() -= mu[r] * V * V.transpose();
      auto ww_ = hess.block(ow, ow, nz_, nz_);
      ww_.diagonal() += mu[r] * W;
      ww_.noalias() -= mu[r] * W * W.transpose();
      hess.block(ov, ow, ny_, nz_).noalias() += mu[r] * (P - V * W.transpose());
      hess.block(ov, og + r, ny_, 1) = mu[r] * (V.cwiseProduct(dy) - V * xy);
      {
        auto vh = hess.block(ov, oh + r * ny_, ny_, ny_);
        vh.noalias() = -mu[r] * V * yz.transpose();
        vh.diagonal() += mu[r] * yz;
      }
      Vector xyw = P.transpose() * dy;  // sum_s P(s,t)(y_s - x_r)
      hess.block(ow, og + r, nz_, 1) = mu[r] * (xyw - W * xy);
      {
        auto wh = hess.block(ow, oh + r * ny_, nz_, ny_);
        for (Index t = 0; t < nz_; ++t)
          for (Index j = 0; j < ny_; ++j)
            wh(t, j) = mu[r] * (P(j, t) * (z_[t] - y_[j]) - W[t] * yz[j]);
      }
      hess(og + r, og + r) = mu[r] * (xy2 - xy * xy);
      hess.block(og + r, oh + r * ny_, 1, ny_) =
          (mu[r] * (dy.cwiseProduct(yz) - xy * yz)).transpose();
      {
        auto hh = hess.block(oh + r * ny_, oh + r * ny_, ny_, ny_);
        hh.noalias() = -mu[r] * yz * yz.transpose();
        hh.diagonal() += mu[r] * yz2;
      }
    }
    if (with_cd) {
      Matrix pc(ny_, nz_);
      for (Index s = 0; s < ny_; ++s) {
        const Index base = (r * ny_ + s) * nz_;
        for (Index t = 0; t < nz_; ++t) pc(s, t) = P(s, t) * cd[base + t];
      }
      Vector vc = pc.rowwise().sum();
      double cr = vc.sum();
      peps -= mu[r] * cr;
      if (req.mixed) {
        Vector wc = pc.colwise().sum().transpose();
        Vector yzc = pc * z_ - y_.cwiseProduct(vc);
        double xyc = vc.dot(y_) - x_[r] * cr;
        mix.segment(ov, ny_) += mu[r] * (vc - V * cr);
        mix.segment(ow, nz_) += mu[r] * (wc - W * cr);
        mix[og + r] = mu[r] * (xyc - xy * cr);
        mix.segment(oh + r * ny_, ny_) = mu[r] * (yzc - yz * cr);
      }
    }
  }

  // slice away the pinned entries v0, w0, g0, h00
  std::vector<Index> ret;
  ret.reserve(dim());
  for (Index j = 1; j < ny_; ++j) ret.push_back(ov + j);
  for (Index k = 1; k < nz_; ++k) ret.push_back(ow + k);
  for (Index i = 1; i < nx_; ++i) ret.push_back(og + i);
  for (Index ij = 1; ij < nx_ * ny_; ++ij) ret.push_back(oh + ij);

  if (req.value) out.value = -v.dot(th) - w.dot(nu) + p.eta * (value_acc + 1.0);
  if (req.gradient) {
    grad.segment(ov, ny_) -= th;
    grad.segment(ow, nz_) -= nu;
    out.gradient.resize(dim());
    for (Index k = 0; k < dim(); ++k) out.gradient[k] = grad[ret[k]];
  }
  if (req.hessian) {
    out.hessian.resize(dim(), dim());
    for (Index a = 0; a < dim(); ++a)
      for (Index b = a; b < dim(); ++b) {
        double val = (ret[a] <= ret[b]) ? hess(ret[a], ret[b]) : hess(ret[b], ret[a]);
        out.hessian(a, b) = val;
        out.hessian(b, a) = val;
      }
    out.hessian /= p.eta;
  }
  if (req.mixed) {
    out.mixed.resize(dim());
    for (Index k = 0; k < dim(); ++k) out.mixed[k] = mix[ret[k]];
    out.mixed /= -p.eta;
  }
  if (req.partial_eps) out.partial_eps = peps;
}

Vector MultiPeriodKernel::coupling(const Vector& phi, double eps) const {
  const Problem& p = *p_;
  const Vector& mu = p.marginals[0].weights;
  const Vector& th = p.marginals[1].weights;
  const Vector& nu = p.marginals[2].weights;
  Vector v = Vector::Zero(ny_), w = Vector::Zero(nz_), g = Vector::Zero(nx_);
  Vector h = Vector::Zero(nx_ * ny_);
  Index o = 0;
  v.tail(ny_ - 1) = phi.segment(o, ny_ - 1);
  o += ny_ - 1;
  w.tail(nz_ - 1) = phi.segment(o, nz_ - 1);
  o += nz_ - 1;
  g.tail(nx_ - 1) = phi.segment(o, nx_ - 1);
  o += nx_ - 1;
  h.tail(nx_ * ny_ - 1) = phi.segment(o, nx_ * ny_ - 1);

  Vector c(p.m());
  p.cost.value(eps, c);
  Vector logth = th.array().log(), lognu = nu.array().log();
  Vector out(p.m());
  Matrix P(ny_, nz_);
  for (Index r = 0; r < nx_; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index s = 0; s < ny_; ++s) {
      const double gy = g[r] * (y_[s] - x_[r]);
      const double hrs = h[r * ny_ + s];
      const Index base = (r * ny_ + s) * nz_;
      for (Index t = 0; t < nz_; ++t) {
        double zz = (v[s] + w[t] + gy + hrs * (z_[t] - y_[s]) - c[base + t]) / p.eta + logth[s] +
                    lognu[t];
        P(s, t) = zz;
        mx = std::max(mx, zz);
      }
    }
    double sum = 0.0;
    for (Index s = 0; s < ny_; ++s)
      for (Index t = 0; t < nz_; ++t) {
        double e = std::exp(P(s, t) - mx);
        P(s, t) = e;
        sum += e;
      }
    for (Index s = 0; s < ny_; ++s) {
      const Index base = (r * ny_ + s) * nz_;
      for (Index t = 0; t < nz_; ++t) out[base + t] = mu[r] * P(s, t) / sum;
    }
  }
  return out;
}

ReducedLayout MultiPeriodKernel::layout() const {
  ReducedLayout l;
  l.family = Family::multi_period_martingale;
  l.retained_blocks = {{"v", ny_ - 1}, {"w", nz_ - 1}, {"g", nx_ - 1}, {"h", nx_ * ny_ - 1}};
  l.eliminated_block = "u";
  l.eliminated_size = nx_;
  l.pinned = {"v[0]", "w[0]", "g[0]", "h[0,0]"};
  return l;
}

Vector MultiPeriodKernel::eliminate(const Vector& phi, double eps) const {
  const Problem& p = *p_;
  const Vector& th = p.marginals[1].weights;
  const Vector& nu = p.marginals[2].weights;
  Vector v = Vector::Zero(ny_), w = Vector::Zero(nz_), g = Vector::Zero(nx_);
  Vector h = Vector::Zero(nx_ * ny_);
  Index o = 0;
  v.tail(ny_ - 1) = phi.segment(o, ny_ - 1);
  o += ny_ - 1;
  w.tail(nz_ - 1) = phi.segment(o, nz_ - 1);
  o += nz_ - 1;
  g.tail(nx_ - 1) = phi.segment(o, nx_ - 1);
  o += nx_ - 1;
  h.tail(nx_ * ny_ - 1) = phi.segment(o, nx_ * ny_ - 1);

  Vector c(p.m());
  p.cost.value(eps, c);
  Vector logth = th.array().log(), lognu = nu.array().log();
  Vector u(nx_);
  for (Index r = 0; r < nx_; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index s = 0; s < ny_; ++s) {
      const double gy = g[r] * (y_[s] - x_[r]);
      const double hrs = h[r * ny_ + s];
      const Index base = (r * ny_ + s) * nz_;
      for (Index t = 0; t < nz_; ++t)
        mx = std::max(mx, (v[s] + w[t] + gy + hrs * (z_[t] - y_[s]) - c[base + t]) / p.eta +
                              logth[s] + lognu[t]);
    }
    double sum = 0.0;
    for (Index s = 0; s < ny_; ++s) {
      const double gy = g[r] * (y_[s] - x_[r]);
      const double hrs = h[r * ny_ + s];
      const Index base = (r * ny_ + s) * nz_;
      for (Index t = 0; t < nz_; ++t)
        sum += std::exp((v[s] + w[t] + gy + hrs * (z_[t] - y_[s]) - c[base + t]) / p.eta +
                        logth[s] + lognu[t] - mx);
    }
    u[r] = -p.eta * (mx + std::log(sum));
  }
  return u;
}

Vector MultiPeriodKernel::full_potentials(const Vector& phi, double eps) const {
  Vector u = eliminate(phi, eps);
  Vector full = Vector::Zero(nx_ + ny_ + nz_ + nx_ + nx_ * ny_);
  Index o = 0;
  full.head(nx_) = u;
  o = nx_;
  full.segment(o + 1, ny_ - 1) = phi.segment(0, ny_ - 1);
  o += ny_;
  full.segment(o + 1, nz_ - 1) = phi.segment(ny_ - 1, nz_ - 1);
  o += nz_;
  full.segment(o + 1, nx_ - 1) = phi.segment(ny_ - 1 + nz_ - 1, nx_ - 1);
  o += nx_;
  full.segment(o + 1, nx_ * ny_ - 1) = phi.tail(nx_ * ny_ - 1);
  return full;
}

Vector MultiPeriodKernel::from_full_potentials(const Vector& phi_full) const {
  require(phi_full.size() == 2 * nx_ + ny_ + nz_ + nx_ * ny_, "full potential length mismatch");
  Vector v = phi_full.segment(nx_, ny_);
  Vector w = phi_full.segment(nx_ + ny_, nz_);
  Vector g = phi_full.segment(nx_ + ny_ + nz_, nx_);
  Vector h = phi_full.tail(nx_ * ny_);
  // remove the two tilts, then the two shifts
  double a = g[0];
  g.array() -= a;
  v += a * y_;
  double b = h[0];
  h.array() -= b;
  v -= b * y_;
  w += b * z_;
  v.array() -= v[0];
  w.array() -= w[0];
  Vector out(dim());
  Index o = 0;
  out.segment(o, ny_ - 1) = v.tail(ny_ - 1);
  o += ny_ - 1;
  out.segment(o, nz_ - 1) = w.tail(nz_ - 1);
  o += nz_ - 1;
  out.segment(o, nx_ - 1) = g.tail(nx_ - 1);
  o += nx_ - 1;
  out.segment(o, nx_ * ny_ - 1) = h.tail(nx_ * ny_ - 1);
  return out;
}

// --------------------------------------------------------------------- factory

std::unique_ptr<DualKernel> make_kernel(const Problem& p, bool use_reduced) {
  if (use_reduced) {
    switch (p.family) {
      case Family::two_marginal:
        return std::make_unique<TwoMarginalKernel>(p);
      case Family::three_marginal:
        return std::make_unique<ThreeMarginalKernel>(p);
      case Family::martingale:
        return std::make_unique<MartingaleKernel>(p);
      case Family::multi_period_martingale:
        return std::make_unique<MultiPeriodKernel>(p);
      default:
        break;
    }
  }
  return std::make_unique<GenericKernel>(p);
}

}  // namespace otcurve
