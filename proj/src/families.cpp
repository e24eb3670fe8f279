#include "otcurve/families.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>

namespace otcurve {

namespace {

double sqdist(const Matrix& a, Index i, const Matrix& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace

Vector cost_table_squared_distance(const DiscreteMarginal& mu, const DiscreteMarginal& nu) {
  const Index nx = mu.size(), ny = nu.size();
  Vector c(nx * ny);
  for (Index r = 0; r < nx; ++r)
    for (Index s = 0; s < ny; ++s) c[r * ny + s] = sqdist(mu.points, r, nu.points, s);
  return c;
}

Vector cost_table_neg_log_distance(const DiscreteMarginal& mu, const DiscreteMarginal& nu) {
  const Index nx = mu.size(), ny = nu.size();
  Vector c(nx * ny);
  for (Index r = 0; r < nx; ++r)
    for (Index s = 0; s < ny; ++s)
      c[r * ny + s] = -std::log(0.1 + std::sqrt(sqdist(mu.points, r, nu.points, s)));
  return c;
}

Vector cost_table_pairwise_neg_log(const DiscreteMarginal& m1, const DiscreteMarginal& m2,
                                   const DiscreteMarginal& m3) {
  auto d = [](const Matrix& a, Index i, const Matrix& b, Index j) {
    return -std::log(0.1 + (a.row(i) - b.row(j)).norm());
  };
  const Index n1 = m1.size(), n2 = m2.size(), n3 = m3.size();
  Vector c(n1 * n2 * n3);
  for (Index r = 0; r < n1; ++r)
    for (Index s = 0; s < n2; ++s) {
      const double dxy = d(m1.points, r, m2.points, s);
      for (Index t = 0; t < n3; ++t) {
        c[(r * n2 + s) * n3 + t] =
            dxy + d(m2.points, s, m3.points, t) + d(m1.points, r, m3.points, t);
      }
    }
  return c;
}

Vector cost_table_spence_mirrlees(const DiscreteMarginal& mu, const DiscreteMarginal& nu) {
  Vector x = mu.scalar_points(), y = nu.scalar_points();
  Vector c(x.size() * y.size());
  for (Index r = 0; r < x.size(); ++r)
    for (Index s = 0; s < y.size(); ++s) c[r * y.size() + s] = std::exp(-x[r]) * y[s] * y[s];
  return c;
}

Vector cost_table_spence_mirrlees3(const DiscreteMarginal& m1, const DiscreteMarginal& m2,
                                   const DiscreteMarginal& m3) {
  Vector x = m1.scalar_points(), y = m2.scalar_points(), z = m3.scalar_points();
  const Index n1 = x.size(), n2 = y.size(), n3 = z.size();
  Vector c(n1 * n2 * n3);
  for (Index r = 0; r < n1; ++r) {
    const double ex = std::exp(-x[r]);
    for (Index s = 0; s < n2; ++s)
      for (Index t = 0; t < n3; ++t)
        c[(r * n2 + s) * n3 + t] = ex * (y[s] * y[s] + z[t] * z[t]);
  }
  return c;
}

ConstraintBasis martingale_basis(const DiscreteMarginal& mu, const DiscreteMarginal& nu) {
  const Index nx = mu.size(), ny = nu.size(), d = mu.dim();
  if (nu.dim() != d) throw std::invalid_argument("martingale basis: dimension mismatch");
  ConstraintBasis basis;
  basis.m = nx * ny;
  for (Index i = 0; i < nx; ++i) {
    for (Index k = 0; k < d; ++k) {
      SparseGridVector q;
      for (Index s = 0; s < ny; ++s) q.push(i * ny + s, nu.points(s, k) - mu.points(i, k));
      std::string label = "martingale g at x_" + std::to_string(i);
      if (d > 1) label += " dim " + std::to_string(k);
      basis.add(std::move(q), std::move(label));
    }
  }
  return basis;
}

ConstraintBasis multi_period_basis(const DiscreteMarginal& mu, const DiscreteMarginal& theta,
                                   const DiscreteMarginal& nu) {
  const Index nx = mu.size(), ny = theta.size(), nz = nu.size(), d = mu.dim();
  if (theta.dim() != d || nu.dim() != d)
    throw std::invalid_argument("multi-period basis: dimension mismatch");
  ConstraintBasis basis;
  basis.m = nx * ny * nz;
  for (Index i = 0; i < nx; ++i) {
    for (Index k = 0; k < d; ++k) {
      SparseGridVector q;
      for (Index s = 0; s < ny; ++s) {
        const double v = theta.points(s, k) - mu.points(i, k);
        if (v == 0.0) continue;
        for (Index t = 0; t < nz; ++t) q.push((i * ny + s) * nz + t, v);
      }
      std::string label = "martingale g at x_" + std::to_string(i);
      if (d > 1) label += " dim " + std::to_string(k);
      basis.add(std::move(q), std::move(label));
    }
  }
  for (Index i = 0; i < nx; ++i)
    for (Index j = 0; j < ny; ++j) {
      for (Index k = 0; k < d; ++k) {
        SparseGridVector q;
        for (Index t = 0; t < nz; ++t)
          q.push((i * ny + j) * nz + t, nu.points(t, k) - theta.points(j, k));
        std::string label =
            "martingale h at (x_" + std::to_string(i) + ",y_" + std::to_string(j) + ")";
        if (d > 1) label += " dim " + std::to_string(k);
        basis.add(std::move(q), std::move(label));
      }
    }
  return basis;
}

bool check_convex_order(const DiscreteMarginal& mu, const DiscreteMarginal& nu) {
  if (mu.dim() != 1 || nu.dim() != 1)
    throw std::invalid_argument("convex-order check unsupported in d>1");
  if (std::abs(mu.mean_scalar() - nu.mean_scalar()) > 1e-10) return false;
  Vector x = mu.scalar_points(), y = nu.scalar_points();
  std::vector<double> ks(x.data(), x.data() + x.size());
  ks.insert(ks.end(), y.data(), y.data() + y.size());
  std::sort(ks.begin(), ks.end());
  auto call = [](const Vector& pts, const Vector& w, double k) {
    double s = 0.0;
    for (Index i = 0; i < pts.size(); ++i) s += w[i] * std::max(pts[i] - k, 0.0);
    return s;
  };
  for (double k : ks) {
    if (call(x, mu.weights, k) > call(y, nu.weights, k) + 1e-12) return false;
  }
  return true;
}

Problem make_two_marginal(DiscreteMarginal mu, DiscreteMarginal nu, Vector cost_table,
                          double eta) {
  const Index m = mu.size() * nu.size();
  std::vector<DiscreteMarginal> marg{std::move(mu), std::move(nu)};
  return assemble_problem(std::move(marg), {false, false}, CostPath::scaled(std::move(cost_table)),
                          ConstraintBasis::none(m), eta, Family::two_marginal);
}

Problem make_three_marginal(DiscreteMarginal m1, DiscreteMarginal m2, DiscreteMarginal m3,
                            Vector cost_table, double eta) {
  const Index m = m1.size() * m2.size() * m3.size();
  std::vector<DiscreteMarginal> marg{std::move(m1), std::move(m2), std::move(m3)};
  return assemble_problem(std::move(marg), {false, false, false},
                          CostPath::scaled(std::move(cost_table)), ConstraintBasis::none(m), eta,
                          Family::three_marginal);
}

namespace {

// True when the order could be checked and fails; warns and passes in d>1.
bool violates_convex_order(const DiscreteMarginal& a, const DiscreteMarginal& b) {
  try {
    return !check_convex_order(a, b);
  } catch (const std::invalid_argument&) {
    std::cerr << "warning: convex-order check unsupported in d>1; proceeding\n";
    return false;
  }
}

}  // namespace

Problem make_martingale(DiscreteMarginal mu, DiscreteMarginal nu, Vector cost_table, double eta) {
  if (violates_convex_order(mu, nu))
    throw SolverError("infeasible: mu not dominated in convex order");
  ConstraintBasis basis = martingale_basis(mu, nu);
  Family fam = mu.dim() == 1 ? Family::martingale : Family::generic;
  std::vector<DiscreteMarginal> marg{std::move(mu), std::move(nu)};
  return assemble_problem(std::move(marg), {false, false}, CostPath::scaled(std::move(cost_table)),
                          std::move(basis), eta, fam);
}

Problem make_multi_period(DiscreteMarginal mu, DiscreteMarginal theta, DiscreteMarginal nu,
                          Vector cost_table, double eta) {
  if (violates_convex_order(mu, theta) || violates_convex_order(theta, nu))
    throw SolverError("infeasible: mu not dominated in convex order");
  ConstraintBasis basis = multi_period_basis(mu, theta, nu);
  Family fam = mu.dim() == 1 ? Family::multi_period_martingale : Family::generic;
  std::vector<DiscreteMarginal> marg{std::move(mu), std::move(theta), std::move(nu)};
  return assemble_problem(std::move(marg), {false, false, false},
                          CostPath::scaled(std::move(cost_table)), std::move(basis), eta, fam);
}

Problem make_geodesic(DiscreteMarginal mu1, DiscreteMarginal mu2, Matrix z_points, double eta) {
  if (z_points.rows() == 0) throw std::invalid_argument("geodesic: empty z grid");
  DiscreteMarginal zm;
  zm.points = std::move(z_points);
  zm.weights = Vector::Constant(zm.points.rows(), 1.0 / double(zm.points.rows()));
  const Index n1 = mu1.size(), nz = zm.size(), n2 = mu2.size();
  Vector base(n1 * nz * n2), slope(n1 * nz * n2);
  for (Index r = 0; r < n1; ++r)
    for (Index s = 0; s < nz; ++s) {
      const double dxz = sqdist(mu1.points, r, zm.points, s);
      for (Index t = 0; t < n2; ++t) {
        const double dzy = sqdist(zm.points, s, mu2.points, t);
        base[(r * nz + s) * n2 + t] = dxz;
        slope[(r * nz + s) * n2 + t] = dzy - dxz;
      }
    }
  std::vector<DiscreteMarginal> marg{std::move(mu1), std::move(zm), std::move(mu2)};
  return assemble_problem(std::move(marg), {false, true, false},
                          CostPath::affine(std::move(base), std::move(slope)),
                          ConstraintBasis::none(n1 * nz * n2), eta, Family::geodesic);
}

LambdaPath LambdaPath::linear_from_vertex(int n) {
  if (n < 2) throw std::invalid_argument("lambda path needs at least two marginals");
  LambdaPath p;
  p.weights = [n](double eps) {
    Vector w = Vector::Constant(n, eps / double(n - 1));
    w[0] = 1.0 - eps;
    return w;
  };
  p.derivative = [n](double) {
    Vector w = Vector::Constant(n, 1.0 / double(n - 1));
    w[0] = -1.0;
    return w;
  };
  return p;
}

Problem make_barycenter(std::vector<DiscreteMarginal> marginals, Matrix z_points,
                        const LambdaPath& path, double eta) {
  const int n = static_cast<int>(marginals.size());
  if (n < 2) throw std::invalid_argument("barycenter: need at least two marginals");
  if (z_points.rows() == 0) throw std::invalid_argument("barycenter: empty z grid");

  {
    Vector l0 = path.weights(0.0);
    if (l0.size() != n || std::abs(l0[0] - 1.0) > 1e-12 ||
        (l0.size() > 1 && l0.tail(n - 1).cwiseAbs().maxCoeff() > 1e-12))
      throw SolverError("invalid weight path");
    for (int k = 0; k <= 100; ++k) {
      Vector l = path.weights(double(k) / 100.0);
      if (l.size() != n || l.minCoeff() < -1e-12 || std::abs(l.sum() - 1.0) > 1e-12)
        throw SolverError("invalid weight path");
    }
  }

  DiscreteMarginal zm;
  zm.points = std::move(z_points);
  zm.weights = Vector::Constant(zm.points.rows(), 1.0 / double(zm.points.rows()));

  std::vector<Index> sizes;
  for (const auto& mu : marginals) sizes.push_back(mu.size());
  sizes.push_back(zm.size());
  ProductGrid grid(sizes);
  const Index m = grid.size();

  auto tables = std::make_shared<std::vector<Vector>>();
  {
    std::vector<Index> multi;
    for (int i = 0; i < n; ++i) {
      Vector d(m);
      for (Index ell = 0; ell < m; ++ell) {
        const Index xi = grid.index_of(ell, i);
        const Index zi = grid.index_of(ell, n);
        d[ell] = sqdist(marginals[i].points, xi, zm.points, zi);
      }
      tables->push_back(std::move(d));
    }
  }

  auto weights = path.weights;
  auto deriv = path.derivative;
  CostPath cost = CostPath::general(
      m,
      [tables, weights, n](double eps, Vector& out) {
        Vector l = weights(eps);
        out = l[0] * (*tables)[0];
        for (int i = 1; i < n; ++i) out += l[i] * (*tables)[i];
      },
      [tables, deriv, n](double eps, Vector& out) {
        Vector l = deriv(eps);
        out = l[0] * (*tables)[0];
        for (int i = 1; i < n; ++i) out += l[i] * (*tables)[i];
      });

  std::vector<bool> free_flags(n, false);
  free_flags.push_back(true);
  marginals.push_back(std::move(zm));
  return assemble_problem(std::move(marginals), std::move(free_flags), std::move(cost),
                          ConstraintBasis::none(m), eta, Family::barycenter);
}

Problem make_barycenter(std::vector<DiscreteMarginal> marginals, Matrix z_points, double eta) {
  const int n = static_cast<int>(marginals.size());
  if (n < 2) throw std::invalid_argument("barycenter: need at least two marginals");
  // the default vertex-start path is affine in eps; build the affine table
  DiscreteMarginal zm;
  zm.points = z_points;
  zm.weights = Vector::Constant(zm.points.rows(), 1.0 / double(zm.points.rows()));
  std::vector<Index> sizes;
  for (const auto& mu : marginals) sizes.push_back(mu.size());
  sizes.push_back(zm.size());
  ProductGrid grid(sizes);
  const Index m = grid.size();

  Vector base(m), rest = Vector::Zero(m);
  for (Index ell = 0; ell < m; ++ell) {
    const Index zi = grid.index_of(ell, n);
    base[ell] = sqdist(marginals[0].points, grid.index_of(ell, 0), zm.points, zi);
    for (int i = 1; i < n; ++i)
      rest[ell] += sqdist(marginals[i].points, grid.index_of(ell, i), zm.points, zi);
  }
  Vector slope = rest / double(n - 1) - base;

  std::vector<bool> free_flags(n, false);
  free_flags.push_back(true);
  marginals.push_back(std::move(zm));
  return assemble_problem(std::move(marginals), std::move(free_flags),
                          CostPath::affine(std::move(base), std::move(slope)),
                          ConstraintBasis::none(m), eta, Family::barycenter);
}

}  // namespace otcurve
