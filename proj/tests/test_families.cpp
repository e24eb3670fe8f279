#include "otcurve/families.hpp"
#include "otcurve/ode.hpp"
#include "otcurve/reduced_kernels.hpp"
#include "otcurve/sinkhorn.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace otcurve;
namespace tu = otcurve::testutil;

namespace {

DiscreteMarginal gaussian_on_grid(Index n, double lo, double hi, double center, double sigma) {
  DiscreteMarginal mu;
  mu.points.resize(n, 1);
  mu.weights.resize(n);
  for (Index i = 0; i < n; ++i) {
    double x = lo + (hi - lo) * double(i) / double(n - 1);
    mu.points(i, 0) = x;
    mu.weights[i] = std::exp(-0.5 * (x - center) * (x - center) / (sigma * sigma));
  }
  mu.weights /= mu.weights.sum();
  return mu;
}

}  // namespace

TEST_CASE("convex order examples") {
  DiscreteMarginal d0 = make_marginal_1d(Vector::Zero(1), Vector::Ones(1));
  DiscreteMarginal pm1 = make_marginal_1d((Vector(2) << -1.0, 1.0).finished(),
                                          (Vector(2) << 0.5, 0.5).finished());
  CHECK(check_convex_order(d0, pm1));
  CHECK_FALSE(check_convex_order(pm1, d0));

  // unequal means fail the necessary condition
  DiscreteMarginal shifted = make_marginal_1d(Vector::Constant(1, 0.2), Vector::Ones(1));
  CHECK_FALSE(check_convex_order(shifted, pm1));
  CHECK_THROWS_WITH_AS(make_martingale(shifted, pm1, Vector::Zero(2), 0.5),
                       "infeasible: mu not dominated in convex order", SolverError);

  // the one-period table grids are ordered
  CHECK(check_convex_order(uniform_marginal_1d(100, -0.3, 0.3), uniform_marginal_1d(200, -1.0, 1.0)));

  // multidimensional supports are not checkable
  DiscreteMarginal two_d;
  two_d.points = Matrix::Zero(2, 2);
  two_d.points << 0.0, 0.0, 1.0, 1.0;
  two_d.weights = Vector::Constant(2, 0.5);
  CHECK_THROWS_WITH_AS(check_convex_order(two_d, two_d), "convex-order check unsupported in d>1",
                       std::invalid_argument);
}

TEST_CASE("degenerate multi-period (theta = mu) still reduces to full rank") {
  DiscreteMarginal mu = make_marginal_1d((Vector(2) << -0.2, 0.2).finished(),
                                         (Vector(2) << 0.5, 0.5).finished());
  DiscreteMarginal nu = make_marginal_1d((Vector(3) << -1.0, 0.0, 1.0).finished(),
                                         (Vector(3) << 0.25, 0.5, 0.25).finished());
  auto rng = tu::make_rng(101);
  Problem p = make_multi_period(mu, mu, nu, tu::random_cost(rng, 2 * 2 * 3), 0.3);
  Eigen::JacobiSVD<Matrix> svd(p.sys.dense());
  CHECK(svd.singularValues()(p.sys.cols() - 1) / svd.singularValues()(0) > 1e-10);

  SinkhornConfig cfg;
  cfg.tol = 1e-9;
  SinkhornResult res = sinkhorn_solve(p, 1.0, cfg);
  CHECK(res.converged);
}

TEST_CASE("geodesic with identical endpoints keeps the interpolant still") {
  DiscreteMarginal mu = gaussian_on_grid(21, 0.0, 1.0, 0.45, 0.18);
  Matrix zgrid = Vector::LinSpaced(31, 0.0, 1.0);
  Problem p = make_geodesic(mu, mu, zgrid, 0.01);
  auto k = make_kernel(p);
  IntegrateOptions opts;
  opts.steps = 20;
  opts.snapshots = 3;
  opts.polish_every = 1;
  SolutionCurve curve = integrate(p, *k, opts);
  Vector z0 = p.axis_marginal(curve.samples.front().coupling, 1);
  Vector z1 = p.axis_marginal(curve.samples.back().coupling, 1);
  CHECK(tu::tv_distance(z0, z1) <= 0.05);

  // constrained marginals stay put, free mass stays one (endpoint driven to
  // stationarity first)
  Vector phi = curve.back().phi;
  for (int it = 0; it < 8 && tu::inf_norm(k->gradient(phi, 1.0)) > 1e-13; ++it)
    phi = newton_polish(*k, phi, 1.0);
  Vector gamma = k->coupling(phi, 1.0);
  Vector m0 = p.axis_marginal(gamma, 0);
  CHECK((m0 - p.marginals[0].weights).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(p.axis_marginal(gamma, 1).sum() - 1.0) <= 1e-12);
}

TEST_CASE("geodesic mean interpolates linearly (quadratic costs)") {
  DiscreteMarginal a = gaussian_on_grid(18, 0.0, 1.0, 0.25, 0.1);
  DiscreteMarginal b = gaussian_on_grid(18, 0.0, 1.0, 0.7, 0.12);
  Matrix zgrid = Vector::LinSpaced(30, 0.0, 1.0);
  Problem p = make_geodesic(a, b, zgrid, 0.01);
  Vector zpts = p.marginals[1].scalar_points();

  SinkhornConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iters = 200000;
  const double ma = a.mean_scalar(), mb = b.mean_scalar();
  for (double eps : {0.0, 0.5, 1.0}) {
    SinkhornResult res = sinkhorn_solve(p, eps, cfg);
    REQUIRE(res.converged);
    Vector zm = p.axis_marginal(res.coupling, 1);
    double mean = zm.dot(zpts) / zm.sum();
    CHECK(std::abs(mean - ((1.0 - eps) * ma + eps * mb)) <= 0.02);
  }
}

TEST_CASE("barycenter weight-path validation") {
  DiscreteMarginal a = gaussian_on_grid(10, 0.0, 1.0, 0.3, 0.1);
  DiscreteMarginal b = gaussian_on_grid(10, 0.0, 1.0, 0.7, 0.1);
  Matrix zgrid = Vector::LinSpaced(15, 0.0, 1.0);

  LambdaPath bad;
  bad.weights = [](double) { return (Vector(2) << 0.5, 0.5).finished(); };  // not a vertex at 0
  bad.derivative = [](double) { return Vector::Zero(2); };
  CHECK_THROWS_WITH_AS(make_barycenter({a, b}, zgrid, bad, 0.01), "invalid weight path",
                       SolverError);

  LambdaPath off_simplex;
  off_simplex.weights = [](double eps) { return (Vector(2) << 1.0 + eps, -eps).finished(); };
  off_simplex.derivative = [](double) { return (Vector(2) << 1.0, -1.0).finished(); };
  CHECK_THROWS_WITH_AS(make_barycenter({a, b}, zgrid, off_simplex, 0.01), "invalid weight path",
                       SolverError);
}

TEST_CASE("barycenter frozen at a vertex reproduces that marginal up to blur") {
  // the entropic blur width is about sqrt(eta/2) ~ 0.07; keep the marginal
  // wide enough that the blurred copy stays within the TV tolerance
  DiscreteMarginal a = gaussian_on_grid(16, 0.0, 1.0, 0.5, 0.22);
  DiscreteMarginal b = gaussian_on_grid(12, 0.0, 1.0, 0.6, 0.1);
  Matrix zgrid = a.points;  // same support so the comparison is direct
  LambdaPath frozen;
  frozen.weights = [](double) { return (Vector(2) << 1.0, 0.0).finished(); };
  frozen.derivative = [](double) { return Vector::Zero(2); };
  Problem p = make_barycenter({a, b}, zgrid, frozen, 0.01);
  auto k = make_kernel(p);
  IntegrateOptions opts;
  opts.steps = 8;
  opts.snapshots = 2;
  SolutionCurve curve = integrate(p, *k, opts);
  Vector zm = p.axis_marginal(curve.samples.back().coupling, 2);
  CHECK(tu::tv_distance(zm, a.weights) <= 0.05);
}

TEST_CASE("barycenter of identical marginals is constant along the path") {
  DiscreteMarginal a = gaussian_on_grid(14, 0.0, 1.0, 0.5, 0.15);
  Matrix zgrid = Vector::LinSpaced(20, 0.0, 1.0);
  Problem p = make_barycenter({a, a}, zgrid, 0.01);
  auto k = make_kernel(p);
  IntegrateOptions opts;
  opts.steps = 16;
  opts.snapshots = 3;
  SolutionCurve curve = integrate(p, *k, opts);
  Vector z0 = p.axis_marginal(curve.samples.front().coupling, 2);
  Vector z1 = p.axis_marginal(curve.samples.back().coupling, 2);
  CHECK(tu::tv_distance(z0, z1) <= 0.05);
}

TEST_CASE("barycenter mean interpolates along the default path") {
  DiscreteMarginal a = gaussian_on_grid(12, 0.0, 1.0, 0.3, 0.1);
  DiscreteMarginal b = gaussian_on_grid(12, 0.0, 1.0, 0.72, 0.1);
  Matrix zgrid = Vector::LinSpaced(24, 0.0, 1.0);
  Problem p = make_barycenter({a, b}, zgrid, 0.01);
  Vector zpts = p.marginals[2].scalar_points();
  SinkhornConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iters = 200000;
  const double ma = a.mean_scalar(), mb = b.mean_scalar();
  for (double eps : {0.0, 0.5, 1.0}) {
    SinkhornResult res = sinkhorn_solve(p, eps, cfg);
    REQUIRE(res.converged);
    Vector zm = p.axis_marginal(res.coupling, 2);
    double mean = zm.dot(zpts) / zm.sum();
    CHECK(std::abs(mean - ((1.0 - eps) * ma + eps * mb)) <= 0.02);
  }
}

TEST_CASE("martingale residual of the solved coupling") {
  DiscreteMarginal mu = uniform_marginal_1d(8, -0.3, 0.3);
  DiscreteMarginal nu = uniform_marginal_1d(16, -1.0, 1.0);
  Problem p = make_martingale(mu, nu, cost_table_spence_mirrlees(mu, nu), 0.05);
  SinkhornConfig cfg;
  cfg.tol = 1e-9;
  cfg.max_iters = 100000;
  SinkhornResult res = sinkhorn_solve(p, 1.0, cfg);
  REQUIRE(res.converged);
  Vector x = mu.scalar_points(), y = nu.scalar_points();
  for (Index i = 0; i < 8; ++i) {
    double drift = 0.0, mass = 0.0;
    for (Index s = 0; s < 16; ++s) {
      drift += res.coupling[i * 16 + s] * (y[s] - x[i]);
      mass += res.coupling[i * 16 + s];
    }
    CHECK(std::abs(drift) / mass <= 1e-6);
  }
}
