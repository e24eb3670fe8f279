#include "otcurve/families.hpp"
#include "otcurve/ode.hpp"
#include "otcurve/reduced_kernels.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace otcurve;
namespace tu = otcurve::testutil;

namespace {

Problem scalar_problem(double eta, double c) {
  DiscreteMarginal mu;
  mu.points = Matrix::Zero(1, 1);
  mu.weights = Vector::Ones(1);
  return assemble_problem({mu}, {false}, CostPath::scaled(Vector::Constant(1, c)),
                          ConstraintBasis::none(1), eta);
}

}  // namespace

TEST_CASE("initial potential: unconstrained families start at zero") {
  auto rng = tu::make_rng(70);
  Problem p = make_two_marginal(tu::random_marginal(rng, 4), tu::random_marginal(rng, 4),
                                tu::random_cost(rng, 16), 0.5);
  auto k = make_kernel(p);
  Vector phi0 = initial_potential(p, *k);
  CHECK(tu::inf_norm(phi0) == 0.0);
  CHECK(tu::inf_norm(k->gradient(phi0, 0.0)) <= 1e-10);
}

TEST_CASE("initial potential: martingale start satisfies the drift equations") {
  DiscreteMarginal mu = make_marginal_1d((Vector(2) << -0.2, 0.2).finished(),
                                         (Vector(2) << 0.5, 0.5).finished());
  DiscreteMarginal nu = make_marginal_1d((Vector(3) << -1.0, 0.0, 1.0).finished(),
                                         (Vector(3) << 0.3, 0.4, 0.3).finished());
  auto rng = tu::make_rng(71);
  Problem p = make_martingale(mu, nu, tu::random_cost(rng, 6), 0.4);
  auto k = make_kernel(p);
  Vector phi0 = initial_potential(p, *k);
  CHECK(tu::inf_norm(k->gradient(phi0, 0.0)) <= 1e-10);
  // conditional-drift residual per support point of mu
  Vector gamma = k->coupling(phi0, 0.0);
  for (Index i = 0; i < 2; ++i) {
    double drift = 0.0;
    for (Index s = 0; s < 3; ++s)
      drift += gamma[i * 3 + s] * (nu.points(s, 0) - mu.points(i, 0));
    CHECK(std::abs(drift) <= 1e-8);
  }
}

TEST_CASE("initial potential: geodesic closed form is stationary and matches a solve") {
  DiscreteMarginal a = uniform_marginal_1d(6, 0.0, 1.0);
  DiscreteMarginal b = uniform_marginal_1d(5, 0.2, 0.9);
  Matrix zgrid = Vector::LinSpaced(7, 0.0, 1.0);
  Problem p = make_geodesic(a, b, zgrid, 0.05);
  auto k = make_kernel(p);
  Vector phi0 = initial_potential(p, *k);
  CHECK(tu::inf_norm(k->gradient(phi0, 0.0)) <= 1e-10);

  SinkhornConfig cfg;
  cfg.tol = 1e-12;
  cfg.max_iters = 100000;
  SinkhornResult res = sinkhorn_solve(p, 0.0, cfg);
  REQUIRE(res.converged);
  Vector solved = p.sys.reduce_potentials(res.full_layout(p));
  CHECK((solved - phi0).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("rhs on the scalar problem equals the cost") {
  // Phi(t,eps) = -t + eta exp((t - eps c)/eta): minimizer t = eps c, rhs = c.
  Problem p = scalar_problem(0.7, 1.3);
  auto k = make_kernel(p);
  for (double t : {0.0, 0.5}) {
    Vector phi = Vector::Constant(1, t);
    CHECK(rhs(*k, phi, 0.4)[0] == doctest::Approx(1.3).epsilon(1e-12));
  }
}

TEST_CASE("rhs matches an independent dense solve") {
  auto rng = tu::make_rng(72);
  Problem p = make_two_marginal(tu::random_marginal(rng, 3), tu::random_marginal(rng, 3),
                                tu::random_cost(rng, 9), 0.5);
  auto k = make_kernel(p);
  Vector phi = tu::random_cost(rng, k->dim(), 0.5);
  Vector x = rhs(*k, phi, 0.6);
  EvalResult r;
  k->eval(phi, 0.6, {.hessian = true, .mixed = true}, r);
  Vector expect = Eigen::FullPivLU<Matrix>(r.hessian).solve(-r.mixed);
  CHECK(tu::rel_inf(x, expect) <= 1e-10);
  CHECK(tu::inf_norm(r.hessian * x + r.mixed) <= 1e-10 * tu::inf_norm(r.mixed));
}

TEST_CASE("constant cost: the coupling never moves") {
  auto rng = tu::make_rng(73);
  Problem p = make_two_marginal(tu::random_marginal(rng, 4), tu::random_marginal(rng, 3),
                                Vector::Constant(12, 2.0), 0.5);
  auto k = make_kernel(p);
  IntegrateOptions opts;
  opts.steps = 4;
  opts.snapshots = 5;
  SolutionCurve curve = integrate(p, *k, opts);
  for (const auto& s : curve.samples) {
    REQUIRE(s.has_coupling);
    CHECK(tu::tv_distance(s.coupling, p.ref) <= 1e-12);
  }

  // a single step keeps stationarity as well
  opts.steps = 1;
  opts.snapshots = 0;
  SolutionCurve one = integrate(p, *k, opts);
  CHECK(one.back().grad_inf <= 1e-10);
}

TEST_CASE("curve samples: grid, dual values, drift diagnostics") {
  auto rng = tu::make_rng(74);
  Problem p = make_two_marginal(tu::random_marginal(rng, 4), tu::random_marginal(rng, 4),
                                tu::random_cost(rng, 16), 0.3);
  auto k = make_kernel(p);
  IntegrateOptions opts;
  opts.steps = 8;
  opts.snapshots = 5;
  SolutionCurve curve = integrate(p, *k, opts);
  REQUIRE(curve.samples.size() == 9);
  CHECK(curve.samples.front().eps == 0.0);
  int snaps = 0;
  for (size_t i = 0; i < curve.samples.size(); ++i) {
    const auto& s = curve.samples[i];
    if (i > 0) CHECK(s.eps > curve.samples[i - 1].eps);
    CHECK(s.dual_value == doctest::Approx(k->value(s.phi, s.eps)).epsilon(1e-12));
    if (s.has_coupling) ++snaps;
  }
  CHECK(snaps == 5);
  CHECK(curve.jitter_count == 0);
}

TEST_CASE("newton polish reduces the endpoint drift") {
  auto rng = tu::make_rng(75);
  Problem p = make_two_marginal(tu::random_marginal(rng, 5), tu::random_marginal(rng, 5),
                                tu::random_cost(rng, 25), 0.05);
  auto k = make_kernel(p);
  IntegrateOptions opts;
  opts.steps = 10;
  SolutionCurve raw = integrate(p, *k, opts);
  opts.polish_every = 1;
  SolutionCurve polished = integrate(p, *k, opts);
  CHECK(polished.back().grad_inf <= raw.back().grad_inf);
  CHECK(polished.back().grad_inf <= 1e-9);
}

TEST_CASE("generic and reduced kernels integrate to the same coupling curve") {
  auto rng = tu::make_rng(76);
  Problem p = make_two_marginal(tu::random_marginal(rng, 4), tu::random_marginal(rng, 4),
                                tu::random_cost(rng, 16), 0.2);
  auto kr = make_kernel(p, true);
  auto kg = make_kernel(p, false);
  REQUIRE(dynamic_cast<GenericKernel*>(kg.get()) != nullptr);
  IntegrateOptions opts;
  opts.steps = 16;
  opts.snapshots = 5;
  SolutionCurve a = integrate(p, *kr, opts);
  SolutionCurve b = integrate(p, *kg, opts);
  for (size_t i = 0; i < a.samples.size(); ++i) {
    if (!a.samples[i].has_coupling) continue;
    CHECK(tu::tv_distance(a.samples[i].coupling, b.samples[i].coupling) <= 1e-5);
  }
}

TEST_CASE("dirac multi-period problem has the single feasible coupling") {
  auto dirac = [](double x) {
    return make_marginal_1d(Vector::Constant(1, x), Vector::Ones(1));
  };
  Problem p = make_multi_period(dirac(0.3), dirac(0.3), dirac(0.3), Vector::Constant(1, 1.0), 0.5);
  auto k = make_kernel(p);
  IntegrateOptions opts;
  opts.steps = 3;
  opts.snapshots = 2;
  SolutionCurve curve = integrate(p, *k, opts);
  for (const auto& s : curve.samples) {
    if (s.has_coupling) CHECK(s.coupling[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
}
