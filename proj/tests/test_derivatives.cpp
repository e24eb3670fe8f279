#include "otcurve/derivatives.hpp"
#include "otcurve/families.hpp"
#include "otcurve/reduced_kernels.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace otcurve;
namespace tu = otcurve::testutil;

namespace {

Problem random_instance(uint64_t seed, Index nx, Index ny, double eta, double scale = 1.0) {
  auto rng = tu::make_rng(seed);
  return make_two_marginal(tu::random_marginal(rng, nx), tu::random_marginal(rng, ny),
                           tu::random_cost(rng, nx * ny, scale), eta);
}

double expectation(const Problem& p, const Vector& c) {
  double e = 0.0;
  const Vector& mu = p.marginals[0].weights;
  const Vector& nu = p.marginals[1].weights;
  for (Index r = 0; r < mu.size(); ++r)
    for (Index s = 0; s < nu.size(); ++s) e += mu[r] * nu[s] * c[r * nu.size() + s];
  return e;
}

}  // namespace

TEST_CASE("C'(0) = -E[c] under the product measure") {
  Problem p = random_instance(81, 5, 4, 0.5);
  TwoMarginalKernel k(p);
  double got = c_prime(p, Vector::Zero(k.dim()), 0.0);
  CHECK(std::abs(got + expectation(p, p.cost.slope())) <= 1e-10);
}

TEST_CASE("constant cost: C' = -k for all eps, C'' = 0") {
  auto rng = tu::make_rng(82);
  Problem p = make_two_marginal(tu::random_marginal(rng, 4), tu::random_marginal(rng, 3),
                                Vector::Constant(12, 1.9), 0.4);
  TwoMarginalKernel k(p);
  for (double eps : {0.0, 0.5, 1.0}) {
    Vector u = tu::newton_minimize(k, Vector::Zero(k.dim()), eps, 1e-12);
    CHECK(c_prime(p, u, eps) == doctest::Approx(-1.9).epsilon(1e-10));
    CHECK(std::abs(c_second_along_curve(p, u, eps)) <= 1e-10);
  }
}

TEST_CASE("envelope precondition is enforced") {
  Problem p = random_instance(83, 4, 4, 0.5);
  TwoMarginalKernel k(p);
  Vector off = Vector::Constant(k.dim(), 0.3);
  CHECK_THROWS_WITH_AS(c_prime(p, off, 1.0), "envelope precondition violated", SolverError);
}

TEST_CASE("closed form rejects constrained or mismatched problems") {
  DiscreteMarginal mu = make_marginal_1d(Vector::Zero(1), Vector::Ones(1));
  DiscreteMarginal nu = make_marginal_1d((Vector(2) << -1.0, 1.0).finished(),
                                         (Vector(2) << 0.5, 0.5).finished());
  Problem mart = make_martingale(mu, nu, (Vector(2) << 0.3, 0.9).finished(), 0.2);
  CHECK_THROWS_WITH_AS(c_second_zero(mart), "closed form valid only for unconstrained two-marginal",
                       SolverError);
}

TEST_CASE("separable costs have vanishing C''(0)") {
  auto rng = tu::make_rng(84);
  DiscreteMarginal mu = tu::random_marginal(rng, 5);
  DiscreteMarginal nu = tu::random_marginal(rng, 4);
  Vector f = tu::random_cost(rng, 5), g = tu::random_cost(rng, 4);
  Vector c(20);
  for (Index r = 0; r < 5; ++r)
    for (Index s = 0; s < 4; ++s) c[r * 4 + s] = f[r] + g[s];
  Problem p = make_two_marginal(mu, nu, c, 0.3);
  CHECK(std::abs(c_second_zero(p)) <= 1e-12);
}

TEST_CASE("product cost on symmetric two-point marginals: C''(0) = 1/eta") {
  DiscreteMarginal m = make_marginal_1d((Vector(2) << -1.0, 1.0).finished(),
                                        (Vector(2) << 0.5, 0.5).finished());
  Vector c(4);
  c << 1.0, -1.0, -1.0, 1.0;  // c(x, y) = x y
  const double eta = 0.7;
  Problem p = make_two_marginal(m, m, c, eta);
  CHECK(c_second_zero(p) == doctest::Approx(1.0 / eta).epsilon(1e-12));
}

TEST_CASE("along-curve second derivative at eps = 0 equals the closed form") {
  Problem p = random_instance(85, 4, 5, 0.6);
  TwoMarginalKernel k(p);
  double closed = c_second_zero(p);
  double curve = c_second_along_curve(p, Vector::Zero(k.dim()), 0.0);
  CHECK(std::abs(curve - closed) <= 1e-10 * std::max(1.0, std::abs(closed)));
}

TEST_CASE("Sherman-Morrison inverse application equals the dense solve at eps = 0") {
  Problem p = random_instance(86, 5, 4, 0.45);
  TwoMarginalKernel k(p);
  EvalResult r;
  k.eval(Vector::Zero(k.dim()), 0.0, {.hessian = true, .mixed = true}, r);

  // closed form: [-D^2 Phi]^{-1} = eta (-diag^{-1}(mubar) - 11^T / mu_0)
  const Vector& mu = p.marginals[0].weights;
  Vector mubar = mu.tail(4);
  Vector sm = p.eta * (-(r.mixed.array() / mubar.array()).matrix() -
                       Vector::Constant(4, r.mixed.sum() / mu[0]));
  Vector dense = (-r.hessian).partialPivLu().solve(r.mixed);
  CHECK(tu::rel_inf(sm, dense) <= 1e-10);
}

TEST_CASE("C''(0) matches the one-sided finite-difference oracle") {
  // random 5x4 instance, eta = 0.5, stencil {0, h, 2h} with h = 1e-2
  Problem p = random_instance(87, 5, 4, 0.5, 0.25);
  double closed = c_second_zero(p);
  SinkhornConfig tight;
  tight.tol = 1e-13;
  tight.max_iters = 200000;
  DerivativeReport fd = c_second_finite_difference(p, 1e-2, tight);
  CHECK(std::abs(fd.c_second - closed) <= 1e-3 * std::abs(closed));
  // the FD c_prime is consistent with the exact one too
  CHECK(std::abs(fd.c_prime - (-expectation(p, p.cost.slope()))) <= 1e-4);
}

TEST_CASE("C''(eps) matches finite differences of C'(eps) along the curve") {
  Problem p = random_instance(88, 4, 4, 0.5, 0.5);
  TwoMarginalKernel k(p);
  const double eps = 0.5, h = 1e-4;
  Vector u = tu::newton_minimize(k, Vector::Zero(k.dim()), eps, 1e-13);
  Vector up = tu::newton_minimize(k, u, eps + h, 1e-13);
  Vector um = tu::newton_minimize(k, u, eps - h, 1e-13);
  double fd = (c_prime(p, up, eps + h) - c_prime(p, um, eps - h)) / (2.0 * h);
  double got = c_second_along_curve(p, u, eps);
  CHECK(std::abs(got - fd) <= 1e-4 * std::abs(got));
}

TEST_CASE("concavity of the primal value along the curve") {
  Problem p = random_instance(89, 5, 5, 0.4);
  TwoMarginalKernel k(p);
  Vector u = Vector::Zero(k.dim());
  DerivativeReport rep = derivative_report_zero(p);
  CHECK(rep.c_second >= -1e-10);
  for (double eps = 0.0; eps <= 1.0; eps += 0.2) {
    u = tu::newton_minimize(k, u, eps, 1e-12);
    CHECK(c_second_along_curve(p, u, eps) >= -1e-8);
  }
}

TEST_CASE("envelope identity along several families") {
  // C'(eps) = -cdot^T gamma(eps) holds for the generic objective as well
  auto rng = tu::make_rng(90);
  Problem p = make_two_marginal(tu::random_marginal(rng, 4), tu::random_marginal(rng, 4),
                                tu::random_cost(rng, 16), 0.35);
  GenericKernel gk(p);
  Vector phi = tu::newton_minimize(gk, Vector::Zero(gk.dim()), 0.8, 1e-12);
  Vector cd(p.m());
  p.cost.derivative(0.8, cd);
  CHECK(gk.partial_eps(phi, 0.8) ==
        doctest::Approx(-cd.dot(gk.coupling(phi, 0.8))).epsilon(1e-10));
}
