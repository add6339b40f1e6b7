#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "pinn/quadrature.hpp"
#include "pinn/tape.hpp"

using namespace pinn;
using namespace pinn::quad;

namespace {

// Straight three-term recurrence, independent of the Newton solver.
double legendre(int n, double x) {
  double p1 = 1.0, p2 = 0.0;
  for (int j = 0; j < n; ++j) {
    const double p3 = p2;
    p2 = p1;
    p1 = ((2.0 * j + 1.0) * x * p2 - j * p3) / (j + 1);
  }
  return p1;
}

// Roots of P_n by sign-change scan plus bisection.
std::vector<double> legendre_roots_bisect(int n) {
  std::vector<double> roots;
  const int grid = 20000;
  double prev_x = -1.0, prev_f = legendre(n, prev_x);
  for (int g = 1; g <= grid; ++g) {
    const double x = -1.0 + 2.0 * g / grid;
    const double f = legendre(n, x);
    if (prev_f == 0.0) roots.push_back(prev_x);
    if (prev_f * f < 0.0) {
      double lo = prev_x, hi = x, flo = prev_f;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = legendre(n, mid);
        if (flo * fm <= 0.0) {
          hi = mid;
        } else {
          lo = mid;
          flo = fm;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_x = x;
    prev_f = f;
  }
  return roots;
}

}  // namespace

TEST_CASE("one- and two-point rules match closed forms") {
  Rule r1 = gauss_legendre(1);
  REQUIRE(r1.n() == 1);
  CHECK(r1.nodes[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r1.weights[0] == doctest::Approx(2.0).epsilon(1e-14));

  Rule r2 = gauss_legendre(2);
  REQUIRE(r2.n() == 2);
  CHECK(r2.nodes[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(r2.nodes[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(r2.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r2.weights[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("twenty-point rule agrees with a bisection root oracle") {
  Rule r = gauss_legendre(20);
  std::vector<double> roots = legendre_roots_bisect(20);
  REQUIRE(roots.size() == 20);
  for (int i = 0; i < 20; ++i) {
    CHECK(std::abs(r.nodes[static_cast<size_t>(i)] - roots[static_cast<size_t>(i)]) <= 1e-12);
    // Independent weight identity based on P_{n+1} at the root.
    const double x = roots[static_cast<size_t>(i)];
    const double pn1 = legendre(21, x);
    const double w = 2.0 * (1.0 - x * x) / (21.0 * 21.0 * pn1 * pn1);
    CHECK(std::abs(r.weights[static_cast<size_t>(i)] - w) <= 1e-12);
  }
}

TEST_CASE("rule structure: weight sum, symmetry, positivity") {
  for (int n : {1, 2, 3, 7, 16, 20, 33, 64}) {
    Rule r = gauss_legendre(n);
    double sum = 0.0;
    for (double w : r.weights) {
      CHECK(w > 0.0);
      sum += w;
    }
    CHECK(sum == doctest::Approx(2.0).epsilon(1e-12));
    for (int i = 0; i < n; ++i) {
      CHECK(r.nodes[static_cast<size_t>(i)] ==
            doctest::Approx(-r.nodes[static_cast<size_t>(n - 1 - i)]).epsilon(1e-14));
    }
  }
  CHECK_THROWS_AS(gauss_legendre(0), DomainError);
  CHECK_THROWS_AS(gauss_legendre(65), DomainError);
}

TEST_CASE("polynomial exactness up to degree 2n-1") {
  for (int n = 1; n <= 20; ++n) {
    Rule r = gauss_legendre(n);
    for (int d = 0; d <= 2 * n - 1; ++d) {
      const double exact = d % 2 == 1 ? 0.0 : 2.0 / (d + 1);
      const double got = integrate(r, [d](double x) { return std::pow(x, d); }, -1.0, 1.0);
      CHECK(std::abs(got - exact) <= 1e-12);
    }
  }
}

TEST_CASE("mapped integrals") {
  Rule r2 = gauss_legendre(2);
  CHECK(integrate(r2, [](double t) { return t * t; }, 0.0, 1.0) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  Rule r20 = gauss_legendre(20);
  const double got = integrate(r20, [](double t) { return std::exp(t - 1.0); }, 0.0, 1.0);
  CHECK(std::abs(got - (1.0 - std::exp(-1.0))) <= 1e-10);
}

TEST_CASE("operator form: gradient flows through node evaluations") {
  IntegralOperator op;
  op.kernel = [](double, double) { return 1.0; };
  op.lower = [](double) { return 0.0; };
  op.upper = [](double x) { return x; };
  op.rule = gauss_legendre(8);

  ad::Tape1 tape;
  ad::Var1 theta = tape.input(ad::Jet1(2.5));
  auto y = [&](double t) { return theta * (t * t); };
  ad::Var1 integral = integrate_operator(op, 1.0, tape, y);
  CHECK(integral.value() == doctest::Approx(2.5 / 3.0).epsilon(1e-12));
  CHECK(tape.backward(integral).wrt(theta) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  ad::Var1 empty = integrate_operator(op, 0.0, tape, y);
  CHECK(empty.value() == 0.0);

  IntegralOperator bad = op;
  bad.lower = [](double) { return 2.0; };
  CHECK_THROWS_AS(integrate_operator(bad, 1.0, tape, y), DomainError);
}

TEST_CASE("memory kernel: quadrature error shrinks with rule size") {
  // integrand e^{t-x} * y(t) with y(t) = e^{-t} cosh t; closed form e^{-x} sinh x
  auto y_exact = [](double t) { return std::exp(-t) * std::cosh(t); };
  const double x = 1.0;
  const double closed = std::exp(-x) * std::sinh(x);
  auto err = [&](int n) {
    Rule r = gauss_legendre(n);
    const double got =
        integrate(r, [&](double t) { return std::exp(t - x) * y_exact(t); }, 0.0, x);
    return std::abs(got - closed);
  };
  const double e2 = err(2), e5 = err(5), e20 = err(20);
  CHECK(e20 <= e5);
  CHECK(e5 <= e2);
  CHECK(e20 <= 1e-12);
}

TEST_CASE("exact solution satisfies the integro-differential identity pointwise") {
  // y(x) = e^{-x} cosh x solves y' + y = integral of e^{t-x} y(t) from 0 to x.
  Rule r = gauss_legendre(20);
  auto y = [](double t) { return std::exp(-t) * std::cosh(t); };
  auto dy = [](double t) { return -std::exp(-2.0 * t); };
  for (double x : {0.5, 1.0, 2.0}) {
    const double integral =
        integrate(r, [&](double t) { return std::exp(t - x) * y(t); }, 0.0, x);
    CHECK(std::abs(dy(x) + y(x) - integral) <= 1e-8);
  }
  CHECK(y(1.0) == doctest::Approx(0.56767).epsilon(1e-4));
}
