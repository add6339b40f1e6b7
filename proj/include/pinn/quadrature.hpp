#pragma once

#include <functional>
#include <vector>

#include "pinn/errors.hpp"
#include "pinn/tape.hpp"

namespace pinn::quad {

/// Gauss-Legendre rule on [-1, 1]: exact for polynomials of degree <= 2n-1.
struct Rule {
  std::vector<double> nodes;    // ascending, symmetric about 0
  std::vector<double> weights;  // positive, sum to 2

  int n() const { return static_cast<int>(nodes.size()); }
};

/// Builds the n-point rule by Newton iteration on the Legendre three-term
/// recurrence, starting from Chebyshev guesses. Supports 1 <= n <= 64.
Rule gauss_legendre(int n);

/// Plain integral of f over [a, b] under the rule.
double integrate(const Rule& rule, const std::function<double(double)>& f, double a, double b);

/// Integral operator t -> k(t, x) * y(t) over [lower(x), upper(x)], with the
/// kernel a known coefficient and y the unknown evaluated on a tape.
struct IntegralOperator {
  std::function<double(double, double)> kernel;  // k(t, x)
  std::function<double(double)> lower;           // a(x)
  std::function<double(double)> upper;           // b(x)
  Rule rule;
};

/// Quadrature approximation of the operator applied to y at the point x,
/// recorded on y's tape so gradients flow through the node evaluations.
template <int K, typename YFn>
ad::Var<K> integrate_operator(const IntegralOperator& op, double x, ad::Tape<K>& tape, YFn&& y) {
  const double a = op.lower(x);
  const double b = op.upper(x);
  if (a > b) throw DomainError("integrate: lower limit exceeds upper limit");
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  ad::Var<K> acc = tape.constant(0.0);
  if (half == 0.0) return acc;
  for (int i = 0; i < op.rule.n(); ++i) {
    const double t = mid + half * op.rule.nodes[i];
    const double coeff = op.rule.weights[i] * half * op.kernel(t, x);
    acc = acc + y(t) * coeff;
  }
  return acc;
}

}  // namespace pinn::quad
