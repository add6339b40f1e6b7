#pragma once

#include <array>
#include <cmath>

namespace pinn::ad {

/// Truncated Taylor value in a single perturbation direction:
/// u(eps) = c[0] + c[1]*eps + ... + c[K-1]*eps^(K-1).
///
/// K=1 is plain arithmetic, K=2 a dual number carrying a directional
/// derivative, K=3 additionally carries half the directional second
/// derivative in c[2].
template <int K>
struct Jet {
  static_assert(K >= 1 && K <= 3, "supported jet orders: value, dual, second-order");

  std::array<double, K> c{};

  Jet() = default;
  Jet(double v) { c[0] = v; }  // NOLINT: implicit promotion of constants is intended
  Jet(double v, double t)
    requires(K >= 2)
  {
    c[0] = v;
    c[1] = t;
  }
  Jet(double v, double t, double s)
    requires(K >= 3)
  {
    c[0] = v;
    c[1] = t;
    c[2] = s;
  }

  double value() const { return c[0]; }
  /// First directional derivative (0 when not carried).
  double tangent() const {
    if constexpr (K >= 2) return c[1];
    return 0.0;
  }
  /// Second directional derivative (0 when not carried). Note c[2] stores half of it.
  double second() const {
    if constexpr (K >= 3) return 2.0 * c[2];
    return 0.0;
  }

  Jet& operator+=(const Jet& o) {
    for (int i = 0; i < K; ++i) c[i] += o.c[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int i = 0; i < K; ++i) c[i] -= o.c[i];
    return *this;
  }
  Jet& operator*=(double s) {
    for (int i = 0; i < K; ++i) c[i] *= s;
    return *this;
  }
};

template <int K>
inline Jet<K> operator+(Jet<K> a, const Jet<K>& b) {
  a += b;
  return a;
}
template <int K>
inline Jet<K> operator-(Jet<K> a, const Jet<K>& b) {
  a -= b;
  return a;
}
template <int K>
inline Jet<K> operator-(const Jet<K>& a) {
  Jet<K> r;
  for (int i = 0; i < K; ++i) r.c[i] = -a.c[i];
  return r;
}

/// Truncated product (Cauchy convolution up to order K-1).
template <int K>
inline Jet<K> operator*(const Jet<K>& a, const Jet<K>& b) {
  Jet<K> r;
  r.c[0] = a.c[0] * b.c[0];
  if constexpr (K >= 2) r.c[1] = a.c[0] * b.c[1] + a.c[1] * b.c[0];
  if constexpr (K >= 3) r.c[2] = a.c[0] * b.c[2] + a.c[1] * b.c[1] + a.c[2] * b.c[0];
  return r;
}

template <int K>
inline Jet<K> operator*(Jet<K> a, double s) {
  a *= s;
  return a;
}
template <int K>
inline Jet<K> operator*(double s, Jet<K> a) {
  a *= s;
  return a;
}

/// Reciprocal by back-substitution of the truncated series.
template <int K>
inline Jet<K> recip(const Jet<K>& a) {
  Jet<K> r;
  const double inv = 1.0 / a.c[0];
  r.c[0] = inv;
  if constexpr (K >= 2) r.c[1] = -a.c[1] * inv * inv;
  if constexpr (K >= 3) r.c[2] = (a.c[1] * a.c[1] * inv - a.c[2]) * inv * inv;
  return r;
}

template <int K>
inline Jet<K> operator/(const Jet<K>& a, const Jet<K>& b) {
  return a * recip(b);
}
template <int K>
inline Jet<K> operator/(const Jet<K>& a, double s) {
  return a * (1.0 / s);
}
template <int K>
inline Jet<K> operator/(double s, const Jet<K>& b) {
  return recip(b) * s;
}

/// Composition with a scalar function: given f(c0), f'(c0), f''(c0),
/// returns the jet of f(u).
template <int K>
inline Jet<K> compose(const Jet<K>& u, double f0, double f1, double f2) {
  Jet<K> r;
  r.c[0] = f0;
  if constexpr (K >= 2) r.c[1] = f1 * u.c[1];
  if constexpr (K >= 3) r.c[2] = f1 * u.c[2] + 0.5 * f2 * u.c[1] * u.c[1];
  return r;
}

template <int K>
inline Jet<K> exp(const Jet<K>& u) {
  const double e = std::exp(u.c[0]);
  return compose(u, e, e, e);
}

template <int K>
inline Jet<K> log(const Jet<K>& u) {
  const double v = u.c[0];
  return compose(u, std::log(v), 1.0 / v, -1.0 / (v * v));
}

template <int K>
inline Jet<K> sin(const Jet<K>& u) {
  const double s = std::sin(u.c[0]), co = std::cos(u.c[0]);
  return compose(u, s, co, -s);
}

template <int K>
inline Jet<K> cos(const Jet<K>& u) {
  const double s = std::sin(u.c[0]), co = std::cos(u.c[0]);
  return compose(u, co, -s, -co);
}

template <int K>
inline Jet<K> tanh(const Jet<K>& u) {
  const double t = std::tanh(u.c[0]);
  const double s = 1.0 - t * t;  // sech^2
  return compose(u, t, s, -2.0 * t * s);
}

template <int K>
inline Jet<K> sqrt(const Jet<K>& u) {
  const double r = std::sqrt(u.c[0]);
  return compose(u, r, 0.5 / r, -0.25 / (r * r * r));
}

/// u^p for constant real exponent p. Factors that vanish algebraically are
/// dropped before evaluating the power, so pow(u, 2) is safe at u = 0.
template <int K>
inline Jet<K> pow(const Jet<K>& u, double p) {
  const double v = u.c[0];
  const double f0 = std::pow(v, p);
  const double f1 = p == 0.0 ? 0.0 : p * std::pow(v, p - 1.0);
  const double c2 = p * (p - 1.0);
  const double f2 = c2 == 0.0 ? 0.0 : c2 * std::pow(v, p - 2.0);
  return compose(u, f0, f1, f2);
}

/// Branch on leading coefficients; ties go to the right argument, so
/// max(x, 0) has derivative 0 at x = 0.
template <int K>
inline Jet<K> max(const Jet<K>& a, const Jet<K>& b) {
  return a.c[0] > b.c[0] ? a : b;
}

template <int K>
inline Jet<K> operator+(Jet<K> a, double s) {
  a.c[0] += s;
  return a;
}
template <int K>
inline Jet<K> operator+(double s, Jet<K> a) {
  a.c[0] += s;
  return a;
}
template <int K>
inline Jet<K> operator-(Jet<K> a, double s) {
  a.c[0] -= s;
  return a;
}
template <int K>
inline Jet<K> operator-(double s, const Jet<K>& a) {
  Jet<K> r = -a;
  r.c[0] += s;
  return r;
}

using Jet1 = Jet<1>;
using Jet2 = Jet<2>;
using Jet3 = Jet<3>;

}  // namespace pinn::ad
