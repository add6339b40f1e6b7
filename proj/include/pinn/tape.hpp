#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pinn/errors.hpp"
#include "pinn/jet.hpp"

namespace pinn::ad {

enum class Op : std::uint8_t {
  kConst,
  kInput,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kSin,
  kCos,
  kTanh,
  kSqrt,
  kPow,
  kMax,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kConst: return "const";
    case Op::kInput: return "input";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kTanh: return "tanh";
    case Op::kSqrt: return "sqrt";
    case Op::kPow: return "pow";
    case Op::kMax: return "max";
  }
  return "?";
}

template <int K>
class Tape;

/// Handle to one recorded node. Valid only against the tape that created it.
template <int K>
class Var {
 public:
  Var() = default;
  Var(Tape<K>* tape, int index) : tape_(tape), index_(index) {}

  Tape<K>* tape() const { return tape_; }
  int index() const { return index_; }
  double value() const;
  const Jet<K>& jet() const;

 private:
  Tape<K>* tape_ = nullptr;
  int index_ = -1;
};

/// Result of a reverse sweep: one adjoint per recorded node, indexed like the
/// tape. Entry l of an adjoint is the derivative of the seeded functional with
/// respect to Taylor coefficient l of that node.
template <int K>
struct Gradient {
  std::vector<Jet<K>> adjoints;

  const Jet<K>& adjoint(const Var<K>& v) const { return adjoints[static_cast<size_t>(v.index())]; }
  /// Plain derivative of the seeded output w.r.t. the node's value.
  double wrt(const Var<K>& v) const { return adjoints[static_cast<size_t>(v.index())].c[0]; }
};

/// Adjoint accumulation through a node whose local partial is the jet `p`:
/// adj[l] += sum_{m >= l} out_adj[m] * p[m-l].
template <int K>
inline void accumulate_adjoint(Jet<K>& adj, const Jet<K>& out_adj, const Jet<K>& p) {
  if constexpr (K == 1) {
    adj.c[0] += out_adj.c[0] * p.c[0];
  } else if constexpr (K == 2) {
    adj.c[0] += out_adj.c[0] * p.c[0] + out_adj.c[1] * p.c[1];
    adj.c[1] += out_adj.c[1] * p.c[0];
  } else {
    adj.c[0] += out_adj.c[0] * p.c[0] + out_adj.c[1] * p.c[1] + out_adj.c[2] * p.c[2];
    adj.c[1] += out_adj.c[1] * p.c[0] + out_adj.c[2] * p.c[1];
    adj.c[2] += out_adj.c[2] * p.c[0];
  }
}

/// Append-only record of primitive operations. Nodes store their forward
/// value and the local partial derivatives toward each parent, both as jets,
/// so one reverse sweep yields derivatives of any linear functional of the
/// output coefficients. Confined to a single thread.
template <int K>
class Tape {
 public:
  struct Node {
    Op op;
    std::int32_t a = -1;
    std::int32_t b = -1;
    Jet<K> pa{};
    Jet<K> pb{};
    Jet<K> val{};
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int i) const { return nodes_[static_cast<size_t>(i)]; }
  int sweep_count() const { return sweeps_; }

  /// Drops all nodes but keeps capacity; existing Vars become invalid.
  void clear() { nodes_.clear(); }

  Var<K> constant(double v) { return push(Op::kConst, -1, -1, {}, {}, Jet<K>(v)); }

  Var<K> input(const Jet<K>& v) { return push(Op::kInput, -1, -1, {}, {}, v); }

  /// Low-level node append. `partials` must match `parents` in length
  /// (at most two of each).
  Var<K> record(Op op, std::span<const int> parents, const Jet<K>& value,
                std::span<const Jet<K>> partials) {
    if (parents.size() != partials.size() || parents.size() > 2) {
      throw StructuralError("record: partials count must match parents count (max 2)");
    }
    for (int p : parents) {
      if (p < 0 || p >= size()) throw StructuralError("record: parent node does not exist");
    }
    const int a = parents.size() > 0 ? parents[0] : -1;
    const int b = parents.size() > 1 ? parents[1] : -1;
    const Jet<K> pa = partials.size() > 0 ? partials[0] : Jet<K>{};
    const Jet<K> pb = partials.size() > 1 ? partials[1] : Jet<K>{};
    return push(op, a, b, pa, pb, value);
  }

  /// Reverse sweep seeded with 1 on the output value: adjoint l=0 entries are
  /// the classic derivatives d(output)/d(node).
  Gradient<K> backward(const Var<K>& output) {
    Jet<K> seed;
    seed.c[0] = 1.0;
    return backward_seeded(output, seed);
  }

  /// Reverse sweep seeded with an arbitrary linear functional
  /// S = sum_l seed[l] * coeff_l(output).
  Gradient<K> backward_seeded(const Var<K>& output, const Jet<K>& seed) {
    const std::pair<Var<K>, Jet<K>> one[]{{output, seed}};
    return backward_multi(one);
  }

  /// Reverse sweep for a functional of several outputs at once; adjoints of
  /// shared subexpressions accumulate across all seeds.
  Gradient<K> backward_multi(std::span<const std::pair<Var<K>, Jet<K>>> seeds) {
    int top = -1;
    for (const auto& [v, seed] : seeds) {
      check_owned(v, "backward");
      top = std::max(top, v.index());
    }
    ++sweeps_;
    Gradient<K> g;
    g.adjoints.assign(nodes_.size(), Jet<K>{});
    for (const auto& [v, seed] : seeds) g.adjoints[static_cast<size_t>(v.index())] += seed;
    for (int i = top; i >= 0; --i) {
      const Node& n = nodes_[static_cast<size_t>(i)];
      const Jet<K>& out_adj = g.adjoints[static_cast<size_t>(i)];
      if (n.a >= 0) accumulate_adjoint(g.adjoints[static_cast<size_t>(n.a)], out_adj, n.pa);
      if (n.b >= 0) accumulate_adjoint(g.adjoints[static_cast<size_t>(n.b)], out_adj, n.pb);
    }
    return g;
  }

  void check_owned(const Var<K>& v, const char* what) const {
    if (v.tape() != this || v.index() < 0 || v.index() >= size()) {
      throw StructuralError(std::string(what) + ": variable does not belong to this tape");
    }
  }

  Var<K> unary(Op op, const Var<K>& a, const Jet<K>& value, const Jet<K>& pa) {
    check_owned(a, op_name(op));
    return push(op, a.index(), -1, pa, {}, value);
  }

  Var<K> binary(Op op, const Var<K>& a, const Var<K>& b, const Jet<K>& value, const Jet<K>& pa,
                const Jet<K>& pb) {
    check_owned(a, op_name(op));
    check_owned(b, op_name(op));
    return push(op, a.index(), b.index(), pa, pb, value);
  }

 private:
  Var<K> push(Op op, int a, int b, const Jet<K>& pa, const Jet<K>& pb, const Jet<K>& val) {
    for (int i = 0; i < K; ++i) {
      if (!std::isfinite(val.c[i])) {
        throw NumericError(std::string("non-finite value produced by op '") + op_name(op) +
                           "' at node " + std::to_string(size()));
      }
    }
    nodes_.push_back(Node{op, a, b, pa, pb, val});
    return Var<K>(this, size() - 1);
  }

  std::vector<Node> nodes_;
  int sweeps_ = 0;
};

template <int K>
double Var<K>::value() const {
  return tape_->node(index_).val.c[0];
}
template <int K>
const Jet<K>& Var<K>::jet() const {
  return tape_->node(index_).val;
}

// ---- arithmetic on tape variables ----

template <int K>
inline Var<K> operator+(const Var<K>& a, const Var<K>& b) {
  return a.tape()->binary(Op::kAdd, a, b, a.jet() + b.jet(), Jet<K>(1.0), Jet<K>(1.0));
}
template <int K>
inline Var<K> operator-(const Var<K>& a, const Var<K>& b) {
  return a.tape()->binary(Op::kSub, a, b, a.jet() - b.jet(), Jet<K>(1.0), Jet<K>(-1.0));
}
template <int K>
inline Var<K> operator*(const Var<K>& a, const Var<K>& b) {
  return a.tape()->binary(Op::kMul, a, b, a.jet() * b.jet(), b.jet(), a.jet());
}
template <int K>
inline Var<K> operator/(const Var<K>& a, const Var<K>& b) {
  const Jet<K> rb = recip(b.jet());
  const Jet<K> w = a.jet() * rb;
  return a.tape()->binary(Op::kDiv, a, b, w, rb, -(w * rb));
}
template <int K>
inline Var<K> operator-(const Var<K>& a) {
  return a.tape()->unary(Op::kNeg, a, -a.jet(), Jet<K>(-1.0));
}

template <int K>
inline Var<K> operator+(const Var<K>& a, double s) {
  return a.tape()->unary(Op::kAdd, a, a.jet() + s, Jet<K>(1.0));
}
template <int K>
inline Var<K> operator+(double s, const Var<K>& a) {
  return a + s;
}
template <int K>
inline Var<K> operator-(const Var<K>& a, double s) {
  return a + (-s);
}
template <int K>
inline Var<K> operator-(double s, const Var<K>& a) {
  return a.tape()->unary(Op::kSub, a, s - a.jet(), Jet<K>(-1.0));
}
template <int K>
inline Var<K> operator*(const Var<K>& a, double s) {
  return a.tape()->unary(Op::kMul, a, a.jet() * s, Jet<K>(s));
}
template <int K>
inline Var<K> operator*(double s, const Var<K>& a) {
  return a * s;
}
template <int K>
inline Var<K> operator/(const Var<K>& a, double s) {
  return a * (1.0 / s);
}
template <int K>
inline Var<K> operator/(double s, const Var<K>& a) {
  const Jet<K> rb = recip(a.jet());
  return a.tape()->unary(Op::kDiv, a, rb * s, -(rb * rb) * s);
}

template <int K>
inline Var<K> exp(const Var<K>& a) {
  const Jet<K> w = exp(a.jet());
  return a.tape()->unary(Op::kExp, a, w, w);
}
template <int K>
inline Var<K> log(const Var<K>& a) {
  return a.tape()->unary(Op::kLog, a, log(a.jet()), recip(a.jet()));
}
template <int K>
inline Var<K> sin(const Var<K>& a) {
  return a.tape()->unary(Op::kSin, a, sin(a.jet()), cos(a.jet()));
}
template <int K>
inline Var<K> cos(const Var<K>& a) {
  return a.tape()->unary(Op::kCos, a, cos(a.jet()), -sin(a.jet()));
}
template <int K>
inline Var<K> tanh(const Var<K>& a) {
  const Jet<K> w = tanh(a.jet());
  return a.tape()->unary(Op::kTanh, a, w, 1.0 - w * w);
}
template <int K>
inline Var<K> sqrt(const Var<K>& a) {
  const Jet<K> w = sqrt(a.jet());
  return a.tape()->unary(Op::kSqrt, a, w, 0.5 * recip(w));
}
template <int K>
inline Var<K> pow(const Var<K>& a, double p) {
  const Jet<K>& u = a.jet();
  const double v = u.c[0];
  const double f1 = p == 0.0 ? 0.0 : p * std::pow(v, p - 1.0);
  const double c2 = p * (p - 1.0);
  const double f2 = c2 == 0.0 ? 0.0 : c2 * std::pow(v, p - 2.0);
  const double c3 = c2 * (p - 2.0);
  const double f3 = c3 == 0.0 ? 0.0 : c3 * std::pow(v, p - 3.0);
  return a.tape()->unary(Op::kPow, a, pow(u, p), compose(u, f1, f2, f3));
}
template <int K>
inline Var<K> max(const Var<K>& a, const Var<K>& b) {
  // Ties resolve toward b, so max(x, 0) has zero derivative at x = 0.
  const bool left = a.jet().c[0] > b.jet().c[0];
  return a.tape()->binary(Op::kMax, a, b, left ? a.jet() : b.jet(), Jet<K>(left ? 1.0 : 0.0),
                          Jet<K>(left ? 0.0 : 1.0));
}
template <int K>
inline Var<K> square(const Var<K>& a) {
  return a * a;
}

using Tape1 = Tape<1>;
using Tape2 = Tape<2>;
using Var1 = Var<1>;
using Var2 = Var<2>;

/// d^order f / (dx_i dx_j) at x, for a functor f(vector<Var<K>>) -> Var<K>
/// generic in K. Order 1 ignores j and runs one reverse sweep. Order 2
/// carries a tangent along x_j forward and seeds the reverse sweep on the
/// tangent slot, so one sweep per direction yields a Hessian column.
template <typename F>
inline double derivative(F&& f, std::span<const double> x, int order, int i, int j = 0) {
  const int n = static_cast<int>(x.size());
  if (i < 0 || i >= n || j < 0 || j >= n) throw DomainError("derivative: index out of range");
  if (order == 1) {
    Tape<1> tape;
    std::vector<Var<1>> in;
    in.reserve(x.size());
    for (double v : x) in.push_back(tape.input(Jet1(v)));
    const Var<1> y = f(in);
    return tape.backward(y).wrt(in[static_cast<size_t>(i)]);
  }
  if (order == 2) {
    Tape<2> tape;
    std::vector<Var<2>> in;
    in.reserve(x.size());
    for (int k = 0; k < n; ++k) in.push_back(tape.input(Jet2(x[k], k == j ? 1.0 : 0.0)));
    const Var<2> y = f(in);
    const Gradient<2> g = tape.backward_seeded(y, Jet2(0.0, 1.0));
    return g.adjoint(in[static_cast<size_t>(i)]).c[0];
  }
  throw UnsupportedError("derivative: only orders 1 and 2 are implemented");
}

}  // namespace pinn::ad
