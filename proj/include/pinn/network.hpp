#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pinn/errors.hpp"
#include "pinn/tape.hpp"

namespace pinn::net {

enum class Activation { kTanh, kSigmoid, kRelu };

Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

/// Fully connected feed-forward architecture: layers[0] inputs, hidden
/// widths, layers.back() outputs. The final layer is affine (no activation).
struct NetworkSpec {
  std::vector<int> layers;
  Activation activation = Activation::kTanh;
  /// Extra trainable scalars appended to the parameter vector (unknown
  /// physical coefficients in inverse problems).
  int externals = 0;

  void validate() const;
  int input_dim() const { return layers.front(); }
  int output_dim() const { return layers.back(); }
  int layer_count() const { return static_cast<int>(layers.size()) - 1; }
  size_t parameter_count() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// Flat trainable state: for each layer, row-major weights then biases;
/// externals at the tail. flatten/unflatten is the identity on `values`.
struct Parameters {
  std::vector<int> layers;
  int externals = 0;
  std::vector<double> values;

  static Parameters zeros(const NetworkSpec& spec);

  size_t count() const { return values.size(); }
  size_t weight_offset(int l) const;
  size_t bias_offset(int l) const;
  size_t external_offset(int k) const;

  double& weight(int l, int i, int j);
  double weight(int l, int i, int j) const;
  double& bias(int l, int i);
  double bias(int l, int i) const;
  double& external(int k);
  double external(int k) const;

  void check_shape(const NetworkSpec& spec) const;
};

/// Glorot-uniform weights, zero biases and externals; deterministic per seed.
Parameters init(const NetworkSpec& spec, unsigned long long seed);

namespace detail {

template <int K, class GetW, class GetB>
std::vector<ad::Var<K>> forward_impl(const NetworkSpec& spec, GetW&& w, GetB&& b,
                                     std::span<const ad::Var<K>> x, ad::Tape<K>& tape) {
  if (static_cast<int>(x.size()) != spec.input_dim()) {
    throw StructuralError("forward: input dimension does not match the network");
  }
  std::vector<ad::Var<K>> a(x.begin(), x.end());
  const int L = spec.layer_count();
  for (int l = 1; l <= L; ++l) {
    const int rows = spec.layers[static_cast<size_t>(l)];
    const int cols = spec.layers[static_cast<size_t>(l - 1)];
    std::vector<ad::Var<K>> z;
    z.reserve(static_cast<size_t>(rows));
    for (int i = 0; i < rows; ++i) {
      ad::Var<K> acc = a[0] * w(l, i, 0);
      for (int j = 1; j < cols; ++j) acc = acc + a[static_cast<size_t>(j)] * w(l, i, j);
      acc = acc + b(l, i);
      if (l < L) {
        switch (spec.activation) {
          case Activation::kTanh: acc = tanh(acc); break;
          case Activation::kSigmoid: acc = 1.0 / (exp(-acc) + 1.0); break;
          case Activation::kRelu: acc = max(acc, tape.constant(0.0)); break;
        }
      }
      z.push_back(acc);
    }
    a = std::move(z);
  }
  return a;
}

}  // namespace detail

/// Records the network evaluation on the tape with fixed parameters.
/// Gradients flow to the inputs only.
template <int K>
std::vector<ad::Var<K>> forward(const NetworkSpec& spec, const Parameters& params,
                                std::span<const ad::Var<K>> x, ad::Tape<K>& tape) {
  params.check_shape(spec);
  return detail::forward_impl<K>(
      spec, [&](int l, int i, int j) { return params.weight(l, i, j); },
      [&](int l, int i) { return params.bias(l, i); }, x, tape);
}

/// Same evaluation with the flat parameter vector living on the tape, so one
/// reverse sweep yields parameter gradients as well.
template <int K>
std::vector<ad::Var<K>> forward_trainable(const NetworkSpec& spec,
                                          std::span<const ad::Var<K>> theta,
                                          std::span<const ad::Var<K>> x, ad::Tape<K>& tape) {
  if (theta.size() != spec.parameter_count()) {
    throw StructuralError("forward: parameter vector length does not match the network");
  }
  Parameters shape = Parameters::zeros(spec);
  return detail::forward_impl<K>(
      spec, [&](int l, int i, int j) { return theta[shape.weight_offset(l) + static_cast<size_t>(i * spec.layers[static_cast<size_t>(l - 1)] + j)]; },
      [&](int l, int i) { return theta[shape.bias_offset(l) + static_cast<size_t>(i)]; }, x, tape);
}

/// Optional hard-constraint map from (x, raw network output) to the
/// surrogate. Stored generically so it can be replayed at every
/// differentiation order.
class OutputTransform {
 public:
  OutputTransform() = default;  // identity

  template <class F>
  static OutputTransform make(F f) {
    OutputTransform t;
    t.f1_ = f;
    t.f2_ = f;
    t.f3_ = f;
    return t;
  }

  bool is_identity() const { return !f1_; }

  template <int K>
  std::vector<ad::Var<K>> apply(std::span<const ad::Var<K>> x, std::span<const ad::Var<K>> raw,
                                ad::Tape<K>&) const {
    const auto& f = fn<K>();
    if (!f) return {raw.begin(), raw.end()};
    return f(std::vector<ad::Var<K>>(x.begin(), x.end()),
             std::vector<ad::Var<K>>(raw.begin(), raw.end()));
  }

 private:
  template <int K>
  using Fn = std::function<std::vector<ad::Var<K>>(const std::vector<ad::Var<K>>&,
                                                   const std::vector<ad::Var<K>>&)>;

  template <int K>
  const Fn<K>& fn() const {
    if constexpr (K == 1) {
      return f1_;
    } else if constexpr (K == 2) {
      return f2_;
    } else {
      return f3_;
    }
  }

  Fn<1> f1_;
  Fn<2> f2_;
  Fn<3> f3_;
};

}  // namespace pinn::net
