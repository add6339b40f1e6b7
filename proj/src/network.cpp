#include "pinn/network.hpp"

#include <cmath>
#include <random>

namespace pinn::net {

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "relu") return Activation::kRelu;
  throw StructuralError("unknown activation '" + name + "' (tanh, sigmoid, relu)");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

void NetworkSpec::validate() const {
  if (layers.size() < 2) throw StructuralError("network: need at least input and output layers");
  for (int n : layers) {
    if (n < 1) throw StructuralError("network: layer sizes must be positive");
  }
  if (externals < 0) throw StructuralError("network: externals count must be nonnegative");
}

size_t NetworkSpec::parameter_count() const {
  size_t count = static_cast<size_t>(externals);
  for (size_t l = 1; l < layers.size(); ++l) {
    count += static_cast<size_t>(layers[l]) * (layers[l - 1] + 1);
  }
  return count;
}

Parameters Parameters::zeros(const NetworkSpec& spec) {
  spec.validate();
  Parameters p;
  p.layers = spec.layers;
  p.externals = spec.externals;
  p.values.assign(spec.parameter_count(), 0.0);
  return p;
}

size_t Parameters::weight_offset(int l) const {
  size_t off = 0;
  for (int m = 1; m < l; ++m) {
    off += static_cast<size_t>(layers[static_cast<size_t>(m)]) *
           (layers[static_cast<size_t>(m - 1)] + 1);
  }
  return off;
}

size_t Parameters::bias_offset(int l) const {
  return weight_offset(l) + static_cast<size_t>(layers[static_cast<size_t>(l)]) *
                                static_cast<size_t>(layers[static_cast<size_t>(l - 1)]);
}

size_t Parameters::external_offset(int k) const {
  return values.size() - static_cast<size_t>(externals) + static_cast<size_t>(k);
}

double& Parameters::weight(int l, int i, int j) {
  return values[weight_offset(l) + static_cast<size_t>(i * layers[static_cast<size_t>(l - 1)] + j)];
}
double Parameters::weight(int l, int i, int j) const {
  return values[weight_offset(l) + static_cast<size_t>(i * layers[static_cast<size_t>(l - 1)] + j)];
}
double& Parameters::bias(int l, int i) { return values[bias_offset(l) + static_cast<size_t>(i)]; }
double Parameters::bias(int l, int i) const {
  return values[bias_offset(l) + static_cast<size_t>(i)];
}
double& Parameters::external(int k) { return values[external_offset(k)]; }
double Parameters::external(int k) const { return values[external_offset(k)]; }

void Parameters::check_shape(const NetworkSpec& spec) const {
  if (layers != spec.layers || externals != spec.externals ||
      values.size() != spec.parameter_count()) {
    throw StructuralError("parameters do not match the network spec");
  }
}

Parameters init(const NetworkSpec& spec, unsigned long long seed) {
  Parameters p = Parameters::zeros(spec);
  std::mt19937_64 rng(seed);
  for (size_t l = 1; l < spec.layers.size(); ++l) {
    const int fan_in = spec.layers[l - 1];
    const int fan_out = spec.layers[l];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) p.weight(static_cast<int>(l), i, j) = dist(rng);
    }
  }
  return p;
}

}  // namespace pinn::net
