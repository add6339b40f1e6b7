#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "doctest.h"
#include "pinn/checkpoint.hpp"
#include "pinn/network.hpp"

using namespace pinn;
using namespace pinn::net;

namespace {

double eval1(const NetworkSpec& spec, const Parameters& p, const std::vector<double>& x) {
  ad::Tape1 tape;
  std::vector<ad::Var1> in;
  for (double v : x) in.push_back(tape.input(ad::Jet1(v)));
  return forward<1>(spec, p, in, tape)[0].value();
}

}  // namespace

TEST_CASE("affine single-layer network is the identity map when configured so") {
  NetworkSpec spec{.layers = {1, 1}};
  Parameters p = Parameters::zeros(spec);
  p.weight(1, 0, 0) = 1.0;
  CHECK(eval1(spec, p, {3.0}) == doctest::Approx(3.0));
}

TEST_CASE("hand-set two-input tanh unit reproduces the worked value") {
  NetworkSpec spec{.layers = {2, 1, 1}};
  Parameters p = Parameters::zeros(spec);
  p.weight(1, 0, 0) = -2.0;
  p.weight(1, 0, 1) = 3.0;
  p.bias(1, 0) = 0.5;
  p.weight(2, 0, 0) = 2.0;
  p.bias(2, 0) = -1.0;
  CHECK(eval1(spec, p, {2.0, 1.0}) == doctest::Approx(-1.924).epsilon(1e-3));
}

TEST_CASE("zero parameters give zero output") {
  NetworkSpec spec{.layers = {3, 8, 8, 2}};
  Parameters p = Parameters::zeros(spec);
  ad::Tape1 tape;
  std::vector<ad::Var1> in{tape.input(ad::Jet1(0.3)), tape.input(ad::Jet1(-1.0)),
                           tape.input(ad::Jet1(2.0))};
  for (const ad::Var1& out : forward<1>(spec, p, in, tape)) CHECK(out.value() == 0.0);
}

TEST_CASE("parameter bookkeeping") {
  NetworkSpec spec{.layers = {2, 5, 3}, .externals = 2};
  CHECK(spec.parameter_count() == (5 * 2 + 5) + (3 * 5 + 3) + 2);

  Parameters p = Parameters::zeros(spec);
  CHECK(p.count() == spec.parameter_count());
  p.external(0) = 4.5;
  p.external(1) = -2.0;
  CHECK(p.values[p.count() - 2] == 4.5);
  CHECK(p.values[p.count() - 1] == -2.0);

  NetworkSpec other{.layers = {2, 4, 3}};
  CHECK_THROWS_AS(p.check_shape(other), StructuralError);
  CHECK_THROWS_AS(NetworkSpec{.layers = {3}}.validate(), StructuralError);
  CHECK_THROWS_AS((NetworkSpec{.layers = {3, 0, 1}}).validate(), StructuralError);
}

TEST_CASE("glorot initialization: determinism, seed sensitivity, bounds") {
  NetworkSpec spec{.layers = {3, 10, 10, 1}};
  Parameters a = init(spec, 7);
  Parameters b = init(spec, 7);
  CHECK(a.values == b.values);

  Parameters c = init(spec, 8);
  CHECK(a.values != c.values);

  for (size_t l = 1; l < spec.layers.size(); ++l) {
    const double limit =
        std::sqrt(6.0 / (spec.layers[l - 1] + spec.layers[l]));
    for (int i = 0; i < spec.layers[l]; ++i) {
      for (int j = 0; j < spec.layers[l - 1]; ++j) {
        CHECK(std::abs(a.weight(static_cast<int>(l), i, j)) <= limit);
      }
      CHECK(a.bias(static_cast<int>(l), i) == 0.0);
    }
  }
}

TEST_CASE("forward rejects mismatched input dimension") {
  NetworkSpec spec{.layers = {2, 3, 1}};
  Parameters p = init(spec, 1);
  ad::Tape1 tape;
  std::vector<ad::Var1> in{tape.input(ad::Jet1(0.1))};
  CHECK_THROWS_AS(forward<1>(spec, p, in, tape), StructuralError);
}

TEST_CASE("input gradients of forward match finite differences") {
  NetworkSpec spec{.layers = {2, 7, 5, 1}};
  Parameters p = init(spec, 21);
  auto f = [&](std::vector<double> x) { return eval1(spec, p, x); };
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x{dist(rng), dist(rng)};
    ad::Tape1 tape;
    std::vector<ad::Var1> in{tape.input(ad::Jet1(x[0])), tape.input(ad::Jet1(x[1]))};
    ad::Gradient<1> g = tape.backward(forward<1>(spec, p, in, tape)[0]);
    for (int i = 0; i < 2; ++i) {
      std::vector<double> xp = x, xm = x;
      xp[static_cast<size_t>(i)] += 1e-5;
      xm[static_cast<size_t>(i)] -= 1e-5;
      const double fd = (f(xp) - f(xm)) / 2e-5;
      CHECK(g.wrt(in[static_cast<size_t>(i)]) ==
            doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("parameter gradients through the trainable forward match finite differences") {
  NetworkSpec spec{.layers = {2, 4, 1}};
  Parameters p = init(spec, 33);
  const std::vector<double> x{0.4, -0.7};

  ad::Tape1 tape;
  std::vector<ad::Var1> theta;
  for (double v : p.values) theta.push_back(tape.input(ad::Jet1(v)));
  std::vector<ad::Var1> in{tape.input(ad::Jet1(x[0])), tape.input(ad::Jet1(x[1]))};
  ad::Gradient<1> g = tape.backward(forward_trainable<1>(spec, theta, in, tape)[0]);

  for (size_t k = 0; k < p.count(); k += 3) {
    Parameters pp = p, pm = p;
    pp.values[k] += 1e-6;
    pm.values[k] -= 1e-6;
    const double fd = (eval1(spec, pp, x) - eval1(spec, pm, x)) / 2e-6;
    CHECK(g.wrt(theta[k]) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("sigmoid and relu activations") {
  NetworkSpec spec{.layers = {1, 1, 1}, .activation = Activation::kSigmoid};
  Parameters p = Parameters::zeros(spec);
  p.weight(1, 0, 0) = 1.0;
  p.weight(2, 0, 0) = 1.0;
  CHECK(eval1(spec, p, {0.0}) == doctest::Approx(0.5));
  CHECK(eval1(spec, p, {100.0}) == doctest::Approx(1.0));

  spec.activation = Activation::kRelu;
  CHECK(eval1(spec, p, {-2.0}) == doctest::Approx(0.0));
  CHECK(eval1(spec, p, {3.0}) == doctest::Approx(3.0));

  CHECK(activation_from_name("sigmoid") == Activation::kSigmoid);
  CHECK_THROWS_AS(activation_from_name("softplus"), StructuralError);
}

TEST_CASE("output transform pins boundary values") {
  NetworkSpec spec{.layers = {1, 6, 1}};
  Parameters p = init(spec, 9);
  OutputTransform hard = OutputTransform::make([](const auto& x, const auto& raw) {
    return std::vector{x[0] * (x[0] - 1.0) * raw[0]};
  });

  auto eval_hard = [&](double xv) {
    ad::Tape1 tape;
    std::vector<ad::Var1> in{tape.input(ad::Jet1(xv))};
    auto raw = forward<1>(spec, p, in, tape);
    return hard.apply<1>(in, raw, tape)[0].value();
  };
  CHECK(eval_hard(0.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(eval_hard(1.0) == doctest::Approx(0.0).epsilon(1e-14));

  // with the raw output forced to 1, the transform value is pure arithmetic
  NetworkSpec unit{.layers = {1, 1}};
  Parameters pu = Parameters::zeros(unit);
  pu.bias(1, 0) = 1.0;
  ad::Tape1 tape;
  std::vector<ad::Var1> in{tape.input(ad::Jet1(0.5))};
  auto raw = forward<1>(unit, pu, in, tape);
  CHECK(hard.apply<1>(in, raw, tape)[0].value() == doctest::Approx(-0.25));

  OutputTransform id;
  CHECK(id.is_identity());
  CHECK(id.apply<1>(in, raw, tape)[0].value() == raw[0].value());
}

TEST_CASE("checkpoint round trip is exact") {
  NetworkSpec spec{.layers = {2, 5, 1}, .externals = 1};
  Parameters p = init(spec, 1234);
  p.external(0) = 0.123456789012345678;

  Checkpoint ck{spec, p, 42, {}};
  ck.optimizer["kind"] = "adam";
  ck.optimizer["m"] = std::vector<double>{0.25, -1e-17};
  const std::string path = "checkpoint_roundtrip_test.json";
  save_checkpoint(path, ck);
  Checkpoint back = load_checkpoint(path);
  std::remove(path.c_str());

  CHECK(back.spec == spec);
  CHECK(back.iteration == 42);
  REQUIRE(back.params.values.size() == p.values.size());
  for (size_t i = 0; i < p.values.size(); ++i) CHECK(back.params.values[i] == p.values[i]);
  CHECK(back.optimizer["kind"] == "adam");
  CHECK(back.optimizer["m"][1].get<double>() == -1e-17);

  CHECK_THROWS_AS(load_checkpoint("does_not_exist.json"), StructuralError);
}
