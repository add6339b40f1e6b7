#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "doctest.h"
#include "pinn/engine.hpp"
#include "pinn/errors.hpp"
#include "pinn/geometry.hpp"
#include "pinn/network.hpp"
#include "pinn/problem.hpp"
#include "pinn/quadrature.hpp"

using namespace pinn;
using eng::Evaluator;
using eng::LossGrad;
using eng::PointEngine;
using geom::Point;
using geom::PointSet;
using prob::Condition;
using prob::ObservationSet;
using prob::Residual;
using prob::ResidualCtx;

namespace {

constexpr double kPi = std::numbers::pi;

// Glorot weights plus nonzero biases and externals, so gradient checks do not
// sit on the zero-bias special case.
net::Parameters make_params(const net::NetworkSpec& spec, unsigned long long seed) {
  net::Parameters p = net::init(spec, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (int l = 1; l <= spec.layer_count(); ++l) {
    for (int i = 0; i < spec.layers[static_cast<size_t>(l)]; ++i) p.bias(l, i) = u(rng);
  }
  for (int k = 0; k < spec.externals; ++k) p.external(k) = 1.0 + u(rng);
  return p;
}

template <class F>
std::vector<double> fd_grad(const net::Parameters& base, F&& f, double h) {
  net::Parameters p = base;
  std::vector<double> g(p.count(), 0.0);
  for (size_t i = 0; i < p.count(); ++i) {
    const double keep = p.values[i];
    p.values[i] = keep + h;
    const double up = f(p);
    p.values[i] = keep - h;
    const double dn = f(p);
    p.values[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

void check_close(const std::vector<double>& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    CAPTURE(i);
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(tol));
  }
}

template <class F>
net::OutputTransform transform_of(F f) {
  return net::OutputTransform::make([f](const auto& x, const auto& raw) { return f(x, raw); });
}

// u_hat = x0 * (1 - x0) * raw, pinning the value at both interval ends.
net::OutputTransform pinned_interval_transform() {
  return transform_of([](const auto& x, const auto& raw) {
    auto out = raw;
    for (auto& o : out) o = x[0] * (1.0 - x[0]) * o;
    return out;
  });
}

PointSet random_points(int n, int dim, double lo, double hi, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  PointSet pts;
  pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Point x(static_cast<size_t>(dim));
    for (double& v : x) v = u(rng);
    pts.push_back(std::move(x));
  }
  return pts;
}

}  // namespace

TEST_CASE("engine passes agree with the reference probe") {
  struct Case {
    net::NetworkSpec spec;
    bool transformed;
  };
  const std::vector<Case> cases = {
      {{{1, 8, 1}, net::Activation::kTanh, 0}, false},
      {{{2, 6, 5, 2}, net::Activation::kSigmoid, 0}, false},
      {{{2, 7, 3}, net::Activation::kRelu, 0}, false},
      {{{3, 5, 5, 2}, net::Activation::kTanh, 0}, false},
      {{{1, 6, 1}, net::Activation::kTanh, 0}, true},
      {{{2, 5, 4, 2}, net::Activation::kSigmoid, 0}, true},
  };
  unsigned long long seed = 11;
  for (const Case& tc : cases) {
    CAPTURE(tc.spec.layers.size());
    const net::NetworkSpec& spec = tc.spec;
    const net::Parameters p = make_params(spec, seed++);
    const net::OutputTransform tf =
        tc.transformed ? pinned_interval_transform() : net::OutputTransform{};
    const int dim = spec.input_dim();
    for (const Point& x : random_points(5, dim, 0.05, 0.95, seed++)) {
      PointEngine engine(spec, tf, p, x);
      eng::EngineProbe got(engine);
      prob::NetworkProbe want(spec, p, tf, x);
      for (int c = 0; c < spec.output_dim(); ++c) {
        CHECK(got.value(c) == doctest::Approx(want.value(c)).epsilon(1e-12));
        for (int a = 0; a < dim; ++a) {
          CHECK(got.first(c, a) == doctest::Approx(want.first(c, a)).epsilon(1e-12));
          CHECK(got.second(c, a) == doctest::Approx(want.second(c, a)).epsilon(1e-12));
        }
      }
      const Point other(static_cast<size_t>(dim), 0.25);
      CHECK(got.value_at(other, 0) == doctest::Approx(want.value_at(other, 0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward_values matches the reference probe") {
  const net::NetworkSpec spec{{2, 6, 2}, net::Activation::kTanh, 0};
  const net::Parameters p = make_params(spec, 3);
  const net::OutputTransform tf = pinned_interval_transform();
  const Point x{0.3, 0.8};
  const std::vector<double> vals = eng::forward_values(spec, tf, p, x);
  prob::NetworkProbe want(spec, p, tf, x);
  REQUIRE(vals.size() == 2);
  CHECK(vals[0] == doctest::Approx(want.value(0)).epsilon(1e-14));
  CHECK(vals[1] == doctest::Approx(want.value(1)).epsilon(1e-14));
}

TEST_CASE("layer reverse sweep matches whole-graph tape adjoints") {
  // Reference: put every trainable scalar on a jet tape, run the same forward
  // with the probe direction in the input tangents, and pull multi-channel
  // adjoints back with one seeded sweep.
  struct Case {
    net::NetworkSpec spec;
    bool transformed;
  };
  const std::vector<Case> cases = {
      {{{2, 6, 5, 2}, net::Activation::kTanh, 0}, false},
      {{{2, 5, 2}, net::Activation::kSigmoid, 0}, false},
      {{{1, 6, 1}, net::Activation::kTanh, 0}, true},
      {{{2, 4, 4, 2}, net::Activation::kTanh, 0}, true},
  };
  unsigned long long seed = 101;
  for (const Case& tc : cases) {
    const net::NetworkSpec& spec = tc.spec;
    const net::OutputTransform tf =
        tc.transformed ? pinned_interval_transform() : net::OutputTransform{};
    const net::Parameters p = make_params(spec, seed++);
    const Point x = random_points(1, spec.input_dim(), 0.1, 0.9, seed++).front();
    const int dout = spec.output_dim();

    std::mt19937_64 rng(seed++);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int axis : {-1, 0, spec.input_dim() - 1}) {
      // Random jet seeds on every output component at once.
      std::vector<ad::Jet<3>> seeds(static_cast<size_t>(dout));
      for (auto& s : seeds) {
        s = ad::Jet<3>(u(rng), axis < 0 ? 0.0 : u(rng), axis < 0 ? 0.0 : u(rng));
      }

      ad::Tape<3> tape;
      std::vector<ad::Var<3>> theta;
      theta.reserve(p.count());
      for (double v : p.values) theta.push_back(tape.input(ad::Jet<3>(v)));
      std::vector<ad::Var<3>> xv;
      for (size_t i = 0; i < x.size(); ++i) {
        xv.push_back(tape.input(ad::Jet<3>(x[i], static_cast<int>(i) == axis ? 1.0 : 0.0)));
      }
      std::vector<ad::Var<3>> y = net::forward_trainable<3>(spec, theta, xv, tape);
      y = tf.apply<3>(xv, y, tape);
      std::vector<std::pair<ad::Var<3>, ad::Jet<3>>> pairs;
      for (int c = 0; c < dout; ++c) pairs.emplace_back(y[static_cast<size_t>(c)], seeds[static_cast<size_t>(c)]);
      const ad::Gradient<3> g = tape.backward_multi(pairs);
      std::vector<double> want;
      want.reserve(p.count());
      for (const ad::Var<3>& th : theta) want.push_back(g.adjoint(th).c[0]);

      PointEngine engine(spec, tf, p, x);
      std::vector<double> got(p.count(), 0.0);
      engine.reverse(axis, seeds, 1.0, got);
      check_close(got, want, 1e-10);
    }
  }
}

TEST_CASE("evaluator losses match the reference loss exactly") {
  const net::NetworkSpec spec{{1, 8, 1}, net::Activation::kTanh, 0};
  const net::Parameters p = make_params(spec, 7);
  Residual r = prob::poisson_residual(1, [](const Point& x) {
    return kPi * kPi * std::sin(kPi * x[0]);
  });
  const PointSet t_f = random_points(12, 1, 0.05, 0.95, 21);

  std::vector<Condition> conds;
  conds.push_back(Condition::dirichlet({{0.0}}, [](const Point&) { return 0.0; }));
  conds.push_back(Condition::neumann({{1.0}}, [](const Point&) { return -kPi; },
                                     [](const Point&) { return Point{1.0}; }));
  ObservationSet obs;
  obs.points = {{0.25}, {0.5}, {0.75}};
  for (const Point& x : obs.points) obs.values.push_back({std::sin(kPi * x[0])});

  const prob::LossWeights w{0.7, 1.3, 2.1};
  for (const net::OutputTransform& tf : {net::OutputTransform{}, pinned_interval_transform()}) {
    Evaluator ev(spec, tf, r, conds, obs, w);
    const prob::LossBreakdown got = ev.loss(p, t_f);
    const prob::LossBreakdown want = prob::total_loss(spec, p, tf, r, t_f, conds, obs, w);
    CHECK(got.f == doctest::Approx(want.f).epsilon(1e-12));
    CHECK(got.b == doctest::Approx(want.b).epsilon(1e-12));
    CHECK(got.i == doctest::Approx(want.i).epsilon(1e-12));
    CHECK(got.total == doctest::Approx(want.total).epsilon(1e-12));
    check_close(got.point_norms, want.point_norms, 1e-12);

    const std::vector<double> norms = ev.residual_norms(p, t_f);
    check_close(norms, want.point_norms, 1e-12);
  }
}

TEST_CASE("loss gradient matches finite differences on a mixed problem") {
  const net::NetworkSpec spec{{1, 7, 1}, net::Activation::kTanh, 0};
  const net::Parameters p = make_params(spec, 17);
  Residual r = prob::poisson_residual(1, [](const Point& x) {
    return kPi * kPi * std::sin(kPi * x[0]);
  });
  const PointSet t_f = random_points(8, 1, 0.05, 0.95, 23);

  std::vector<Condition> conds;
  conds.push_back(Condition::dirichlet({{0.0}, {1.0}}, [](const Point& x) { return x[0]; }));
  conds.push_back(Condition::neumann({{1.0}}, [](const Point&) { return 0.5; },
                                     [](const Point&) { return Point{1.0}; }));
  ObservationSet obs;
  obs.points = {{0.25}, {0.5}, {0.75}};
  for (const Point& x : obs.points) obs.values.push_back({std::sin(kPi * x[0])});

  const prob::LossWeights w{0.5, 2.0, 3.0};
  for (const net::OutputTransform& tf : {net::OutputTransform{}, pinned_interval_transform()}) {
    Evaluator ev(spec, tf, r, conds, obs, w);
    const LossGrad got = ev.loss_and_grad(p, t_f);
    CHECK(got.breakdown.total == ev.loss(p, t_f).total);
    const std::vector<double> want = fd_grad(
        p, [&](const net::Parameters& q) { return ev.loss(q, t_f).total; }, 1e-5);
    check_close(got.grad, want, 1e-6);
  }
}

TEST_CASE("multi-output system gradients match finite differences") {
  const net::NetworkSpec spec{{3, 6, 6, 2}, net::Activation::kTanh, 0};
  const net::Parameters p = make_params(spec, 29);
  Residual r = prob::burgers2d_residual(100.0);
  const PointSet t_f = random_points(4, 3, 0.1, 0.9, 31);
  Evaluator ev(spec, {}, r, {}, {}, {});
  const LossGrad got = ev.loss_and_grad(p, t_f);
  const std::vector<double> want = fd_grad(
      p, [&](const net::Parameters& q) { return ev.loss(q, t_f).total; }, 1e-5);
  check_close(got.grad, want, 1e-6);
}

TEST_CASE("external parameter gradients flow through residual slots") {
  net::NetworkSpec spec{{1, 8, 3}, net::Activation::kTanh, 3};
  const net::Parameters p = make_params(spec, 37);
  Residual r = prob::lorenz_residual();
  const PointSet t_f = random_points(5, 1, 0.1, 2.9, 41);
  ObservationSet obs;
  obs.points = {{0.0}, {1.5}, {3.0}};
  obs.values = {{-8.0, 7.0, 27.0}, {1.0, 2.0, 3.0}, {0.5, -0.5, 1.0}};

  Evaluator ev(spec, {}, r, {}, obs, {});
  const LossGrad got = ev.loss_and_grad(p, t_f);
  const std::vector<double> want = fd_grad(
      p, [&](const net::Parameters& q) { return ev.loss(q, t_f).total; }, 1e-5);
  check_close(got.grad, want, 1e-6);

  // The rate coefficients sit at the tail and must pick up nonzero gradient.
  const size_t tail = p.count() - 3;
  CHECK(std::abs(got.grad[tail]) > 1e-12);
  CHECK(std::abs(got.grad[tail + 1]) > 1e-12);
  CHECK(std::abs(got.grad[tail + 2]) > 1e-12);
}

TEST_CASE("integral slots backpropagate through the quadrature nodes") {
  const net::NetworkSpec spec{{1, 8, 1}, net::Activation::kTanh, 0};
  const net::Parameters p = make_params(spec, 43);

  Residual base;
  base.orders = {1};
  base.fn = [](ResidualCtx& ctx) { return std::vector<ad::Var1>{ctx.d(0, 0) + ctx.u(0)}; };
  quad::IntegralOperator op;
  op.kernel = [](double t, double x) { return std::exp(t - x); };
  op.lower = [](double) { return 0.0; };
  op.upper = [](double x) { return x; };
  op.rule = quad::gauss_legendre(20);
  Residual ide = prob::ide_residual(std::move(base), op);

  const PointSet t_f = {{0.5}, {1.5}, {3.0}};
  std::vector<Condition> conds;
  conds.push_back(Condition::dirichlet({{0.0}}, [](const Point&) { return 1.0; }));

  Evaluator ev(spec, {}, ide, conds, {}, {});
  const LossGrad got = ev.loss_and_grad(p, t_f);
  CHECK(got.breakdown.f ==
        doctest::Approx(prob::pde_loss(spec, p, {}, ev.residual(), t_f).loss).epsilon(1e-12));
  const std::vector<double> want = fd_grad(
      p, [&](const net::Parameters& q) { return ev.loss(q, t_f).total; }, 1e-5);
  check_close(got.grad, want, 1e-6);
}

TEST_CASE("periodic condition gradients match finite differences") {
  const net::NetworkSpec spec{{1, 6, 1}, net::Activation::kTanh, 0};
  const net::Parameters p = make_params(spec, 47);
  geom::GeoPtr seg = geom::interval(0.0, 1.0);
  std::vector<Condition> conds;
  conds.push_back(Condition::periodic({{0.0}}, 0, prob::image_of(seg, 0)));

  Evaluator ev(spec, {}, {}, conds, {}, {});
  const LossGrad got = ev.loss_and_grad(p, {});
  CHECK(got.breakdown.b ==
        doctest::Approx(prob::bc_loss(spec, p, {}, ev.conditions())).epsilon(1e-12));
  const std::vector<double> want = fd_grad(
      p, [&](const net::Parameters& q) { return ev.loss(q, {}).total; }, 1e-5);
  check_close(got.grad, want, 1e-6);
}

TEST_CASE("robin and operator condition gradients match finite differences") {
  const net::NetworkSpec spec{{1, 6, 1}, net::Activation::kTanh, 0};
  const net::Parameters p = make_params(spec, 53);
  geom::GeoPtr seg = geom::interval(0.0, 1.0);

  std::vector<Condition> conds;
  conds.push_back(Condition::robin_bc(
      {{1.0}},
      [](const Point&, ad::Var1 u, ad::Var1 dudn) { return dudn - (u * 2.0 + 1.0); },
      prob::normal_of(seg)));
  Residual op_res;
  op_res.orders = {2};
  op_res.fn = [](ResidualCtx& ctx) {
    return std::vector<ad::Var1>{ctx.d2(0, 0) + ctx.u(0) * ctx.u(0) - ctx.normal(0)};
  };
  conds.push_back(Condition::operator_bc({{0.0}}, op_res, prob::normal_of(seg)));

  for (const net::OutputTransform& tf :
       {net::OutputTransform{}, transform_of([](const auto& x, const auto& raw) {
          auto out = raw;
          for (auto& o : out) o = o + x[0] * x[0];
          return out;
        })}) {
    Evaluator ev(spec, tf, {}, conds, {}, {});
    const LossGrad got = ev.loss_and_grad(p, {});
    CHECK(got.breakdown.b ==
          doctest::Approx(prob::bc_loss(spec, p, tf, ev.conditions())).epsilon(1e-12));
    const std::vector<double> want = fd_grad(
        p, [&](const net::Parameters& q) { return ev.loss(q, {}).total; }, 1e-5);
    check_close(got.grad, want, 1e-6);
  }
}

TEST_CASE("observation subsets only pull on the observed component") {
  const net::NetworkSpec spec{{1, 5, 2}, net::Activation::kTanh, 0};
  const net::Parameters p = make_params(spec, 59);
  ObservationSet obs;
  obs.points = {{0.2}, {0.6}};
  obs.values = {{0.4}, {-0.1}};
  obs.components = {1};

  Evaluator ev(spec, {}, {}, {}, obs, {});
  const LossGrad got = ev.loss_and_grad(p, {});
  CHECK(got.breakdown.i ==
        doctest::Approx(prob::observation_loss(spec, p, {}, obs)).epsilon(1e-12));
  const std::vector<double> want = fd_grad(
      p, [&](const net::Parameters& q) { return ev.loss(q, {}).total; }, 1e-5);
  check_close(got.grad, want, 1e-6);
}

TEST_CASE("repeated evaluation is bit-for-bit deterministic") {
  const net::NetworkSpec spec{{2, 6, 2}, net::Activation::kTanh, 0};
  const net::Parameters p = make_params(spec, 61);
  Residual r = prob::poisson_residual(2, [](const Point& x) { return x[0] + x[1]; });
  const PointSet t_f = random_points(6, 2, 0.1, 0.9, 67);
  ObservationSet obs;
  obs.points = {{0.3, 0.4}};
  obs.values = {{0.2, -0.3}};
  Evaluator ev(spec, {}, r, {}, obs, {});
  const LossGrad a = ev.loss_and_grad(p, t_f);
  const LossGrad b = ev.loss_and_grad(p, t_f);
  CHECK(a.breakdown.total == b.breakdown.total);
  REQUIRE(a.grad.size() == b.grad.size());
  for (size_t i = 0; i < a.grad.size(); ++i) CHECK(a.grad[i] == b.grad[i]);
}

TEST_CASE("structural guards reject ill-formed setups") {
  const net::NetworkSpec spec{{1, 4, 1}, net::Activation::kTanh, 0};
  const net::Parameters p = make_params(spec, 71);

  SUBCASE("collocation points without a residual") {
    Evaluator ev(spec, {}, {}, {}, {}, {});
    CHECK_THROWS_AS(ev.loss(p, {{0.5}}), StructuralError);
    CHECK_THROWS_AS(ev.residual_norms(p, {{0.5}}), StructuralError);
  }
  SUBCASE("observation conditions are rejected up front") {
    Condition c;
    c.kind = prob::ConditionKind::kObservation;
    c.points = {{0.0}};
    CHECK_THROWS_AS(Evaluator(spec, {}, {}, {c}, {}, {}), StructuralError);
  }
  SUBCASE("seed count must match the output width") {
    PointEngine engine(spec, {}, p, {0.5});
    std::vector<double> grad(p.count(), 0.0);
    const std::vector<ad::Jet<3>> seeds(3);
    CHECK_THROWS_AS(engine.reverse(-1, seeds, 1.0, grad), StructuralError);
  }
  SUBCASE("mis-sized transform output") {
    net::OutputTransform bad = net::OutputTransform::make(
        [](const auto& x, const auto& raw) {
          auto out = raw;
          out.push_back(x[0]);
          return out;
        });
    CHECK_THROWS_AS(eng::forward_values(spec, bad, p, {0.5}), StructuralError);
  }
  SUBCASE("parameter vector of the wrong shape") {
    net::Parameters bad = p;
    bad.values.pop_back();
    Evaluator ev(spec, {}, {}, {}, {}, {});
    CHECK_THROWS_AS(ev.loss(bad, {}), StructuralError);
  }
  SUBCASE("non-finite residual names the collocation point") {
    Residual r;
    r.orders = {0};
    r.fn = [](ResidualCtx& ctx) { return std::vector<ad::Var1>{log(ctx.u(0) - 1e9)}; };
    Evaluator ev(spec, {}, r, {}, {}, {});
    try {
      ev.loss(p, {{0.5}});
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("residual point (0.5)") != std::string::npos);
    }
  }
}
