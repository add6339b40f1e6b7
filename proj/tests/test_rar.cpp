#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "pinn/rar.hpp"

using namespace pinn;
using geom::Point;
using geom::PointSet;

namespace {

const double kPi = std::acos(-1.0);

// u_xx + pi^2 sin(pi x) = 0 on [-1, 1]; exact solution sin(pi x).
prob::Residual poisson_residual() {
  prob::Residual r;
  r.fn = [](prob::ResidualCtx& ctx) {
    ad::Var1 res = ctx.d2(0, 0) + ctx.tape().constant(kPi * kPi * std::sin(kPi * ctx.x(0)));
    return std::vector<ad::Var1>{res};
  };
  r.orders = {2};
  r.n_equations = 1;
  return r;
}

// Residual equal to the x coordinate, independent of the network.
prob::Residual coordinate_residual() {
  prob::Residual r;
  r.fn = [](prob::ResidualCtx& ctx) {
    return std::vector<ad::Var1>{ctx.u(0) * 0.0 + ctx.tape().constant(ctx.x(0))};
  };
  r.orders = {0};
  r.n_equations = 1;
  return r;
}

eng::Evaluator make_evaluator(const net::NetworkSpec& spec, prob::Residual residual,
                              net::OutputTransform tf = {}) {
  std::vector<prob::Condition> conds;
  conds.push_back(prob::Condition::dirichlet({{-1.0}, {1.0}}, [](const Point&) { return 0.0; }));
  return eng::Evaluator(spec, std::move(tf), std::move(residual), std::move(conds), {}, {});
}

std::function<PointSet(int, geom::Rng&)> interval_sampler(double lo, double hi) {
  return [lo, hi](int n, geom::Rng& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    PointSet out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back({u(rng)});
    return out;
  };
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("mean residual estimate averages the per-point norms") {
  net::NetworkSpec spec{.layers = {1, 3, 1}};
  net::Parameters params = net::init(spec, 1);

  SUBCASE("constant residual") {
    prob::Residual two;
    two.fn = [](prob::ResidualCtx& ctx) {
      return std::vector<ad::Var1>{ctx.u(0) * 0.0 + ctx.tape().constant(2.0)};
    };
    two.orders = {0};
    eng::Evaluator ev = make_evaluator(spec, two);
    const PointSet pool = {{-0.5}, {0.1}, {0.7}};
    CHECK(rar::estimate_mean_residual(ev, params, pool) == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("coordinate residual gives the arithmetic mean") {
    eng::Evaluator ev = make_evaluator(spec, coordinate_residual());
    const PointSet pool = {{3.0}, {1.0}, {2.0}};
    CHECK(rar::estimate_mean_residual(ev, params, pool) == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("exact solution annihilates the residual") {
    net::OutputTransform tf = net::OutputTransform::make([](const auto& x, const auto& raw) {
      auto out = raw;
      out[0] = ad::sin(x[0] * kPi) + raw[0] * 0.0;
      return out;
    });
    eng::Evaluator ev = make_evaluator(spec, poisson_residual(), tf);
    const PointSet pool = {{-0.8}, {-0.3}, {0.2}, {0.6}};
    CHECK(rar::estimate_mean_residual(ev, params, pool) <= 1e-8);
  }

  SUBCASE("empty pool is rejected") {
    eng::Evaluator ev = make_evaluator(spec, coordinate_residual());
    CHECK_THROWS_AS(rar::estimate_mean_residual(ev, params, {}), StructuralError);
  }

  SUBCASE("non-finite residual aborts with the offending point") {
    prob::Residual bad;
    bad.fn = [](prob::ResidualCtx& ctx) {
      const double v = ctx.x(0) > 0.0 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
      return std::vector<ad::Var1>{ctx.u(0) * 0.0 + ctx.tape().constant(v)};
    };
    bad.orders = {0};
    eng::Evaluator ev = make_evaluator(spec, bad);
    try {
      rar::estimate_mean_residual(ev, params, {{-0.5}, {0.25}});
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("0.25") != std::string::npos);
    }
  }
}

TEST_CASE("worst-point selection keeps the largest residuals") {
  SUBCASE("single largest") {
    const PointSet pool = {{10.0}, {20.0}, {30.0}};
    const std::vector<double> res = {3.0, 1.0, 2.0};
    PointSet picked = rar::select_worst(pool, res, 1);
    REQUIRE(picked.size() == 1);
    CHECK(picked[0][0] == 10.0);
  }

  SUBCASE("whole pool when m equals the pool size") {
    const PointSet pool = {{10.0}, {20.0}, {30.0}};
    const std::vector<double> res = {3.0, 1.0, 2.0};
    PointSet picked = rar::select_worst(pool, res, 3);
    REQUIRE(picked.size() == 3);
    PointSet sorted_pool = pool;
    PointSet sorted_picked = picked;
    std::sort(sorted_pool.begin(), sorted_pool.end());
    std::sort(sorted_picked.begin(), sorted_picked.end());
    CHECK(sorted_picked == sorted_pool);
  }

  SUBCASE("ties break toward the lower pool index") {
    const std::vector<double> res = {2.0, 5.0, 5.0, 1.0};
    std::vector<size_t> idx = rar::worst_indices(res, 2);
    REQUIRE(idx.size() == 2);
    CHECK(idx[0] == 1);
    CHECK(idx[1] == 2);
  }

  SUBCASE("matches a full-sort oracle on random inputs") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> quant(0, 9);
    for (int trial = 0; trial < 10; ++trial) {
      const size_t n = 1000;
      std::vector<double> res(n);
      // Quantized values force plenty of ties.
      for (double& r : res) r = trial % 2 == 0 ? u(rng) : 0.1 * quant(rng);
      for (int m : {1, 7, 100, 999, 1000}) {
        std::vector<size_t> oracle(n);
        std::iota(oracle.begin(), oracle.end(), size_t{0});
        std::stable_sort(oracle.begin(), oracle.end(),
                         [&](size_t a, size_t b) { return res[a] > res[b]; });
        oracle.resize(static_cast<size_t>(m));
        CAPTURE(trial);
        CAPTURE(m);
        CHECK(rar::worst_indices(res, m) == oracle);
      }
    }
  }

  SUBCASE("rejects m larger than the pool") {
    const std::vector<double> res = {1.0};
    CHECK_THROWS_AS(rar::worst_indices(res, 2), StructuralError);
  }
}

TEST_CASE("refinement config validates") {
  rar::RarConfig bad;
  bad.m = 0;
  CHECK_THROWS_AS(bad.validate(), StructuralError);
  bad = {};
  bad.threshold = 0.0;
  CHECK_THROWS_AS(bad.validate(), StructuralError);
  bad = {};
  bad.m = 5;
  bad.pool_size = 3;
  CHECK_THROWS_AS(bad.validate(), StructuralError);
}

TEST_CASE("an infinite threshold stops the loop before any refinement") {
  net::NetworkSpec spec{.layers = {1, 4, 1}};
  prob::PointSets ps;
  ps.t_f = {{-0.5}, {0.0}, {0.5}};
  train::TrainModel model{make_evaluator(spec, poisson_residual()), ps,
                          interval_sampler(-1.0, 1.0)};

  rar::RarConfig cfg;
  cfg.threshold = std::numeric_limits<double>::infinity();
  train::TrainOptions opts;
  train::TrainState start = train::make_state(spec, 5);
  rar::RarResult res = rar::rar_loop(model, cfg, opts, start);

  CHECK(res.status == rar::RarStatus::kConverged);
  CHECK(res.rounds == 0);
  CHECK(res.added.empty());
  CHECK(res.points == ps.t_f);
  CHECK(res.mean_history.size() == 1);
  CHECK(res.state.params.values == start.params.values);
}

TEST_CASE("refinement rounds grow the set monotonically and log every point") {
  net::NetworkSpec spec{.layers = {1, 6, 1}};
  prob::PointSets ps;
  ps.t_f = {{-0.5}, {0.0}, {0.5}};
  train::TrainModel model{make_evaluator(spec, poisson_residual()), ps,
                          interval_sampler(-1.0, 1.0)};

  rar::RarConfig cfg;
  cfg.m = 2;
  cfg.threshold = 1e-30;  // unreachable, forcing the round cap
  cfg.max_rounds = 3;
  cfg.inner_iters = 5;
  cfg.pool_size = 40;
  train::TrainOptions opts;
  opts.seed = 11;
  opts.phases = {train::OptimizerConfig::adam_phase(1, 1e-3)};

  rar::RarResult res = rar::rar_loop(model, cfg, opts, train::make_state(spec, 5));

  CHECK(res.status == rar::RarStatus::kMaxRounds);
  CHECK(res.rounds == 3);
  CHECK(res.added.size() == 6);  // rounds times m, no duplicates possible here
  CHECK(res.points.size() == ps.t_f.size() + 6);
  // Original points stay in place, in order.
  for (size_t i = 0; i < ps.t_f.size(); ++i) CHECK(res.points[i] == ps.t_f[i]);
  // Four estimates: one before each of the three rounds plus the final one.
  REQUIRE(res.mean_history.size() == 4);
  for (const rar::AddedPoint& p : res.added) {
    CAPTURE(p.round);
    CHECK(p.round >= 1);
    CHECK(p.round <= 3);
    CHECK(p.mean_before == res.mean_history[static_cast<size_t>(p.round) - 1]);
    CHECK(p.mean_after == res.mean_history[static_cast<size_t>(p.round)]);
    CHECK(p.residual >= 0.0);
    // Added points come from the sampler's domain.
    CHECK(p.x[0] >= -1.0);
    CHECK(p.x[0] <= 1.0);
  }
  // Inner training ran between rounds: 3 rounds of 5 iterations.
  CHECK(res.state.iteration == 15);
  CHECK(!res.state.history.empty());
}

TEST_CASE("pool points already in the collocation set are skipped") {
  net::NetworkSpec spec{.layers = {1, 4, 1}};
  prob::PointSets ps;
  ps.t_f = {{0.25}};
  train::TrainModel model{make_evaluator(spec, coordinate_residual()), ps, {}};
  // The pool always contains the existing point plus one fresh point.
  model.resampler = [](int, geom::Rng&) { return PointSet{{0.25}, {0.75}}; };

  rar::RarConfig cfg;
  cfg.m = 2;
  cfg.threshold = 1e-30;
  cfg.max_rounds = 1;
  cfg.inner_iters = 0;
  cfg.pool_size = 2;
  rar::RarResult res = rar::rar_loop(model, cfg, {}, train::make_state(spec, 6));

  CHECK(res.rounds == 1);
  REQUIRE(res.added.size() == 1);
  CHECK(res.added[0].x == Point{0.75});
  CHECK(res.points.size() == 2);
}

TEST_CASE("refinement concentrates points where the residual is worst") {
  // With a frozen zero network the residual of u_xx + pi^2 sin(pi x) is
  // pi^2 |sin(pi x)|, largest near |x| = 0.5, so selected points must cluster
  // away from 0 and the ends.
  net::NetworkSpec spec{.layers = {1, 4, 1}};
  prob::PointSets ps;
  ps.t_f = {{0.0}};
  train::TrainModel model{make_evaluator(spec, poisson_residual()), ps,
                          interval_sampler(-1.0, 1.0)};

  rar::RarConfig cfg;
  cfg.m = 3;
  cfg.threshold = 1e-30;
  cfg.max_rounds = 4;
  cfg.inner_iters = 0;  // keep the network frozen at zero
  cfg.pool_size = 200;
  train::TrainState zero_state;
  zero_state.params = net::Parameters::zeros(spec);
  rar::RarResult res = rar::rar_loop(model, cfg, {}, zero_state);

  REQUIRE(res.added.size() == 12);
  for (const rar::AddedPoint& p : res.added) {
    const double s = std::abs(std::sin(kPi * p.x[0]));
    CAPTURE(p.x[0]);
    CHECK(s > 0.9);  // |sin(pi x)| near its peak for every selected point
  }
}

TEST_CASE("added points csv lists one row per point") {
  std::vector<rar::AddedPoint> added;
  added.push_back({1, {0.5, -0.25}, 3.5, 2.0, 1.5});
  added.push_back({2, {0.1, 0.9}, 1.25, 1.5, 0.75});
  const std::string path = "rar_added_test.csv";
  std::remove(path.c_str());
  rar::write_added_points_csv(path, added);
  std::vector<std::string> lines = read_lines(path);
  std::remove(path.c_str());
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "round,x0,x1,residual,E_r_before,E_r_after");
  CHECK(lines[1] == "1,0.5,-0.25,3.5,2,1.5");
  CHECK(lines[2] == "2,0.1,0.9,1.25,1.5,0.75");
}
