#include "pinn/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>
#include <utility>

#include "pinn/errors.hpp"
#include "pinn/oracles.hpp"
#include "pinn/quadrature.hpp"
#include "pinn/tape.hpp"

namespace pinn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using geom::Point;
using geom::PointSet;

constexpr double kPi = std::numbers::pi;

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// JSON schema helpers. `where` is the JSON-pointer style location used in
// error messages, e.g. "/points".

[[noreturn]] void schema_error(const std::string& msg, const std::string& where) {
  throw StructuralError(msg + " at " + where);
}

void require_object(const json& node, const std::string& where) {
  if (!node.is_object()) schema_error("expected an object", where);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) schema_error("unknown key \"" + item.key() + "\"", where);
  }
}

std::string join(const std::string& where, const std::string& key) {
  return where == "/" ? "/" + key : where + "/" + key;
}

double get_number(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) schema_error("expected a number", join(where, key));
  return v.get<double>();
}

long get_integer(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) schema_error("expected an integer", join(where, key));
  return v.get<long>();
}

long get_count(const json& obj, const std::string& key, const std::string& where) {
  long n = get_integer(obj, key, where);
  if (n < 0) schema_error("point count must not be negative", join(where, key));
  return n;
}

std::string get_string(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_string()) schema_error("expected a string", join(where, key));
  return v.get<std::string>();
}

Point get_point(const json& node, const std::string& key, const std::string& where,
                int expected_dim) {
  if (!node.contains(key)) schema_error("missing key \"" + key + "\"", where);
  const json& v = node.at(key);
  if (!v.is_array()) schema_error("expected an array of numbers", join(where, key));
  Point p;
  for (const json& c : v) {
    if (!c.is_number()) schema_error("expected an array of numbers", join(where, key));
    p.push_back(c.get<double>());
  }
  if (expected_dim > 0 && static_cast<int>(p.size()) != expected_dim)
    schema_error("expected " + std::to_string(expected_dim) + " coordinates", join(where, key));
  return p;
}

// ---------------------------------------------------------------------------
// Built-in problem registry.

struct Defaults {
  int depth = 1;
  int width = 1;
  std::vector<train::OptimizerConfig> phases;
  PointCounts points;
  RarSettings rar;
  long predict_grid = 101;
};

const std::vector<std::string>& registry_names() {
  static const std::vector<std::string> names = {
      "poisson-lshape",     "burgers-1d",  "lorenz-inverse", "diffusion-reaction",
      "volterra-ide",       "burgers-2d",  "frequency-demo",
  };
  return names;
}

Defaults defaults_for(const std::string& problem) {
  using train::OptimizerConfig;
  Defaults d;
  if (problem == "poisson-lshape") {
    d.depth = 4;
    d.width = 50;
    d.phases = {OptimizerConfig::adam_phase(50000, 1e-3), OptimizerConfig::lbfgs_phase()};
    d.points = {1200, 120, 0, 0};
    d.predict_grid = 51;
  } else if (problem == "burgers-1d") {
    d.depth = 3;
    d.width = 20;
    d.phases = {OptimizerConfig::adam_phase(15000, 1e-3), OptimizerConfig::lbfgs_phase()};
    d.points = {2500, 80, 160, 0};
    d.rar.enabled = true;
    d.rar.config.m = 1;
    d.rar.config.threshold = 5e-3;
    d.rar.config.pool_size = 0;
    d.rar.config.inner_iters = 1000;
    d.rar.config.max_rounds = 40;
    d.predict_grid = 101;
  } else if (problem == "lorenz-inverse") {
    d.depth = 3;
    d.width = 40;
    d.phases = {OptimizerConfig::adam_phase(60000, 1e-3)};
    d.points = {400, 0, 0, 25};
    d.predict_grid = 301;
  } else if (problem == "diffusion-reaction") {
    d.depth = 3;
    d.width = 20;
    d.phases = {OptimizerConfig::adam_phase(80000, 1e-3)};
    d.points = {400, 100, 100, 2000};
    d.predict_grid = 101;
  } else if (problem == "volterra-ide") {
    d.depth = 4;
    d.width = 20;
    d.phases = {OptimizerConfig::lbfgs_phase()};
    d.points = {12, 0, 0, 0};
    d.predict_grid = 101;
  } else if (problem == "burgers-2d") {
    d.depth = 3;
    d.width = 20;
    d.phases = {OptimizerConfig::adam_phase(15000, 1e-3), OptimizerConfig::lbfgs_phase()};
    d.points = {200, 400, 500, 0};
    d.predict_grid = 21;
  } else if (problem == "frequency-demo") {
    d.depth = 4;
    d.width = 20;
    d.phases = {OptimizerConfig::adam_phase(20000, 1e-4)};
    d.points = {0, 0, 0, 500};
    d.predict_grid = 401;
  } else {
    std::string known;
    for (const auto& n : registry_names()) known += (known.empty() ? "" : ", ") + n;
    throw StructuralError("unknown problem \"" + problem + "\"; known problems: " + known);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Optimizer phase (de)serialization.

train::OptimizerConfig parse_phase(const json& node, const std::string& where) {
  require_object(node, where);
  if (!node.contains("kind")) schema_error("missing key \"kind\"", where);
  std::string kind = get_string(node, "kind", where);
  train::OptimizerConfig phase;
  if (kind == "adam") {
    check_keys(node, where, {"kind", "lr", "iterations"});
    if (!node.contains("iterations")) schema_error("missing key \"iterations\"", where);
    long iters = get_integer(node, "iterations", where);
    if (iters < 0) schema_error("iteration count must not be negative", join(where, "iterations"));
    double lr = node.contains("lr") ? get_number(node, "lr", where) : 1e-3;
    if (!(lr > 0.0)) schema_error("learning rate must be positive", join(where, "lr"));
    phase = train::OptimizerConfig::adam_phase(iters, lr);
  } else if (kind == "lbfgs") {
    check_keys(node, where, {"kind", "memory", "max_iterations", "tolerance"});
    train::LbfgsConfig cfg;
    if (node.contains("memory")) {
      long m = get_integer(node, "memory", where);
      if (m < 1) schema_error("memory must be at least 1", join(where, "memory"));
      cfg.memory = static_cast<int>(m);
    }
    if (node.contains("max_iterations")) {
      long m = get_integer(node, "max_iterations", where);
      if (m < 1) schema_error("max_iterations must be at least 1", join(where, "max_iterations"));
      cfg.max_iters = m;
    }
    if (node.contains("tolerance")) {
      double tol = get_number(node, "tolerance", where);
      if (!(tol > 0.0)) schema_error("tolerance must be positive", join(where, "tolerance"));
      cfg.tolerance = tol;
    }
    phase = train::OptimizerConfig::lbfgs_phase(cfg);
  } else {
    schema_error("optimizer kind must be \"adam\" or \"lbfgs\"", join(where, "kind"));
  }
  phase.validate();
  return phase;
}

json phase_to_json(const train::OptimizerConfig& phase) {
  json node;
  if (phase.kind == train::OptimizerConfig::Kind::kAdam) {
    node["kind"] = "adam";
    node["lr"] = phase.adam.lr;
    node["iterations"] = phase.iterations;
  } else {
    node["kind"] = "lbfgs";
    node["memory"] = phase.lbfgs.memory;
    node["max_iterations"] = phase.lbfgs.max_iters;
    node["tolerance"] = phase.lbfgs.tolerance;
  }
  return node;
}

// ---------------------------------------------------------------------------
// Checkpoint side data: the loss history and any refinement log travel in the
// checkpoint's optimizer blob so export can re-emit every artifact.

json history_to_json(std::span<const train::LossRecord> history) {
  json rows = json::array();
  for (const auto& rec : history) {
    json row = {rec.iteration, rec.total, rec.f, rec.b, rec.i};
    if (rec.metric) row.push_back(*rec.metric);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<train::LossRecord> history_from_json(const json& rows) {
  std::vector<train::LossRecord> history;
  if (!rows.is_array()) return history;
  for (const json& row : rows) {
    if (!row.is_array() || row.size() < 5) continue;
    train::LossRecord rec;
    rec.iteration = row[0].get<long>();
    rec.total = row[1].get<double>();
    rec.f = row[2].get<double>();
    rec.b = row[3].get<double>();
    rec.i = row[4].get<double>();
    if (row.size() > 5) rec.metric = row[5].get<double>();
    history.push_back(rec);
  }
  return history;
}

json added_to_json(std::span<const rar::AddedPoint> added) {
  json rows = json::array();
  for (const auto& a : added) {
    json row = {a.round};
    for (double c : a.x) row.push_back(c);
    row.push_back(a.residual);
    row.push_back(a.mean_before);
    row.push_back(a.mean_after);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<rar::AddedPoint> added_from_json(const json& rows) {
  std::vector<rar::AddedPoint> added;
  if (!rows.is_array()) return added;
  for (const json& row : rows) {
    if (!row.is_array() || row.size() < 5) continue;
    rar::AddedPoint a;
    a.round = row[0].get<int>();
    for (size_t i = 1; i + 3 < row.size(); ++i) a.x.push_back(row[i].get<double>());
    a.residual = row[row.size() - 3].get<double>();
    a.mean_before = row[row.size() - 2].get<double>();
    a.mean_after = row[row.size() - 1].get<double>();
    added.push_back(std::move(a));
  }
  return added;
}

// ---------------------------------------------------------------------------
// Problem builders. Each one assembles the loss ingredients, samplers, and
// reference solution for one registry entry. Random draws come from a
// generator seeded with cfg.seed so identical configs build identical
// problems.

prob::ScalarField constant_field(double v) {
  return [v](const Point&) { return v; };
}

geom::GeoPtr geometry_override(const RunConfig& cfg, int expected_dim) {
  if (cfg.geometry.is_null()) return nullptr;
  geom::GeoPtr g = parse_geometry(cfg.geometry);
  if (g->dim() != expected_dim)
    throw StructuralError("geometry override has dimension " + std::to_string(g->dim()) +
                          " but problem \"" + cfg.problem + "\" expects " +
                          std::to_string(expected_dim));
  return g;
}

void reject_geometry_override(const RunConfig& cfg) {
  if (!cfg.geometry.is_null())
    throw StructuralError("problem \"" + cfg.problem + "\" does not accept a geometry override");
}

void require_points(long n, long minimum, const char* label, const std::string& problem) {
  if (n < minimum)
    throw StructuralError("problem \"" + problem + "\" needs at least " +
                          std::to_string(minimum) + " " + label + " point(s), got " +
                          std::to_string(n));
}

net::NetworkSpec make_spec(const RunConfig& cfg, int in, int out, int externals) {
  net::NetworkSpec spec;
  spec.layers.push_back(in);
  for (int i = 0; i < cfg.depth; ++i) spec.layers.push_back(cfg.width);
  spec.layers.push_back(out);
  spec.activation = net::activation_from_name(cfg.activation);
  spec.externals = externals;
  spec.validate();
  return spec;
}

prob::Strategy strategy_of(const RunConfig& cfg) {
  return cfg.strategy == "resample" ? prob::Strategy::kResampleEachStep
                                    : prob::Strategy::kFixed;
}

/// Inclusive lattice over a box, optionally filtered by a membership test.
PointSet lattice(const std::vector<double>& lo, const std::vector<double>& hi,
                 const std::vector<long>& counts,
                 const std::function<bool(const Point&)>& keep = {}) {
  size_t dim = lo.size();
  std::vector<long> idx(dim, 0);
  PointSet pts;
  while (true) {
    Point p(dim);
    for (size_t k = 0; k < dim; ++k) {
      p[k] = counts[k] == 1 ? lo[k]
                            : lo[k] + (hi[k] - lo[k]) * static_cast<double>(idx[k]) /
                                          static_cast<double>(counts[k] - 1);
    }
    if (!keep || keep(p)) pts.push_back(std::move(p));
    size_t k = 0;
    while (k < dim) {
      if (++idx[k] < counts[k]) break;
      idx[k] = 0;
      ++k;
    }
    if (k == dim) break;
  }
  return pts;
}

BuiltProblem build_poisson_lshape(const RunConfig& cfg) {
  BuiltProblem bp;
  geom::GeoPtr geo = geometry_override(cfg, 2);
  if (!geo)
    geo = geom::difference(geom::rectangle({-1.0, -1.0}, {1.0, 1.0}),
                           geom::rectangle({0.0, 0.0}, {1.0, 1.0}));
  require_points(cfg.points.domain, 1, "domain", cfg.problem);
  require_points(cfg.points.boundary, 1, "boundary", cfg.problem);

  bp.spec = make_spec(cfg, 2, 1, 0);
  bp.residual.fn = [](prob::ResidualCtx& ctx) {
    return std::vector<ad::Var1>{ctx.d2(0, 0) + ctx.d2(0, 1) + ctx.tape().constant(1.0)};
  };
  bp.residual.orders = {2, 2};

  geom::Rng rng(cfg.seed);
  bp.conditions.push_back(prob::Condition::dirichlet(
      geo->random_boundary_points(static_cast<int>(cfg.points.boundary), rng),
      constant_field(0.0)));
  bp.points.t_f = geo->random_points(static_cast<int>(cfg.points.domain), rng);
  bp.points.strategy = strategy_of(cfg);
  bp.points.batch_size = cfg.batch;
  bp.resampler = [geo](int n, geom::Rng& r) { return geo->random_points(n, r); };

  bp.eval_points = geo->uniform_points(static_cast<int>(cfg.predict_grid * cfg.predict_grid));
  // The reference solve depends on nothing configurable, so share it across
  // repeated builds.
  static const auto sol =
      std::make_shared<oracle::Grid2dSolution>(oracle::fd_poisson_lshape(161));
  bp.reference = [](const Point& p) { return std::vector<double>{sol->sample(p[0], p[1])}; };
  return bp;
}

BuiltProblem build_burgers_1d(const RunConfig& cfg) {
  BuiltProblem bp;
  geom::GeoPtr space = geometry_override(cfg, 1);
  if (!space) space = geom::interval(-1.0, 1.0);
  geom::SpaceTimeDomain dom(space, 0.0, 1.0);
  require_points(cfg.points.domain, 1, "domain", cfg.problem);
  require_points(cfg.points.boundary, 1, "boundary", cfg.problem);
  require_points(cfg.points.initial, 1, "initial", cfg.problem);

  const double nu = 0.01 / kPi;
  bp.spec = make_spec(cfg, 2, 1, 0);
  bp.residual.fn = [nu](prob::ResidualCtx& ctx) {
    return std::vector<ad::Var1>{ctx.d(0, 1) + ctx.u(0) * ctx.d(0, 0) -
                                 ctx.tape().constant(nu) * ctx.d2(0, 0)};
  };
  bp.residual.orders = {2, 1};

  geom::Rng rng(cfg.seed);
  bp.conditions.push_back(prob::Condition::dirichlet(
      dom.random_boundary_points(static_cast<int>(cfg.points.boundary), rng),
      constant_field(0.0)));
  bp.conditions.push_back(prob::Condition::initial(
      dom.random_initial_points(static_cast<int>(cfg.points.initial), rng),
      [](const Point& p) { return -std::sin(kPi * p[0]); }));
  bp.points.t_f = dom.random_points(static_cast<int>(cfg.points.domain), rng);
  bp.points.strategy = strategy_of(cfg);
  bp.points.batch_size = cfg.batch;
  bp.resampler = [dom](int n, geom::Rng& r) { return dom.random_points(n, r); };

  long g = cfg.predict_grid;
  bp.eval_points = lattice({-1.0, 0.0}, {1.0, 1.0}, {g, g},
                           [dom](const Point& p) { return dom.inside(p); });
  static const auto sol =
      std::make_shared<oracle::Grid1dSolution>(oracle::fd_burgers_1d(0.01 / kPi, 401, 80000));
  bp.reference = [](const Point& p) {
    return std::vector<double>{sol->sample(0, p[0], p[1])};
  };
  return bp;
}

BuiltProblem build_lorenz_inverse(const RunConfig& cfg) {
  BuiltProblem bp;
  reject_geometry_override(cfg);
  require_points(cfg.points.domain, 1, "domain", cfg.problem);
  require_points(cfg.points.observations, 2, "observation", cfg.problem);

  geom::GeoPtr geo = geom::interval(0.0, 3.0);
  bp.spec = make_spec(cfg, 1, 3, 3);
  // The trajectory swings over roughly [-20, 45]; scaling the raw outputs
  // lets a unit-scale network reach it quickly. The data term gets extra
  // weight because 25 measurements have to anchor 400 residual points.
  bp.transform = net::OutputTransform::make([](const auto&, const auto& raw) {
    auto out = raw;
    for (auto& o : out) o = 20.0 * o;
    return out;
  });
  bp.weights.w_i = 100.0;
  bp.residual.fn = [](prob::ResidualCtx& ctx) {
    ad::Var1 x = ctx.u(0), y = ctx.u(1), z = ctx.u(2);
    ad::Var1 rho = ctx.lambda(0), sigma = ctx.lambda(1), beta = ctx.lambda(2);
    std::vector<ad::Var1> r;
    r.push_back(ctx.d(0, 0) - rho * (y - x));
    r.push_back(ctx.d(1, 0) - x * (sigma - z) + y);
    r.push_back(ctx.d(2, 0) - x * y + beta * z);
    return r;
  };
  bp.residual.orders = {1};
  bp.residual.n_equations = 3;

  PointSet origin = {{0.0}};
  bp.conditions.push_back(prob::Condition::dirichlet(origin, constant_field(-8.0), 0));
  bp.conditions.push_back(prob::Condition::dirichlet(origin, constant_field(7.0), 1));
  bp.conditions.push_back(prob::Condition::dirichlet(origin, constant_field(27.0), 2));

  static const auto traj = std::make_shared<oracle::OdeTrajectory>(
      oracle::rk45(oracle::lorenz_system(10.0, 15.0, 8.0 / 3.0, {-8.0, 7.0, 27.0}, 0.0, 3.0),
                   1e-10, 1e-12));
  bp.observations = oracle::trajectory_observations(
      *traj, static_cast<int>(cfg.points.observations), 0.0, cfg.seed);

  geom::Rng rng(cfg.seed);
  bp.points.t_f = geo->random_points(static_cast<int>(cfg.points.domain), rng);
  bp.points.strategy = strategy_of(cfg);
  bp.points.batch_size = cfg.batch;
  bp.resampler = [geo](int n, geom::Rng& r) { return geo->random_points(n, r); };

  bp.eval_points = geo->uniform_points(static_cast<int>(cfg.predict_grid));
  bp.reference = [traj](const Point& p) { return traj->at(p[0]); };
  bp.external_names = {"rho", "sigma", "beta"};
  bp.external_truth = {10.0, 15.0, 8.0 / 3.0};
  bp.external_init = {1.0, 1.0, 1.0};
  return bp;
}

BuiltProblem build_diffusion_reaction(const RunConfig& cfg) {
  BuiltProblem bp;
  reject_geometry_override(cfg);
  require_points(cfg.points.domain, 1, "domain", cfg.problem);
  require_points(cfg.points.boundary, 1, "boundary", cfg.problem);
  require_points(cfg.points.initial, 1, "initial", cfg.problem);
  require_points(cfg.points.observations, 1, "observation", cfg.problem);

  geom::GeoPtr space = geom::interval(0.0, 1.0);
  geom::SpaceTimeDomain dom(space, 0.0, 10.0);
  bp.spec = make_spec(cfg, 2, 2, 2);
  bp.residual.fn = [](prob::ResidualCtx& ctx) {
    ad::Var1 a = ctx.u(0), b = ctx.u(1);
    ad::Var1 d = ctx.lambda(0), kf = ctx.lambda(1);
    ad::Var1 rate = kf * a * b * b;
    std::vector<ad::Var1> r;
    r.push_back(ctx.d(0, 1) - d * ctx.d2(0, 0) + rate);
    r.push_back(ctx.d(1, 1) - d * ctx.d2(1, 0) + ctx.tape().constant(2.0) * rate);
    return r;
  };
  bp.residual.orders = {2, 1};
  bp.residual.n_equations = 2;

  geom::Rng rng(cfg.seed);
  std::uniform_real_distribution<double> tdist(0.0, 10.0);
  PointSet left, right;
  for (long i = 0; i < cfg.points.boundary; ++i) left.push_back({0.0, tdist(rng)});
  for (long i = 0; i < cfg.points.boundary; ++i) right.push_back({1.0, tdist(rng)});
  bp.conditions.push_back(prob::Condition::dirichlet(left, constant_field(1.0), 0));
  bp.conditions.push_back(prob::Condition::dirichlet(left, constant_field(1.0), 1));
  bp.conditions.push_back(prob::Condition::dirichlet(right, constant_field(0.0), 0));
  bp.conditions.push_back(prob::Condition::dirichlet(right, constant_field(0.0), 1));
  auto ic = [](const Point& p) { return std::exp(-20.0 * p[0]); };
  PointSet ic_pts = dom.random_initial_points(static_cast<int>(cfg.points.initial), rng);
  bp.conditions.push_back(prob::Condition::initial(ic_pts, ic, 0));
  bp.conditions.push_back(prob::Condition::initial(ic_pts, ic, 1));

  static const auto sol = std::make_shared<oracle::Grid1dSolution>(
      oracle::fd_diffusion_reaction(2e-3, 0.1, 201, 8000));
  bp.observations = oracle::grid_observations(
      *sol, static_cast<int>(cfg.points.observations), 0.0, cfg.seed);

  bp.points.t_f = dom.random_points(static_cast<int>(cfg.points.domain), rng);
  bp.points.strategy = strategy_of(cfg);
  bp.points.batch_size = cfg.batch;
  bp.resampler = [dom](int n, geom::Rng& r) { return dom.random_points(n, r); };

  long g = cfg.predict_grid;
  bp.eval_points = lattice({0.0, 0.0}, {1.0, 10.0}, {g, g});
  bp.reference = [sol](const Point& p) {
    return std::vector<double>{sol->sample(0, p[0], p[1]), sol->sample(1, p[0], p[1])};
  };
  bp.external_names = {"D", "kf"};
  bp.external_truth = {2e-3, 0.1};
  bp.external_init = {0.0, 0.0};
  return bp;
}

BuiltProblem build_volterra_ide(const RunConfig& cfg) {
  BuiltProblem bp;
  reject_geometry_override(cfg);
  require_points(cfg.points.domain, 2, "domain", cfg.problem);

  geom::GeoPtr geo = geom::interval(0.0, 5.0);
  bp.spec = make_spec(cfg, 1, 1, 0);
  quad::IntegralOperator op;
  op.kernel = [](double t, double x) { return std::exp(t - x); };
  op.lower = [](double) { return 0.0; };
  op.upper = [](double x) { return x; };
  op.rule = quad::gauss_legendre(20);
  bp.residual.fn = [op](prob::ResidualCtx& ctx) {
    return std::vector<ad::Var1>{ctx.d(0, 0) + ctx.u(0) - ctx.integral(op)};
  };
  bp.residual.orders = {1};

  PointSet origin = {{0.0}};
  bp.conditions.push_back(prob::Condition::dirichlet(origin, constant_field(1.0)));
  bp.points.t_f = geo->uniform_points(static_cast<int>(cfg.points.domain));
  bp.points.strategy = strategy_of(cfg);
  bp.points.batch_size = cfg.batch;
  bp.resampler = [geo](int n, geom::Rng& r) { return geo->random_points(n, r); };

  bp.eval_points = geo->uniform_points(static_cast<int>(cfg.predict_grid));
  bp.reference = [](const Point& p) {
    return std::vector<double>{std::exp(-p[0]) * std::cosh(p[0])};
  };
  return bp;
}

BuiltProblem build_burgers_2d(const RunConfig& cfg) {
  BuiltProblem bp;
  reject_geometry_override(cfg);
  require_points(cfg.points.domain, 1, "domain", cfg.problem);
  require_points(cfg.points.boundary, 1, "boundary", cfg.problem);
  require_points(cfg.points.initial, 1, "initial", cfg.problem);

  const double re = 5000.0;
  geom::GeoPtr space = geom::rectangle({0.0, 0.0}, {1.0, 1.0});
  geom::SpaceTimeDomain dom(space, 0.0, 1.0);
  bp.spec = make_spec(cfg, 3, 2, 0);
  bp.residual.fn = [re](prob::ResidualCtx& ctx) {
    ad::Var1 u = ctx.u(0), v = ctx.u(1);
    ad::Var1 inv_re = ctx.tape().constant(1.0 / re);
    std::vector<ad::Var1> r;
    r.push_back(ctx.d(0, 2) + u * ctx.d(0, 0) + v * ctx.d(0, 1) -
                inv_re * (ctx.d2(0, 0) + ctx.d2(0, 1)));
    r.push_back(ctx.d(1, 2) + u * ctx.d(1, 0) + v * ctx.d(1, 1) -
                inv_re * (ctx.d2(1, 0) + ctx.d2(1, 1)));
    return r;
  };
  bp.residual.orders = {2, 2, 1};
  bp.residual.n_equations = 2;

  auto wave = [re](const Point& p) {
    return 1.0 / (4.0 * (1.0 + std::exp((-4.0 * p[0] + 4.0 * p[1] - p[2]) * re / 32.0)));
  };
  auto exact_u = [wave](const Point& p) { return 0.75 - wave(p); };
  auto exact_v = [wave](const Point& p) { return 0.75 + wave(p); };

  geom::Rng rng(cfg.seed);
  PointSet bpts = dom.random_boundary_points(static_cast<int>(cfg.points.boundary), rng);
  bp.conditions.push_back(prob::Condition::dirichlet(bpts, exact_u, 0));
  bp.conditions.push_back(prob::Condition::dirichlet(bpts, exact_v, 1));
  PointSet ipts = dom.random_initial_points(static_cast<int>(cfg.points.initial), rng);
  bp.conditions.push_back(prob::Condition::initial(ipts, exact_u, 0));
  bp.conditions.push_back(prob::Condition::initial(ipts, exact_v, 1));

  bp.points.t_f = dom.random_points(static_cast<int>(cfg.points.domain), rng);
  bp.points.strategy = strategy_of(cfg);
  bp.points.batch_size = cfg.batch;
  bp.resampler = [dom](int n, geom::Rng& r) { return dom.random_points(n, r); };

  long g = cfg.predict_grid;
  bp.eval_points = lattice({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {g, g, std::max(g / 4, 2L)});
  bp.reference = [exact_u, exact_v](const Point& p) {
    return std::vector<double>{exact_u(p), exact_v(p)};
  };
  return bp;
}

BuiltProblem build_frequency_demo(const RunConfig& cfg) {
  BuiltProblem bp;
  geom::GeoPtr geo = geometry_override(cfg, 1);
  if (!geo) geo = geom::interval(-kPi, kPi);
  require_points(cfg.points.observations, 1, "observation", cfg.problem);

  bp.spec = make_spec(cfg, 1, 1, 0);
  bp.residual.fn = [](prob::ResidualCtx& ctx) {
    return std::vector<ad::Var1>{ctx.u(0) * ctx.tape().constant(0.0)};
  };
  bp.residual.orders = {0};

  auto target = [](const Point& p) {
    double s = 0.0;
    for (int k = 1; k <= 5; ++k) s += std::sin(2.0 * k * p[0]) / (2.0 * k);
    return s;
  };
  geom::Rng rng(cfg.seed);
  bp.observations.points = geo->random_points(static_cast<int>(cfg.points.observations), rng);
  bp.observations.components = {0};
  for (const Point& p : bp.observations.points)
    bp.observations.values.push_back({target(p)});

  if (cfg.points.domain > 0)
    bp.points.t_f = geo->random_points(static_cast<int>(cfg.points.domain), rng);
  bp.points.strategy = strategy_of(cfg);
  bp.points.batch_size = cfg.batch;
  bp.resampler = [geo](int n, geom::Rng& r) { return geo->random_points(n, r); };

  bp.eval_points = geo->uniform_points(static_cast<int>(cfg.predict_grid));
  bp.reference = [target](const Point& p) { return std::vector<double>{target(p)}; };

  train::Callback spectrum = train::Callback::spectrum(
      train::spectrum_grid(512), {2.0, 4.0, 6.0, 8.0, 10.0}, 250,
      (fs::path(cfg.out) / "spectrum.csv").string());
  bp.callbacks.push_back(std::move(spectrum));
  return bp;
}

// ---------------------------------------------------------------------------
// Artifact writers.

void write_solution_csv(const std::string& path, const PointSet& points,
                        const net::NetworkSpec& spec, const net::OutputTransform& transform,
                        const net::Parameters& params) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw StructuralError("cannot open " + path + " for writing");
  int dim = spec.input_dim();
  int comps = spec.output_dim();
  for (int k = 0; k < dim; ++k) out << (k ? "," : "") << "x" << k;
  for (int c = 0; c < comps; ++c) out << ",u" << c;
  out << "\n";
  for (const Point& p : points) {
    std::vector<double> vals = eng::forward_values(spec, transform, params, p);
    for (int k = 0; k < dim; ++k) out << (k ? "," : "") << fmt_double(p[k]);
    for (double v : vals) out << "," << fmt_double(v);
    out << "\n";
  }
}

std::vector<train::OptimizerConfig> trim_phases(std::vector<train::OptimizerConfig> phases,
                                                long done) {
  std::vector<train::OptimizerConfig> remaining;
  for (auto& phase : phases) {
    if (phase.kind == train::OptimizerConfig::Kind::kAdam) {
      if (done >= phase.iterations) {
        done -= phase.iterations;
        continue;
      }
      phase.iterations -= done;
      done = 0;
    }
    // Quasi-Newton phases re-run on resume: their step count is not
    // recoverable from the iteration counter alone, and a converged phase
    // exits immediately anyway.
    remaining.push_back(std::move(phase));
  }
  return remaining;
}

void check_spec_match(const net::NetworkSpec& expected, const net::NetworkSpec& got,
                      const std::string& source) {
  if (expected.layers != got.layers || expected.activation != got.activation ||
      expected.externals != got.externals)
    throw StructuralError("checkpoint at " + source +
                          " does not match the configured network shape");
}

}  // namespace

// ---------------------------------------------------------------------------
// Geometry expression trees.

geom::GeoPtr parse_geometry(const nlohmann::json& node) {
  struct Parser {
    geom::GeoPtr walk(const json& n, const std::string& where) {
      require_object(n, where);
      if (!n.contains("op")) schema_error("missing key \"op\"", where);
      std::string op = get_string(n, "op", where);
      if (op == "interval") {
        check_keys(n, where, {"op", "lo", "hi"});
        return geom::interval(get_number(n, "lo", where), get_number(n, "hi", where));
      }
      if (op == "rectangle" || op == "cuboid") {
        check_keys(n, where, {"op", "lo", "hi"});
        int dim = op == "rectangle" ? 2 : 3;
        Point lo = get_point(n, "lo", where, dim);
        Point hi = get_point(n, "hi", where, dim);
        return op == "rectangle" ? geom::rectangle(lo, hi) : geom::cuboid(lo, hi);
      }
      if (op == "disk" || op == "sphere") {
        check_keys(n, where, {"op", "center", "radius"});
        int dim = op == "disk" ? 2 : 3;
        Point c = get_point(n, "center", where, dim);
        double r = get_number(n, "radius", where);
        return op == "disk" ? geom::disk(c, r) : geom::sphere(c, r);
      }
      if (op == "triangle") {
        check_keys(n, where, {"op", "a", "b", "c"});
        return geom::triangle(get_point(n, "a", where, 2), get_point(n, "b", where, 2),
                              get_point(n, "c", where, 2));
      }
      if (op == "polygon") {
        check_keys(n, where, {"op", "vertices"});
        if (!n.contains("vertices") || !n.at("vertices").is_array())
          schema_error("expected an array of vertices", join(where, "vertices"));
        PointSet verts;
        for (const json& v : n.at("vertices")) {
          Point p;
          for (const json& c : v) p.push_back(c.get<double>());
          verts.push_back(std::move(p));
        }
        return geom::polygon(std::move(verts));
      }
      if (op == "union" || op == "difference" || op == "intersection") {
        check_keys(n, where, {"op", "a", "b"});
        if (!n.contains("a")) schema_error("missing key \"a\"", where);
        if (!n.contains("b")) schema_error("missing key \"b\"", where);
        geom::GeoPtr a = walk(n.at("a"), join(where, "a"));
        geom::GeoPtr b = walk(n.at("b"), join(where, "b"));
        if (op == "union") return geom::csg_union(a, b);
        if (op == "difference") return geom::difference(a, b);
        return geom::intersection(a, b);
      }
      schema_error("unknown geometry op \"" + op + "\"", where);
    }
  } parser;
  return parser.walk(node, "/geometry");
}

// ---------------------------------------------------------------------------
// Config parsing.

std::vector<std::string> problem_names() { return registry_names(); }

RunConfig parse_config_json(const nlohmann::json& doc) {
  require_object(doc, "/");
  check_keys(doc, "/",
             {"problem", "seed", "out", "network", "optimizer", "points", "rar", "predict",
              "geometry"});
  if (!doc.contains("problem")) schema_error("missing key \"problem\"", "/");

  RunConfig cfg;
  cfg.problem = get_string(doc, "problem", "/");
  Defaults d = defaults_for(cfg.problem);
  cfg.depth = d.depth;
  cfg.width = d.width;
  cfg.phases = d.phases;
  cfg.points = d.points;
  cfg.rar = d.rar;
  cfg.predict_grid = d.predict_grid;
  cfg.out = "runs/" + cfg.problem;

  if (doc.contains("seed")) {
    const json& v = doc.at("seed");
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0))
      schema_error("seed must be a non-negative integer", "/seed");
    cfg.seed = v.get<std::uint64_t>();
  }
  if (doc.contains("out")) {
    cfg.out = get_string(doc, "out", "/");
    if (cfg.out.empty()) schema_error("output directory must not be empty", "/out");
  }
  if (doc.contains("network")) {
    const json& n = doc.at("network");
    require_object(n, "/network");
    check_keys(n, "/network", {"depth", "width", "activation"});
    if (n.contains("depth")) {
      long depth = get_integer(n, "depth", "/network");
      if (depth < 1) schema_error("depth must be at least 1", "/network/depth");
      cfg.depth = static_cast<int>(depth);
    }
    if (n.contains("width")) {
      long width = get_integer(n, "width", "/network");
      if (width < 1) schema_error("width must be at least 1", "/network/width");
      cfg.width = static_cast<int>(width);
    }
    if (n.contains("activation")) {
      cfg.activation = get_string(n, "activation", "/network");
      try {
        net::activation_from_name(cfg.activation);
      } catch (const StructuralError& e) {
        schema_error(e.what(), "/network/activation");
      }
    }
  }
  if (doc.contains("optimizer")) {
    const json& arr = doc.at("optimizer");
    if (!arr.is_array() || arr.empty())
      schema_error("expected a non-empty array of phases", "/optimizer");
    cfg.phases.clear();
    for (size_t i = 0; i < arr.size(); ++i)
      cfg.phases.push_back(parse_phase(arr[i], "/optimizer/" + std::to_string(i)));
  }
  if (doc.contains("points")) {
    const json& n = doc.at("points");
    require_object(n, "/points");
    check_keys(n, "/points",
               {"domain", "boundary", "initial", "observations", "strategy", "batch"});
    if (n.contains("domain")) cfg.points.domain = get_count(n, "domain", "/points");
    if (n.contains("boundary")) cfg.points.boundary = get_count(n, "boundary", "/points");
    if (n.contains("initial")) cfg.points.initial = get_count(n, "initial", "/points");
    if (n.contains("observations"))
      cfg.points.observations = get_count(n, "observations", "/points");
    if (n.contains("strategy")) {
      cfg.strategy = get_string(n, "strategy", "/points");
      if (cfg.strategy != "fixed" && cfg.strategy != "resample")
        schema_error("strategy must be \"fixed\" or \"resample\"", "/points/strategy");
    }
    if (n.contains("batch")) {
      long b = get_integer(n, "batch", "/points");
      if (b < 1) schema_error("batch size must be at least 1", "/points/batch");
      cfg.batch = static_cast<std::size_t>(b);
    }
  }
  if (doc.contains("rar")) {
    const json& n = doc.at("rar");
    require_object(n, "/rar");
    check_keys(n, "/rar", {"enabled", "m", "threshold", "pool", "inner_iterations",
                           "max_rounds"});
    if (n.contains("enabled")) {
      if (!n.at("enabled").is_boolean()) schema_error("expected a boolean", "/rar/enabled");
      cfg.rar.enabled = n.at("enabled").get<bool>();
    }
    if (n.contains("m")) {
      long m = get_integer(n, "m", "/rar");
      if (m < 1) schema_error("m must be at least 1", "/rar/m");
      cfg.rar.config.m = static_cast<int>(m);
    }
    if (n.contains("threshold")) {
      double t = get_number(n, "threshold", "/rar");
      if (!(t > 0.0)) schema_error("threshold must be positive", "/rar/threshold");
      cfg.rar.config.threshold = t;
    }
    if (n.contains("pool")) {
      long p = get_count(n, "pool", "/rar");
      cfg.rar.config.pool_size = static_cast<size_t>(p);
    }
    if (n.contains("inner_iterations")) {
      long it = get_count(n, "inner_iterations", "/rar");
      cfg.rar.config.inner_iters = it;
    }
    if (n.contains("max_rounds")) {
      long r = get_count(n, "max_rounds", "/rar");
      cfg.rar.config.max_rounds = static_cast<int>(r);
    }
    if (cfg.rar.enabled) cfg.rar.config.validate();
  }
  if (doc.contains("predict")) {
    const json& n = doc.at("predict");
    require_object(n, "/predict");
    check_keys(n, "/predict", {"grid"});
    if (n.contains("grid")) {
      long g = get_integer(n, "grid", "/predict");
      if (g < 2) schema_error("grid must be at least 2", "/predict/grid");
      cfg.predict_grid = g;
    }
  }
  if (doc.contains("geometry")) {
    cfg.geometry = doc.at("geometry");
    parse_geometry(cfg.geometry);
  }
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw StructuralError("config parse error in " + path + ": " + e.what());
  }
  return parse_config_json(doc);
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  json doc;
  doc["problem"] = cfg.problem;
  doc["seed"] = cfg.seed;
  doc["out"] = cfg.out;
  doc["network"] = {{"depth", cfg.depth}, {"width", cfg.width}, {"activation", cfg.activation}};
  json phases = json::array();
  for (const auto& phase : cfg.phases) phases.push_back(phase_to_json(phase));
  doc["optimizer"] = std::move(phases);
  json points = {{"domain", cfg.points.domain},
                 {"boundary", cfg.points.boundary},
                 {"initial", cfg.points.initial},
                 {"observations", cfg.points.observations},
                 {"strategy", cfg.strategy}};
  if (cfg.batch) points["batch"] = *cfg.batch;
  doc["points"] = std::move(points);
  doc["rar"] = {{"enabled", cfg.rar.enabled},
                {"m", cfg.rar.config.m},
                {"threshold", cfg.rar.config.threshold},
                {"pool", cfg.rar.config.pool_size},
                {"inner_iterations", cfg.rar.config.inner_iters},
                {"max_rounds", cfg.rar.config.max_rounds}};
  doc["predict"] = {{"grid", cfg.predict_grid}};
  if (!cfg.geometry.is_null()) doc["geometry"] = cfg.geometry;
  return doc;
}

BuiltProblem build_problem(const RunConfig& cfg) {
  if (cfg.problem == "poisson-lshape") return build_poisson_lshape(cfg);
  if (cfg.problem == "burgers-1d") return build_burgers_1d(cfg);
  if (cfg.problem == "lorenz-inverse") return build_lorenz_inverse(cfg);
  if (cfg.problem == "diffusion-reaction") return build_diffusion_reaction(cfg);
  if (cfg.problem == "volterra-ide") return build_volterra_ide(cfg);
  if (cfg.problem == "burgers-2d") return build_burgers_2d(cfg);
  if (cfg.problem == "frequency-demo") return build_frequency_demo(cfg);
  defaults_for(cfg.problem);  // throws with the list of known problems
  return {};
}

double l2_relative_error(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size())
    throw StructuralError("l2_relative_error: prediction has " + std::to_string(pred.size()) +
                          " values but the reference has " + std::to_string(ref.size()));
  double diff2 = 0.0, ref2 = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - ref[i];
    diff2 += d * d;
    ref2 += ref[i] * ref[i];
  }
  if (ref2 == 0.0)
    throw DomainError("l2_relative_error: the reference norm is zero");
  return std::sqrt(diff2) / std::sqrt(ref2);
}

nlohmann::json RunReport::to_json() const {
  json doc;
  doc["problem"] = problem;
  doc["command"] = command;
  doc["seed"] = seed;
  doc["iterations"] = iterations;
  doc["loss"] = {{"total", loss.total}, {"f", loss.f}, {"b", loss.b}, {"i", loss.i}};
  doc["metrics"] = json::object();
  for (const auto& [k, v] : metrics) doc["metrics"][k] = v;
  doc["wall_time_seconds"] = wall_time_seconds;
  doc["files"] = files;
  doc["errors"] = errors;
  doc["status"] = ok() ? "ok" : "error";
  return doc;
}

RunReport run(const std::string& command, const RunConfig& cfg, const std::string& restore) {
  if (command != "solve" && command != "train" && command != "predict" && command != "export")
    throw StructuralError("unknown command \"" + command +
                          "\"; expected solve, train, predict, or export");
  auto t_start = std::chrono::steady_clock::now();

  RunReport rep;
  rep.problem = cfg.problem;
  rep.command = command;
  rep.seed = cfg.seed;

  fs::create_directories(cfg.out);
  BuiltProblem built = build_problem(cfg);
  auto out_path = [&cfg](const char* name) { return (fs::path(cfg.out) / name).string(); };
  auto add_file = [&rep](const std::string& name) {
    if (std::find(rep.files.begin(), rep.files.end(), name) == rep.files.end())
      rep.files.push_back(name);
  };

  const bool do_train = command == "train" || command == "solve";
  const bool do_predict = command == "predict" || command == "solve" || command == "export";
  const bool do_export = command == "export";

  train::TrainState state;
  std::vector<rar::AddedPoint> added;
  bool have_state = false;

  auto write_checkpoint = [&]() {
    net::Checkpoint ck = train::to_checkpoint(built.spec, state);
    ck.optimizer["history"] = history_to_json(state.history);
    if (!added.empty()) ck.optimizer["added_points"] = added_to_json(added);
    net::save_checkpoint(out_path("checkpoint.json"), ck);
    add_file("checkpoint.json");
  };
  auto write_side_tables = [&]() {
    train::write_history_csv(out_path("history.csv"), state.history);
    add_file("history.csv");
    if (!added.empty()) {
      rar::write_added_points_csv(out_path("added_points.csv"), added);
      add_file("added_points.csv");
    }
    if (!built.observations.empty()) {
      oracle::write_observations_csv(out_path("observations.csv"), built.observations);
      add_file("observations.csv");
    }
  };

  if (do_train) {
    if (!restore.empty()) {
      net::Checkpoint ck = net::load_checkpoint(restore);
      check_spec_match(built.spec, ck.spec, restore);
      state = train::state_from_checkpoint(ck);
      state.history = history_from_json(ck.optimizer.value("history", json()));
      added = added_from_json(ck.optimizer.value("added_points", json()));
    } else {
      state = train::make_state(built.spec, cfg.seed);
      for (size_t k = 0; k < built.external_init.size(); ++k)
        state.params.external(static_cast<int>(k)) = built.external_init[k];
    }

    train::TrainModel model{
        eng::Evaluator(built.spec, built.transform, built.residual, built.conditions,
                       built.observations, built.weights),
        built.points, built.resampler};
    train::TrainOptions options;
    options.phases = trim_phases(cfg.phases, state.iteration);
    options.seed = cfg.seed;
    options.callbacks = built.callbacks;

    try {
      train::TrainState next = train::train(model, options, state);
      state = std::move(next);
      if (cfg.rar.enabled) {
        rar::RarResult result = rar::rar_loop(model, cfg.rar.config, options, state);
        state = std::move(result.state);
        added.insert(added.end(), result.added.begin(), result.added.end());
      }
    } catch (const NumericError& e) {
      rep.errors.push_back(std::string("numeric failure during training: ") + e.what());
    }
    have_state = true;
    write_checkpoint();
    write_side_tables();
    for (const auto& cb : built.callbacks) {
      fs::path p(cb.path);
      if (fs::exists(p)) add_file(p.filename().string());
    }
  }

  if (!have_state && (do_predict || do_export)) {
    std::string source = restore.empty() ? out_path("checkpoint.json") : restore;
    if (!fs::exists(source))
      throw StructuralError("no checkpoint found at " + source +
                            "; run the train or solve command first");
    net::Checkpoint ck = net::load_checkpoint(source);
    check_spec_match(built.spec, ck.spec, source);
    state = train::state_from_checkpoint(ck);
    state.history = history_from_json(ck.optimizer.value("history", json()));
    added = added_from_json(ck.optimizer.value("added_points", json()));
    have_state = true;
  }

  if (have_state) {
    rep.iterations = state.iteration;
    if (!state.history.empty()) {
      const auto& last = state.history.back();
      rep.loss.total = last.total;
      rep.loss.f = last.f;
      rep.loss.b = last.b;
      rep.loss.i = last.i;
    }
    for (size_t k = 0; k < built.external_names.size(); ++k)
      rep.metrics[built.external_names[k]] = state.params.external(static_cast<int>(k));
  }

  if (do_export) {
    write_checkpoint();
    write_side_tables();
  }

  if (do_predict) {
    try {
      write_solution_csv(out_path("solution.csv"), built.eval_points, built.spec,
                         built.transform, state.params);
      add_file("solution.csv");
      if (built.reference) {
        std::vector<double> pred, ref;
        for (const Point& p : built.eval_points) {
          std::vector<double> pv =
              eng::forward_values(built.spec, built.transform, state.params, p);
          std::vector<double> rv = built.reference(p);
          pred.insert(pred.end(), pv.begin(), pv.end());
          ref.insert(ref.end(), rv.begin(), rv.end());
        }
        rep.metrics["l2_rel_error"] = l2_relative_error(pred, ref);
      }
    } catch (const NumericError& e) {
      rep.errors.push_back(std::string("numeric failure during prediction: ") + e.what());
    }
  }

  if (command != "export") {
    std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t_start;
    rep.wall_time_seconds = elapsed.count();
  }

  add_file("report.json");
  std::ofstream rout(out_path("report.json"), std::ios::trunc);
  if (!rout) throw StructuralError("cannot open " + out_path("report.json") + " for writing");
  rout << rep.to_json().dump(2) << "\n";
  return rep;
}

}  // namespace pinn::cli
