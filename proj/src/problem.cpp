#include "pinn/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace pinn::prob {

namespace {

std::string format_point(const Point& x) {
  std::ostringstream out;
  out.precision(12);
  out << "(";
  for (size_t i = 0; i < x.size(); ++i) {
    if (i) out << ", ";
    out << x[i];
  }
  out << ")";
  return out.str();
}

Point drop_time(const Point& xt) { return Point(xt.begin(), xt.end() - 1); }

}  // namespace

void enforce_residual_orders(const ResidualCtx& ctx, const Residual& residual) {
  for (const Slot& s : ctx.slots()) {
    const int need = s.kind == SlotKind::kFirst ? 1 : s.kind == SlotKind::kSecond ? 2 : 0;
    if (need == 0) continue;
    const int declared =
        s.axis >= 0 && s.axis < static_cast<int>(residual.orders.size()) ? residual.orders[s.axis]
                                                                         : 0;
    if (declared < need) {
      throw StructuralError("residual takes an order-" + std::to_string(need) +
                            " derivative along axis " + std::to_string(s.axis) +
                            " but declares order " + std::to_string(declared));
    }
  }
}

// ---------------------------------------------------------------------------
// NetworkProbe

NetworkProbe::NetworkProbe(const net::NetworkSpec& spec, const net::Parameters& params,
                           const net::OutputTransform& transform, Point x)
    : spec_(spec), params_(params), transform_(transform), x_(std::move(x)) {
  if (static_cast<int>(x_.size()) != spec_.input_dim()) {
    throw StructuralError("probe point dimension " + std::to_string(x_.size()) +
                          " does not match network input dimension " +
                          std::to_string(spec_.input_dim()));
  }
}

const std::vector<ad::Jet<3>>& NetworkProbe::axis_pass(int axis) const {
  if (axis < 0 || axis >= static_cast<int>(x_.size())) {
    throw DomainError("derivative axis " + std::to_string(axis) + " out of range");
  }
  if (per_axis_.empty()) per_axis_.resize(x_.size());
  std::vector<ad::Jet<3>>& cell = per_axis_[static_cast<size_t>(axis)];
  if (!cell.empty()) return cell;

  ad::Tape<3> tape;
  std::vector<ad::Var<3>> in;
  in.reserve(x_.size());
  for (size_t i = 0; i < x_.size(); ++i) {
    in.push_back(tape.input(ad::Jet<3>(x_[i], i == static_cast<size_t>(axis) ? 1.0 : 0.0)));
  }
  std::vector<ad::Var<3>> out = net::forward<3>(spec_, params_, in, tape);
  out = transform_.apply<3>(in, out, tape);
  cell.reserve(out.size());
  for (const ad::Var<3>& o : out) cell.push_back(o.jet());
  return cell;
}

double NetworkProbe::value(int component) const {
  const auto& jets = axis_pass(0);
  if (component < 0 || component >= static_cast<int>(jets.size())) {
    throw DomainError("output component " + std::to_string(component) + " out of range");
  }
  return jets[static_cast<size_t>(component)].value();
}

double NetworkProbe::first(int component, int axis) const {
  const auto& jets = axis_pass(axis);
  if (component < 0 || component >= static_cast<int>(jets.size())) {
    throw DomainError("output component " + std::to_string(component) + " out of range");
  }
  return jets[static_cast<size_t>(component)].tangent();
}

double NetworkProbe::second(int component, int axis) const {
  const auto& jets = axis_pass(axis);
  if (component < 0 || component >= static_cast<int>(jets.size())) {
    throw DomainError("output component " + std::to_string(component) + " out of range");
  }
  return jets[static_cast<size_t>(component)].second();
}

double NetworkProbe::external(int k) const {
  if (k < 0 || k >= spec_.externals) {
    throw DomainError("external parameter index " + std::to_string(k) + " out of range");
  }
  return params_.external(k);
}

double NetworkProbe::value_at(const Point& t, int component) const {
  ad::Tape<1> tape;
  std::vector<ad::Var<1>> in;
  in.reserve(t.size());
  for (double v : t) in.push_back(tape.input(ad::Jet<1>(v)));
  std::vector<ad::Var<1>> out = net::forward<1>(spec_, params_, in, tape);
  out = transform_.apply<1>(in, out, tape);
  if (component < 0 || component >= static_cast<int>(out.size())) {
    throw DomainError("output component " + std::to_string(component) + " out of range");
  }
  return out[static_cast<size_t>(component)].value();
}

// ---------------------------------------------------------------------------
// ResidualCtx

double ResidualCtx::x(int axis) const {
  if (axis < 0 || axis >= dim()) {
    throw DomainError("coordinate axis " + std::to_string(axis) + " out of range");
  }
  return x_[static_cast<size_t>(axis)];
}

double ResidualCtx::normal(int axis) const {
  if (!has_normal()) {
    throw DomainError("boundary normal is only available for boundary evaluations");
  }
  if (axis < 0 || axis >= static_cast<int>(normal_.size())) {
    throw DomainError("normal axis " + std::to_string(axis) + " out of range");
  }
  return normal_[static_cast<size_t>(axis)];
}

ad::Var1 ResidualCtx::materialize(SlotKind kind, int component, int axis, double value) {
  const auto key = std::make_tuple(static_cast<int>(kind), component, axis);
  if (auto it = index_.find(key); it != index_.end()) return vars_[it->second];
  vars_.push_back(tape_.input(ad::Jet1(value)));
  slots_.push_back(Slot{kind, component, axis, {}});
  index_.emplace(key, vars_.size() - 1);
  return vars_.back();
}

ad::Var1 ResidualCtx::u(int component) {
  return materialize(SlotKind::kValue, component, -1, probe_.value(component));
}

ad::Var1 ResidualCtx::d(int component, int axis) {
  return materialize(SlotKind::kFirst, component, axis, probe_.first(component, axis));
}

ad::Var1 ResidualCtx::d2(int component, int axis) {
  return materialize(SlotKind::kSecond, component, axis, probe_.second(component, axis));
}

ad::Var1 ResidualCtx::lambda(int k) {
  return materialize(SlotKind::kExternal, k, -1, probe_.external(k));
}

ad::Var1 ResidualCtx::integral(const quad::IntegralOperator& op, int component) {
  if (x_.empty()) throw StructuralError("integral term requires a nonempty point");
  const double x0 = x_.front();
  const double lo = op.lower(x0);
  const double hi = op.upper(x0);
  if (lo > hi) throw DomainError("integral: lower limit exceeds upper limit");

  Slot slot{SlotKind::kIntegral, component, -1, {}};
  double acc = 0.0;
  if (hi > lo) {
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    slot.nodes.reserve(static_cast<size_t>(op.rule.n()));
    for (int i = 0; i < op.rule.n(); ++i) {
      const double t = mid + half * op.rule.nodes[static_cast<size_t>(i)];
      const double coeff = op.rule.weights[static_cast<size_t>(i)] * half * op.kernel(t, x0);
      Point tp = x_;
      tp[0] = t;
      acc += coeff * probe_.value_at(tp, component);
      slot.nodes.push_back(SlotNode{std::move(tp), coeff});
    }
  }
  vars_.push_back(tape_.input(ad::Jet1(acc)));
  slots_.push_back(std::move(slot));
  return vars_.back();
}

// ---------------------------------------------------------------------------
// Residual and conditions

int Residual::max_order() const {
  int m = 0;
  for (int o : orders) m = std::max(m, o);
  return m;
}

void Residual::validate() const {
  if (!fn) throw StructuralError("residual has no closure");
  if (n_equations < 1) throw StructuralError("residual must have at least one equation");
  for (int o : orders) {
    if (o < 0 || o > 2) {
      throw StructuralError("residual declares derivative order " + std::to_string(o) +
                            "; supported orders are 0 through 2");
    }
  }
}

std::string condition_kind_name(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::kDirichlet: return "dirichlet";
    case ConditionKind::kNeumann: return "neumann";
    case ConditionKind::kRobin: return "robin";
    case ConditionKind::kPeriodic: return "periodic";
    case ConditionKind::kOperator: return "operator";
    case ConditionKind::kInitial: return "initial";
    case ConditionKind::kObservation: return "observation";
  }
  return "unknown";
}

Condition Condition::dirichlet(PointSet pts, ScalarField g, int component) {
  Condition c;
  c.kind = ConditionKind::kDirichlet;
  c.component = component;
  c.points = std::move(pts);
  c.target = std::move(g);
  return c;
}

Condition Condition::neumann(PointSet pts, ScalarField g, NormalFn n, int component) {
  Condition c;
  c.kind = ConditionKind::kNeumann;
  c.component = component;
  c.points = std::move(pts);
  c.target = std::move(g);
  c.normal = std::move(n);
  return c;
}

Condition Condition::robin_bc(PointSet pts, RobinFn fn, NormalFn n, int component) {
  Condition c;
  c.kind = ConditionKind::kRobin;
  c.component = component;
  c.points = std::move(pts);
  c.robin = std::move(fn);
  c.normal = std::move(n);
  return c;
}

Condition Condition::periodic(PointSet pts, int axis, ImageFn image, int component) {
  if (axis < 0) throw StructuralError("periodic condition needs a nonnegative axis");
  Condition c;
  c.kind = ConditionKind::kPeriodic;
  c.component = component;
  c.points = std::move(pts);
  c.axis = axis;
  c.image = std::move(image);
  return c;
}

Condition Condition::operator_bc(PointSet pts, Residual op, NormalFn n) {
  op.validate();
  Condition c;
  c.kind = ConditionKind::kOperator;
  c.points = std::move(pts);
  c.op = std::move(op);
  c.normal = std::move(n);
  return c;
}

Condition Condition::initial(PointSet pts, ScalarField g, int component) {
  Condition c;
  c.kind = ConditionKind::kInitial;
  c.component = component;
  c.points = std::move(pts);
  c.target = std::move(g);
  return c;
}

NormalFn normal_of(geom::GeoPtr geo) {
  return [geo](const Point& x) { return geo->boundary_normal(x); };
}

NormalFn spatial_normal_of(const geom::SpaceTimeDomain& dom) {
  geom::GeoPtr space = dom.space;
  return [space](const Point& xt) {
    Point n = space->boundary_normal(drop_time(xt));
    n.push_back(0.0);
    return n;
  };
}

ImageFn image_of(geom::GeoPtr geo, int axis) {
  return [geo, axis](const Point& x) { return geo->periodic_point(x, axis); };
}

ImageFn spatial_image_of(const geom::SpaceTimeDomain& dom, int axis) {
  geom::GeoPtr space = dom.space;
  return [space, axis](const Point& xt) {
    Point img = space->periodic_point(drop_time(xt), axis);
    img.push_back(xt.back());
    return img;
  };
}

namespace {

template <typename DrawFn, typename NormalProbe>
PointSet draw_normal_safe(int n, DrawFn&& draw, NormalProbe&& probe_normal) {
  PointSet out;
  out.reserve(static_cast<size_t>(n));
  for (int round = 0; round < 100 && static_cast<int>(out.size()) < n; ++round) {
    PointSet cand = draw(n - static_cast<int>(out.size()));
    for (Point& x : cand) {
      try {
        probe_normal(x);
      } catch (const AmbiguousNormalError&) {
        continue;
      }
      out.push_back(std::move(x));
    }
  }
  if (static_cast<int>(out.size()) < n) {
    throw SamplingError("could not draw enough boundary points with well-defined normals");
  }
  return out;
}

}  // namespace

PointSet sample_normal_safe_boundary(const geom::Geometry& g, int n, geom::Rng& rng) {
  return draw_normal_safe(
      n, [&](int k) { return g.random_boundary_points(k, rng); },
      [&](const Point& x) { g.boundary_normal(x); });
}

PointSet sample_normal_safe_boundary(const geom::SpaceTimeDomain& dom, int n, geom::Rng& rng) {
  return draw_normal_safe(
      n, [&](int k) { return dom.random_boundary_points(k, rng); },
      [&](const Point& xt) { dom.space->boundary_normal(drop_time(xt)); });
}

// ---------------------------------------------------------------------------
// Observations, weights, and point validation

std::vector<int> ObservationSet::effective_components(int output_dim) const {
  if (!components.empty()) return components;
  std::vector<int> all(static_cast<size_t>(output_dim));
  std::iota(all.begin(), all.end(), 0);
  return all;
}

void ObservationSet::validate(int output_dim) const {
  if (values.size() != points.size()) {
    throw StructuralError("observation set has " + std::to_string(points.size()) +
                          " points but " + std::to_string(values.size()) + " value rows");
  }
  const std::vector<int> comps = effective_components(output_dim);
  for (int c : comps) {
    if (c < 0 || c >= output_dim) {
      throw StructuralError("observed component " + std::to_string(c) + " out of range");
    }
  }
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != comps.size()) {
      throw StructuralError("observation row " + std::to_string(i) + " has " +
                            std::to_string(values[i].size()) + " values; expected " +
                            std::to_string(comps.size()));
    }
    for (double v : values[i]) {
      if (!std::isfinite(v)) {
        throw StructuralError("observation row " + std::to_string(i) + " contains a non-finite value");
      }
    }
  }
}

void LossWeights::validate() const {
  if (w_f < 0.0 || w_b < 0.0 || w_i < 0.0) {
    throw StructuralError("loss weights must be nonnegative");
  }
  if (w_f == 0.0 && w_b == 0.0 && w_i == 0.0) {
    throw StructuralError("at least one loss weight must be positive");
  }
}

namespace {

void reject(const char* set, size_t index, const Point& x, const char* why) {
  throw StructuralError(std::string(set) + " point " + std::to_string(index) + " at " +
                        format_point(x) + " " + why);
}

}  // namespace

void validate_points(const geom::Geometry& domain, const PointSet& t_f,
                     std::span<const Condition> conditions, const ObservationSet& obs) {
  for (size_t i = 0; i < t_f.size(); ++i) {
    if (!domain.inside(t_f[i])) reject("collocation", i, t_f[i], "lies outside the domain");
  }
  for (const Condition& c : conditions) {
    if (c.kind == ConditionKind::kInitial) {
      throw StructuralError("initial conditions require a time axis");
    }
    if (c.kind == ConditionKind::kObservation) {
      throw StructuralError("observation conditions are scored through the observation set");
    }
    for (size_t i = 0; i < c.points.size(); ++i) {
      if (!domain.on_boundary(c.points[i])) {
        reject(condition_kind_name(c.kind).c_str(), i, c.points[i], "is not on the boundary");
      }
    }
  }
  for (size_t i = 0; i < obs.points.size(); ++i) {
    if (!domain.inside(obs.points[i])) {
      reject("observation", i, obs.points[i], "lies outside the domain");
    }
  }
}

void validate_points(const geom::SpaceTimeDomain& domain, const PointSet& t_f,
                     std::span<const Condition> conditions, const ObservationSet& obs) {
  for (size_t i = 0; i < t_f.size(); ++i) {
    if (!domain.inside(t_f[i])) reject("collocation", i, t_f[i], "lies outside the domain");
  }
  for (const Condition& c : conditions) {
    if (c.kind == ConditionKind::kObservation) {
      throw StructuralError("observation conditions are scored through the observation set");
    }
    for (size_t i = 0; i < c.points.size(); ++i) {
      if (c.kind == ConditionKind::kInitial) {
        if (!domain.at_initial_time(c.points[i])) {
          reject("initial", i, c.points[i], "is not on the initial-time slice");
        }
      } else if (!domain.on_spatial_boundary(c.points[i])) {
        reject(condition_kind_name(c.kind).c_str(), i, c.points[i],
               "is not on the spatial boundary");
      }
    }
  }
  for (size_t i = 0; i < obs.points.size(); ++i) {
    if (!domain.inside(obs.points[i])) {
      reject("observation", i, obs.points[i], "lies outside the domain");
    }
  }
}

// ---------------------------------------------------------------------------
// Losses

PdeLoss pde_loss(const net::NetworkSpec& spec, const net::Parameters& params,
                 const net::OutputTransform& transform, const Residual& residual,
                 const PointSet& t_f) {
  residual.validate();
  PdeLoss out;
  out.point_norms.reserve(t_f.size());
  double acc = 0.0;
  for (const Point& x : t_f) {
    NetworkProbe probe(spec, params, transform, x);
    ResidualCtx ctx(x, probe);
    std::vector<ad::Var1> r;
    try {
      r = residual.fn(ctx);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (residual point " + format_point(x) + ")");
    }
    if (static_cast<int>(r.size()) != residual.n_equations) {
      throw StructuralError("residual returned " + std::to_string(r.size()) +
                            " equations; declared " + std::to_string(residual.n_equations));
    }
    enforce_residual_orders(ctx, residual);
    double norm2 = 0.0;
    for (const ad::Var1& ri : r) {
      const double v = ri.value();
      if (!std::isfinite(v)) {
        throw NumericError("non-finite residual at point " + format_point(x));
      }
      norm2 += v * v;
    }
    out.point_norms.push_back(std::sqrt(norm2));
    acc += norm2;
  }
  out.loss = t_f.empty() ? 0.0 : acc / static_cast<double>(t_f.size());
  return out;
}

namespace {

double condition_loss(const net::NetworkSpec& spec, const net::Parameters& params,
                      const net::OutputTransform& transform, const Condition& c) {
  if (c.kind == ConditionKind::kObservation) {
    throw StructuralError("observation conditions are scored through the observation set");
  }
  if (c.points.empty()) return 0.0;
  const int dim = static_cast<int>(c.points.front().size());
  double acc = 0.0;
  for (const Point& x : c.points) {
    NetworkProbe probe(spec, params, transform, x);
    try {
      switch (c.kind) {
        case ConditionKind::kDirichlet:
        case ConditionKind::kInitial: {
          const double r = probe.value(c.component) - c.target(x);
          acc += r * r;
          break;
        }
        case ConditionKind::kNeumann: {
          const Point n = c.normal(x);
          double dudn = 0.0;
          for (int a = 0; a < dim; ++a) dudn += probe.first(c.component, a) * n[static_cast<size_t>(a)];
          const double r = dudn - c.target(x);
          acc += r * r;
          break;
        }
        case ConditionKind::kRobin: {
          const Point n = c.normal(x);
          ResidualCtx ctx(x, probe, n);
          ad::Var1 dudn = ctx.tape().constant(0.0);
          for (int a = 0; a < dim; ++a) dudn = dudn + ctx.d(c.component, a) * n[static_cast<size_t>(a)];
          const ad::Var1 r = c.robin(x, ctx.u(c.component), dudn);
          acc += r.value() * r.value();
          break;
        }
        case ConditionKind::kPeriodic: {
          const Point x2 = c.image(x);
          NetworkProbe partner(spec, params, transform, x2);
          const double rv = probe.value(c.component) - partner.value(c.component);
          const double rd = probe.first(c.component, c.axis) - partner.first(c.component, c.axis);
          acc += rv * rv + rd * rd;
          break;
        }
        case ConditionKind::kOperator: {
          ResidualCtx ctx(x, probe, c.normal ? c.normal(x) : Point{});
          std::vector<ad::Var1> r = c.op.fn(ctx);
          if (static_cast<int>(r.size()) != c.op.n_equations) {
            throw StructuralError("operator condition returned " + std::to_string(r.size()) +
                                  " equations; declared " + std::to_string(c.op.n_equations));
          }
          enforce_residual_orders(ctx, c.op);
          for (const ad::Var1& ri : r) acc += ri.value() * ri.value();
          break;
        }
        case ConditionKind::kObservation:
          break;
      }
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (" + condition_kind_name(c.kind) +
                         " point " + format_point(x) + ")");
    }
  }
  return acc / static_cast<double>(c.points.size());
}

}  // namespace

double bc_loss(const net::NetworkSpec& spec, const net::Parameters& params,
               const net::OutputTransform& transform, std::span<const Condition> conditions) {
  double total = 0.0;
  for (const Condition& c : conditions) total += condition_loss(spec, params, transform, c);
  return total;
}

double observation_loss(const net::NetworkSpec& spec, const net::Parameters& params,
                        const net::OutputTransform& transform, const ObservationSet& obs) {
  if (obs.empty()) return 0.0;
  obs.validate(spec.output_dim());
  const std::vector<int> comps = obs.effective_components(spec.output_dim());
  double acc = 0.0;
  for (size_t i = 0; i < obs.points.size(); ++i) {
    NetworkProbe probe(spec, params, transform, obs.points[i]);
    for (size_t k = 0; k < comps.size(); ++k) {
      const double r = probe.value(comps[k]) - obs.values[i][k];
      acc += r * r;
    }
  }
  return acc / static_cast<double>(obs.points.size());
}

LossBreakdown total_loss(const net::NetworkSpec& spec, const net::Parameters& params,
                         const net::OutputTransform& transform, const Residual& residual,
                         const PointSet& t_f, std::span<const Condition> conditions,
                         const ObservationSet& obs, const LossWeights& weights) {
  weights.validate();
  LossBreakdown out;
  PdeLoss pde = pde_loss(spec, params, transform, residual, t_f);
  out.f = pde.loss;
  out.point_norms = std::move(pde.point_norms);
  out.b = bc_loss(spec, params, transform, conditions);
  out.i = observation_loss(spec, params, transform, obs);
  out.total = weights.w_f * out.f + weights.w_b * out.b + weights.w_i * out.i;
  return out;
}

// ---------------------------------------------------------------------------
// Built-in residuals

Residual poisson_residual(int dim, ScalarField forcing) {
  if (dim < 1) throw StructuralError("poisson residual needs at least one dimension");
  Residual r;
  r.orders.assign(static_cast<size_t>(dim), 2);
  r.n_equations = 1;
  r.fn = [dim, forcing = std::move(forcing)](ResidualCtx& ctx) {
    ad::Var1 lap = ctx.tape().constant(0.0);
    for (int a = 0; a < dim; ++a) lap = lap + ctx.d2(0, a);
    Point x(static_cast<size_t>(dim));
    for (int a = 0; a < dim; ++a) x[static_cast<size_t>(a)] = ctx.x(a);
    return std::vector<ad::Var1>{-lap - forcing(x)};
  };
  return r;
}

Residual burgers1d_residual(double nu) {
  Residual r;
  r.orders = {2, 1};
  r.n_equations = 1;
  r.fn = [nu](ResidualCtx& ctx) {
    ad::Var1 u = ctx.u(0);
    return std::vector<ad::Var1>{ctx.d(0, 1) + u * ctx.d(0, 0) - nu * ctx.d2(0, 0)};
  };
  return r;
}

Residual burgers2d_residual(double re) {
  if (re <= 0.0) throw StructuralError("Reynolds number must be positive");
  Residual r;
  r.orders = {2, 2, 1};
  r.n_equations = 2;
  const double visc = 1.0 / re;
  r.fn = [visc](ResidualCtx& ctx) {
    ad::Var1 u = ctx.u(0);
    ad::Var1 v = ctx.u(1);
    ad::Var1 ru =
        ctx.d(0, 2) + u * ctx.d(0, 0) + v * ctx.d(0, 1) - visc * (ctx.d2(0, 0) + ctx.d2(0, 1));
    ad::Var1 rv =
        ctx.d(1, 2) + u * ctx.d(1, 0) + v * ctx.d(1, 1) - visc * (ctx.d2(1, 0) + ctx.d2(1, 1));
    return std::vector<ad::Var1>{ru, rv};
  };
  return r;
}

Residual lorenz_residual() {
  Residual r;
  r.orders = {1};
  r.n_equations = 3;
  r.fn = [](ResidualCtx& ctx) {
    ad::Var1 x = ctx.u(0);
    ad::Var1 y = ctx.u(1);
    ad::Var1 z = ctx.u(2);
    ad::Var1 rho = ctx.lambda(0);
    ad::Var1 sigma = ctx.lambda(1);
    ad::Var1 beta = ctx.lambda(2);
    return std::vector<ad::Var1>{
        ctx.d(0, 0) - rho * (y - x),
        ctx.d(1, 0) - (x * (sigma - z) - y),
        ctx.d(2, 0) - (x * y - beta * z),
    };
  };
  return r;
}

Residual diffusion_reaction_residual() {
  Residual r;
  r.orders = {2, 1};
  r.n_equations = 2;
  r.fn = [](ResidualCtx& ctx) {
    ad::Var1 ca = ctx.u(0);
    ad::Var1 cb = ctx.u(1);
    ad::Var1 diff = ctx.lambda(0);
    ad::Var1 rate = ctx.lambda(1) * ca * cb * cb;
    return std::vector<ad::Var1>{
        ctx.d(0, 1) - (diff * ctx.d2(0, 0) - rate),
        ctx.d(1, 1) - (diff * ctx.d2(1, 0) - 2.0 * rate),
    };
  };
  return r;
}

Residual ide_residual(Residual base, quad::IntegralOperator op, int component) {
  base.validate();
  if (base.n_equations != 1) {
    throw StructuralError("ide residual composition requires a scalar base residual");
  }
  Residual r;
  r.orders = base.orders;
  r.n_equations = 1;
  r.fn = [base = std::move(base), op = std::move(op), component](ResidualCtx& ctx) {
    std::vector<ad::Var1> inner = base.fn(ctx);
    return std::vector<ad::Var1>{inner.front() - ctx.integral(op, component)};
  };
  return r;
}

std::array<double, 3> lorenz_rhs(const std::array<double, 3>& state, double rho, double sigma,
                                 double beta) {
  const double x = state[0];
  const double y = state[1];
  const double z = state[2];
  return {rho * (y - x), x * (sigma - z) - y, x * y - beta * z};
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double burgers2d_exact_u(double x, double y, double t, double re) {
  const double s = (-4.0 * x + 4.0 * y - t) * re / 32.0;
  return 0.75 - 0.25 * stable_sigmoid(-s);
}

double burgers2d_exact_v(double x, double y, double t, double re) {
  const double s = (-4.0 * x + 4.0 * y - t) * re / 32.0;
  return 0.75 + 0.25 * stable_sigmoid(-s);
}

}  // namespace pinn::prob
