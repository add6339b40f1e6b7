#include "pinn/engine.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <utility>

#include "pinn/errors.hpp"

namespace pinn::eng {

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

// Activation applied to a jet: channel 0 the value, channel 1 the directional
// first derivative, channel 2 half the directional second derivative.
ad::Jet<3> activate(net::Activation act, const ad::Jet<3>& z) {
  switch (act) {
    case net::Activation::kTanh: {
      const double t = std::tanh(z.c[0]);
      const double s = 1.0 - t * t;
      return ad::Jet<3>(t, s * z.c[1], s * z.c[2] - t * s * z.c[1] * z.c[1]);
    }
    case net::Activation::kSigmoid: {
      const double sg = 1.0 / (std::exp(-z.c[0]) + 1.0);
      const double f1 = sg * (1.0 - sg);
      const double f2 = f1 * (1.0 - 2.0 * sg);
      return ad::Jet<3>(sg, f1 * z.c[1], f1 * z.c[2] + 0.5 * f2 * z.c[1] * z.c[1]);
    }
    case net::Activation::kRelu:
      return z.c[0] > 0.0 ? z : ad::Jet<3>(0.0);
  }
  throw StructuralError("unknown activation");
}

// Jet of the activation's local derivative f'(z), used by the reverse sweep:
// zbar_l = sum_{m>=l} abar_m * p_{m-l}.
ad::Jet<3> activation_partial(net::Activation act, const ad::Jet<3>& z, const ad::Jet<3>& a) {
  switch (act) {
    case net::Activation::kTanh: {
      const double t = a.c[0];
      const double s = 1.0 - t * t;
      const double f2 = -2.0 * t * s;
      const double f3 = -2.0 * s * (1.0 - 3.0 * t * t);
      return ad::Jet<3>(s, f2 * z.c[1], f2 * z.c[2] + 0.5 * f3 * z.c[1] * z.c[1]);
    }
    case net::Activation::kSigmoid: {
      const double sg = a.c[0];
      const double f1 = sg * (1.0 - sg);
      const double f2 = f1 * (1.0 - 2.0 * sg);
      const double f3 = f1 * (1.0 - 6.0 * sg + 6.0 * sg * sg);
      return ad::Jet<3>(f1, f2 * z.c[1], f2 * z.c[2] + 0.5 * f3 * z.c[1] * z.c[1]);
    }
    case net::Activation::kRelu:
      return ad::Jet<3>(z.c[0] > 0.0 ? 1.0 : 0.0);
  }
  throw StructuralError("unknown activation");
}

}  // namespace

// ---------------------------------------------------------------------------
// PointEngine

PointEngine::PointEngine(const net::NetworkSpec& spec, const net::OutputTransform& transform,
                         const net::Parameters& params, Point x)
    : spec_(spec), transform_(transform), params_(params), x_(std::move(x)) {
  if (static_cast<int>(x_.size()) != spec_.input_dim()) {
    throw StructuralError("engine point dimension " + std::to_string(x_.size()) +
                          " does not match network input dimension " +
                          std::to_string(spec_.input_dim()));
  }
}

const PassState& PointEngine::pass(int axis) {
  if (axis < -1 || axis >= static_cast<int>(x_.size())) {
    throw DomainError("derivative axis " + std::to_string(axis) + " out of range");
  }
  auto it = passes_.find(axis);
  if (it == passes_.end()) it = passes_.emplace(axis, run_forward(axis)).first;
  return it->second;
}

PassState PointEngine::run_forward(int axis) const {
  PassState ps;
  ps.axis = axis;
  const std::vector<int>& layers = spec_.layers;
  const int depth = spec_.layer_count();
  ps.act.resize(static_cast<size_t>(depth) + 1);
  ps.z.resize(static_cast<size_t>(depth));

  std::vector<ad::Jet<3>>& a0 = ps.act[0];
  a0.reserve(x_.size());
  for (size_t i = 0; i < x_.size(); ++i) {
    a0.emplace_back(x_[i], static_cast<int>(i) == axis ? 1.0 : 0.0);
  }

  for (int l = 1; l <= depth; ++l) {
    const int nin = layers[static_cast<size_t>(l - 1)];
    const int nout = layers[static_cast<size_t>(l)];
    const std::vector<ad::Jet<3>>& ain = ps.act[static_cast<size_t>(l - 1)];
    std::vector<ad::Jet<3>>& z = ps.z[static_cast<size_t>(l - 1)];
    z.assign(static_cast<size_t>(nout), ad::Jet<3>{});
    for (int i = 0; i < nout; ++i) {
      ad::Jet<3> acc(params_.bias(l, i));
      for (int j = 0; j < nin; ++j) {
        acc += ain[static_cast<size_t>(j)] * params_.weight(l, i, j);
      }
      z[static_cast<size_t>(i)] = acc;
    }
    std::vector<ad::Jet<3>>& aout = ps.act[static_cast<size_t>(l)];
    if (l == depth) {
      aout = z;
    } else {
      aout.assign(static_cast<size_t>(nout), ad::Jet<3>{});
      for (int i = 0; i < nout; ++i) {
        aout[static_cast<size_t>(i)] = activate(spec_.activation, z[static_cast<size_t>(i)]);
      }
    }
  }

  const std::vector<ad::Jet<3>>& raw = ps.act[static_cast<size_t>(depth)];
  if (transform_.is_identity()) {
    ps.out = raw;
  } else {
    ps.ttape = std::make_unique<ad::Tape<3>>();
    std::vector<ad::Var<3>> xv;
    xv.reserve(x_.size());
    for (size_t i = 0; i < x_.size(); ++i) {
      xv.push_back(ps.ttape->input(ad::Jet<3>(x_[i], static_cast<int>(i) == axis ? 1.0 : 0.0)));
    }
    ps.t_raw.reserve(raw.size());
    for (const ad::Jet<3>& r : raw) ps.t_raw.push_back(ps.ttape->input(r));
    ps.t_out = transform_.apply<3>(xv, ps.t_raw, *ps.ttape);
    if (static_cast<int>(ps.t_out.size()) != spec_.output_dim()) {
      throw StructuralError("output transform returned " + std::to_string(ps.t_out.size()) +
                            " components; expected " + std::to_string(spec_.output_dim()));
    }
    ps.out.reserve(ps.t_out.size());
    for (const ad::Var<3>& o : ps.t_out) ps.out.push_back(o.jet());
  }
  return ps;
}

void PointEngine::reverse(int axis, std::span<const ad::Jet<3>> seeds, double scale,
                          std::vector<double>& grad) {
  const PassState& ps = pass(axis);
  if (static_cast<int>(seeds.size()) != spec_.output_dim()) {
    throw StructuralError("reverse: expected one seed per output component");
  }

  // Output adjoints, pulled through the transform tape when there is one.
  std::vector<ad::Jet<3>> abar;
  if (!ps.ttape) {
    abar.assign(seeds.begin(), seeds.end());
  } else {
    std::vector<std::pair<ad::Var<3>, ad::Jet<3>>> pairs;
    pairs.reserve(seeds.size());
    for (size_t c = 0; c < seeds.size(); ++c) pairs.emplace_back(ps.t_out[c], seeds[c]);
    const ad::Gradient<3> g = ps.ttape->backward_multi(pairs);
    abar.reserve(ps.t_raw.size());
    for (const ad::Var<3>& rv : ps.t_raw) abar.push_back(g.adjoint(rv));
  }

  const std::vector<int>& layers = spec_.layers;
  const int depth = spec_.layer_count();
  std::vector<ad::Jet<3>> zbar;
  for (int l = depth; l >= 1; --l) {
    const int nin = layers[static_cast<size_t>(l - 1)];
    const int nout = layers[static_cast<size_t>(l)];
    if (l == depth) {
      zbar = std::move(abar);
    } else {
      const std::vector<ad::Jet<3>>& zl = ps.z[static_cast<size_t>(l - 1)];
      const std::vector<ad::Jet<3>>& al = ps.act[static_cast<size_t>(l)];
      zbar.resize(static_cast<size_t>(nout));
      for (int i = 0; i < nout; ++i) {
        const ad::Jet<3> p =
            activation_partial(spec_.activation, zl[static_cast<size_t>(i)], al[static_cast<size_t>(i)]);
        const ad::Jet<3>& w = abar[static_cast<size_t>(i)];
        zbar[static_cast<size_t>(i)] =
            ad::Jet<3>(w.c[0] * p.c[0] + w.c[1] * p.c[1] + w.c[2] * p.c[2],
                       w.c[1] * p.c[0] + w.c[2] * p.c[1], w.c[2] * p.c[0]);
      }
    }
    const std::vector<ad::Jet<3>>& ain = ps.act[static_cast<size_t>(l - 1)];
    const size_t woff = params_.weight_offset(l);
    const size_t boff = params_.bias_offset(l);
    for (int i = 0; i < nout; ++i) {
      const ad::Jet<3>& zb = zbar[static_cast<size_t>(i)];
      const size_t row = woff + static_cast<size_t>(i) * static_cast<size_t>(nin);
      for (int j = 0; j < nin; ++j) {
        const ad::Jet<3>& aj = ain[static_cast<size_t>(j)];
        grad[row + static_cast<size_t>(j)] +=
            scale * (zb.c[0] * aj.c[0] + zb.c[1] * aj.c[1] + zb.c[2] * aj.c[2]);
      }
      grad[boff + static_cast<size_t>(i)] += scale * zb.c[0];
    }
    if (l > 1) {
      abar.assign(static_cast<size_t>(nin), ad::Jet<3>{});
      for (int i = 0; i < nout; ++i) {
        const ad::Jet<3>& zb = zbar[static_cast<size_t>(i)];
        for (int j = 0; j < nin; ++j) {
          abar[static_cast<size_t>(j)] += zb * params_.weight(l, i, j);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// EngineProbe

double EngineProbe::value(int component) const {
  if (component < 0 || component >= output_dim()) {
    throw DomainError("output component " + std::to_string(component) + " out of range");
  }
  const PassState& ps =
      engine_.has_pass() ? engine_.pass(engine_.any_pass_axis()) : engine_.pass(-1);
  return ps.out[static_cast<size_t>(component)].c[0];
}

double EngineProbe::first(int component, int axis) const {
  if (component < 0 || component >= output_dim()) {
    throw DomainError("output component " + std::to_string(component) + " out of range");
  }
  if (axis < 0) throw DomainError("derivative axis " + std::to_string(axis) + " out of range");
  return engine_.pass(axis).out[static_cast<size_t>(component)].c[1];
}

double EngineProbe::second(int component, int axis) const {
  if (component < 0 || component >= output_dim()) {
    throw DomainError("output component " + std::to_string(component) + " out of range");
  }
  if (axis < 0) throw DomainError("derivative axis " + std::to_string(axis) + " out of range");
  return 2.0 * engine_.pass(axis).out[static_cast<size_t>(component)].c[2];
}

double EngineProbe::external(int k) const {
  if (k < 0 || k >= external_count()) {
    throw DomainError("external parameter index " + std::to_string(k) + " out of range");
  }
  return engine_.params().external(k);
}

double EngineProbe::value_at(const Point& t, int component) const {
  if (component < 0 || component >= output_dim()) {
    throw DomainError("output component " + std::to_string(component) + " out of range");
  }
  PointEngine local(engine_.spec(), engine_.transform(), engine_.params(), t);
  return local.pass(-1).out[static_cast<size_t>(component)].c[0];
}

std::vector<double> forward_values(const net::NetworkSpec& spec,
                                   const net::OutputTransform& transform,
                                   const net::Parameters& params, const Point& x) {
  PointEngine engine(spec, transform, params, x);
  const PassState& ps = engine.pass(-1);
  std::vector<double> out;
  out.reserve(ps.out.size());
  for (const ad::Jet<3>& j : ps.out) out.push_back(j.c[0]);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluator

Evaluator::Evaluator(net::NetworkSpec spec, net::OutputTransform transform, prob::Residual residual,
                     std::vector<prob::Condition> conditions, prob::ObservationSet observations,
                     prob::LossWeights weights)
    : spec_(std::move(spec)),
      transform_(std::move(transform)),
      residual_(std::move(residual)),
      conditions_(std::move(conditions)),
      observations_(std::move(observations)),
      weights_(weights) {
  spec_.validate();
  weights_.validate();
  if (residual_.fn) residual_.validate();
  if (!observations_.empty()) observations_.validate(spec_.output_dim());
  for (const prob::Condition& c : conditions_) {
    if (c.kind == prob::ConditionKind::kObservation) {
      throw StructuralError("observation conditions are scored through the observation set");
    }
  }
}

LossGrad Evaluator::loss_and_grad(const net::Parameters& params, const PointSet& t_f) const {
  return compute(params, t_f, true);
}

prob::LossBreakdown Evaluator::loss(const net::Parameters& params, const PointSet& t_f) const {
  return compute(params, t_f, false).breakdown;
}

LossGrad Evaluator::compute(const net::Parameters& params, const PointSet& t_f,
                            bool with_grad) const {
  params.check_shape(spec_);
  LossGrad out;
  if (with_grad) out.grad.assign(params.count(), 0.0);
  std::vector<double>* grad = with_grad ? &out.grad : nullptr;

  if (!t_f.empty() && !residual_.fn) {
    throw StructuralError("collocation points supplied without a residual");
  }
  if (residual_.fn && !t_f.empty()) {
    const double scale = weights_.w_f / static_cast<double>(t_f.size());
    out.breakdown.point_norms.reserve(t_f.size());
    double acc = 0.0;
    for (const Point& x : t_f) {
      PointEngine engine(spec_, transform_, params, x);
      EngineProbe probe(engine);
      prob::ResidualCtx ctx(x, probe);
      try {
        std::vector<ad::Var1> rs = residual_.fn(ctx);
        if (static_cast<int>(rs.size()) != residual_.n_equations) {
          throw StructuralError("residual returned " + std::to_string(rs.size()) +
                                " equations; declared " + std::to_string(residual_.n_equations));
        }
        prob::enforce_residual_orders(ctx, residual_);
        ad::Var1 phi = ctx.tape().constant(0.0);
        for (const ad::Var1& r : rs) phi = phi + r * r;
        const double norm2 = phi.value();
        if (!std::isfinite(norm2)) throw NumericError("non-finite residual");
        acc += norm2;
        out.breakdown.point_norms.push_back(std::sqrt(norm2));
        if (grad) {
          const ad::Gradient<1> g = ctx.tape().backward(phi);
          apply_slot_gradient(engine, ctx, g, params, scale, *grad);
        }
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (residual point " + format_point(x) + ")");
      }
    }
    out.breakdown.f = acc / static_cast<double>(t_f.size());
  }

  double b_acc = 0.0;
  for (const prob::Condition& c : conditions_) {
    b_acc += condition_term(params, c, with_grad, grad);
  }
  out.breakdown.b = b_acc;
  out.breakdown.i = observation_term(params, with_grad, grad);
  out.breakdown.total = weights_.w_f * out.breakdown.f + weights_.w_b * out.breakdown.b +
                        weights_.w_i * out.breakdown.i;
  return out;
}

double Evaluator::condition_term(const net::Parameters& params, const prob::Condition& c,
                                 bool with_grad, std::vector<double>* grad) const {
  using prob::ConditionKind;
  if (c.points.empty()) return 0.0;
  const double n_pts = static_cast<double>(c.points.size());
  const double scale = weights_.w_b / n_pts;
  const int dim = static_cast<int>(c.points.front().size());
  const int dout = spec_.output_dim();
  double acc = 0.0;
  for (const Point& x : c.points) {
    PointEngine engine(spec_, transform_, params, x);
    EngineProbe probe(engine);
    try {
      if (c.kind == ConditionKind::kPeriodic) {
        const PassState& p1 = engine.pass(c.axis);
        PointEngine partner(spec_, transform_, params, c.image(x));
        const PassState& p2 = partner.pass(c.axis);
        const size_t comp = static_cast<size_t>(c.component);
        const double rv = p1.out[comp].c[0] - p2.out[comp].c[0];
        const double rd = p1.out[comp].c[1] - p2.out[comp].c[1];
        acc += rv * rv + rd * rd;
        if (grad) {
          std::vector<ad::Jet<3>> seeds(static_cast<size_t>(dout));
          seeds[comp] = ad::Jet<3>(2.0 * rv, 2.0 * rd, 0.0);
          engine.reverse(c.axis, seeds, scale, *grad);
          seeds[comp] = ad::Jet<3>(-2.0 * rv, -2.0 * rd, 0.0);
          partner.reverse(c.axis, seeds, scale, *grad);
        }
        continue;
      }

      Point normal;
      bool with_normal = false;
      if (c.kind == ConditionKind::kNeumann || c.kind == ConditionKind::kRobin ||
          (c.kind == ConditionKind::kOperator && c.normal)) {
        normal = c.normal(x);
        with_normal = true;
      }
      std::optional<prob::ResidualCtx> octx;
      if (with_normal) {
        octx.emplace(x, probe, normal);
      } else {
        octx.emplace(x, probe);
      }
      prob::ResidualCtx& ctx = *octx;

      std::vector<ad::Var1> rs;
      switch (c.kind) {
        case ConditionKind::kDirichlet:
        case ConditionKind::kInitial:
          rs.push_back(ctx.u(c.component) - c.target(x));
          break;
        case ConditionKind::kNeumann:
        case ConditionKind::kRobin: {
          ad::Var1 dudn = ctx.tape().constant(0.0);
          for (int a = 0; a < dim; ++a) {
            const double na = normal[static_cast<size_t>(a)];
            if (na != 0.0) dudn = dudn + ctx.d(c.component, a) * na;
          }
          if (c.kind == ConditionKind::kNeumann) {
            rs.push_back(dudn - c.target(x));
          } else {
            rs.push_back(c.robin(x, ctx.u(c.component), dudn));
          }
          break;
        }
        case ConditionKind::kOperator: {
          rs = c.op.fn(ctx);
          if (static_cast<int>(rs.size()) != c.op.n_equations) {
            throw StructuralError("operator condition returned " + std::to_string(rs.size()) +
                                  " equations; declared " + std::to_string(c.op.n_equations));
          }
          prob::enforce_residual_orders(ctx, c.op);
          break;
        }
        default:
          throw StructuralError("unsupported condition kind");
      }
      ad::Var1 phi = ctx.tape().constant(0.0);
      for (const ad::Var1& r : rs) phi = phi + r * r;
      acc += phi.value();
      if (grad) {
        const ad::Gradient<1> g = ctx.tape().backward(phi);
        apply_slot_gradient(engine, ctx, g, params, scale, *grad);
      }
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (" + prob::condition_kind_name(c.kind) +
                         " point " + format_point(x) + ")");
    }
  }
  return acc / n_pts;
}

double Evaluator::observation_term(const net::Parameters& params, bool with_grad,
                                   std::vector<double>* grad) const {
  if (observations_.empty()) return 0.0;
  const std::vector<int> comps = observations_.effective_components(spec_.output_dim());
  const double n = static_cast<double>(observations_.points.size());
  const double scale = weights_.w_i / n;
  const int dout = spec_.output_dim();
  double acc = 0.0;
  for (size_t i = 0; i < observations_.points.size(); ++i) {
    PointEngine engine(spec_, transform_, params, observations_.points[i]);
    const PassState& ps = engine.pass(-1);
    std::vector<ad::Jet<3>> seeds;
    if (with_grad) seeds.assign(static_cast<size_t>(dout), ad::Jet<3>{});
    for (size_t k = 0; k < comps.size(); ++k) {
      const size_t comp = static_cast<size_t>(comps[k]);
      const double r = ps.out[comp].c[0] - observations_.values[i][k];
      acc += r * r;
      if (with_grad) seeds[comp].c[0] += 2.0 * r;
    }
    if (with_grad) engine.reverse(-1, seeds, scale, *grad);
  }
  return acc / n;
}

void Evaluator::apply_slot_gradient(PointEngine& engine, const prob::ResidualCtx& ctx,
                                    const ad::Gradient<1>& g, const net::Parameters& params,
                                    double scale, std::vector<double>& grad) const {
  const int dout = spec_.output_dim();
  std::map<int, std::vector<ad::Jet<3>>> axis_seeds;
  auto seeds_for = [&](int axis) -> std::vector<ad::Jet<3>>& {
    auto it = axis_seeds.find(axis);
    if (it == axis_seeds.end()) {
      it = axis_seeds.emplace(axis, std::vector<ad::Jet<3>>(static_cast<size_t>(dout))).first;
    }
    return it->second;
  };

  std::vector<double> value_seeds;
  bool has_value = false;
  const std::vector<prob::Slot>& slots = ctx.slots();
  for (size_t i = 0; i < slots.size(); ++i) {
    const prob::Slot& s = slots[i];
    const double w = g.wrt(ctx.slot_var(i));
    if (w == 0.0) continue;
    switch (s.kind) {
      case prob::SlotKind::kValue:
        if (!has_value) {
          value_seeds.assign(static_cast<size_t>(dout), 0.0);
          has_value = true;
        }
        value_seeds[static_cast<size_t>(s.component)] += w;
        break;
      case prob::SlotKind::kFirst:
        seeds_for(s.axis)[static_cast<size_t>(s.component)].c[1] += w;
        break;
      case prob::SlotKind::kSecond:
        // The slot holds the full second derivative, twice the jet channel.
        seeds_for(s.axis)[static_cast<size_t>(s.component)].c[2] += 2.0 * w;
        break;
      case prob::SlotKind::kExternal:
        grad[params.external_offset(s.component)] += scale * w;
        break;
      case prob::SlotKind::kIntegral:
        for (const prob::SlotNode& node : s.nodes) {
          const double sd = w * node.coeff;
          if (sd == 0.0) continue;
          PointEngine node_engine(spec_, transform_, params, node.t);
          std::vector<ad::Jet<3>> node_seeds(static_cast<size_t>(dout));
          node_seeds[static_cast<size_t>(s.component)] = ad::Jet<3>(sd);
          node_engine.reverse(-1, node_seeds, scale, grad);
        }
        break;
    }
  }

  if (has_value) {
    // Every pass carries the value in channel 0, so the value seed can ride
    // along any one sweep; it must be counted exactly once.
    const int target = !axis_seeds.empty() ? axis_seeds.begin()->first
                       : engine.has_pass() ? engine.any_pass_axis()
                                           : -1;
    std::vector<ad::Jet<3>>& s = seeds_for(target);
    for (int cidx = 0; cidx < dout; ++cidx) {
      s[static_cast<size_t>(cidx)].c[0] += value_seeds[static_cast<size_t>(cidx)];
    }
  }
  for (const auto& [axis, seeds] : axis_seeds) engine.reverse(axis, seeds, scale, grad);
}

std::vector<double> Evaluator::residual_norms(const net::Parameters& params,
                                              const PointSet& pts) const {
  if (!residual_.fn) throw StructuralError("residual norms require a residual");
  params.check_shape(spec_);
  std::vector<double> out;
  out.reserve(pts.size());
  for (const Point& x : pts) {
    PointEngine engine(spec_, transform_, params, x);
    EngineProbe probe(engine);
    prob::ResidualCtx ctx(x, probe);
    try {
      std::vector<ad::Var1> rs = residual_.fn(ctx);
      if (static_cast<int>(rs.size()) != residual_.n_equations) {
        throw StructuralError("residual returned " + std::to_string(rs.size()) +
                              " equations; declared " + std::to_string(residual_.n_equations));
      }
      double norm2 = 0.0;
      for (const ad::Var1& r : rs) norm2 += r.value() * r.value();
      out.push_back(std::sqrt(norm2));
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (residual point " + format_point(x) + ")");
    }
  }
  return out;
}

}  // namespace pinn::eng
