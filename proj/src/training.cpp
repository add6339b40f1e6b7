#include "pinn/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <utility>

#include "pinn/errors.hpp"

namespace pinn::train {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double inf_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc = std::max(acc, std::abs(x));
  return acc;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::ofstream open_append(const std::string& path, bool& fresh) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw StructuralError("cannot open callback file: " + path);
  fresh = out.tellp() == std::ofstream::pos_type(0);
  return out;
}

}  // namespace

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw StructuralError("adam: learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw StructuralError("adam: beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw StructuralError("adam: beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw StructuralError("adam: epsilon must be positive");
}

void StepDecay::validate() const {
  if (period < 0) throw StructuralError("step decay: period must be non-negative");
  if (period > 0 && !(factor > 0.0 && factor <= 1.0))
    throw StructuralError("step decay: factor must lie in (0, 1]");
}

void LbfgsConfig::validate() const {
  if (memory < 1) throw StructuralError("lbfgs: memory must be at least 1");
  if (max_iters < 0) throw StructuralError("lbfgs: max iterations must be non-negative");
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0))
    throw StructuralError("lbfgs: line-search constants need 0 < c1 < c2 < 1");
  if (!(tolerance >= 0.0)) throw StructuralError("lbfgs: tolerance must be non-negative");
}

void OptimizerConfig::validate() const {
  if (kind == Kind::kAdam) {
    adam.validate();
    decay.validate();
    if (iterations < 0) throw StructuralError("optimizer phase: iterations must be non-negative");
  } else {
    lbfgs.validate();
  }
}

OptimizerConfig OptimizerConfig::adam_phase(long iterations, double lr) {
  OptimizerConfig cfg;
  cfg.kind = Kind::kAdam;
  cfg.adam.lr = lr;
  cfg.iterations = iterations;
  return cfg;
}

OptimizerConfig OptimizerConfig::lbfgs_phase() { return lbfgs_phase(LbfgsConfig{}); }

OptimizerConfig OptimizerConfig::lbfgs_phase(LbfgsConfig cfg) {
  OptimizerConfig out;
  out.kind = Kind::kLbfgs;
  out.lbfgs = cfg;
  return out;
}

TrainState make_state(const net::NetworkSpec& spec, unsigned long long seed) {
  TrainState state;
  state.params = net::init(spec, seed);
  return state;
}

net::Checkpoint to_checkpoint(const net::NetworkSpec& spec, const TrainState& state) {
  net::Checkpoint ck;
  ck.spec = spec;
  ck.params = state.params;
  ck.iteration = state.iteration;
  ck.optimizer = {{"adam", {{"m", state.adam.m}, {"v", state.adam.v}, {"t", state.adam.t}}}};
  return ck;
}

TrainState state_from_checkpoint(const net::Checkpoint& ck) {
  TrainState state;
  state.params = ck.params;
  state.iteration = ck.iteration;
  if (ck.optimizer.contains("adam")) {
    const auto& a = ck.optimizer.at("adam");
    state.adam.m = a.at("m").get<std::vector<double>>();
    state.adam.v = a.at("v").get<std::vector<double>>();
    state.adam.t = a.at("t").get<long>();
  }
  return state;
}

void adam_step(TrainState& state, std::span<const double> grad, const AdamConfig& cfg) {
  cfg.validate();
  const size_t n = state.params.values.size();
  if (grad.size() != n) throw StructuralError("adam: gradient length does not match parameters");
  if (state.adam.m.empty()) {
    state.adam.m.assign(n, 0.0);
    state.adam.v.assign(n, 0.0);
  }
  if (state.adam.m.size() != n || state.adam.v.size() != n)
    throw StructuralError("adam: moment vectors do not match the parameter count");
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad[i]))
      throw NumericError("adam: gradient entry " + std::to_string(i) +
                         " is not finite at iteration " + std::to_string(state.iteration));
  }
  const long t = ++state.adam.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (size_t i = 0; i < n; ++i) {
    double& m = state.adam.m[i];
    double& v = state.adam.v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad[i] * grad[i];
    double step = cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
    // Keep every update inside the trust region one learning rate wide; the
    // raw ratio can transiently exceed it when the moments disagree.
    step = std::clamp(step, -cfg.lr, cfg.lr);
    state.params.values[i] -= step;
  }
  ++state.iteration;
}

namespace {

struct LinePoint {
  bool ok = false;
  double alpha = 0.0;
  double f = 0.0;
  std::vector<double> x;
  std::vector<double> g;
  double dg = 0.0;
};

/// Strong-Wolfe line search: bracket by doubling, then shrink the bracket by
/// quadratic interpolation with a bisection fallback.
LinePoint strong_wolfe(const LossGradFn& f, const std::vector<double>& x0, double f0,
                       std::span<const double> d, double dg0, const LbfgsConfig& cfg) {
  const double c1 = cfg.c1;
  const double c2 = cfg.c2;
  LinePoint cur;
  auto eval = [&](double a) {
    cur.alpha = a;
    cur.x.resize(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) cur.x[i] = x0[i] + a * d[i];
    cur.f = f(cur.x, cur.g);
    cur.dg = dot(cur.g, d);
  };

  auto zoom = [&](double a_lo, double f_lo, double dg_lo, double a_hi, double f_hi) -> LinePoint {
    for (int z = 0; z < 50; ++z) {
      const double width = a_hi - a_lo;
      if (std::abs(width) < 1e-14 * std::max(1.0, std::abs(a_lo))) break;
      const double lo = std::min(a_lo, a_hi);
      const double hi = std::max(a_lo, a_hi);
      const double pad = 0.1 * (hi - lo);
      double aj = std::numeric_limits<double>::quiet_NaN();
      const double denom = 2.0 * (f_hi - f_lo - dg_lo * width);
      if (std::isfinite(denom) && denom != 0.0) aj = a_lo - dg_lo * width * width / denom;
      if (!std::isfinite(aj) || aj < lo + pad || aj > hi - pad) aj = 0.5 * (lo + hi);
      eval(aj);
      if (!std::isfinite(cur.f) || cur.f > f0 + c1 * aj * dg0 || cur.f >= f_lo) {
        a_hi = aj;
        f_hi = cur.f;
      } else {
        if (std::abs(cur.dg) <= -c2 * dg0) {
          cur.ok = true;
          return cur;
        }
        if (cur.dg * (a_hi - a_lo) >= 0.0) {
          a_hi = a_lo;
          f_hi = f_lo;
        }
        a_lo = aj;
        f_lo = cur.f;
        dg_lo = cur.dg;
      }
    }
    cur.ok = false;
    return cur;
  };

  double a_prev = 0.0;
  double f_prev = f0;
  double dg_prev = dg0;
  double a = 1.0;
  const double a_max = 1e8;
  for (int it = 0; it < 60; ++it) {
    eval(a);
    if (!std::isfinite(cur.f) || cur.f > f0 + c1 * a * dg0 || (it > 0 && cur.f >= f_prev))
      return zoom(a_prev, f_prev, dg_prev, a, cur.f);
    if (std::abs(cur.dg) <= -c2 * dg0) {
      cur.ok = true;
      return cur;
    }
    if (cur.dg >= 0.0) return zoom(a, cur.f, cur.dg, a_prev, f_prev);
    a_prev = a;
    f_prev = cur.f;
    dg_prev = cur.dg;
    if (a >= a_max) break;
    a = std::min(2.0 * a, a_max);
  }
  cur.ok = false;
  return cur;
}

}  // namespace

LbfgsResult lbfgs_run(TrainState& state, const LossGradFn& f, const LbfgsConfig& cfg,
                      const std::function<void(const TrainState&, double)>& on_start,
                      const std::function<void(const TrainState&, double)>& on_accept) {
  cfg.validate();
  if (!f) throw StructuralError("lbfgs: missing loss function");
  std::vector<double>& x = state.params.values;
  const size_t n = x.size();
  std::vector<double> g(n, 0.0);
  double fx = f(x, g);
  if (!std::isfinite(fx)) throw NumericError("lbfgs: loss is not finite at the starting point");
  if (on_start) on_start(state, fx);

  LbfgsResult res;
  res.final_loss = fx;
  if (inf_norm(g) <= cfg.tolerance) {
    res.status = LbfgsStatus::kConverged;
    return res;
  }

  double best_f = fx;
  std::vector<double> best_x = x;
  std::deque<std::vector<double>> s_hist;
  std::deque<std::vector<double>> y_hist;
  std::deque<double> rho_hist;
  std::vector<double> alpha_buf;
  std::vector<double> d(n);

  for (long it = 0; it < cfg.max_iters; ++it) {
    // Two-loop recursion for the quasi-Newton direction.
    std::vector<double> q = g;
    const size_t k = s_hist.size();
    alpha_buf.assign(k, 0.0);
    for (size_t j = k; j-- > 0;) {
      const double a = rho_hist[j] * dot(s_hist[j], q);
      alpha_buf[j] = a;
      for (size_t i = 0; i < n; ++i) q[i] -= a * y_hist[j][i];
    }
    double gamma = 1.0;
    if (k > 0) {
      const double yy = dot(y_hist.back(), y_hist.back());
      if (yy > 0.0) gamma = dot(s_hist.back(), y_hist.back()) / yy;
    }
    for (double& qi : q) qi *= gamma;
    for (size_t j = 0; j < k; ++j) {
      const double b = rho_hist[j] * dot(y_hist[j], q);
      for (size_t i = 0; i < n; ++i) q[i] += (alpha_buf[j] - b) * s_hist[j][i];
    }
    for (size_t i = 0; i < n; ++i) d[i] = -q[i];

    double dg0 = dot(d, g);
    if (!(dg0 < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (size_t i = 0; i < n; ++i) d[i] = -g[i];
      dg0 = -dot(g, g);
      if (dg0 == 0.0) {
        res.status = LbfgsStatus::kConverged;
        break;
      }
    }

    LinePoint ls = strong_wolfe(f, x, fx, d, dg0, cfg);
    if (!ls.ok) {
      x = best_x;
      res.status = LbfgsStatus::kLineSearchFailed;
      res.final_loss = best_f;
      return res;
    }

    std::vector<double> s(n);
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) {
      s[i] = ls.x[i] - x[i];
      y[i] = ls.g[i] - g[i];
    }
    x = std::move(ls.x);
    g = std::move(ls.g);
    fx = ls.f;
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
    const double sy = dot(s, y);
    if (sy > 1e-10 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > static_cast<size_t>(cfg.memory)) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    ++res.iterations;
    ++state.iteration;
    res.final_loss = fx;
    if (on_accept) on_accept(state, fx);
    if (inf_norm(g) <= cfg.tolerance) {
      res.status = LbfgsStatus::kConverged;
      break;
    }
  }
  return res;
}

void Callback::validate() const {
  if (period < 1) throw StructuralError("callback: period must be at least 1");
  if (path.empty()) throw StructuralError("callback: output path must not be empty");
  if (kind == CallbackKind::kSpectrum && freqs.empty())
    throw StructuralError("spectrum callback: frequency list must not be empty");
  if (kind != CallbackKind::kModelCheckpoint && points.empty())
    throw StructuralError("callback: probe point set must not be empty");
  if (kind == CallbackKind::kOperatorPredictor) op.validate();
}

Callback Callback::model_checkpoint(long period, std::string path) {
  Callback cb;
  cb.kind = CallbackKind::kModelCheckpoint;
  cb.period = period;
  cb.path = std::move(path);
  return cb;
}

Callback Callback::first_derivative(int axis, PointSet points, long period, std::string path) {
  Callback cb;
  cb.kind = CallbackKind::kFirstDerivative;
  cb.axis = axis;
  cb.points = std::move(points);
  cb.period = period;
  cb.path = std::move(path);
  return cb;
}

Callback Callback::movie_dumper(PointSet points, long period, std::string path) {
  Callback cb;
  cb.kind = CallbackKind::kMovieDumper;
  cb.points = std::move(points);
  cb.period = period;
  cb.path = std::move(path);
  return cb;
}

Callback Callback::spectrum(PointSet points, std::vector<double> freqs, long period,
                            std::string path) {
  Callback cb;
  cb.kind = CallbackKind::kSpectrum;
  cb.points = std::move(points);
  cb.freqs = std::move(freqs);
  cb.period = period;
  cb.path = std::move(path);
  return cb;
}

Callback Callback::operator_predictor(prob::Residual op, PointSet points, long period,
                                      std::string path) {
  Callback cb;
  cb.kind = CallbackKind::kOperatorPredictor;
  cb.op = std::move(op);
  cb.points = std::move(points);
  cb.period = period;
  cb.path = std::move(path);
  return cb;
}

namespace {

void fire_callback(const Callback& cb, const TrainModel& model, const TrainState& state) {
  const net::NetworkSpec& spec = model.evaluator.spec();
  const net::OutputTransform& transform = model.evaluator.transform();
  switch (cb.kind) {
    case CallbackKind::kModelCheckpoint: {
      net::save_checkpoint(cb.path, to_checkpoint(spec, state));
      return;
    }
    case CallbackKind::kFirstDerivative: {
      bool fresh = false;
      std::ofstream out = open_append(cb.path, fresh);
      if (fresh) {
        out << "iteration";
        for (size_t p = 0; p < cb.points.size(); ++p) out << ",p" << p;
        out << "\n";
      }
      out << state.iteration;
      for (const Point& x : cb.points) {
        eng::PointEngine engine(spec, transform, state.params, x);
        out << "," << fmt_double(engine.pass(cb.axis).out[0].c[1]);
      }
      out << "\n";
      return;
    }
    case CallbackKind::kMovieDumper: {
      bool fresh = false;
      std::ofstream out = open_append(cb.path, fresh);
      if (fresh) {
        out << "iteration";
        for (size_t p = 0; p < cb.points.size(); ++p) out << ",p" << p;
        out << "\n";
      }
      out << state.iteration;
      for (const Point& x : cb.points)
        out << "," << fmt_double(eng::forward_values(spec, transform, state.params, x)[0]);
      out << "\n";
      return;
    }
    case CallbackKind::kSpectrum: {
      std::vector<double> amps =
          spectrum_monitor(spec, state.params, transform, cb.freqs, cb.points);
      bool fresh = false;
      std::ofstream out = open_append(cb.path, fresh);
      if (fresh) {
        out << "iteration";
        for (size_t k = 0; k < amps.size(); ++k) out << ",amp_k" << (k + 1);
        out << "\n";
      }
      out << state.iteration;
      for (double a : amps) out << "," << fmt_double(a);
      out << "\n";
      return;
    }
    case CallbackKind::kOperatorPredictor: {
      bool fresh = false;
      std::ofstream out = open_append(cb.path, fresh);
      if (fresh) {
        out << "iteration";
        for (size_t p = 0; p < cb.points.size(); ++p) out << ",p" << p;
        out << "\n";
      }
      out << state.iteration;
      for (const Point& x : cb.points) {
        eng::PointEngine engine(spec, transform, state.params, x);
        eng::EngineProbe probe(engine);
        prob::ResidualCtx ctx(x, probe);
        std::vector<ad::Var1> rs = cb.op.fn(ctx);
        if (rs.empty()) throw StructuralError("operator predictor returned no equations");
        out << "," << fmt_double(rs[0].value());
      }
      out << "\n";
      return;
    }
  }
}

}  // namespace

TrainState train(const TrainModel& model, const TrainOptions& options, TrainState state) {
  const net::NetworkSpec& spec = model.evaluator.spec();
  state.params.check_shape(spec);
  for (const OptimizerConfig& phase : options.phases) phase.validate();
  for (const Callback& cb : options.callbacks) cb.validate();
  if (model.points.strategy == prob::Strategy::kAdaptiveRar)
    throw StructuralError(
        "adaptive refinement drives training from the refinement loop; "
        "train accepts fixed or resampled point sets");
  if (model.points.strategy == prob::Strategy::kResampleEachStep && !model.resampler)
    throw StructuralError("train: resample strategy requires a domain sampler");
  if (model.points.batch_size && *model.points.batch_size == 0)
    throw StructuralError("train: batch size must be positive");

  auto points_for = [&](long iter) -> PointSet {
    const prob::PointSets& ps = model.points;
    if (ps.strategy == prob::Strategy::kResampleEachStep) {
      const size_t want = ps.batch_size.value_or(ps.t_f.size());
      if (want == 0) throw StructuralError("train: resample strategy needs a point count");
      geom::Rng rng = step_rng(options.seed, iter);
      return model.resampler(static_cast<int>(want), rng);
    }
    if (!ps.batch_size || *ps.batch_size >= ps.t_f.size()) return ps.t_f;
    geom::Rng rng = step_rng(options.seed, iter);
    std::vector<size_t> idx(ps.t_f.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    PointSet batch;
    batch.reserve(*ps.batch_size);
    for (size_t j = 0; j < *ps.batch_size; ++j) {
      std::uniform_int_distribution<size_t> pick(j, idx.size() - 1);
      std::swap(idx[j], idx[pick(rng)]);
      batch.push_back(ps.t_f[idx[j]]);
    }
    return batch;
  };

  std::vector<long> last_fired(options.callbacks.size(), -1);
  auto maybe_fire = [&](bool force) {
    for (size_t ci = 0; ci < options.callbacks.size(); ++ci) {
      const Callback& cb = options.callbacks[ci];
      const bool due = state.iteration % cb.period == 0;
      if ((due || force) && last_fired[ci] != state.iteration) {
        fire_callback(cb, model, state);
        last_fired[ci] = state.iteration;
      }
    }
  };

  auto record = [&](const prob::LossBreakdown& b, long iteration) {
    if (!state.history.empty() && state.history.back().iteration == iteration) return;
    LossRecord rec;
    rec.iteration = iteration;
    rec.total = b.total;
    rec.f = b.f;
    rec.b = b.b;
    rec.i = b.i;
    if (options.metric) rec.metric = options.metric(state.params);
    state.history.push_back(rec);
  };

  long steps_taken = 0;
  if (state.iteration == 0) maybe_fire(false);

  bool first_phase = true;
  for (const OptimizerConfig& phase : options.phases) {
    if (phase.kind == OptimizerConfig::Kind::kAdam) {
      // A later phase starts its own moment estimates; only the first phase
      // of a call continues moments restored from a checkpoint.
      if (!first_phase) state.adam = AdamState{};
      for (long k = 0; k < phase.iterations; ++k) {
        PointSet batch = points_for(state.iteration);
        eng::LossGrad lg = model.evaluator.loss_and_grad(state.params, batch);
        record(lg.breakdown, state.iteration);
        AdamConfig step_cfg = phase.adam;
        if (phase.decay.period > 0)
          step_cfg.lr = phase.adam.lr *
                        std::pow(phase.decay.factor,
                                 static_cast<double>(state.adam.t / phase.decay.period));
        adam_step(state, lg.grad, step_cfg);
        ++steps_taken;
        maybe_fire(false);
      }
    } else {
      PointSet pts = points_for(state.iteration);
      prob::LossBreakdown last_eval;
      LossGradFn objective = [&](const std::vector<double>& theta, std::vector<double>& grad) {
        net::Parameters trial = state.params;
        trial.values = theta;
        eng::LossGrad lg = model.evaluator.loss_and_grad(trial, pts);
        grad = std::move(lg.grad);
        last_eval = lg.breakdown;
        return lg.breakdown.total;
      };
      auto on_start = [&](const TrainState& st, double) { record(last_eval, st.iteration); };
      auto on_accept = [&](const TrainState& st, double) {
        record(last_eval, st.iteration);
        ++steps_taken;
        maybe_fire(false);
      };
      lbfgs_run(state, objective, phase.lbfgs, on_start, on_accept);
    }
    first_phase = false;
  }

  if (steps_taken > 0) {
    // Close the history with the loss at the final parameters unless the last
    // phase already recorded it.
    if (state.history.empty() || state.history.back().iteration != state.iteration) {
      prob::LossBreakdown final_loss =
          model.evaluator.loss(state.params, points_for(state.iteration));
      record(final_loss, state.iteration);
    }
    maybe_fire(true);
  }
  if (!options.history_path.empty()) write_history_csv(options.history_path, state.history);
  return state;
}

void write_history_csv(const std::string& path, std::span<const LossRecord> history) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot open history file: " + path);
  const bool any_metric =
      std::any_of(history.begin(), history.end(),
                  [](const LossRecord& r) { return r.metric.has_value(); });
  out << "iteration,loss_total,loss_f,loss_b,loss_i";
  if (any_metric) out << ",metric";
  out << "\n";
  for (const LossRecord& r : history) {
    out << r.iteration << "," << fmt_double(r.total) << "," << fmt_double(r.f) << ","
        << fmt_double(r.b) << "," << fmt_double(r.i);
    if (any_metric) {
      out << ",";
      if (r.metric) out << fmt_double(*r.metric);
    }
    out << "\n";
  }
}

size_t select_best(std::span<const TrainState> runs) {
  if (runs.empty()) throw StructuralError("select_best: no runs given");
  size_t best = runs.size();
  double best_loss = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].history.empty()) continue;
    const double v = runs[i].history.back().total;
    if (!std::isfinite(v)) continue;
    if (v < best_loss) {
      best_loss = v;
      best = i;
    }
  }
  if (best == runs.size())
    throw NumericError("select_best: every run has an empty or non-finite history");
  return best;
}

std::vector<double> spectrum_monitor(const net::NetworkSpec& spec, const net::Parameters& params,
                                     const net::OutputTransform& transform,
                                     std::span<const double> freqs, const PointSet& probe) {
  if (spec.input_dim() != 1)
    throw StructuralError("spectrum monitor expects a one-dimensional input");
  const size_t n = probe.size();
  if (n < 2) throw StructuralError("spectrum monitor needs at least two probe points");
  const double pi = std::acos(-1.0);
  const double step = 2.0 * pi / static_cast<double>(n);
  for (size_t k = 0; k < n; ++k) {
    if (probe[k].size() != 1)
      throw StructuralError("spectrum monitor probe points must be one-dimensional");
    const double expected = -pi + static_cast<double>(k) * step;
    if (std::abs(probe[k][0] - expected) > 1e-9)
      throw StructuralError("spectrum monitor probe grid must run equispaced from -pi to pi");
  }
  for (double w : freqs) {
    if (!(w > 0.0)) throw DomainError("spectrum monitor frequencies must be positive");
  }
  std::vector<double> u(n);
  for (size_t k = 0; k < n; ++k)
    u[k] = eng::forward_values(spec, transform, params, probe[k])[0];
  std::vector<double> amps;
  amps.reserve(freqs.size());
  for (double w : freqs) {
    double re = 0.0;
    double im = 0.0;
    for (size_t k = 0; k < n; ++k) {
      re += u[k] * std::cos(w * probe[k][0]);
      im += u[k] * std::sin(w * probe[k][0]);
    }
    const double raw = 2.0 / static_cast<double>(n) * std::hypot(re, im);
    // Report relative to the sin(w x)/w family: a matching mode reads 1.
    amps.push_back(raw * w);
  }
  return amps;
}

PointSet spectrum_grid(int n) {
  if (n < 2) throw StructuralError("spectrum grid needs at least two points");
  const double pi = std::acos(-1.0);
  PointSet grid;
  grid.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k)
    grid.push_back({-pi + 2.0 * pi * static_cast<double>(k) / static_cast<double>(n)});
  return grid;
}

geom::Rng step_rng(unsigned long long seed, long iteration) {
  const uint64_t mixed = splitmix64(seed ^ splitmix64(static_cast<uint64_t>(iteration) + 1));
  return geom::Rng(mixed);
}

}  // namespace pinn::train
