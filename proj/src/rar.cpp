#include "pinn/rar.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pinn/errors.hpp"

namespace pinn::rar {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

std::string fmt_point(const Point& x) {
  std::ostringstream os;
  os.precision(12);
  os << "(";
  for (size_t i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    os << x[i];
  }
  os << ")";
  return os.str();
}

}  // namespace

void RarConfig::validate() const {
  if (m < 1) throw StructuralError("refinement: points per round must be at least 1");
  if (!(threshold > 0.0)) throw StructuralError("refinement: threshold must be positive");
  if (pool_size != 0 && pool_size < static_cast<size_t>(m))
    throw StructuralError("refinement: pool size must hold at least one round of points");
  if (inner_iters < 0) throw StructuralError("refinement: inner iterations must be non-negative");
  if (max_rounds < 0) throw StructuralError("refinement: round cap must be non-negative");
}

double estimate_mean_residual(const eng::Evaluator& evaluator, const net::Parameters& params,
                              const PointSet& pool) {
  if (pool.empty()) throw StructuralError("mean residual estimate needs a nonempty pool");
  const std::vector<double> norms = evaluator.residual_norms(params, pool);
  double acc = 0.0;
  for (size_t i = 0; i < norms.size(); ++i) {
    if (!std::isfinite(norms[i]))
      throw NumericError("non-finite residual in refinement pool at point " + fmt_point(pool[i]));
    acc += norms[i];
  }
  return acc / static_cast<double>(norms.size());
}

std::vector<size_t> worst_indices(std::span<const double> residuals, int m) {
  if (m < 0 || static_cast<size_t>(m) > residuals.size())
    throw StructuralError("selection count exceeds the pool size");
  std::vector<size_t> idx(residuals.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  auto worse = [&](size_t a, size_t b) {
    if (residuals[a] != residuals[b]) return residuals[a] > residuals[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + m, idx.end(), worse);
  idx.resize(static_cast<size_t>(m));
  return idx;
}

PointSet select_worst(const PointSet& pool, std::span<const double> residuals, int m) {
  if (pool.size() != residuals.size())
    throw StructuralError("selection needs one residual per pool point");
  PointSet out;
  out.reserve(static_cast<size_t>(m));
  for (size_t i : worst_indices(residuals, m)) out.push_back(pool[i]);
  return out;
}

RarResult rar_loop(const train::TrainModel& model, const RarConfig& cfg,
                   const train::TrainOptions& inner_options, train::TrainState state) {
  cfg.validate();
  if (!model.resampler)
    throw StructuralError("refinement needs a domain sampler to draw candidate pools");

  train::TrainModel inner{model.evaluator, model.points, model.resampler};
  inner.points.strategy = prob::Strategy::kFixed;

  train::TrainOptions round_options = inner_options;
  round_options.phases.clear();
  if (cfg.inner_iters > 0) {
    double lr = 1e-3;
    for (const train::OptimizerConfig& phase : inner_options.phases) {
      if (phase.kind == train::OptimizerConfig::Kind::kAdam) {
        lr = phase.adam.lr;
        break;
      }
    }
    round_options.phases = {train::OptimizerConfig::adam_phase(cfg.inner_iters, lr)};
  }

  RarResult res;
  res.points = model.points.t_f;
  geom::Rng pool_rng = train::step_rng(inner_options.seed, -1);

  size_t pending_from = 0;  // added entries still waiting for their after-mean
  while (true) {
    const size_t want =
        cfg.pool_size != 0 ? cfg.pool_size : 10 * std::max<size_t>(res.points.size(), 1);
    const PointSet pool = model.resampler(static_cast<int>(want), pool_rng);
    if (pool.empty()) throw StructuralError("refinement sampler returned an empty pool");

    const std::vector<double> norms = model.evaluator.residual_norms(state.params, pool);
    double mean = 0.0;
    for (size_t i = 0; i < norms.size(); ++i) {
      if (!std::isfinite(norms[i]))
        throw NumericError("non-finite residual in refinement pool at point " +
                           fmt_point(pool[i]));
      mean += norms[i];
    }
    mean /= static_cast<double>(norms.size());

    for (size_t j = pending_from; j < res.added.size(); ++j) res.added[j].mean_after = mean;
    pending_from = res.added.size();
    res.mean_history.push_back(mean);

    if (mean < cfg.threshold) {
      res.status = RarStatus::kConverged;
      break;
    }
    if (res.rounds >= cfg.max_rounds) {
      res.status = RarStatus::kMaxRounds;
      break;
    }

    ++res.rounds;
    for (size_t i : worst_indices(norms, cfg.m)) {
      const Point& cand = pool[i];
      if (std::find(res.points.begin(), res.points.end(), cand) != res.points.end()) continue;
      res.points.push_back(cand);
      res.added.push_back({res.rounds, cand, norms[i], mean, mean});
    }

    if (!round_options.phases.empty()) {
      inner.points.t_f = res.points;
      state = train::train(inner, round_options, std::move(state));
    }
  }

  res.state = std::move(state);
  return res;
}

void write_added_points_csv(const std::string& path, std::span<const AddedPoint> added) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot open added-points file: " + path);
  const size_t dim = added.empty() ? 1 : added.front().x.size();
  out << "round";
  for (size_t a = 0; a < dim; ++a) out << ",x" << a;
  out << ",residual,E_r_before,E_r_after\n";
  for (const AddedPoint& p : added) {
    out << p.round;
    for (double c : p.x) out << "," << fmt_double(c);
    out << "," << fmt_double(p.residual) << "," << fmt_double(p.mean_before) << ","
        << fmt_double(p.mean_after) << "\n";
  }
}

}  // namespace pinn::rar
