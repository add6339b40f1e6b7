#pragma once

#include <span>
#include <string>
#include <vector>

#include "pinn/engine.hpp"
#include "pinn/training.hpp"

namespace pinn::rar {

using geom::Point;
using geom::PointSet;

struct RarConfig {
  int m = 1;                // points added per round
  double threshold = 5e-3;  // stop once the mean residual drops below
  size_t pool_size = 0;     // candidate pool per round; 0 means 10x the live set
  long inner_iters = 1000;  // Adam iterations between rounds
  int max_rounds = 100;

  void validate() const;
};

/// One collocation point appended during refinement, with the residual that
/// selected it and the mean residual before and after the retraining round.
struct AddedPoint {
  int round = 0;
  Point x;
  double residual = 0.0;
  double mean_before = 0.0;
  double mean_after = 0.0;
};

enum class RarStatus { kConverged, kMaxRounds };

struct RarResult {
  train::TrainState state;
  RarStatus status = RarStatus::kMaxRounds;
  int rounds = 0;
  std::vector<AddedPoint> added;
  /// Mean residual at each estimate, one entry per round plus the final one.
  std::vector<double> mean_history;
  PointSet points;  // final collocation set
};

/// Monte-Carlo estimate of the mean residual norm over a candidate pool.
double estimate_mean_residual(const eng::Evaluator& evaluator, const net::Parameters& params,
                              const PointSet& pool);

/// Indices of the m largest residuals, ties broken by pool index order.
std::vector<size_t> worst_indices(std::span<const double> residuals, int m);

/// The m pool points with the largest residual norms.
PointSet select_worst(const PointSet& pool, std::span<const double> residuals, int m);

/// Alternates residual estimation, worst-point selection, and retraining
/// until the mean residual falls below the threshold or the round cap hits.
/// model.resampler draws each round's candidate pool; inner_options supplies
/// the learning rate and seed while the refinement loop controls the
/// iteration counts and keeps the collocation set fixed within a round.
RarResult rar_loop(const train::TrainModel& model, const RarConfig& cfg,
                   const train::TrainOptions& inner_options, train::TrainState state);

/// round,x0..,residual,E_r_before,E_r_after with full precision.
void write_added_points_csv(const std::string& path, std::span<const AddedPoint> added);

}  // namespace pinn::rar
