#pragma once

// Run configuration, the built-in problem registry, and the solve/train/
// predict/export entry points behind the command-line tool. A config file
// names a registered problem and optionally overrides its network size,
// optimizer schedule, point counts, refinement settings, and output grid;
// parsing resolves every field against the registry defaults so the
// canonical form round-trips exactly.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pinn/engine.hpp"
#include "pinn/geometry.hpp"
#include "pinn/network.hpp"
#include "pinn/problem.hpp"
#include "pinn/rar.hpp"
#include "pinn/training.hpp"

namespace pinn::cli {

/// Residual and condition point budgets. Counts refer to sampled points;
/// problems whose conditions live on fixed points (an initial value at a
/// single time, say) ignore the counts they do not use.
struct PointCounts {
  long domain = 0;        ///< collocation points inside the domain
  long boundary = 0;      ///< points per boundary condition
  long initial = 0;       ///< points per initial condition
  long observations = 0;  ///< measurement points for inverse problems
};

/// Adaptive refinement toggle plus its tuning knobs.
struct RarSettings {
  bool enabled = false;
  rar::RarConfig config;
};

/// Fully resolved run description. parse_config fills every field from the
/// named problem's registry defaults before applying file overrides, so a
/// RunConfig is always concrete and config_to_json(parse_config(...)) is a
/// fixed point.
struct RunConfig {
  std::string problem;
  std::uint64_t seed = 0;
  std::string out;

  int depth = 1;                   ///< hidden layer count
  int width = 1;                   ///< neurons per hidden layer
  std::string activation = "tanh";

  std::vector<train::OptimizerConfig> phases;

  PointCounts points;
  std::string strategy = "fixed";  ///< "fixed" or "resample"
  std::optional<std::size_t> batch;

  RarSettings rar;

  long predict_grid = 0;  ///< output grid resolution per axis

  /// Optional replacement domain, kept as the geometry expression tree it
  /// was written as. Null when the problem's own domain is used.
  nlohmann::json geometry;
};

/// Parse a config file (JSON). Unknown keys, missing problems, malformed
/// values, and negative point counts raise StructuralError naming the key
/// and its location. The returned config has all defaults resolved.
RunConfig parse_config(const std::string& path);

/// Same, starting from an already parsed JSON document.
RunConfig parse_config_json(const nlohmann::json& doc);

/// Canonical JSON form of a resolved config.
nlohmann::json config_to_json(const RunConfig& cfg);

/// Build a geometry from an expression tree of nested operation nodes,
/// e.g. {"op":"difference","a":{"op":"rectangle","lo":[-1,-1],"hi":[1,1]},
/// "b":{"op":"rectangle","lo":[0,0],"hi":[1,1]}}. Leaves: interval,
/// rectangle, cuboid, disk, sphere, triangle, polygon. Interior nodes:
/// union, difference, intersection. Throws StructuralError on malformed
/// trees.
geom::GeoPtr parse_geometry(const nlohmann::json& node);

/// Names of the registered problems.
std::vector<std::string> problem_names();

/// Everything needed to train and evaluate one problem instance: network
/// shape, loss ingredients, samplers, an output grid, and (when a closed
/// form or reference solver exists) the target solution for error metrics.
struct BuiltProblem {
  net::NetworkSpec spec;
  net::OutputTransform transform;
  prob::Residual residual;
  std::vector<prob::Condition> conditions;
  prob::ObservationSet observations;
  prob::LossWeights weights;
  prob::PointSets points;
  std::function<geom::PointSet(int, geom::Rng&)> resampler;

  geom::PointSet eval_points;
  /// Reference solution at a point, one value per output component.
  /// Empty function when no reference is available.
  std::function<std::vector<double>(const geom::Point&)> reference;

  std::vector<std::string> external_names;  ///< labels for trained scalars
  std::vector<double> external_truth;       ///< known true values, if any
  std::vector<double> external_init;        ///< starting values

  /// Monitoring hooks attached by default (file paths already under the
  /// run's output directory).
  std::vector<train::Callback> callbacks;
};

/// Instantiate the problem a config names, with overrides applied and all
/// random sampling drawn deterministically from cfg.seed.
BuiltProblem build_problem(const RunConfig& cfg);

/// Outcome of a command: final losses, metrics, timing, the files written
/// (relative to the output directory, every listed file exists), and any
/// error flags. Empty errors means success.
struct RunReport {
  std::string problem;
  std::string command;
  std::uint64_t seed = 0;
  long iterations = 0;
  prob::LossBreakdown loss;
  std::map<std::string, double> metrics;
  double wall_time_seconds = 0.0;
  std::vector<std::string> files;
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
  nlohmann::json to_json() const;
};

/// Execute a command against a resolved config.
///
///   train    fit the model, write checkpoint + loss history (+ added
///            points and observations where applicable) + report
///   predict  evaluate a stored checkpoint on the output grid, write the
///            solution table + report
///   export   re-emit every artifact from a stored checkpoint; outputs are
///            byte-identical across repeated exports of the same checkpoint
///   solve    train, then predict and export in one run
///
/// restore names a checkpoint to resume from; training phases already
/// completed according to the checkpoint's iteration counter are skipped.
/// Numeric failures during training or evaluation are caught and recorded
/// in the report's error list alongside whatever artifacts were completed;
/// structural problems (bad config, missing checkpoint) throw.
RunReport run(const std::string& command, const RunConfig& cfg,
              const std::string& restore = "");

/// Relative l2 error |pred - ref| / |ref| over flattened value vectors.
/// Throws StructuralError on length mismatch and DomainError when the
/// reference norm is zero.
double l2_relative_error(std::span<const double> pred,
                         std::span<const double> ref);

}  // namespace pinn::cli
