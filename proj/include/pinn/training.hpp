#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pinn/checkpoint.hpp"
#include "pinn/engine.hpp"
#include "pinn/network.hpp"
#include "pinn/problem.hpp"

namespace pinn::train {

using geom::Point;
using geom::PointSet;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// Optional step decay for Adam phases: lr is multiplied by factor every
/// period steps. period 0 disables the schedule.
struct StepDecay {
  long period = 0;
  double factor = 1.0;

  void validate() const;
};

struct LbfgsConfig {
  int memory = 50;
  long max_iters = 15000;
  double c1 = 1e-4;       // sufficient-decrease constant
  double c2 = 0.9;        // curvature constant
  double tolerance = 1e-8;  // stop when the gradient max-norm drops below

  void validate() const;
};

/// One phase of the optimizer sequence. Typical runs chain an Adam phase with
/// a quasi-Newton polish.
struct OptimizerConfig {
  enum class Kind { kAdam, kLbfgs };

  Kind kind = Kind::kAdam;
  AdamConfig adam;
  long iterations = 0;  // Adam phase length; L-BFGS phases use lbfgs.max_iters
  StepDecay decay;
  LbfgsConfig lbfgs;

  void validate() const;

  static OptimizerConfig adam_phase(long iterations, double lr);
  static OptimizerConfig lbfgs_phase();
  static OptimizerConfig lbfgs_phase(LbfgsConfig cfg);
};

/// First/second Adam moments. Sized lazily on the first step so a fresh state
/// works for any parameter count.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
};

struct LossRecord {
  long iteration = 0;
  double total = 0.0;
  double f = 0.0;
  double b = 0.0;
  double i = 0.0;
  std::optional<double> metric;
};

struct TrainState {
  net::Parameters params;
  long iteration = 0;
  AdamState adam;
  std::vector<LossRecord> history;
};

/// Fresh state with Glorot-initialized parameters.
TrainState make_state(const net::NetworkSpec& spec, unsigned long long seed);

/// Checkpoint round trip, carrying parameters, the global iteration counter,
/// and the Adam moments so a restart continues the exact trajectory.
net::Checkpoint to_checkpoint(const net::NetworkSpec& spec, const TrainState& state);
TrainState state_from_checkpoint(const net::Checkpoint& ck);

/// One Adam update in place: bias-corrected moments, parameter step, and the
/// iteration bump. Non-finite gradient entries abort with diagnostics. Steps
/// are clipped elementwise so the max-norm never exceeds lr (plus slack).
void adam_step(TrainState& state, std::span<const double> grad, const AdamConfig& cfg);

/// Loss and gradient of a flat parameter vector; fills grad (resizing as
/// needed) and returns the loss.
using LossGradFn =
    std::function<double(const std::vector<double>& theta, std::vector<double>& grad)>;

enum class LbfgsStatus { kConverged, kMaxIterations, kLineSearchFailed };

struct LbfgsResult {
  LbfgsStatus status = LbfgsStatus::kMaxIterations;
  long iterations = 0;  // accepted steps
  double final_loss = 0.0;
};

/// Limited-memory quasi-Newton run with a strong-Wolfe line search. Updates
/// state.params in place and bumps state.iteration per accepted step.
/// on_start fires once after the initial evaluation; on_accept after every
/// accepted step. Line-search failure restores the best parameters seen and
/// reports it in the status rather than throwing.
LbfgsResult lbfgs_run(TrainState& state, const LossGradFn& f, const LbfgsConfig& cfg,
                      const std::function<void(const TrainState&, double)>& on_start = {},
                      const std::function<void(const TrainState&, double)>& on_accept = {});

enum class CallbackKind {
  kModelCheckpoint,
  kFirstDerivative,
  kMovieDumper,
  kSpectrum,
  kOperatorPredictor,
};

/// Periodic training-loop hooks. File-producing callbacks append one CSV row
/// per firing; the checkpoint callback overwrites its snapshot file.
struct Callback {
  CallbackKind kind = CallbackKind::kModelCheckpoint;
  long period = 1;
  std::string path;
  int axis = 0;                // first-derivative probe axis
  PointSet points;             // probe locations
  std::vector<double> freqs;   // spectrum frequencies
  prob::Residual op;           // operator predictor

  void validate() const;

  static Callback model_checkpoint(long period, std::string path);
  static Callback first_derivative(int axis, PointSet points, long period, std::string path);
  static Callback movie_dumper(PointSet points, long period, std::string path);
  static Callback spectrum(PointSet points, std::vector<double> freqs, long period,
                           std::string path);
  static Callback operator_predictor(prob::Residual op, PointSet points, long period,
                                     std::string path);
};

/// Everything the loop needs about one problem: the loss evaluator, the
/// domain point sets with their sampling policy, and a fresh-point sampler
/// for the resampling strategy.
struct TrainModel {
  eng::Evaluator evaluator;
  prob::PointSets points;
  std::function<PointSet(int, geom::Rng&)> resampler;
};

struct TrainOptions {
  std::vector<OptimizerConfig> phases;
  unsigned long long seed = 0;  // drives batching and resampling draws
  std::vector<Callback> callbacks;
  std::function<double(const net::Parameters&)> metric;  // optional history column
  std::string history_path;  // loss-history CSV, empty to skip
};

/// Runs the optimizer phases from the given state and returns the final one.
/// The full loss history is recorded, one row per iteration; restarting from
/// a checkpointed state and finishing the remaining iterations reproduces the
/// uninterrupted trajectory bit for bit on Adam phases.
TrainState train(const TrainModel& model, const TrainOptions& options, TrainState state);

/// iteration,loss_total,loss_f,loss_b,loss_i[,metric] with full precision.
void write_history_csv(const std::string& path, std::span<const LossRecord> history);

/// Index of the run with the smallest final recorded training loss.
size_t select_best(std::span<const TrainState> runs);

/// Discrete Fourier amplitude of the first network output at each requested
/// frequency, measured on an equispaced grid spanning [-pi, pi). Amplitudes
/// are reported relative to the family sin(w x)/w, so a mode matching the
/// target composition reads 1.
std::vector<double> spectrum_monitor(const net::NetworkSpec& spec, const net::Parameters& params,
                                     const net::OutputTransform& transform,
                                     std::span<const double> freqs, const PointSet& probe);

/// Equispaced spectrum probe grid: n points from -pi inclusive to pi
/// exclusive.
PointSet spectrum_grid(int n);

/// Deterministic per-iteration stream: the same (seed, iteration) pair always
/// yields the same generator, so checkpoint restarts redraw identical points.
geom::Rng step_rng(unsigned long long seed, long iteration);

}  // namespace pinn::train
