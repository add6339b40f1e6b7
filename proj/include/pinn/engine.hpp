#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "pinn/network.hpp"
#include "pinn/problem.hpp"

namespace pinn::eng {

using geom::Point;
using geom::PointSet;

/// One tangent-seeded forward pass of the network at a point, with every
/// intermediate kept so the reverse sweep can walk the layer structure
/// directly. Axis -1 is the plain value pass (zero tangent). Channel 0 of
/// every jet is the value, channel 1 the directional first derivative and
/// channel 2 half the directional second derivative.
struct PassState {
  int axis = -1;
  std::vector<std::vector<ad::Jet<3>>> z;    // pre-activations; z[l-1] feeds layer l
  std::vector<std::vector<ad::Jet<3>>> act;  // act[0] inputs, act[l] outputs of layer l
  std::vector<ad::Jet<3>> out;               // transformed network outputs

  // Replay state for a non-identity output transform: the transform runs on
  // its own small tape whose reverse sweep converts output adjoints into
  // raw-output adjoints.
  std::unique_ptr<ad::Tape<3>> ttape;
  std::vector<ad::Var<3>> t_raw;
  std::vector<ad::Var<3>> t_out;
};

/// Forward/reverse workhorse for one collocation point. Passes run lazily per
/// axis and stay cached; reverse accumulates parameter gradients by layer
/// with jet-valued adjoints, so values, first and second derivatives all
/// backpropagate in a single sweep per axis.
class PointEngine {
 public:
  PointEngine(const net::NetworkSpec& spec, const net::OutputTransform& transform,
              const net::Parameters& params, Point x);

  const PassState& pass(int axis);
  bool has_pass() const { return !passes_.empty(); }
  /// Smallest axis key among the passes run so far. Requires has_pass().
  int any_pass_axis() const { return passes_.begin()->first; }

  /// Accumulates scale * d(sum_c <seeds[c], out_c>)/dtheta into grad, where
  /// <.,.> pairs seed channels with the output jet channels of pass(axis).
  void reverse(int axis, std::span<const ad::Jet<3>> seeds, double scale,
               std::vector<double>& grad);

  const Point& point() const { return x_; }
  const net::NetworkSpec& spec() const { return spec_; }
  const net::OutputTransform& transform() const { return transform_; }
  const net::Parameters& params() const { return params_; }

 private:
  PassState run_forward(int axis) const;

  const net::NetworkSpec& spec_;
  const net::OutputTransform& transform_;
  const net::Parameters& params_;
  Point x_;
  std::map<int, PassState> passes_;
};

/// FieldProbe adapter over a PointEngine, so residual closures written
/// against the reference probe run unchanged on the batched path.
class EngineProbe : public prob::FieldProbe {
 public:
  explicit EngineProbe(PointEngine& engine) : engine_(engine) {}

  int output_dim() const override { return engine_.spec().output_dim(); }
  int external_count() const override { return engine_.spec().externals; }
  double value(int component) const override;
  double first(int component, int axis) const override;
  double second(int component, int axis) const override;
  double external(int k) const override;
  double value_at(const Point& t, int component) const override;

 private:
  PointEngine& engine_;
};

/// Plain forward evaluation at one point (value pass only).
std::vector<double> forward_values(const net::NetworkSpec& spec,
                                   const net::OutputTransform& transform,
                                   const net::Parameters& params, const Point& x);

struct LossGrad {
  prob::LossBreakdown breakdown;
  std::vector<double> grad;  // same layout as Parameters::values
};

/// Batched loss/gradient evaluator for one problem instance. Owns everything
/// but the trainable state and the collocation set, which change per step.
class Evaluator {
 public:
  Evaluator(net::NetworkSpec spec, net::OutputTransform transform, prob::Residual residual,
            std::vector<prob::Condition> conditions, prob::ObservationSet observations,
            prob::LossWeights weights);

  LossGrad loss_and_grad(const net::Parameters& params, const PointSet& t_f) const;
  prob::LossBreakdown loss(const net::Parameters& params, const PointSet& t_f) const;
  /// Euclidean residual norm per point, for adaptive refinement pools.
  std::vector<double> residual_norms(const net::Parameters& params, const PointSet& pts) const;

  const net::NetworkSpec& spec() const { return spec_; }
  const net::OutputTransform& transform() const { return transform_; }
  const prob::Residual& residual() const { return residual_; }
  std::span<const prob::Condition> conditions() const { return conditions_; }
  const prob::ObservationSet& observations() const { return observations_; }
  const prob::LossWeights& weights() const { return weights_; }

 private:
  LossGrad compute(const net::Parameters& params, const PointSet& t_f, bool with_grad) const;
  double condition_term(const net::Parameters& params, const prob::Condition& c, bool with_grad,
                        std::vector<double>* grad) const;
  double observation_term(const net::Parameters& params, bool with_grad,
                          std::vector<double>* grad) const;
  /// Routes the scratch-tape adjoints of the slot vars into pass seeds and
  /// runs the reverse sweeps.
  void apply_slot_gradient(PointEngine& engine, const prob::ResidualCtx& ctx,
                           const ad::Gradient<1>& g, const net::Parameters& params, double scale,
                           std::vector<double>& grad) const;

  net::NetworkSpec spec_;
  net::OutputTransform transform_;
  prob::Residual residual_;
  std::vector<prob::Condition> conditions_;
  prob::ObservationSet observations_;
  prob::LossWeights weights_;
};

}  // namespace pinn::eng
