#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "pinn/errors.hpp"
#include "pinn/geometry.hpp"
#include "pinn/network.hpp"
#include "pinn/quadrature.hpp"
#include "pinn/tape.hpp"

namespace pinn::prob {

using geom::Point;
using geom::PointSet;

/// Where a residual gets its numbers from at one collocation point: the
/// surrogate's value, its first and diagonal second derivatives, the trainable
/// externals, and off-point values for integral terms. The reference
/// implementation walks the network with jet tapes; the batched trainer
/// supplies the same quantities from its own passes.
class FieldProbe {
 public:
  virtual ~FieldProbe() = default;

  virtual int output_dim() const = 0;
  virtual int external_count() const = 0;
  virtual double value(int component) const = 0;
  virtual double first(int component, int axis) const = 0;
  virtual double second(int component, int axis) const = 0;
  virtual double external(int k) const = 0;
  virtual double value_at(const Point& t, int component) const = 0;
};

/// Reference probe: one tangent-seeded jet pass of the full network per axis,
/// run lazily and cached for the lifetime of the point.
class NetworkProbe : public FieldProbe {
 public:
  NetworkProbe(const net::NetworkSpec& spec, const net::Parameters& params,
               const net::OutputTransform& transform, Point x);

  int output_dim() const override { return spec_.output_dim(); }
  int external_count() const override { return spec_.externals; }
  double value(int component) const override;
  double first(int component, int axis) const override;
  double second(int component, int axis) const override;
  double external(int k) const override;
  double value_at(const Point& t, int component) const override;

 private:
  const std::vector<ad::Jet<3>>& axis_pass(int axis) const;

  const net::NetworkSpec& spec_;
  const net::Parameters& params_;
  net::OutputTransform transform_;
  Point x_;
  mutable std::vector<std::vector<ad::Jet<3>>> per_axis_;  // output jets, per axis
};

enum class SlotKind { kValue, kFirst, kSecond, kExternal, kIntegral };

/// One quadrature node backing an integral slot.
struct SlotNode {
  Point t;
  double coeff;  // weight * interval jacobian * kernel value
};

/// Record of one quantity a residual closure pulled from the probe. The
/// trainer replays these to route adjoint seeds back into the network passes.
struct Slot {
  SlotKind kind;
  int component = 0;
  int axis = -1;
  std::vector<SlotNode> nodes;  // kIntegral only
};

/// Differentiable view of the surrogate at one collocation point. Every
/// accessed quantity becomes an input on a private scratch tape, so a residual
/// closure built from these vars yields both its value and, by a backward
/// sweep over the scratch tape, its sensitivities to each accessed quantity.
class ResidualCtx {
 public:
  ResidualCtx(Point x, const FieldProbe& probe) : x_(std::move(x)), probe_(probe) {}
  ResidualCtx(Point x, const FieldProbe& probe, Point normal)
      : x_(std::move(x)), normal_(std::move(normal)), probe_(probe) {}

  int dim() const { return static_cast<int>(x_.size()); }
  double x(int axis) const;
  bool has_normal() const { return !normal_.empty(); }
  /// Outward unit normal component; available only for boundary evaluations.
  double normal(int axis) const;

  ad::Var1 u(int component = 0);
  ad::Var1 d(int component, int axis);
  ad::Var1 d2(int component, int axis);
  ad::Var1 lambda(int k);
  /// Quadrature approximation of the operator applied to the given output
  /// component, along the first coordinate of x.
  ad::Var1 integral(const quad::IntegralOperator& op, int component = 0);

  ad::Tape1& tape() { return tape_; }
  const std::vector<Slot>& slots() const { return slots_; }
  ad::Var1 slot_var(size_t i) const { return vars_[i]; }

 private:
  ad::Var1 materialize(SlotKind kind, int component, int axis, double value);

  Point x_;
  Point normal_;
  const FieldProbe& probe_;
  ad::Tape1 tape_;
  std::vector<Slot> slots_;
  std::vector<ad::Var1> vars_;
  std::map<std::tuple<int, int, int>, size_t> index_;
};

using ResidualFn = std::function<std::vector<ad::Var1>(ResidualCtx&)>;

/// PDE/IDE residual f(x; u, Du, lambda) together with its differentiation
/// arity: orders[a] is the highest derivative order the closure takes along
/// input axis a. Orders above 2 are outside the autodiff contract.
struct Residual {
  ResidualFn fn;
  std::vector<int> orders;
  int n_equations = 1;

  int max_order() const;
  void validate() const;
};

enum class ConditionKind {
  kDirichlet,
  kNeumann,
  kRobin,
  kPeriodic,
  kOperator,
  kInitial,
  kObservation,
};

std::string condition_kind_name(ConditionKind kind);

using ScalarField = std::function<double(const Point&)>;
using NormalFn = std::function<Point(const Point&)>;
using ImageFn = std::function<Point(const Point&)>;
/// Robin residual r = fn(x, u, du/dn), built from scratch-tape vars.
using RobinFn = std::function<ad::Var1(const Point&, ad::Var1, ad::Var1)>;

/// A constraint scored on its own point list. Conditions are built through
/// the factories below; unused members stay empty.
struct Condition {
  ConditionKind kind = ConditionKind::kDirichlet;
  int component = 0;
  PointSet points;

  ScalarField target;  // dirichlet / neumann / initial
  RobinFn robin;
  int axis = -1;   // periodic
  ImageFn image;   // periodic partner map
  Residual op;     // operator conditions
  NormalFn normal; // neumann / robin / operator

  static Condition dirichlet(PointSet pts, ScalarField g, int component = 0);
  static Condition neumann(PointSet pts, ScalarField g, NormalFn n, int component = 0);
  static Condition robin_bc(PointSet pts, RobinFn fn, NormalFn n, int component = 0);
  static Condition periodic(PointSet pts, int axis, ImageFn image, int component = 0);
  static Condition operator_bc(PointSet pts, Residual op, NormalFn n = {});
  static Condition initial(PointSet pts, ScalarField g, int component = 0);
};

/// Normal provider backed by a geometry, and its space-time counterpart that
/// pads the spatial normal with a zero time component.
NormalFn normal_of(geom::GeoPtr geo);
NormalFn spatial_normal_of(const geom::SpaceTimeDomain& dom);

/// Periodic partner map along one axis, likewise in plain and space-time form.
ImageFn image_of(geom::GeoPtr geo, int axis);
ImageFn spatial_image_of(const geom::SpaceTimeDomain& dom, int axis);

/// Boundary samples for conditions that need normals: draws landing on
/// ambiguous-normal corners are rejected and redrawn. Dirichlet-style
/// conditions can sample the boundary directly instead.
PointSet sample_normal_safe_boundary(const geom::Geometry& g, int n, geom::Rng& rng);
PointSet sample_normal_safe_boundary(const geom::SpaceTimeDomain& dom, int n, geom::Rng& rng);

/// Point measurements of selected output components.
struct ObservationSet {
  PointSet points;
  std::vector<std::vector<double>> values;  // values[i][k]: component components[k] at point i
  std::vector<int> components;

  bool empty() const { return points.empty(); }
  void validate(int output_dim) const;
  /// Observed components, defaulting to all outputs when unspecified.
  std::vector<int> effective_components(int output_dim) const;
};

enum class Strategy { kFixed, kResampleEachStep, kAdaptiveRar };

/// Collocation sets for one problem. Boundary and observation points live on
/// their conditions; this holds the domain set and the sampling policy.
struct PointSets {
  PointSet t_f;
  Strategy strategy = Strategy::kFixed;
  std::optional<size_t> batch_size;
};

struct LossWeights {
  double w_f = 1.0;
  double w_b = 1.0;
  double w_i = 1.0;

  void validate() const;
};

/// Membership checks for every point set against the domain: collocation
/// points inside, condition points on the boundary (or the initial slice),
/// observations inside the closure. Throws StructuralError on any violation.
void validate_points(const geom::Geometry& domain, const PointSet& t_f,
                     std::span<const Condition> conditions, const ObservationSet& obs);
void validate_points(const geom::SpaceTimeDomain& domain, const PointSet& t_f,
                     std::span<const Condition> conditions, const ObservationSet& obs);

/// Checks that every derivative slot a closure touched stays within the
/// orders the residual declares. Throws StructuralError on violations.
void enforce_residual_orders(const ResidualCtx& ctx, const Residual& residual);

struct PdeLoss {
  double loss = 0.0;
  std::vector<double> point_norms;  // Euclidean residual norm per point
};

/// Mean squared residual norm over the collocation set, with the per-point
/// norms kept for adaptive refinement.
PdeLoss pde_loss(const net::NetworkSpec& spec, const net::Parameters& params,
                 const net::OutputTransform& transform, const Residual& residual,
                 const PointSet& t_f);

/// Sum over conditions of the per-condition mean squared residual.
double bc_loss(const net::NetworkSpec& spec, const net::Parameters& params,
               const net::OutputTransform& transform, std::span<const Condition> conditions);

/// Mean squared misfit against the observed values.
double observation_loss(const net::NetworkSpec& spec, const net::Parameters& params,
                        const net::OutputTransform& transform, const ObservationSet& obs);

struct LossBreakdown {
  double total = 0.0;
  double f = 0.0;
  double b = 0.0;
  double i = 0.0;
  std::vector<double> point_norms;
};

LossBreakdown total_loss(const net::NetworkSpec& spec, const net::Parameters& params,
                         const net::OutputTransform& transform, const Residual& residual,
                         const PointSet& t_f, std::span<const Condition> conditions,
                         const ObservationSet& obs, const LossWeights& weights);

/// Built-in residuals. Input axes are listed in network-input order, with
/// time last for the evolution problems.
Residual poisson_residual(int dim, ScalarField forcing);         // -laplace(u) = f
Residual burgers1d_residual(double nu);                          // (x, t) -> u
Residual burgers2d_residual(double re);                          // (x, y, t) -> (u, v)
Residual lorenz_residual();                                      // t -> (x, y, z); lambda = (rho, sigma, beta)
Residual diffusion_reaction_residual();                          // (x, t) -> (C_A, C_B); lambda = (D, k_f)
/// Scalar IDE: base residual minus the integral term.
Residual ide_residual(Residual base, quad::IntegralOperator op, int component = 0);

/// Right-hand side of the Lorenz system, exposed for building observations.
std::array<double, 3> lorenz_rhs(const std::array<double, 3>& state, double rho, double sigma,
                                 double beta);

/// Numerically safe logistic function, in double and tape form.
double stable_sigmoid(double z);
template <int K>
ad::Var<K> stable_sigmoid(ad::Var<K> z) {
  if (z.value() >= 0.0) return 1.0 / (exp(-z) + 1.0);
  ad::Var<K> e = exp(z);
  return e / (e + 1.0);
}

/// Traveling-wave solution of the two-dimensional Burgers system.
double burgers2d_exact_u(double x, double y, double t, double re);
double burgers2d_exact_v(double x, double y, double t, double re);

}  // namespace pinn::prob
