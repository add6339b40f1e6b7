#pragma once

#include <memory>
#include <random>
#include <vector>

#include "pinn/errors.hpp"

namespace pinn::geom {

using Point = std::vector<double>;
using PointSet = std::vector<Point>;
using Rng = std::mt19937_64;

/// Absolute tolerance for boundary membership.
inline constexpr double kBoundaryTol = 1e-8;

struct BoundingBox {
  Point lo;
  Point hi;
};

/// A solid region: a primitive shape or a boolean combination of them.
/// Immutable after construction; all queries are const.
class Geometry {
 public:
  virtual ~Geometry() = default;

  virtual int dim() const = 0;
  virtual BoundingBox bounding_box() const = 0;

  /// Closed membership (boundary points count as inside for primitives;
  /// boolean nodes combine child memberships set-theoretically).
  bool inside(const Point& x) const;

  /// True if x lies within kBoundaryTol of the composed solid's boundary.
  bool on_boundary(const Point& x) const;

  /// Outward unit normal. Throws DomainError off the boundary and
  /// AmbiguousNormalError at corners or edge junctions.
  Point boundary_normal(const Point& x) const;

  /// n interior points, uniform over the solid, by rejection from the
  /// bounding box. Throws SamplingError when the retry budget (10^4 * n)
  /// is exhausted.
  PointSet random_points(int n, Rng& rng) const;

  /// n boundary points, uniform over the exposed boundary.
  PointSet random_boundary_points(int n, Rng& rng) const;

  /// Points of an inclusive axis-aligned grid (about n in total) that lie
  /// inside the solid. For an interval this is linspace(a, b, n).
  PointSet uniform_points(int n) const;

  /// Near-equispaced boundary points. For an interval these are the two
  /// endpoints (capped at 2).
  PointSet uniform_boundary_points(int n) const;

  /// Image of a boundary point on the face opposite along the given axis.
  /// Only box-like primitives support this.
  virtual Point periodic_point(const Point& x, int axis) const;

 protected:
  friend class CsgGeometry;

  virtual bool inside_impl(const Point& x) const = 0;
  /// Exact per-primitive boundary predicate for leaves; for boolean nodes,
  /// a cheap "near any leaf boundary" prefilter.
  virtual bool boundary_candidate(const Point& x) const = 0;
  virtual bool on_boundary_impl(const Point& x) const = 0;
  /// Appends the outward face normals at x (more than one at corners).
  /// `flip` reverses orientation (set below a difference's right child).
  virtual void collect_normals(const Point& x, bool flip, PointSet& out) const = 0;
  /// Appends (leaf, boundary measure) across the tree.
  virtual void collect_leaves(std::vector<std::pair<const Geometry*, double>>& out) const = 0;
  /// One random point on this primitive's own boundary (leaves only).
  virtual Point own_boundary_sample(Rng& rng) const = 0;
  virtual PointSet own_uniform_boundary(int n) const = 0;
  /// Total boundary measure of the primitive (perimeter or face count).
  virtual double boundary_measure() const = 0;

  void check_dim(const Point& x) const;
};

using GeoPtr = std::shared_ptr<const Geometry>;

GeoPtr interval(double a, double b);
GeoPtr rectangle(const Point& lo, const Point& hi);
GeoPtr cuboid(const Point& lo, const Point& hi);
GeoPtr disk(const Point& center, double radius);
GeoPtr sphere(const Point& center, double radius);
GeoPtr triangle(const Point& p1, const Point& p2, const Point& p3);
GeoPtr polygon(PointSet vertices);
GeoPtr csg_union(GeoPtr l, GeoPtr r);
GeoPtr difference(GeoPtr l, GeoPtr r);
GeoPtr intersection(GeoPtr l, GeoPtr r);

/// Product of a spatial solid with a time interval [t0, t1]. Points are laid
/// out as (x_1, ..., x_d, t) with time last.
struct SpaceTimeDomain {
  GeoPtr space;
  double t0 = 0.0;
  double t1 = 1.0;

  SpaceTimeDomain(GeoPtr s, double a, double b) : space(std::move(s)), t0(a), t1(b) {
    if (!(t0 < t1)) throw StructuralError("SpaceTimeDomain: t0 must precede t1");
  }

  int dim() const { return space->dim() + 1; }

  bool inside(const Point& xt) const;
  /// Spatial boundary at any time in [t0, t1].
  bool on_spatial_boundary(const Point& xt) const;
  bool at_initial_time(const Point& xt) const;

  PointSet random_points(int n, Rng& rng) const;
  PointSet random_boundary_points(int n, Rng& rng) const;
  /// Initial-condition points: spatial samples paired with t = t0.
  PointSet random_initial_points(int n, Rng& rng) const;

 private:
  Point split_space(const Point& xt) const;
};

}  // namespace pinn::geom
