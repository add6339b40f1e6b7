#include "pinn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace pinn::geom {

namespace {

constexpr double kProbeRadius = 1e-5;

// Fixed unit directions used to classify points near CSG seams: a point is
// on the composed boundary iff a small ball around it meets both the solid
// and its complement.
const PointSet& probe_stencil(int dim) {
  static const PointSet d1 = {{1.0}, {-1.0}};
  static const PointSet d2 = [] {
    PointSet s;
    for (int k = 0; k < 16; ++k) {
      const double a = 2.0 * std::numbers::pi * k / 16;
      s.push_back({std::cos(a), std::sin(a)});
    }
    return s;
  }();
  static const PointSet d3 = [] {
    PointSet s;
    for (int i = -1; i <= 1; ++i) {
      for (int j = -1; j <= 1; ++j) {
        for (int k = -1; k <= 1; ++k) {
          if (i == 0 && j == 0 && k == 0) continue;
          const double len = std::sqrt(double(i * i + j * j + k * k));
          s.push_back({i / len, j / len, k / len});
        }
      }
    }
    return s;
  }();
  switch (dim) {
    case 1: return d1;
    case 2: return d2;
    case 3: return d3;
    default: throw UnsupportedError("geometry: supported ambient dimensions are 1 to 3");
  }
}

double dist2(const Point& a, const Point& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double point_segment_distance(const Point& x, const Point& p, const Point& q) {
  const double dx = q[0] - p[0], dy = q[1] - p[1];
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((x[0] - p[0]) * dx + (x[1] - p[1]) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Point c{p[0] + t * dx, p[1] + t * dy};
  return std::sqrt(dist2(x, c));
}

int orientation_sign(const Point& a, const Point& b, const Point& c) {
  const double v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  if (v > 1e-14) return 1;
  if (v < -1e-14) return -1;
  return 0;
}

bool segments_cross(const Point& a, const Point& b, const Point& c, const Point& d) {
  const int o1 = orientation_sign(a, b, c), o2 = orientation_sign(a, b, d);
  const int o3 = orientation_sign(c, d, a), o4 = orientation_sign(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  auto on = [](const Point& p, const Point& q, const Point& r) {
    return orientation_sign(p, q, r) == 0 && r[0] >= std::min(p[0], q[0]) - 1e-14 &&
           r[0] <= std::max(p[0], q[0]) + 1e-14 && r[1] >= std::min(p[1], q[1]) - 1e-14 &&
           r[1] <= std::max(p[1], q[1]) + 1e-14;
  };
  return on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b);
}

}  // namespace

void Geometry::check_dim(const Point& x) const {
  if (static_cast<int>(x.size()) != dim()) {
    throw StructuralError("geometry: point dimension does not match the solid");
  }
}

bool Geometry::inside(const Point& x) const {
  check_dim(x);
  return inside_impl(x);
}

bool Geometry::on_boundary(const Point& x) const {
  check_dim(x);
  return on_boundary_impl(x);
}

Point Geometry::boundary_normal(const Point& x) const {
  check_dim(x);
  if (!on_boundary_impl(x)) {
    throw DomainError("boundary_normal: point is not on the boundary");
  }
  PointSet candidates;
  collect_normals(x, false, candidates);
  PointSet distinct;
  for (const Point& n : candidates) {
    bool dup = false;
    for (const Point& d : distinct) {
      double dot = 0.0;
      for (size_t i = 0; i < n.size(); ++i) dot += n[i] * d[i];
      if (dot > 1.0 - 1e-9) {
        dup = true;
        break;
      }
    }
    if (!dup) distinct.push_back(n);
  }
  if (distinct.empty()) {
    throw DomainError("boundary_normal: no supporting face found at the point");
  }
  if (distinct.size() > 1) {
    throw AmbiguousNormalError("boundary_normal: multiple faces meet at the point");
  }
  return distinct.front();
}

PointSet Geometry::random_points(int n, Rng& rng) const {
  if (n < 1) throw StructuralError("random_points: n must be positive");
  const BoundingBox box = bounding_box();
  std::vector<std::uniform_real_distribution<double>> axis;
  for (int i = 0; i < dim(); ++i) axis.emplace_back(box.lo[static_cast<size_t>(i)], box.hi[static_cast<size_t>(i)]);
  PointSet out;
  out.reserve(static_cast<size_t>(n));
  const long budget = 10000L * n;
  for (long draw = 0; draw < budget && static_cast<int>(out.size()) < n; ++draw) {
    Point p(static_cast<size_t>(dim()));
    for (int i = 0; i < dim(); ++i) p[static_cast<size_t>(i)] = axis[static_cast<size_t>(i)](rng);
    if (inside_impl(p)) out.push_back(std::move(p));
  }
  if (static_cast<int>(out.size()) < n) {
    throw SamplingError("random_points: retry budget exhausted (zero-measure solid?)");
  }
  return out;
}

PointSet Geometry::random_boundary_points(int n, Rng& rng) const {
  if (n < 1) throw StructuralError("random_boundary_points: n must be positive");
  std::vector<std::pair<const Geometry*, double>> leaves;
  collect_leaves(leaves);
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& [leaf, measure] : leaves) {
    total += measure;
    cumulative.push_back(total);
  }
  std::uniform_real_distribution<double> pick(0.0, total);
  PointSet out;
  out.reserve(static_cast<size_t>(n));
  const long budget = 10000L * n;
  for (long draw = 0; draw < budget && static_cast<int>(out.size()) < n; ++draw) {
    const size_t li = static_cast<size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), pick(rng)) - cumulative.begin());
    Point p = leaves[std::min(li, leaves.size() - 1)].first->own_boundary_sample(rng);
    if (on_boundary_impl(p)) out.push_back(std::move(p));
  }
  if (static_cast<int>(out.size()) < n) {
    throw SamplingError("random_boundary_points: retry budget exhausted");
  }
  return out;
}

PointSet Geometry::uniform_points(int n) const {
  if (n < 1) throw StructuralError("uniform_points: n must be positive");
  const BoundingBox box = bounding_box();
  const int d = dim();
  int m = std::max(2, static_cast<int>(std::llround(std::ceil(std::pow(double(n), 1.0 / d)))));
  if (d == 1) m = n;
  for (int round = 0; round < 64; ++round) {
    PointSet out;
    std::vector<int> idx(static_cast<size_t>(d), 0);
    while (true) {
      Point p(static_cast<size_t>(d));
      for (int i = 0; i < d; ++i) {
        const double lo = box.lo[static_cast<size_t>(i)], hi = box.hi[static_cast<size_t>(i)];
        p[static_cast<size_t>(i)] = m == 1 ? lo : lo + (hi - lo) * idx[static_cast<size_t>(i)] / (m - 1);
      }
      if (inside_impl(p)) out.push_back(std::move(p));
      int axis = 0;
      while (axis < d && ++idx[static_cast<size_t>(axis)] == m) {
        idx[static_cast<size_t>(axis)] = 0;
        ++axis;
      }
      if (axis == d) break;
    }
    if (static_cast<int>(out.size()) >= n) return out;
    ++m;
  }
  throw SamplingError("uniform_points: could not cover the solid with a grid");
}

PointSet Geometry::uniform_boundary_points(int n) const {
  if (n < 1) throw StructuralError("uniform_boundary_points: n must be positive");
  std::vector<std::pair<const Geometry*, double>> leaves;
  collect_leaves(leaves);
  double total = 0.0;
  for (const auto& [leaf, measure] : leaves) total += measure;
  for (int factor = 1; factor <= 4096; factor *= 2) {
    PointSet out;
    for (const auto& [leaf, measure] : leaves) {
      const int want = std::max(1, static_cast<int>(std::llround(n * factor * measure / total)));
      for (Point& p : leaf->own_uniform_boundary(want)) {
        if (on_boundary_impl(p)) out.push_back(std::move(p));
      }
    }
    if (static_cast<int>(out.size()) >= n || leaves.size() == 1) {
      if (static_cast<int>(out.size()) > n) out.resize(static_cast<size_t>(n));
      if (out.empty()) break;
      return out;
    }
  }
  throw SamplingError("uniform_boundary_points: no exposed boundary found");
}

Point Geometry::periodic_point(const Point&, int) const {
  throw UnsupportedError("periodic_point: periodic images require a box-like primitive");
}

// ---- box-like primitives: interval, rectangle, cuboid ----

namespace {

class BoxGeometry final : public Geometry {
 public:
  BoxGeometry(Point lo, Point hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size() || lo_.empty() || lo_.size() > 3) {
      throw StructuralError("box: corner dimensions must match and be 1 to 3");
    }
    for (size_t i = 0; i < lo_.size(); ++i) {
      if (!(lo_[i] < hi_[i])) throw StructuralError("box: min corner must precede max corner");
    }
  }

  int dim() const override { return static_cast<int>(lo_.size()); }
  BoundingBox bounding_box() const override { return {lo_, hi_}; }

  Point periodic_point(const Point& x, int axis) const override {
    check_dim(x);
    if (axis < 0 || axis >= dim()) throw StructuralError("periodic_point: axis out of range");
    const size_t a = static_cast<size_t>(axis);
    Point img = x;
    if (std::abs(x[a] - lo_[a]) <= kBoundaryTol) {
      img[a] = hi_[a];
    } else if (std::abs(x[a] - hi_[a]) <= kBoundaryTol) {
      img[a] = lo_[a];
    } else {
      throw DomainError("periodic_point: point is not on a face orthogonal to the axis");
    }
    return img;
  }

 protected:
  bool inside_impl(const Point& x) const override {
    for (size_t i = 0; i < lo_.size(); ++i) {
      if (x[i] < lo_[i] || x[i] > hi_[i]) return false;
    }
    return true;
  }

  bool on_boundary_impl(const Point& x) const override {
    bool near_face = false;
    for (size_t i = 0; i < lo_.size(); ++i) {
      if (x[i] < lo_[i] - kBoundaryTol || x[i] > hi_[i] + kBoundaryTol) return false;
      near_face = near_face || std::abs(x[i] - lo_[i]) <= kBoundaryTol ||
                  std::abs(x[i] - hi_[i]) <= kBoundaryTol;
    }
    return near_face;
  }

  bool boundary_candidate(const Point& x) const override { return on_boundary_impl(x); }

  void collect_normals(const Point& x, bool flip, PointSet& out) const override {
    if (!on_boundary_impl(x)) return;
    const double sign = flip ? -1.0 : 1.0;
    for (size_t i = 0; i < lo_.size(); ++i) {
      if (std::abs(x[i] - lo_[i]) <= kBoundaryTol) {
        Point n(lo_.size(), 0.0);
        n[i] = -sign;
        out.push_back(std::move(n));
      }
      if (std::abs(x[i] - hi_[i]) <= kBoundaryTol) {
        Point n(lo_.size(), 0.0);
        n[i] = sign;
        out.push_back(std::move(n));
      }
    }
  }

  void collect_leaves(std::vector<std::pair<const Geometry*, double>>& out) const override {
    out.emplace_back(this, boundary_measure());
  }

  double boundary_measure() const override {
    const size_t d = lo_.size();
    if (d == 1) return 2.0;
    const double w = hi_[0] - lo_[0], h = hi_[1] - lo_[1];
    if (d == 2) return 2.0 * (w + h);
    const double z = hi_[2] - lo_[2];
    return 2.0 * (w * h + w * z + h * z);
  }

  Point own_boundary_sample(Rng& rng) const override {
    const size_t d = lo_.size();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (d == 1) return {unit(rng) < 0.5 ? lo_[0] : hi_[0]};
    if (d == 2) return perimeter_point(unit(rng) * boundary_measure());
    // pick one of six faces weighted by area, then a uniform in-face point
    const double w = hi_[0] - lo_[0], h = hi_[1] - lo_[1], z = hi_[2] - lo_[2];
    const double areas[3] = {h * z, w * z, w * h};
    const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
    double pickv = unit(rng) * total;
    Point p(3);
    for (int axis = 0; axis < 3; ++axis) {
      for (int side = 0; side < 2; ++side) {
        pickv -= areas[axis];
        if (pickv <= 0.0) {
          for (int i = 0; i < 3; ++i) {
            const size_t si = static_cast<size_t>(i);
            p[si] = i == axis ? (side == 0 ? lo_[si] : hi_[si])
                              : lo_[si] + unit(rng) * (hi_[si] - lo_[si]);
          }
          return p;
        }
      }
    }
    return {hi_};
  }

  PointSet own_uniform_boundary(int n) const override {
    const size_t d = lo_.size();
    if (d == 1) {
      if (n == 1) return {{lo_[0]}};
      return {{lo_[0]}, {hi_[0]}};
    }
    if (d == 2) {
      PointSet out;
      const double per = boundary_measure();
      for (int i = 0; i < n; ++i) out.push_back(perimeter_point(per * i / n));
      return out;
    }
    // grid each face with roughly area-proportional counts
    PointSet out;
    const double w = hi_[0] - lo_[0], h = hi_[1] - lo_[1], z = hi_[2] - lo_[2];
    const double areas[3] = {h * z, w * z, w * h};
    const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
    for (int axis = 0; axis < 3; ++axis) {
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      const int want = std::max(1, static_cast<int>(std::llround(n * areas[axis] / total)));
      const int m = std::max(2, static_cast<int>(std::llround(std::sqrt(double(want)))));
      for (int side = 0; side < 2; ++side) {
        for (int a = 0; a < m; ++a) {
          for (int b = 0; b < m; ++b) {
            Point p(3);
            const size_t su = static_cast<size_t>(u), sv = static_cast<size_t>(v),
                         sa = static_cast<size_t>(axis);
            p[sa] = side == 0 ? lo_[sa] : hi_[sa];
            p[su] = lo_[su] + (hi_[su] - lo_[su]) * a / (m - 1);
            p[sv] = lo_[sv] + (hi_[sv] - lo_[sv]) * b / (m - 1);
            out.push_back(std::move(p));
          }
        }
      }
    }
    return out;
  }

 private:
  Point perimeter_point(double s) const {
    const double w = hi_[0] - lo_[0], h = hi_[1] - lo_[1];
    if (s < w) return {lo_[0] + s, lo_[1]};
    s -= w;
    if (s < h) return {hi_[0], lo_[1] + s};
    s -= h;
    if (s < w) return {hi_[0] - s, hi_[1]};
    s -= w;
    return {lo_[0], hi_[1] - std::min(s, h)};
  }

  Point lo_, hi_;
};

// ---- disk and sphere ----

class BallGeometry final : public Geometry {
 public:
  BallGeometry(Point center, double radius) : c_(std::move(center)), r_(radius) {
    if (c_.size() != 2 && c_.size() != 3) throw StructuralError("ball: center must be 2D or 3D");
    if (!(radius > 0.0)) throw StructuralError("ball: radius must be positive");
  }

  int dim() const override { return static_cast<int>(c_.size()); }

  BoundingBox bounding_box() const override {
    Point lo = c_, hi = c_;
    for (size_t i = 0; i < c_.size(); ++i) {
      lo[i] -= r_;
      hi[i] += r_;
    }
    return {lo, hi};
  }

 protected:
  bool inside_impl(const Point& x) const override { return std::sqrt(dist2(x, c_)) <= r_; }

  bool on_boundary_impl(const Point& x) const override {
    return std::abs(std::sqrt(dist2(x, c_)) - r_) <= kBoundaryTol;
  }

  bool boundary_candidate(const Point& x) const override { return on_boundary_impl(x); }

  void collect_normals(const Point& x, bool flip, PointSet& out) const override {
    if (!on_boundary_impl(x)) return;
    const double d = std::sqrt(dist2(x, c_));
    Point n(c_.size());
    for (size_t i = 0; i < c_.size(); ++i) n[i] = (flip ? -1.0 : 1.0) * (x[i] - c_[i]) / d;
    out.push_back(std::move(n));
  }

  void collect_leaves(std::vector<std::pair<const Geometry*, double>>& out) const override {
    out.emplace_back(this, boundary_measure());
  }

  double boundary_measure() const override {
    return c_.size() == 2 ? 2.0 * std::numbers::pi * r_ : 4.0 * std::numbers::pi * r_ * r_;
  }

  Point own_boundary_sample(Rng& rng) const override {
    if (c_.size() == 2) {
      std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
      const double a = ang(rng);
      return {c_[0] + r_ * std::cos(a), c_[1] + r_ * std::sin(a)};
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    Point dir{gauss(rng), gauss(rng), gauss(rng)};
    const double len = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    return {c_[0] + r_ * dir[0] / len, c_[1] + r_ * dir[1] / len, c_[2] + r_ * dir[2] / len};
  }

  PointSet own_uniform_boundary(int n) const override {
    PointSet out;
    if (c_.size() == 2) {
      for (int i = 0; i < n; ++i) {
        const double a = 2.0 * std::numbers::pi * i / n;
        out.push_back({c_[0] + r_ * std::cos(a), c_[1] + r_ * std::sin(a)});
      }
      return out;
    }
    // Fibonacci spiral: near-uniform deterministic spread on the sphere.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double y = n == 1 ? 0.0 : 1.0 - 2.0 * i / (n - 1.0);
      const double rad = std::sqrt(std::max(0.0, 1.0 - y * y));
      const double a = golden * i;
      out.push_back(
          {c_[0] + r_ * std::cos(a) * rad, c_[1] + r_ * y, c_[2] + r_ * std::sin(a) * rad});
    }
    return out;
  }

 private:
  Point c_;
  double r_;
};

// ---- simple polygons (triangles included) ----

class PolygonGeometry final : public Geometry {
 public:
  explicit PolygonGeometry(PointSet vertices) : v_(std::move(vertices)) {
    if (v_.size() < 3) throw StructuralError("polygon: needs at least 3 vertices");
    for (const Point& p : v_) {
      if (p.size() != 2) throw StructuralError("polygon: vertices must be 2D");
    }
    double area2 = 0.0;
    for (size_t i = 0; i < v_.size(); ++i) {
      const Point& p = v_[i];
      const Point& q = v_[(i + 1) % v_.size()];
      area2 += p[0] * q[1] - q[0] * p[1];
    }
    if (std::abs(area2) < 1e-14) throw StructuralError("polygon: degenerate (zero area)");
    if (area2 < 0.0) std::reverse(v_.begin(), v_.end());
    const size_t m = v_.size();
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = i + 1; j < m; ++j) {
        if (j == i + 1 || (i == 0 && j == m - 1)) continue;
        if (segments_cross(v_[i], v_[(i + 1) % m], v_[j], v_[(j + 1) % m])) {
          throw StructuralError("polygon: edges intersect (polygon must be simple)");
        }
      }
    }
  }

  int dim() const override { return 2; }

  BoundingBox bounding_box() const override {
    Point lo = v_[0], hi = v_[0];
    for (const Point& p : v_) {
      for (int i = 0; i < 2; ++i) {
        lo[static_cast<size_t>(i)] = std::min(lo[static_cast<size_t>(i)], p[static_cast<size_t>(i)]);
        hi[static_cast<size_t>(i)] = std::max(hi[static_cast<size_t>(i)], p[static_cast<size_t>(i)]);
      }
    }
    return {lo, hi};
  }

 protected:
  bool inside_impl(const Point& x) const override {
    if (on_boundary_impl(x)) return true;
    bool in = false;
    for (size_t i = 0; i < v_.size(); ++i) {
      const Point& p = v_[i];
      const Point& q = v_[(i + 1) % v_.size()];
      if ((p[1] > x[1]) != (q[1] > x[1])) {
        const double cx = p[0] + (x[1] - p[1]) / (q[1] - p[1]) * (q[0] - p[0]);
        if (cx > x[0]) in = !in;
      }
    }
    return in;
  }

  bool on_boundary_impl(const Point& x) const override {
    for (size_t i = 0; i < v_.size(); ++i) {
      if (point_segment_distance(x, v_[i], v_[(i + 1) % v_.size()]) <= kBoundaryTol) return true;
    }
    return false;
  }

  bool boundary_candidate(const Point& x) const override { return on_boundary_impl(x); }

  void collect_normals(const Point& x, bool flip, PointSet& out) const override {
    for (size_t i = 0; i < v_.size(); ++i) {
      const Point& p = v_[i];
      const Point& q = v_[(i + 1) % v_.size()];
      if (point_segment_distance(x, p, q) > kBoundaryTol) continue;
      const double dx = q[0] - p[0], dy = q[1] - p[1];
      const double len = std::sqrt(dx * dx + dy * dy);
      const double sign = flip ? -1.0 : 1.0;
      // vertices are counter-clockwise, so (dy, -dx) points outward
      out.push_back({sign * dy / len, sign * -dx / len});
    }
  }

  void collect_leaves(std::vector<std::pair<const Geometry*, double>>& out) const override {
    out.emplace_back(this, boundary_measure());
  }

  double boundary_measure() const override {
    double per = 0.0;
    for (size_t i = 0; i < v_.size(); ++i) {
      per += std::sqrt(dist2(v_[i], v_[(i + 1) % v_.size()]));
    }
    return per;
  }

  Point own_boundary_sample(Rng& rng) const override {
    std::uniform_real_distribution<double> unit(0.0, boundary_measure());
    return perimeter_point(unit(rng));
  }

  PointSet own_uniform_boundary(int n) const override {
    PointSet out;
    const double per = boundary_measure();
    for (int i = 0; i < n; ++i) out.push_back(perimeter_point(per * i / n));
    return out;
  }

 private:
  Point perimeter_point(double s) const {
    for (size_t i = 0; i < v_.size(); ++i) {
      const Point& p = v_[i];
      const Point& q = v_[(i + 1) % v_.size()];
      const double len = std::sqrt(dist2(p, q));
      if (s <= len) {
        const double t = len > 0 ? s / len : 0.0;
        return {p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])};
      }
      s -= len;
    }
    return v_[0];
  }

  PointSet v_;
};

// ---- boolean combinations ----

}  // namespace

class CsgGeometry final : public Geometry {
 public:
  enum class OpKind { Union, Difference, Intersection };

  CsgGeometry(OpKind op, GeoPtr l, GeoPtr r) : op_(op), l_(std::move(l)), r_(std::move(r)) {
    if (!l_ || !r_) throw StructuralError("csg: null child");
    if (l_->dim() != r_->dim()) throw StructuralError("csg: children differ in dimension");
  }

  int dim() const override { return l_->dim(); }

  BoundingBox bounding_box() const override {
    const BoundingBox a = l_->bounding_box();
    if (op_ == OpKind::Difference) return a;
    const BoundingBox b = r_->bounding_box();
    BoundingBox out = a;
    for (size_t i = 0; i < a.lo.size(); ++i) {
      if (op_ == OpKind::Union) {
        out.lo[i] = std::min(a.lo[i], b.lo[i]);
        out.hi[i] = std::max(a.hi[i], b.hi[i]);
      } else {
        out.lo[i] = std::max(a.lo[i], b.lo[i]);
        out.hi[i] = std::min(a.hi[i], b.hi[i]);
      }
    }
    return out;
  }

 protected:
  bool inside_impl(const Point& x) const override {
    switch (op_) {
      case OpKind::Union: return l_->inside_impl(x) || r_->inside_impl(x);
      case OpKind::Difference: return l_->inside_impl(x) && !r_->inside_impl(x);
      case OpKind::Intersection: return l_->inside_impl(x) && r_->inside_impl(x);
    }
    return false;
  }

  bool boundary_candidate(const Point& x) const override {
    return l_->boundary_candidate(x) || r_->boundary_candidate(x);
  }

  bool on_boundary_impl(const Point& x) const override {
    if (!boundary_candidate(x)) return false;
    // Probe a small ball: boundary points see both the solid and its
    // complement. This also rejects faces erased by the boolean op (for
    // example the subtracted square's edges that coincide with the outer
    // square of an L-shape).
    bool has_in = inside_impl(x);
    bool has_out = false;
    Point y(x.size());
    for (const Point& d : probe_stencil(dim())) {
      for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] + kProbeRadius * d[i];
      (inside_impl(y) ? has_in : has_out) = true;
      if (has_in && has_out) return true;
    }
    return false;
  }

  void collect_normals(const Point& x, bool flip, PointSet& out) const override {
    l_->collect_normals(x, flip, out);
    r_->collect_normals(x, op_ == OpKind::Difference ? !flip : flip, out);
  }

  void collect_leaves(std::vector<std::pair<const Geometry*, double>>& out) const override {
    l_->collect_leaves(out);
    r_->collect_leaves(out);
  }

  double boundary_measure() const override {
    std::vector<std::pair<const Geometry*, double>> leaves;
    collect_leaves(leaves);
    double total = 0.0;
    for (const auto& [leaf, measure] : leaves) total += measure;
    return total;
  }

  Point own_boundary_sample(Rng&) const override {
    throw StructuralError("csg: boundary sampling goes through the leaves");
  }

  PointSet own_uniform_boundary(int) const override {
    throw StructuralError("csg: boundary sampling goes through the leaves");
  }

 private:
  OpKind op_;
  GeoPtr l_, r_;
};

GeoPtr interval(double a, double b) { return std::make_shared<BoxGeometry>(Point{a}, Point{b}); }

GeoPtr rectangle(const Point& lo, const Point& hi) {
  if (lo.size() != 2) throw StructuralError("rectangle: corners must be 2D");
  return std::make_shared<BoxGeometry>(lo, hi);
}

GeoPtr cuboid(const Point& lo, const Point& hi) {
  if (lo.size() != 3) throw StructuralError("cuboid: corners must be 3D");
  return std::make_shared<BoxGeometry>(lo, hi);
}

GeoPtr disk(const Point& center, double radius) {
  if (center.size() != 2) throw StructuralError("disk: center must be 2D");
  return std::make_shared<BallGeometry>(center, radius);
}

GeoPtr sphere(const Point& center, double radius) {
  if (center.size() != 3) throw StructuralError("sphere: center must be 3D");
  return std::make_shared<BallGeometry>(center, radius);
}

GeoPtr triangle(const Point& p1, const Point& p2, const Point& p3) {
  return std::make_shared<PolygonGeometry>(PointSet{p1, p2, p3});
}

GeoPtr polygon(PointSet vertices) {
  return std::make_shared<PolygonGeometry>(std::move(vertices));
}

GeoPtr csg_union(GeoPtr l, GeoPtr r) {
  return std::make_shared<CsgGeometry>(CsgGeometry::OpKind::Union, std::move(l), std::move(r));
}

GeoPtr difference(GeoPtr l, GeoPtr r) {
  return std::make_shared<CsgGeometry>(CsgGeometry::OpKind::Difference, std::move(l), std::move(r));
}

GeoPtr intersection(GeoPtr l, GeoPtr r) {
  return std::make_shared<CsgGeometry>(CsgGeometry::OpKind::Intersection, std::move(l),
                                       std::move(r));
}

// ---- space-time product ----

Point SpaceTimeDomain::split_space(const Point& xt) const {
  if (static_cast<int>(xt.size()) != dim()) {
    throw StructuralError("space-time: point dimension mismatch");
  }
  return Point(xt.begin(), xt.end() - 1);
}

bool SpaceTimeDomain::inside(const Point& xt) const {
  const double t = xt.back();
  return t >= t0 && t <= t1 && space->inside(split_space(xt));
}

bool SpaceTimeDomain::on_spatial_boundary(const Point& xt) const {
  const double t = xt.back();
  if (t < t0 - kBoundaryTol || t > t1 + kBoundaryTol) return false;
  return space->on_boundary(split_space(xt));
}

bool SpaceTimeDomain::at_initial_time(const Point& xt) const {
  return std::abs(xt.back() - t0) <= kBoundaryTol && space->inside(split_space(xt));
}

PointSet SpaceTimeDomain::random_points(int n, Rng& rng) const {
  PointSet out = space->random_points(n, rng);
  std::uniform_real_distribution<double> time(t0, t1);
  for (Point& p : out) p.push_back(time(rng));
  return out;
}

PointSet SpaceTimeDomain::random_boundary_points(int n, Rng& rng) const {
  PointSet out = space->random_boundary_points(n, rng);
  std::uniform_real_distribution<double> time(t0, t1);
  for (Point& p : out) p.push_back(time(rng));
  return out;
}

PointSet SpaceTimeDomain::random_initial_points(int n, Rng& rng) const {
  PointSet out = space->random_points(n, rng);
  for (Point& p : out) p.push_back(t0);
  return out;
}

}  // namespace pinn::geom
