#include "pinn/oracles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pinn/errors.hpp"

namespace pinn::oracle {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr double kB[7] = {35.0 / 384,      0.0,        500.0 / 1113, 125.0 / 192,
                          -2187.0 / 6784, 11.0 / 84,  0.0};
// Difference between the fifth- and fourth-order weights.
constexpr double kE[7] = {71.0 / 57600,       0.0,         -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525,  -1.0 / 40};
// Dense-output weights.
constexpr double kD[7] = {-12715105075.0 / 11282082432.0,
                          0.0,
                          87487479700.0 / 32700410799.0,
                          -10690763975.0 / 1880347072.0,
                          701980252875.0 / 199316789632.0,
                          -1453857185.0 / 822651844.0,
                          69997945.0 / 29380423.0};

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

struct StepResult {
  std::vector<double> y1;
  std::vector<double> k7;
  double err = 0.0;
  std::vector<std::array<double, 5>> rcont;
};

/// One embedded step from (t, y) with derivative k1 already evaluated.
StepResult dp_step(const OdeSystem& sys, double t, const std::vector<double>& y,
                   const std::vector<double>& k1, double h, double rtol, double atol,
                   bool with_dense) {
  const size_t n = y.size();
  std::array<std::vector<double>, 7> k;
  k[0] = k1;
  std::vector<double> stage(n);
  for (int s = 1; s < 7; ++s) {
    for (size_t i = 0; i < n; ++i) {
      double acc = y[i];
      for (int j = 0; j < s; ++j) acc += h * kA[s][j] * k[j][i];
      stage[i] = acc;
    }
    k[s] = sys.rhs(t + kC[s] * h, stage);
    if (k[s].size() != n) throw StructuralError("ode right-hand side changed its dimension");
  }
  StepResult out;
  out.y1.resize(n);
  double err2 = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double acc = y[i];
    double e = 0.0;
    for (int s = 0; s < 7; ++s) {
      acc += h * kB[s] * k[s][i];
      e += h * kE[s] * k[s][i];
    }
    out.y1[i] = acc;
    const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(acc));
    err2 += (e / sc) * (e / sc);
  }
  out.err = std::sqrt(err2 / static_cast<double>(n));
  if (with_dense) {
    out.rcont.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const double dy = out.y1[i] - y[i];
      const double bspl = h * k[0][i] - dy;
      double dsum = 0.0;
      for (int s = 0; s < 7; ++s) dsum += kD[s] * k[s][i];
      out.rcont[i] = {y[i], dy, bspl, dy - h * k[6][i] - bspl, h * dsum};
    }
  }
  out.k7 = std::move(k[6]);
  return out;
}

}  // namespace

std::vector<double> OdeTrajectory::at(double t) const {
  if (segments_.empty()) throw StructuralError("trajectory holds no steps");
  const double lo = std::min(t0_, t1_);
  const double hi = std::max(t0_, t1_);
  if (t < lo - 1e-12 * (1.0 + std::abs(lo)) || t > hi + 1e-12 * (1.0 + std::abs(hi)))
    throw DomainError("trajectory queried outside its time span");
  t = std::clamp(t, lo, hi);
  size_t a = 0;
  size_t b = segments_.size() - 1;
  while (a < b) {
    const size_t mid = (a + b) / 2;
    if (t <= segments_[mid].t + segments_[mid].h) {
      b = mid;
    } else {
      a = mid + 1;
    }
  }
  const Segment& seg = segments_[a];
  const double theta = std::clamp((t - seg.t) / seg.h, 0.0, 1.0);
  std::vector<double> out(seg.rcont.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const auto& r = seg.rcont[i];
    out[i] = r[0] + theta * (r[1] + (1.0 - theta) * (r[2] + theta * (r[3] + (1.0 - theta) * r[4])));
  }
  return out;
}

OdeTrajectory rk45(const OdeSystem& sys, double rtol, double atol) {
  if (!sys.rhs) throw StructuralError("ode system needs a right-hand side");
  if (sys.y0.empty()) throw StructuralError("ode system needs a nonempty initial state");
  if (!(sys.t1 > sys.t0)) throw StructuralError("ode span must run forward in time");
  if (!(rtol > 0.0) || !(atol > 0.0))
    throw StructuralError("integration tolerances must be positive");

  OdeTrajectory traj;
  traj.t0_ = sys.t0;
  traj.t1_ = sys.t1;

  double t = sys.t0;
  std::vector<double> y = sys.y0;
  std::vector<double> k1 = sys.rhs(t, y);
  if (k1.size() != y.size()) throw StructuralError("ode right-hand side changed its dimension");
  for (double v : k1) {
    if (!std::isfinite(v))
      throw NumericError("ode right-hand side is not finite at the initial state");
  }

  const double span = sys.t1 - sys.t0;
  double h = span / 100.0;
  bool just_rejected = false;
  long evals = 0;
  const long max_evals = 20000000;
  while (t < sys.t1) {
    h = std::min(h, sys.t1 - t);
    if (h < 1e-14 * std::max(1.0, std::abs(t)))
      throw NumericError("step size underflow at t = " + fmt_double(t) +
                         "; the system appears too stiff for this integrator");
    StepResult step = dp_step(sys, t, y, k1, h, rtol, atol, true);
    evals += 6;
    if (evals > max_evals)
      throw NumericError("integration exceeded its evaluation budget; tolerances too tight "
                         "or the system too stiff");
    const bool bad = !std::isfinite(step.err);
    if (!bad && step.err <= 1.0) {
      OdeTrajectory::Segment seg;
      seg.t = t;
      seg.h = h;
      seg.rcont = std::move(step.rcont);
      traj.segments_.push_back(std::move(seg));
      t += h;
      y = std::move(step.y1);
      k1 = std::move(step.k7);
      const double fac = std::clamp(0.9 * std::pow(step.err, -0.2), 0.2, 5.0);
      h *= just_rejected ? std::min(fac, 1.0) : fac;
      just_rejected = false;
    } else {
      const double fac =
          bad ? 0.2 : std::clamp(0.9 * std::pow(step.err, -0.2), 0.2, 1.0);
      h *= std::min(fac, 0.9);
      just_rejected = true;
    }
  }
  return traj;
}

std::vector<double> rk45_fixed(const OdeSystem& sys, long n_steps) {
  if (n_steps < 1) throw StructuralError("fixed-step integration needs at least one step");
  const double h = (sys.t1 - sys.t0) / static_cast<double>(n_steps);
  double t = sys.t0;
  std::vector<double> y = sys.y0;
  std::vector<double> k1 = sys.rhs(t, y);
  for (long s = 0; s < n_steps; ++s) {
    StepResult step = dp_step(sys, t, y, k1, h, 1.0, 1.0, false);
    t = sys.t0 + static_cast<double>(s + 1) * h;
    y = std::move(step.y1);
    k1 = std::move(step.k7);
  }
  return y;
}

OdeSystem lorenz_system(double rho, double sigma, double beta, std::vector<double> y0, double t0,
                        double t1) {
  OdeSystem sys;
  sys.rhs = [rho, sigma, beta](double, const std::vector<double>& s) {
    return std::vector<double>{rho * (s[1] - s[0]), s[0] * (sigma - s[2]) - s[1],
                               s[0] * s[1] - beta * s[2]};
  };
  sys.y0 = std::move(y0);
  sys.t0 = t0;
  sys.t1 = t1;
  return sys;
}

double Grid1dSolution::value(size_t c, size_t it, size_t ix) const {
  return fields[c][it * nx() + ix];
}

double Grid1dSolution::sample(size_t c, double xq, double tq) const {
  if (c >= fields.size()) throw StructuralError("grid sample: no such field");
  const double x0 = x.front();
  const double dx = x[1] - x[0];
  const double t0 = t.front();
  const double dt = t.size() > 1 ? t[1] - t[0] : 1.0;
  double fx = (xq - x0) / dx;
  double ft = (tq - t0) / dt;
  if (fx < -1e-9 || fx > static_cast<double>(nx() - 1) + 1e-9 || ft < -1e-9 ||
      ft > static_cast<double>(nt() - 1) + 1e-9)
    throw DomainError("grid sample outside the stored domain");
  fx = std::clamp(fx, 0.0, static_cast<double>(nx() - 1));
  ft = std::clamp(ft, 0.0, static_cast<double>(nt() - 1));
  const size_t i0 = std::min(static_cast<size_t>(fx), nx() - 2);
  const size_t j0 = std::min(static_cast<size_t>(ft), nt() - 2);
  const double ax = fx - static_cast<double>(i0);
  const double at = ft - static_cast<double>(j0);
  const double v00 = value(c, j0, i0);
  const double v01 = value(c, j0, i0 + 1);
  const double v10 = value(c, j0 + 1, i0);
  const double v11 = value(c, j0 + 1, i0 + 1);
  return (1.0 - at) * ((1.0 - ax) * v00 + ax * v01) + at * ((1.0 - ax) * v10 + ax * v11);
}

namespace {

size_t snapshot_stride(size_t& nt, size_t n_snapshots) {
  if (n_snapshots < 2) throw StructuralError("grid solver needs at least two snapshots");
  const size_t pieces = n_snapshots - 1;
  const size_t stride = (nt + pieces - 1) / pieces;
  nt = stride * pieces;
  return stride;
}

void check_blowup(const std::vector<double>& u, double bound, const char* what) {
  for (double v : u) {
    if (!std::isfinite(v) || std::abs(v) > bound)
      throw NumericError(std::string(what) +
                         " solution blew up; refine the grid or shorten the time step");
  }
}

}  // namespace

Grid1dSolution fd_burgers_1d(double nu, size_t nx, size_t nt, size_t n_snapshots) {
  if (!(nu > 0.0)) throw StructuralError("viscosity must be positive");
  if (nx < 3) throw StructuralError("burgers grid needs at least three nodes");
  if (nt < 1) throw StructuralError("burgers grid needs at least one time step");
  const size_t stride = snapshot_stride(nt, n_snapshots);
  const double dx = 2.0 / static_cast<double>(nx - 1);
  const double dt = 1.0 / static_cast<double>(nt);
  // Forward Euler with central differences: diffusive limit plus an advective
  // bound with the initial amplitude as the velocity scale.
  if (dt > 0.5 * dx * dx / nu || dt > 0.5 * dx)
    throw StructuralError("time step too large for stability: increase nt or coarsen x");

  const double pi = std::acos(-1.0);
  Grid1dSolution sol;
  sol.x.resize(nx);
  for (size_t i = 0; i < nx; ++i) sol.x[i] = -1.0 + static_cast<double>(i) * dx;
  std::vector<double> u(nx);
  for (size_t i = 0; i < nx; ++i) u[i] = -std::sin(pi * sol.x[i]);
  u.front() = 0.0;
  u.back() = 0.0;

  sol.fields.assign(1, {});
  sol.fields[0].reserve(n_snapshots * nx);
  auto snapshot = [&](double time) {
    sol.t.push_back(time);
    sol.fields[0].insert(sol.fields[0].end(), u.begin(), u.end());
  };
  snapshot(0.0);

  std::vector<double> un(nx, 0.0);
  for (size_t step = 1; step <= nt; ++step) {
    for (size_t i = 1; i + 1 < nx; ++i) {
      const double adv = (u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) / (4.0 * dx);
      const double diff = nu * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
      un[i] = u[i] + dt * (diff - adv);
    }
    un.front() = 0.0;
    un.back() = 0.0;
    u.swap(un);
    if (step % stride == 0) {
      check_blowup(u, 5.0, "burgers");
      snapshot(static_cast<double>(step) * dt);
    }
  }
  return sol;
}

Grid1dSolution fd_diffusion_reaction(double d, double kf, size_t nx, size_t nt,
                                     size_t n_snapshots) {
  if (d < 0.0 || kf < 0.0) throw StructuralError("diffusion and reaction rates must be non-negative");
  if (nx < 3) throw StructuralError("diffusion-reaction grid needs at least three nodes");
  if (nt < 1) throw StructuralError("diffusion-reaction grid needs at least one time step");
  const size_t stride = snapshot_stride(nt, n_snapshots);
  const double dx = 1.0 / static_cast<double>(nx - 1);
  const double dt = 10.0 / static_cast<double>(nt);
  const double r = d * dt / (dx * dx);
  // The positivity bound: concentrations stay in [0,1] when the diagonal
  // coefficient 1 - 2r - dt kf stays positive.
  if (2.0 * r + dt * kf > 0.95)
    throw StructuralError("time step too large for stability: increase nt or coarsen x");

  Grid1dSolution sol;
  sol.x.resize(nx);
  for (size_t i = 0; i < nx; ++i) sol.x[i] = static_cast<double>(i) * dx;
  std::vector<double> a(nx);
  std::vector<double> b(nx);
  for (size_t i = 0; i < nx; ++i) {
    a[i] = std::exp(-20.0 * sol.x[i]);
    b[i] = a[i];
  }
  a.front() = 1.0;
  b.front() = 1.0;
  a.back() = 0.0;
  b.back() = 0.0;

  sol.fields.assign(2, {});
  auto snapshot = [&](double time) {
    sol.t.push_back(time);
    sol.fields[0].insert(sol.fields[0].end(), a.begin(), a.end());
    sol.fields[1].insert(sol.fields[1].end(), b.begin(), b.end());
  };
  snapshot(0.0);

  std::vector<double> an(nx, 0.0);
  std::vector<double> bn(nx, 0.0);
  for (size_t step = 1; step <= nt; ++step) {
    for (size_t i = 1; i + 1 < nx; ++i) {
      const double react = kf * a[i] * b[i] * b[i];
      an[i] = a[i] + dt * (d * (a[i + 1] - 2.0 * a[i] + a[i - 1]) / (dx * dx) - react);
      bn[i] = b[i] + dt * (d * (b[i + 1] - 2.0 * b[i] + b[i - 1]) / (dx * dx) - 2.0 * react);
    }
    an.front() = 1.0;
    bn.front() = 1.0;
    an.back() = 0.0;
    bn.back() = 0.0;
    a.swap(an);
    b.swap(bn);
    if (step % stride == 0) {
      check_blowup(a, 10.0, "diffusion-reaction");
      check_blowup(b, 10.0, "diffusion-reaction");
      snapshot(static_cast<double>(step) * dt);
    }
  }
  return sol;
}

double Grid2dSolution::sample(double xq, double yq) const {
  const double dx = x[1] - x[0];
  const double dy = y[1] - y[0];
  double fx = (xq - x.front()) / dx;
  double fy = (yq - y.front()) / dy;
  if (fx < -1e-9 || fx > static_cast<double>(nx() - 1) + 1e-9 || fy < -1e-9 ||
      fy > static_cast<double>(ny() - 1) + 1e-9)
    throw DomainError("grid sample outside the stored domain");
  fx = std::clamp(fx, 0.0, static_cast<double>(nx() - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(ny() - 1));
  const size_t i0 = std::min(static_cast<size_t>(fx), nx() - 2);
  const size_t j0 = std::min(static_cast<size_t>(fy), ny() - 2);
  const double ax = fx - static_cast<double>(i0);
  const double ay = fy - static_cast<double>(j0);
  return (1.0 - ay) * ((1.0 - ax) * value(i0, j0) + ax * value(i0 + 1, j0)) +
         ay * ((1.0 - ax) * value(i0, j0 + 1) + ax * value(i0 + 1, j0 + 1));
}

Grid2dSolution fd_poisson_lshape(size_t n) {
  if (n < 5) throw StructuralError("poisson grid needs at least five nodes per side");
  const double h = 2.0 / static_cast<double>(n - 1);
  Grid2dSolution sol;
  sol.x.resize(n);
  sol.y.resize(n);
  for (size_t i = 0; i < n; ++i) {
    sol.x[i] = -1.0 + static_cast<double>(i) * h;
    sol.y[i] = sol.x[i];
  }
  sol.u.assign(n * n, 0.0);
  sol.inside.assign(n * n, 0);

  // Unknowns are nodes strictly inside the L shape: the full square minus the
  // closed upper-right quadrant.
  std::vector<size_t> unknown;  // flat indices
  std::vector<long> slot(n * n, -1);
  for (size_t j = 0; j < n; ++j) {
    for (size_t i = 0; i < n; ++i) {
      const double xv = sol.x[i];
      const double yv = sol.y[j];
      const bool in_closure = !(xv > 0.5 * h && yv > 0.5 * h);
      if (in_closure) sol.inside[j * n + i] = 1;
      const bool interior = xv > -1.0 + 0.5 * h && xv < 1.0 - 0.5 * h && yv > -1.0 + 0.5 * h &&
                            yv < 1.0 - 0.5 * h && (xv < -0.5 * h || yv < -0.5 * h);
      if (interior) {
        slot[j * n + i] = static_cast<long>(unknown.size());
        unknown.push_back(j * n + i);
      }
    }
  }

  const size_t m = unknown.size();
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (size_t k = 0; k < m; ++k) {
      const size_t flat = unknown[k];
      const size_t i = flat % n;
      const size_t j = flat / n;
      double acc = 4.0 * v[k];
      const long left = slot[flat - 1];
      const long right = slot[flat + 1];
      const long down = slot[flat - n];
      const long up = slot[flat + n];
      if (left >= 0) acc -= v[static_cast<size_t>(left)];
      if (right >= 0) acc -= v[static_cast<size_t>(right)];
      if (down >= 0) acc -= v[static_cast<size_t>(down)];
      if (up >= 0) acc -= v[static_cast<size_t>(up)];
      (void)i;
      (void)j;
      out[k] = acc / (h * h);
    }
  };

  // Conjugate gradients on the symmetric positive definite five-point system.
  std::vector<double> uvec(m, 0.0);
  std::vector<double> r(m, 1.0);  // right-hand side is 1 everywhere
  std::vector<double> p = r;
  std::vector<double> ap(m, 0.0);
  double rr = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
  const double stop = 1e-24 * rr;
  const size_t max_iters = 20 * n + 1000;
  for (size_t it = 0; it < max_iters && rr > stop; ++it) {
    apply(p, ap);
    const double pap = std::inner_product(p.begin(), p.end(), ap.begin(), 0.0);
    if (!(pap > 0.0)) throw NumericError("poisson solve lost positive definiteness");
    const double alpha = rr / pap;
    for (size_t k = 0; k < m; ++k) {
      uvec[k] += alpha * p[k];
      r[k] -= alpha * ap[k];
    }
    const double rr_new = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (size_t k = 0; k < m; ++k) p[k] = r[k] + beta * p[k];
  }

  for (size_t k = 0; k < m; ++k) sol.u[unknown[k]] = uvec[k];
  return sol;
}

prob::ObservationSet trajectory_observations(const OdeTrajectory& traj, int n_times,
                                             double noise_sigma, unsigned long long seed) {
  if (n_times < 2) throw StructuralError("trajectory observations need at least two times");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  prob::ObservationSet obs;
  for (int i = 0; i < n_times; ++i) {
    const double t =
        traj.t0() + (traj.t1() - traj.t0()) * static_cast<double>(i) / (n_times - 1);
    std::vector<double> v = traj.at(t);
    if (noise_sigma > 0.0) {
      for (double& vi : v) vi += noise(rng);
    }
    obs.points.push_back({t});
    obs.values.push_back(std::move(v));
  }
  return obs;
}

prob::ObservationSet grid_observations(const Grid1dSolution& sol, size_t n_points,
                                       double noise_sigma, unsigned long long seed) {
  const size_t lattice = sol.nx() * sol.nt();
  if (n_points == 0 || n_points > lattice)
    throw StructuralError("observation count must fit in the stored lattice");
  std::mt19937_64 rng(seed);
  std::vector<size_t> idx(lattice);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t k = 0; k < n_points; ++k) {
    std::uniform_int_distribution<size_t> pick(k, lattice - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  std::normal_distribution<double> noise(0.0, noise_sigma);
  prob::ObservationSet obs;
  for (size_t k = 0; k < n_points; ++k) {
    const size_t it = idx[k] / sol.nx();
    const size_t ix = idx[k] % sol.nx();
    obs.points.push_back({sol.x[ix], sol.t[it]});
    std::vector<double> v;
    for (size_t c = 0; c < sol.fields.size(); ++c) v.push_back(sol.value(c, it, ix));
    if (noise_sigma > 0.0) {
      for (double& vi : v) vi += noise(rng);
    }
    obs.values.push_back(std::move(v));
  }
  return obs;
}

void write_observations_csv(const std::string& path, const prob::ObservationSet& obs) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot open observation file: " + path);
  if (obs.points.empty()) throw StructuralError("refusing to write an empty observation set");
  const size_t dim = obs.points.front().size();
  const size_t n_vals = obs.values.front().size();
  for (size_t a = 0; a < dim; ++a) out << (a ? "," : "") << "x" << a;
  for (size_t k = 0; k < n_vals; ++k) {
    const int comp = k < obs.components.size() ? obs.components[k] : static_cast<int>(k);
    out << ",u" << comp;
  }
  out << "\n";
  for (size_t i = 0; i < obs.points.size(); ++i) {
    for (size_t a = 0; a < dim; ++a) out << (a ? "," : "") << fmt_double(obs.points[i][a]);
    for (double v : obs.values[i]) out << "," << fmt_double(v);
    out << "\n";
  }
}

prob::ObservationSet read_observations_csv(const std::string& path, int dim,
                                           std::vector<int> components) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open observation file: " + path);
  prob::ObservationSet obs;
  obs.components = std::move(components);
  std::string line;
  if (!std::getline(in, line)) throw StructuralError("observation file is empty: " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() <= static_cast<size_t>(dim))
      throw StructuralError("observation row needs coordinates and at least one value");
    obs.points.push_back({cells.begin(), cells.begin() + dim});
    obs.values.push_back({cells.begin() + dim, cells.end()});
  }
  return obs;
}

}  // namespace pinn::oracle
