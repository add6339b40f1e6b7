#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pinn/problem.hpp"

/// Independent reference solvers for observation data and solution baselines.
/// Nothing here touches the tape, network, or loss machinery; results are
/// produced with classic schemes so they can arbitrate the learned solutions.
namespace pinn::oracle {

struct OdeSystem {
  std::function<std::vector<double>(double, const std::vector<double>&)> rhs;
  std::vector<double> y0;
  double t0 = 0.0;
  double t1 = 1.0;
};

/// Dense-output trajectory from the adaptive integrator: continuous in t over
/// the whole span, built from the accepted steps' interpolation polynomials.
class OdeTrajectory {
 public:
  std::vector<double> at(double t) const;
  double t0() const { return t0_; }
  double t1() const { return t1_; }
  size_t steps() const { return segments_.size(); }

 private:
  friend OdeTrajectory rk45(const OdeSystem&, double, double);
  struct Segment {
    double t = 0.0;
    double h = 0.0;
    // Interpolation coefficients per component.
    std::vector<std::array<double, 5>> rcont;
  };
  double t0_ = 0.0;
  double t1_ = 0.0;
  std::vector<Segment> segments_;
};

/// Adaptive Dormand-Prince 5(4) integration with dense output.
OdeTrajectory rk45(const OdeSystem& sys, double rtol = 1e-6, double atol = 1e-9);

/// Fixed-step variant (fifth-order updates, no error control); returns the
/// state at t1. Used for order-of-convergence checks.
std::vector<double> rk45_fixed(const OdeSystem& sys, long n_steps);

/// x' = rho (y - x), y' = x (sigma - z) - y, z' = x y - beta z.
OdeSystem lorenz_system(double rho, double sigma, double beta, std::vector<double> y0, double t0,
                        double t1);

/// Space-time field on a uniform grid, stored as snapshots.
struct Grid1dSolution {
  std::vector<double> x;
  std::vector<double> t;
  std::vector<std::vector<double>> fields;  // fields[c][it * nx + ix]

  size_t nx() const { return x.size(); }
  size_t nt() const { return t.size(); }
  double value(size_t c, size_t it, size_t ix) const;
  /// Bilinear interpolation in (x, t).
  double sample(size_t c, double xq, double tq) const;
};

/// u_t + (u^2/2)_x = nu u_xx on [-1,1] x [0,1], u(x,0) = -sin(pi x),
/// u(+-1,t) = 0. Central differences in space, forward Euler in time; the
/// requested step count is rounded up so snapshots stay equispaced.
Grid1dSolution fd_burgers_1d(double nu, size_t nx, size_t nt, size_t n_snapshots = 201);

/// A_t = d A_xx - kf A B^2 and B_t = d B_xx - 2 kf A B^2 on [0,1] x [0,10]
/// with A(x,0) = B(x,0) = e^{-20x}, A(0,t) = B(0,t) = 1, A(1,t) = B(1,t) = 0.
Grid1dSolution fd_diffusion_reaction(double d, double kf, size_t nx, size_t nt,
                                     size_t n_snapshots = 201);

/// Scalar field on a uniform n x n grid over [-1,1]^2 with a node mask.
struct Grid2dSolution {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> u;         // u[j * nx + i]
  std::vector<uint8_t> inside;   // 1 where the node lies in the domain closure

  size_t nx() const { return x.size(); }
  size_t ny() const { return y.size(); }
  double value(size_t i, size_t j) const { return u[j * nx() + i]; }
  double sample(double xq, double yq) const;
};

/// -Laplace(u) = 1 on [-1,1]^2 minus [0,1]^2 with u = 0 on the boundary.
/// Five-point stencil on the masked grid, solved matrix-free with conjugate
/// gradients.
Grid2dSolution fd_poisson_lshape(size_t n);

/// State samples at n equispaced times across the trajectory span; optional
/// additive Gaussian noise.
prob::ObservationSet trajectory_observations(const OdeTrajectory& traj, int n_times,
                                             double noise_sigma = 0.0,
                                             unsigned long long seed = 0);

/// Uniform random subsample of the stored space-time lattice, observing the
/// first two fields; optional additive Gaussian noise.
prob::ObservationSet grid_observations(const Grid1dSolution& sol, size_t n_points,
                                       double noise_sigma = 0.0, unsigned long long seed = 0);

/// CSV round trip: coordinate columns then one column per observed component.
void write_observations_csv(const std::string& path, const prob::ObservationSet& obs);
prob::ObservationSet read_observations_csv(const std::string& path, int dim,
                                           std::vector<int> components = {});

}  // namespace pinn::oracle
