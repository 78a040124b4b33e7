#pragma once

#include <cmath>
#include <stdexcept>

#include "slcrit/funcspace.hpp"
#include "slcrit/nonlinearity.hpp"

namespace slcrit {

/// Blow-up of the shooting solution; `abscissa()` is where it was detected.
class ShootingOverflow : public std::overflow_error {
 public:
  ShootingOverflow(double t, const std::string& what) : std::overflow_error(what), t_(t) {}
  double abscissa() const noexcept { return t_; }

 private:
  double t_;
};

/// f'(u(t)) sampled at nodes and cell midpoints of a grid, with u linearly
/// interpolated between nodes. Also carries f''(u(t)) at the same points.
struct PotentialSamples {
  double h = 0.0;
  Vector node;   // f'(u_i), i = 0..n
  Vector mid;    // f'((u_i + u_{i+1})/2), i = 0..n-1
  Vector node2;  // f''(u_i)
  Vector mid2;   // f''((u_i + u_{i+1})/2)

  int cells() const noexcept { return static_cast<int>(mid.size()); }
};

PotentialSamples potential(const Nonlinearity& f, const GridFunction& u);
/// Same for raw nodal values with spacing h (e.g. a window of a grid).
PotentialSamples potential(const Nonlinearity& f, const Vector& values, double h);

/// Right-hand side of the m-argument equation
///   w' = m - (m^2 + q)/m * sin^2(w).
inline double angle_rhs(int m, double q, double w) noexcept {
  const double s = std::sin(w);
  return m - (double(m) * m + q) / m * s * s;
}

/// Solution of -v'' + f'(u) v = 0 with v(0) = 0, v'(0) = 1.
struct ShootingSolution {
  Vector v;
  Vector vp;
};

ShootingSolution shoot(const Nonlinearity& f, const GridFunction& u);
ShootingSolution shoot(const PotentialSamples& q);

/// An m-argument sampled on the nodes first..first+omega.size()-1, anchored
/// at (t0, theta0).
struct AngleTrajectory {
  int m = 1;
  int n = 0;
  int first = 0;
  double t0 = 0.0;
  double theta0 = 0.0;
  Vector omega;

  int last() const noexcept { return first + static_cast<int>(omega.size()) - 1; }
  double at_node(int i) const { return omega[i - first]; }
  double end() const { return omega[omega.size() - 1]; }
};

enum class Direction { Forward, Backward };

/// RK4 integration of the m-argument equation from node `from` with value
/// `theta` to node `to` (either direction). Returns the values at
/// from, ..., to in path order.
Vector integrate_angle(const PotentialSamples& q, int m, int from, int to, double theta);

/// Final value only; avoids storing the path.
double angle_at(const PotentialSamples& q, int m, int from, int to, double theta);

/// Global m-argument with omega_m(0) = 0.
AngleTrajectory omega_m(const Nonlinearity& f, const GridFunction& u, int m);
AngleTrajectory omega_m(const PotentialSamples& q, int m);

/// Local m-argument through (t0, theta0); t0 must be a grid node. Covers
/// [t0, pi] forward or [0, t0] backward.
AngleTrajectory omega_local(const Nonlinearity& f, const GridFunction& u, int m, double t0, double theta0,
                            Direction direction);

/// Directional derivative of u -> omega_m(u, t) along phi at the node t:
///   -m / ((m v)^2 + v'^2) * int_0^t f''(u) phi v^2 ds.
/// The integral is carried by the same RK4 steps as v (Simpson per cell).
double d_omega(const Nonlinearity& f, const GridFunction& u, int m, const GridFunction& phi, double t);

/// floor(omega(pi)/pi + 1e-9) for a global trajectory.
int zero_count(const AngleTrajectory& traj);

}  // namespace slcrit
