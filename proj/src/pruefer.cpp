#include "slcrit/pruefer.hpp"

#include <cmath>
#include <string>

namespace slcrit {

PotentialSamples potential(const Nonlinearity& f, const GridFunction& u) {
  return potential(f, u.values(), std::numbers::pi / u.n());
}

PotentialSamples potential(const Nonlinearity& f, const Vector& x, double h) {
  const int n = static_cast<int>(x.size()) - 1;
  PotentialSamples q;
  q.h = h;
  q.node.resize(n + 1);
  q.node2.resize(n + 1);
  q.mid.resize(n);
  q.mid2.resize(n);
  for (int i = 0; i <= n; ++i) {
    const Jet j = f.eval_jet2(x[i]);
    q.node[i] = j.d1;
    q.node2[i] = j.d2;
  }
  for (int i = 0; i < n; ++i) {
    const Jet j = f.eval_jet2(0.5 * (x[i] + x[i + 1]));
    q.mid[i] = j.d1;
    q.mid2[i] = j.d2;
  }
  return q;
}

namespace {

// One RK4 step of the angle equation over cell c (between nodes c and c+1).
// Forward goes c -> c+1 with step h, backward c+1 -> c with step -h.
inline double angle_step(const PotentialSamples& q, int m, int c, double w, bool forward) {
  const double h = forward ? q.h : -q.h;
  const double qa = forward ? q.node[c] : q.node[c + 1];
  const double qb = forward ? q.node[c + 1] : q.node[c];
  const double qm = q.mid[c];
  const double k1 = angle_rhs(m, qa, w);
  const double k2 = angle_rhs(m, qm, w + 0.5 * h * k1);
  const double k3 = angle_rhs(m, qm, w + 0.5 * h * k2);
  const double k4 = angle_rhs(m, qb, w + h * k3);
  return w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_node(const PotentialSamples& q, int i) {
  if (i < 0 || i > q.cells()) throw GridError("node index " + std::to_string(i) + " outside the grid");
}

}  // namespace

Vector integrate_angle(const PotentialSamples& q, int m, int from, int to, double theta) {
  if (m < 1) throw std::invalid_argument("m must be positive");
  check_node(q, from);
  check_node(q, to);
  const int len = std::abs(to - from) + 1;
  Vector w(len);
  w[0] = theta;
  if (to >= from) {
    for (int k = 1; k < len; ++k) w[k] = angle_step(q, m, from + k - 1, w[k - 1], true);
  } else {
    for (int k = 1; k < len; ++k) w[k] = angle_step(q, m, from - k, w[k - 1], false);
  }
  return w;
}

double angle_at(const PotentialSamples& q, int m, int from, int to, double theta) {
  if (m < 1) throw std::invalid_argument("m must be positive");
  check_node(q, from);
  check_node(q, to);
  double w = theta;
  if (to >= from) {
    for (int c = from; c < to; ++c) w = angle_step(q, m, c, w, true);
  } else {
    for (int c = from - 1; c >= to; --c) w = angle_step(q, m, c, w, false);
  }
  return w;
}

ShootingSolution shoot(const PotentialSamples& q) {
  const int n = q.cells();
  const double h = q.h;
  ShootingSolution s{Vector(n + 1), Vector(n + 1)};
  double v = 0.0, p = 1.0;
  s.v[0] = v;
  s.vp[0] = p;
  for (int c = 0; c < n; ++c) {
    const double qa = q.node[c], qm = q.mid[c], qb = q.node[c + 1];
    const double k1v = p, k1p = qa * v;
    const double k2v = p + 0.5 * h * k1p, k2p = qm * (v + 0.5 * h * k1v);
    const double k3v = p + 0.5 * h * k2p, k3p = qm * (v + 0.5 * h * k2v);
    const double k4v = p + h * k3p, k4p = qb * (v + h * k3v);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    if (!std::isfinite(v) || !std::isfinite(p) || std::abs(v) > 1e300 || std::abs(p) > 1e300) {
      const double t = (c + 1) * h;
      throw ShootingOverflow(t, "shooting solution overflows at t = " + std::to_string(t) +
                                    "; potential too large for the grid");
    }
    s.v[c + 1] = v;
    s.vp[c + 1] = p;
  }
  return s;
}

ShootingSolution shoot(const Nonlinearity& f, const GridFunction& u) { return shoot(potential(f, u)); }

AngleTrajectory omega_m(const PotentialSamples& q, int m) {
  AngleTrajectory traj;
  traj.m = m;
  traj.n = q.cells();
  traj.first = 0;
  traj.omega = integrate_angle(q, m, 0, traj.n, 0.0);
  return traj;
}

AngleTrajectory omega_m(const Nonlinearity& f, const GridFunction& u, int m) { return omega_m(potential(f, u), m); }

AngleTrajectory omega_local(const Nonlinearity& f, const GridFunction& u, int m, double t0, double theta0,
                            Direction direction) {
  const UniformGrid grid = u.grid();
  if (!grid.is_node(t0, 1e-9 * grid.spacing()))
    throw GridError("anchor t0 = " + std::to_string(t0) + " is not a grid node");
  const int i0 = grid.nearest(t0);
  const PotentialSamples q = potential(f, u);
  AngleTrajectory traj;
  traj.m = m;
  traj.n = u.n();
  traj.t0 = grid.t(i0);
  traj.theta0 = theta0;
  if (direction == Direction::Forward) {
    traj.first = i0;
    traj.omega = integrate_angle(q, m, i0, u.n(), theta0);
  } else {
    traj.first = 0;
    traj.omega = integrate_angle(q, m, i0, 0, theta0).reverse();
  }
  return traj;
}

double d_omega(const Nonlinearity& f, const GridFunction& u, int m, const GridFunction& phi, double t) {
  if (phi.n() != u.n()) throw GridError("d_omega: grid mismatch between u and phi");
  if (m < 1) throw std::invalid_argument("m must be positive");
  const UniformGrid grid = u.grid();
  if (!grid.is_node(t, 1e-9 * grid.spacing())) throw GridError("d_omega: t is not a grid node");
  const int k = grid.nearest(t);
  const PotentialSamples q = potential(f, u);
  const Vector& ph = phi.values();
  const double h = q.h;

  double v = 0.0, p = 1.0, I = 0.0;
  for (int c = 0; c < k; ++c) {
    const double qa = q.node[c], qm = q.mid[c], qb = q.node[c + 1];
    const double ga = q.node2[c] * ph[c];
    const double gm = q.mid2[c] * 0.5 * (ph[c] + ph[c + 1]);
    const double gb = q.node2[c + 1] * ph[c + 1];
    const double k1v = p, k1p = qa * v, v1 = v;
    const double v2 = v + 0.5 * h * k1v, k2v = p + 0.5 * h * k1p, k2p = qm * v2;
    const double v3 = v + 0.5 * h * k2v, k3v = p + 0.5 * h * k2p, k3p = qm * v3;
    const double v4 = v + h * k3v, k4v = p + h * k3p, k4p = qb * v4;
    I += h / 6.0 * (ga * v1 * v1 + 2.0 * gm * v2 * v2 + 2.0 * gm * v3 * v3 + gb * v4 * v4);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  }
  if (I == 0.0) return 0.0;
  return -m * I / (double(m) * m * v * v + p * p);
}

int zero_count(const AngleTrajectory& traj) {
  return static_cast<int>(std::floor(traj.end() / std::numbers::pi + 1e-9));
}

}  // namespace slcrit
