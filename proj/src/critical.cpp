#include "slcrit/critical.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace slcrit {

double residual(const Nonlinearity& f, const GridFunction& u, int m) {
  const PotentialSamples q = potential(f, u);
  return angle_at(q, m, 0, u.n(), 0.0) - m * std::numbers::pi;
}

MembershipResult membership(const Nonlinearity& f, const GridFunction& u, int m, const MembershipTolerance& tol) {
  const PotentialSamples q = potential(f, u);
  MembershipResult r;
  r.m = m;
  r.n = u.n();
  r.tol_angle = tol.angle;
  r.residual = angle_at(q, m, 0, u.n(), 0.0) - m * std::numbers::pi;
  const ShootingSolution s = shoot(q);
  r.v_end = s.v[u.n()];
  r.v_scale = s.v.cwiseAbs().maxCoeff();
  r.member = std::abs(r.residual) <= tol.angle && std::abs(r.v_end) <= tol.v * r.v_scale;
  return r;
}

namespace {

struct Bracket {
  double x_pos;  // f'(x) < -m^2: residual of the ramp tends to be positive
  double x_neg;  // f'(x) > -m^2
};

// Scan points nearest to `anchor` on each side of the level -m^2 by margin eps.
std::optional<Bracket> pick_levels(const Nonlinearity& f, int m, const TamenessReport& report, double anchor,
                                   double eps) {
  constexpr int N = 10000;
  const double target = -double(m) * m;
  std::optional<double> best_pos, best_neg;
  for (int i = 0; i < N; ++i) {
    const double x = i == N - 1 ? report.x_hi : report.x_lo + (report.x_hi - report.x_lo) * i / (N - 1);
    const double g = f.eval_jet2(x).d1 - target;
    if (g <= -eps && (!best_pos || std::abs(x - anchor) < std::abs(*best_pos - anchor))) best_pos = x;
    if (g >= eps && (!best_neg || std::abs(x - anchor) < std::abs(*best_neg - anchor))) best_neg = x;
  }
  if (!best_pos || !best_neg) return std::nullopt;
  return Bracket{*best_pos, *best_neg};
}

}  // namespace

GridFunction find_in_Cm(const Nonlinearity& f, int m, const TamenessReport& report, int n, const FindOptions& opt) {
  if (!report.contains(m))
    throw ProjectionError(ProjectionError::Kind::NotInSigma,
                          "m = " + std::to_string(m) + " is not in sigma; C_m is empty (no sign bracket)");
  double anchor;
  try {
    anchor = critical_abscissa(f, m, report);
  } catch (const AnalysisError&) {
    const AbscissaSet* set = report.abscissas_for(m);
    anchor = set && !set->roots.empty() ? set->roots.front().x : 0.0;
  }

  std::ostringstream history;
  const double scale = std::max(1.0, double(m) * m);
  for (double eps : {0.5 * scale, 0.1 * scale, 0.02 * scale, 1e-3 * scale, 1e-5}) {
    const auto levels = pick_levels(f, m, report, anchor, eps);
    if (!levels) continue;
    double delta = opt.delta_start;
    for (int shrink = 0; shrink <= opt.max_shrinks; ++shrink, delta *= 0.5) {
      const GridFunction u_pos = ramp_constant(levels->x_pos, delta, n);
      const GridFunction u_neg = ramp_constant(levels->x_neg, delta, n);
      const double r_pos = residual(f, u_pos, m);
      const double r_neg = residual(f, u_neg, m);
      if (std::abs(r_pos) <= opt.residual_tol) return u_pos;
      if (std::abs(r_neg) <= opt.residual_tol) return u_neg;
      if (!(r_pos > 0.0 && r_neg < 0.0)) {
        if (shrink == opt.max_shrinks)
          history << " eps=" << eps << ": residuals " << r_pos << ", " << r_neg << " at delta=" << delta << ";";
        continue;
      }
      // Bisection in s along segment(u_pos, u_neg, s).
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 200; ++it) {
        const double s = 0.5 * (lo + hi);
        if (s <= lo || s >= hi) break;
        GridFunction u = segment(u_pos, u_neg, s);
        const double r = residual(f, u, m);
        if (std::abs(r) <= opt.residual_tol) return u;
        (r > 0.0 ? lo : hi) = s;
      }
      throw ProjectionError(ProjectionError::Kind::NoBracket,
                            "bisection stalled before reaching the residual tolerance");
    }
  }
  throw ProjectionError(ProjectionError::Kind::NoBracket,
                        "no sign bracket for m = " + std::to_string(m) + " after " +
                            std::to_string(opt.max_shrinks) + " shrinkages:" + history.str());
}

GridFunction corrector_direction(const Nonlinearity& f, const GridFunction& u, double delta) {
  const GridFunction beta = bump_beta(delta, u.n());
  Vector v(u.n() + 1);
  for (int i = 0; i <= u.n(); ++i) v[i] = beta[i] == 0.0 ? 0.0 : -beta[i] * f.eval_jet2(u[i]).d2;
  return GridFunction(u.n(), std::move(v), true);
}

Projection project(const Nonlinearity& f, const GridFunction& u, int m, const std::optional<GridFunction>& direction,
                   const ProjectOptions& opt) {
  const GridFunction phi = direction ? *direction : corrector_direction(f, u, opt.default_delta);
  if (phi.n() != u.n()) throw GridError("project: direction on a different grid");

  auto moved = [&](double tau) {
    if (tau == 0.0) return u;
    Vector v = u.values() + tau * phi.values();
    if (u.dirichlet()) v[0] = v[v.size() - 1] = 0.0;
    return GridFunction(u.n(), std::move(v), u.dirichlet());
  };

  double tau = 0.0;
  double r = residual(f, u, m);
  if (std::abs(r) <= opt.residual_tol) return {u, 0.0, 0};
  if (!(std::abs(r) < opt.basin)) {
    std::ostringstream msg;
    msg << "residual " << r << " outside the corrector basin (|residual| < " << opt.basin << ")";
    throw ProjectionError(ProjectionError::Kind::Basin, msg.str());
  }

  // pos: a tau with residual > 0, neg: a tau with residual < 0.
  std::optional<double> pos, neg;
  (r > 0 ? pos : neg) = tau;
  bool at_limit = false;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const bool bracketed = pos && neg;
    double cand;
    const double slope = d_omega(f, moved(tau), m, phi, std::numbers::pi);
    if (std::abs(slope) < opt.min_slope) {
      if (!bracketed) {
        std::ostringstream msg;
        msg << "directional derivative " << slope << " vanishes (|d omega| < " << opt.min_slope << ")";
        throw ProjectionError(ProjectionError::Kind::ZeroDerivative, msg.str());
      }
      cand = 0.5 * (*pos + *neg);
    } else {
      cand = tau - r / slope;
    }
    if (bracketed) {
      const double a = std::min(*pos, *neg), b = std::max(*pos, *neg);
      if (!(cand > a && cand < b)) cand = 0.5 * (a + b);
    } else if (std::abs(cand) > opt.max_tau) {
      if (at_limit) {
        std::ostringstream msg;
        msg << "no sign bracket within |tau| <= " << opt.max_tau << " (residual " << r << " at tau = " << tau << ")";
        throw ProjectionError(ProjectionError::Kind::NoBracket, msg.str());
      }
      cand = std::copysign(opt.max_tau, cand);
      at_limit = true;
    }
    tau = cand;
    r = residual(f, moved(tau), m);
    if (std::abs(r) <= opt.residual_tol) return {moved(tau), tau, it};
    (r > 0 ? pos : neg) = tau;
    if (pos && neg && std::abs(*pos - *neg) <= 1e-16 * std::max(1.0, std::abs(tau))) break;
  }
  std::ostringstream msg;
  msg << "corrector did not converge (residual " << r << ")";
  throw ProjectionError(ProjectionError::Kind::NoBracket, msg.str());
}

}  // namespace slcrit
