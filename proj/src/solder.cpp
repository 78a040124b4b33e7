#include "slcrit/solder.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <tuple>

#include "slcrit/pruefer.hpp"

namespace slcrit {

namespace {

constexpr double kFoldF2 = 1e-10;
constexpr double kSingularSin = 1e-6;
constexpr double kSameOffset = 1e-13;

// Jet of f at x, or nullopt outside the domain of f.
std::optional<Jet> try_jet(const Nonlinearity& f, double x) {
  try {
    const Jet j = f.eval_jet2(x);
    if (!std::isfinite(j.d1) || !std::isfinite(j.d2)) return std::nullopt;
    return j;
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

// Walks from x in direction dir while f'' keeps sign `sign` with magnitude
// above kFoldF2. Returns the last good point and whether the walk stopped at
// a fold.
std::pair<double, bool> walk_branch(const Nonlinearity& f, double x, double dir, double sign, double radius) {
  auto good = [&](double y) {
    const auto j = try_jet(f, y);
    if (!j) return 0;  // outside domain
    return (j->d2 * sign > kFoldF2) ? 1 : -1;
  };
  double r_good = 0.0;
  double r = 1e-4;
  while (r_good < radius) {
    r = std::min(r, radius);
    const int g = good(x + dir * r);
    if (g == 1) {
      r_good = r;
      r += std::max(1e-4, 0.01 * r);
      continue;
    }
    double a = r_good, b = r;
    for (int it = 0; it < 80 && b - a > 1e-14 * std::max(1.0, b); ++it) {
      const double c = 0.5 * (a + b);
      (good(x + dir * c) == 1 ? a : b) = c;
    }
    return {x + dir * a, g == -1};
  }
  return {x + dir * r_good, false};
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

Vector finite_difference(const Vector& w, double h) {
  const Eigen::Index len = w.size();
  if (len < 5) throw SolderError(SolderError::Kind::Window, "angle profile needs at least 5 nodes");
  Vector d(len);
  const double c = 1.0 / (12.0 * h);
  d[0] = c * (-25 * w[0] + 48 * w[1] - 36 * w[2] + 16 * w[3] - 3 * w[4]);
  d[1] = c * (-3 * w[0] - 10 * w[1] + 18 * w[2] - 6 * w[3] + w[4]);
  for (Eigen::Index k = 2; k + 2 < len; ++k) d[k] = c * (w[k - 2] - 8 * w[k - 1] + 8 * w[k + 1] - w[k + 2]);
  const Eigen::Index e = len - 1;
  d[e - 1] = -c * (-3 * w[e] - 10 * w[e - 1] + 18 * w[e - 2] - 6 * w[e - 3] + w[e - 4]);
  d[e] = -c * (-25 * w[e] + 48 * w[e - 1] - 36 * w[e - 2] + 16 * w[e - 3] - 3 * w[e - 4]);
  return d;
}

// Root of f'(u) = target inside the branch, seeded at `seed`.
double invert(const Nonlinearity& f, const Branch& br, double target, double seed) {
  const double lo_val = std::min(br.fp_lo, br.fp_hi), hi_val = std::max(br.fp_lo, br.fp_hi);
  if (!(target >= lo_val && target <= hi_val)) {
    const bool below = target < lo_val;
    const bool at_fold = (br.fp_lo < br.fp_hi) == below ? br.fold_lo : br.fold_hi;
    throw SolderError(SolderError::Kind::BranchRange, "f'(u) = " + fmt(target) + " is outside the branch range [" + fmt(lo_val) + ", " +
                                fmt(hi_val) + "]" + (at_fold ? " (fold of f')" : ""));
  }
  // g is increasing in u on an increasing branch; a: g <= 0, b: g >= 0.
  const bool increasing = br.fp_hi > br.fp_lo;
  double a = increasing ? br.lo : br.hi;
  double b = increasing ? br.hi : br.lo;
  double u = std::clamp(seed, br.lo, br.hi);
  for (int it = 0; it < 200; ++it) {
    const Jet j = f.eval_jet2(u);
    const double g = j.d1 - target;
    if (g == 0.0) return u;
    (g < 0.0 ? a : b) = u;
    if (std::abs(g) <= 1e-15 * (1.0 + std::abs(target))) return u;
    double next = u - g / j.d2;
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (!(next > lo && next < hi)) next = 0.5 * (a + b);
    if (next == u || hi - lo <= 4e-16 * std::max(1.0, std::abs(u))) return next;
    u = next;
  }
  return u;
}

}  // namespace

Branch monotone_branch(const Nonlinearity& f, double x, double radius) {
  const auto j = try_jet(f, x);
  if (!j) throw SolderError(SolderError::Kind::BranchRange, "anchor " + fmt(x) + " outside the domain of f");
  if (!(std::abs(j->d2) >= kFoldF2))
    throw SolderError(SolderError::Kind::Fold, "f''(" + fmt(x) + ") = " + fmt(j->d2) + " vanishes at the anchor");
  const double sign = j->d2 > 0 ? 1.0 : -1.0;
  Branch br;
  std::tie(br.lo, br.fold_lo) = walk_branch(f, x, -1.0, sign, radius);
  std::tie(br.hi, br.fold_hi) = walk_branch(f, x, 1.0, sign, radius);
  br.fp_lo = f.eval_jet2(br.lo).d1;
  br.fp_hi = f.eval_jet2(br.hi).d1;
  return br;
}

GridSegment reconstruct_u(const Nonlinearity& f, int m, const AngleProfile& prof, double anchor_x) {
  const Eigen::Index len = prof.w.size();
  if (len < 2) throw SolderError(SolderError::Kind::Window, "angle profile needs at least 2 nodes");
  const double h = std::numbers::pi / prof.n;
  const Vector dw = prof.dw.size() == len ? prof.dw : finite_difference(prof.w, h);
  const double mm = double(m) * m;

  Vector rhs(len);
  std::vector<bool> singular(len, false);
  for (Eigen::Index k = 0; k < len; ++k) {
    const double s = std::sin(prof.w[k]);
    if (std::abs(s) < kSingularSin) {
      if (std::abs(dw[k] - m) >= 1e-6)
        throw SolderError(SolderError::Kind::Singular,
                          "sin w = 0 at node " + std::to_string(prof.first + k) + " with w' - m = " + fmt(dw[k] - m));
      singular[k] = true;
      continue;
    }
    rhs[k] = -mm + m * (m - dw[k]) / (s * s);
  }
  // Near-singular nodes take the value interpolated from their neighbours.
  for (Eigen::Index k = 0; k < len; ++k) {
    if (!singular[k]) continue;
    Eigen::Index l = k, r = k;
    while (l >= 0 && singular[l]) --l;
    while (r < len && singular[r]) ++r;
    if (l < 0 && r >= len) rhs[k] = -mm;
    else if (l < 0) rhs[k] = rhs[r];
    else if (r >= len) rhs[k] = rhs[l];
    else rhs[k] = rhs[l] + (rhs[r] - rhs[l]) * double(k - l) / double(r - l);
  }

  const Branch br = monotone_branch(f, anchor_x);
  GridSegment seg{prof.n, prof.first, Vector(len)};
  double seed = anchor_x;
  for (Eigen::Index k = 0; k < len; ++k) {
    try {
      seed = seg.values[k] = invert(f, br, rhs[k], seed);
    } catch (const SolderError& e) {
      throw SolderError(e.kind(), std::string(e.what()) + " at node " + std::to_string(prof.first + k));
    }
  }
  return seg;
}

double admissible_eps(const Nonlinearity& f, int m, double x_m, int n, int i0, int i1) {
  const double h = std::numbers::pi / n;
  const double t0 = i0 * h, t1 = i1 * h, L = t1 - t0;
  if (!(i0 > 0 && i1 > i0 && i1 < n))
    throw SolderError(SolderError::Kind::Window, "solder window needs 0 < t0 < t1 < pi");
  const Branch br = monotone_branch(f, x_m);
  const double mm = double(m) * m;
  const double room = std::min(std::abs(br.fp_lo + mm), std::abs(br.fp_hi + mm));
  constexpr int kSamples = 4000;
  for (double eps = 0.2; eps >= 1e-9; eps *= 0.5) {
    const double a = t0 - eps / m, b = t1 + eps / m;
    double s_min = 1.0;
    for (int k = 0; k <= kSamples; ++k) s_min = std::min(s_min, std::abs(std::sin(m * (a + (b - a) * k / kSamples))));
    if (!(s_min > 1e-3)) continue;
    // Worst case |m (m - w') / sin^2 w| for |h0|, |h1| < eps.
    const double dev = m * (2.0 * eps * 1.875 / L) / (s_min * s_min);
    if (dev < room) return eps;
  }
  throw SolderError(SolderError::Kind::Window, "no admissible eps for the solder window [" + fmt(t0) + ", " +
                                                   fmt(t1) + "] (sin(mt) too small or branch too narrow)");
}

SolderSpec make_solder_spec(const Nonlinearity& f, int m, double x_m, int n, int i0, int i1) {
  SolderSpec spec;
  spec.n = n;
  spec.i0 = i0;
  spec.i1 = i1;
  spec.m = m;
  spec.x_m = x_m;
  spec.eps = admissible_eps(f, m, x_m, n, i0, i1);
  return spec;
}

void validate(const SolderSpec& spec) {
  if (!(spec.i0 > 0 && spec.i1 > spec.i0 && spec.i1 < spec.n))
    throw SolderError(SolderError::Kind::Window, "solder window needs 0 < t0 < t1 < pi");
  if (spec.i1 - spec.i0 < 4) throw SolderError(SolderError::Kind::Window, "solder window needs at least 5 nodes");
  if (!(spec.eps > 0.0)) throw SolderError(SolderError::Kind::Window, "solder eps must be positive");
  const double a = spec.t0() - spec.eps / spec.m, b = spec.t1() + spec.eps / spec.m;
  for (int k = 0; k <= 1000; ++k)
    if (!(std::abs(std::sin(spec.m * (a + (b - a) * k / 1000.0))) > 1e-3))
      throw SolderError(SolderError::Kind::Window, "sin(mt) margin violated on the solder window");
  if (!(std::abs(spec.h0) < spec.eps && std::abs(spec.h1) < spec.eps))
    throw SolderError(SolderError::Kind::Offset, "solder offsets h0 = " + fmt(spec.h0) + ", h1 = " + fmt(spec.h1) +
                                                     " not below eps = " + fmt(spec.eps));
}

double angle_through(const Nonlinearity& f, int m, const GridSegment& seg, double theta) {
  const PotentialSamples q = potential(f, seg.values, std::numbers::pi / seg.n);
  return angle_at(q, m, 0, q.cells(), theta);
}

GridSegment xi_solder(const Nonlinearity& f, const SolderSpec& spec) {
  validate(spec);
  const int len = spec.i1 - spec.i0 + 1;
  // Offsets that differ only by integration round-off count as equal.
  if (std::abs(spec.h1 - spec.h0) <= kSameOffset) return {spec.n, spec.i0, Vector::Constant(len, spec.x_m)};

  const int m = spec.m;
  const double L = spec.t1() - spec.t0();
  const double dh = spec.h1 - spec.h0;
  AngleProfile prof{spec.n, spec.i0, Vector(len), Vector(len)};
  for (int k = 0; k < len; ++k) {
    const double x = double(k) / (len - 1);
    const double t = (spec.i0 + k) * std::numbers::pi / spec.n;
    prof.w[k] = m * t + spec.h0 + dh * smoothstep(x);
    prof.dw[k] = m + dh * smoothstep_derivative(x) / L;
  }
  GridSegment seg = reconstruct_u(f, m, prof, spec.x_m);
  seg.values[0] = seg.values[len - 1] = spec.x_m;

  // Scalar correction along a bump vanishing to second order at both ends so
  // the discrete local angle lands on m t1 + h1.
  Vector psi(len);
  for (int k = 0; k < len; ++k) {
    const double x = double(k) / (len - 1);
    const double b = 4.0 * x * (1.0 - x);
    psi[k] = -f.eval_jet2(seg.values[k]).d2 * b * b;
  }
  psi[0] = psi[len - 1] = 0.0;
  const double theta0 = m * spec.t0() + spec.h0;
  const double target = m * spec.t1() + spec.h1;
  auto error = [&](double tau) {
    GridSegment s{seg.n, seg.first, seg.values + tau * psi};
    return angle_through(f, m, s, theta0) - target;
  };
  double tau = 0.0, e = error(0.0);
  double dtau = 1e-6 * std::max(1.0, std::abs(spec.x_m));
  for (int it = 0; it < 30 && std::abs(e) > 1e-12; ++it) {
    const double e2 = error(tau + dtau);
    const double slope = (e2 - e) / dtau;
    if (slope == 0.0 || !std::isfinite(slope)) break;
    const double next = tau - e / slope;
    dtau = std::max(std::abs(next - tau) * 1e-2, 1e-12);
    tau = next;
    e = error(tau);
  }
  if (!(std::abs(e) <= 1e-10))
    throw SolderError(SolderError::Kind::Endpoint, "solder endpoint angle error " + fmt(e) + " after correction");
  seg.values += tau * psi;
  return seg;
}

}  // namespace slcrit
