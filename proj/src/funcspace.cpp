#include "slcrit/funcspace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace slcrit {

UniformGrid::UniformGrid(int cells) : n(cells) {
  if (cells < 16) throw GridError("grid needs at least 16 cells, got " + std::to_string(cells));
  if (cells % 2 != 0) throw GridError("grid cell count must be even, got " + std::to_string(cells));
}

int UniformGrid::nearest(double t) const noexcept {
  const long i = std::lround(t / spacing());
  return static_cast<int>(std::clamp<long>(i, 0, n));
}

bool UniformGrid::is_node(double t, double tol) const noexcept {
  return std::abs(this->t(nearest(t)) - t) <= tol;
}

GridFunction::GridFunction(int n, Vector values, bool dirichlet)
    : n_(UniformGrid(n).n), values_(std::move(values)), dirichlet_(dirichlet) {
  if (values_.size() != n + 1)
    throw GridError("expected " + std::to_string(n + 1) + " values, got " + std::to_string(values_.size()));
  if (!values_.allFinite()) throw GridError("grid function has non-finite values");
  if (dirichlet_ && (values_[0] != 0.0 || values_[n] != 0.0))
    throw GridError("Dirichlet grid function must vanish at both ends");
}

double GridFunction::at(double t) const {
  const double h = std::numbers::pi / n_;
  const double pos = std::clamp(t / h, 0.0, double(n_));
  const int i = std::min(static_cast<int>(pos), n_ - 1);
  const double w = pos - i;
  return (1.0 - w) * values_[i] + w * values_[i + 1];
}

GridFunction GridFunction::refined(int factor) const {
  if (factor < 1) throw GridError("refinement factor must be positive");
  const int m = n_ * factor;
  Vector v(m + 1);
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < factor; ++k) {
      const double w = double(k) / factor;
      v[i * factor + k] = (1.0 - w) * values_[i] + w * values_[i + 1];
    }
  v[m] = values_[n_];
  return GridFunction(m, std::move(v), dirichlet_);
}

GridFunction splice(const GridFunction& u, const GridSegment& seg) {
  if (seg.n != u.n()) throw GridError("splice: grid mismatch");
  if (seg.first < 0 || seg.last() > u.n()) throw GridError("splice: segment outside the grid");
  Vector v = u.values();
  v.segment(seg.first, seg.values.size()) = seg.values;
  return GridFunction(u.n(), std::move(v), u.dirichlet());
}

double integrate(const Vector& values, double h) {
  const Eigen::Index last = values.size() - 1;
  if (last < 1) return 0.0;
  return h * (values.sum() - 0.5 * (values[0] + values[last]));
}

double norm(const GridFunction& u, NormKind kind) {
  const double h = std::numbers::pi / u.n();
  switch (kind) {
    case NormKind::C0: return u.values().cwiseAbs().maxCoeff();
    case NormKind::L1: return integrate(u.values().cwiseAbs(), h);
    case NormKind::L2: return std::sqrt(integrate(u.values().array().square().matrix(), h));
  }
  return 0.0;
}

double distance(const GridFunction& a, const GridFunction& b, NormKind kind) {
  if (a.n() != b.n()) throw GridError("grid mismatch");
  return norm(GridFunction(a.n(), a.values() - b.values(), false), kind);
}

double smoothstep(double x) noexcept {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

double smoothstep_derivative(double x) noexcept {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double y = x * (1.0 - x);
  return 30.0 * y * y;
}

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < std::numbers::pi / 4))
    throw GridError("delta must lie in (0, pi/4), got " + std::to_string(delta));
}

// d is the distance to the nearer endpoint.
double bump_profile(double delta, double d) noexcept {
  if (d <= delta) return 0.0;
  if (d >= 2.0 * delta) return 1.0;
  return smoothstep((d - delta) / delta);
}

}  // namespace

double bump_value(double delta, double t) noexcept {
  return bump_profile(delta, std::min(t, std::numbers::pi - t));
}

GridFunction bump_beta(double delta, int n) {
  check_delta(delta);
  UniformGrid grid(n);
  Vector v(n + 1);
  // Distance to the nearer end computed from the index so mirrored nodes
  // get bitwise identical values.
  for (int i = 0; i <= n; ++i) v[i] = bump_profile(delta, grid.t(std::min(i, n - i)));
  return GridFunction(n, std::move(v), true);
}

GridFunction segment(const GridFunction& u0, const GridFunction& u1, double s) {
  if (u0.n() != u1.n()) throw GridError("segment: grid mismatch");
  Vector v = (1.0 - s) * u0.values() + s * u1.values();
  const bool dirichlet = u0.dirichlet() && u1.dirichlet();
  if (dirichlet) v[0] = v[v.size() - 1] = 0.0;
  return GridFunction(u0.n(), std::move(v), dirichlet);
}

GridFunction ramp_constant(double x, double delta, int n) {
  check_delta(delta);
  UniformGrid grid(n);
  Vector v(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double d = grid.t(std::min(i, n - i));
    v[i] = x * smoothstep(d / delta);
  }
  v[0] = v[n] = 0.0;
  return GridFunction(n, std::move(v), true);
}

}  // namespace slcrit
