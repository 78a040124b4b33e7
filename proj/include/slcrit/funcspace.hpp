#pragma once

#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace slcrit {

using Vector = Eigen::VectorXd;

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Uniform grid t_i = i*pi/n, i = 0..n, on [0, pi].
struct UniformGrid {
  int n;

  explicit UniformGrid(int cells);

  double spacing() const noexcept { return std::numbers::pi / n; }
  double t(int i) const noexcept { return i * std::numbers::pi / n; }
  int nodes() const noexcept { return n + 1; }
  /// Nearest node index to abscissa t, clamped to [0, n].
  int nearest(double t) const noexcept;
  bool is_node(double t, double tol = 1e-12) const noexcept;
};

/// A piecewise-linear function on a uniform grid of [0, pi].
class GridFunction {
 public:
  /// Throws GridError if `values` has the wrong length, contains non-finite
  /// entries, or violates the Dirichlet condition when `dirichlet` is set.
  GridFunction(int n, Vector values, bool dirichlet);

  static GridFunction zero(int n) { return GridFunction(n, Vector::Zero(n + 1), true); }

  /// Samples `fn(t)` at every node. With `dirichlet` the end values are set
  /// to exactly zero.
  template <typename Fn>
  static GridFunction sample(int n, Fn&& fn, bool dirichlet) {
    UniformGrid grid(n);
    Vector v(n + 1);
    for (int i = 0; i <= n; ++i) v[i] = fn(grid.t(i));
    if (dirichlet) v[0] = v[n] = 0.0;
    return GridFunction(n, std::move(v), dirichlet);
  }

  int n() const noexcept { return n_; }
  UniformGrid grid() const { return UniformGrid(n_); }
  const Vector& values() const noexcept { return values_; }
  double operator[](int i) const noexcept { return values_[i]; }
  bool dirichlet() const noexcept { return dirichlet_; }

  /// Linear interpolation between nodes.
  double at(double t) const;

  /// Same function on a grid refined by `factor` (piecewise linear, so the
  /// refined function is identical).
  GridFunction refined(int factor) const;

 private:
  int n_;
  Vector values_;
  bool dirichlet_;
};

/// Values of a function on the nodes first..first+values.size()-1 of an
/// n-cell grid.
struct GridSegment {
  int n = 0;
  int first = 0;
  Vector values;

  int last() const noexcept { return first + static_cast<int>(values.size()) - 1; }
};

/// Copy of u with the nodes covered by `seg` overwritten.
GridFunction splice(const GridFunction& u, const GridSegment& seg);

enum class NormKind { C0, L1, L2 };

double norm(const GridFunction& u, NormKind kind);

/// Trapezoid rule over the grid.
double integrate(const Vector& values, double h);

double distance(const GridFunction& a, const GridFunction& b, NormKind kind);

/// Quintic smoothstep 6x^5 - 15x^4 + 10x^3 clamped to [0, 1]; C2 with zero
/// first and second derivative at both ends.
double smoothstep(double x) noexcept;
double smoothstep_derivative(double x) noexcept;

/// Value of the bump beta_delta at t: 0 on [0, delta] and [pi - delta, pi],
/// 1 on [2 delta, pi - 2 delta], smoothstep ramps in between.
double bump_value(double delta, double t) noexcept;

GridFunction bump_beta(double delta, int n);

/// (1 - s) u0 + s u1.
GridFunction segment(const GridFunction& u0, const GridFunction& u1, double s);

/// Dirichlet function equal to x on [delta, pi - delta] with smoothstep ramps
/// to zero at both ends.
GridFunction ramp_constant(double x, double delta, int n);

}  // namespace slcrit
