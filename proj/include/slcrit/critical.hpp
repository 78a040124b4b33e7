#pragma once

#include <optional>
#include <stdexcept>

#include "slcrit/funcspace.hpp"
#include "slcrit/nonlinearity.hpp"
#include "slcrit/pruefer.hpp"

namespace slcrit {

/// No sign bracket (find_in_Cm or project) or a vanishing directional
/// derivative (project).
class ProjectionError : public std::runtime_error {
 public:
  enum class Kind { NoBracket, ZeroDerivative, Basin, NotInSigma };
  ProjectionError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct MembershipTolerance {
  double angle = 1e-8;
  double v = 1e-6;
};

struct MembershipResult {
  double residual = 0.0;  // omega_m(u, pi) - m pi
  bool member = false;
  double v_end = 0.0;     // v(u, pi)
  double v_scale = 0.0;   // max |v| on the grid
  int m = 1;
  int n = 0;
  double tol_angle = 0.0;
};

/// omega_m(u, pi) - m pi.
double residual(const Nonlinearity& f, const GridFunction& u, int m);

MembershipResult membership(const Nonlinearity& f, const GridFunction& u, int m,
                            const MembershipTolerance& tol = {});

struct FindOptions {
  double residual_tol = 1e-10;
  int max_shrinks = 20;
  double delta_start = std::numbers::pi / 8;
};

/// Constructs a member of C_m by bisection along the segment between two
/// ramp functions whose residuals have opposite signs.
GridFunction find_in_Cm(const Nonlinearity& f, int m, const TamenessReport& report, int n,
                        const FindOptions& options = {});

struct ProjectOptions {
  double residual_tol = 1e-10;
  double basin = 0.5;
  double max_tau = 1.0;
  double min_slope = 1e-12;
  double default_delta = std::numbers::pi / 16;
  int max_iterations = 100;
};

struct Projection {
  GridFunction u;
  double tau = 0.0;
  int iterations = 0;
};

/// Default corrector direction -beta_delta(t) f''(u(t)).
GridFunction corrector_direction(const Nonlinearity& f, const GridFunction& u, double delta);

/// Solves residual(u + tau * direction) = 0 for tau by safeguarded Newton.
/// Without a direction the default corrector direction is used.
Projection project(const Nonlinearity& f, const GridFunction& u, int m,
                   const std::optional<GridFunction>& direction = std::nullopt,
                   const ProjectOptions& options = {});

}  // namespace slcrit
