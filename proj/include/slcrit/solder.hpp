#pragma once

#include <stdexcept>
#include <string>

#include "slcrit/funcspace.hpp"
#include "slcrit/nonlinearity.hpp"

namespace slcrit {

class SolderError : public std::runtime_error {
 public:
  enum class Kind {
    BranchRange,  // right-hand side outside f' on the monotone branch
    Fold,         // f'' vanishes at the anchor
    Singular,     // sin w = 0 with w' != m
    Offset,       // |h0| or |h1| not below eps
    Window,       // no admissible eps for the window
    Endpoint,     // endpoint angle correction did not converge
  };
  SolderError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// An angle profile w on the nodes first..first+w.size()-1 of an n-cell grid.
/// `dw` holds w' at the same nodes; when empty it is estimated by fourth
/// order finite differences.
struct AngleProfile {
  int n = 0;
  int first = 0;
  Vector w;
  Vector dw;
};

/// Nodewise inversion of f'(u) = -m^2 + m (m - w') / sin^2 w on the monotone
/// branch of f' through anchor_x.
GridSegment reconstruct_u(const Nonlinearity& f, int m, const AngleProfile& w, double anchor_x);

/// Monotone branch [lo, hi] of f' around x (f'' keeps its sign and stays
/// above 1e-10 in magnitude), capped at `radius`.
struct Branch {
  double lo = 0.0;
  double hi = 0.0;
  double fp_lo = 0.0;  // f'(lo)
  double fp_hi = 0.0;  // f'(hi)
  bool fold_lo = false;  // lo ends at a fold of f' rather than the radius cap
  bool fold_hi = false;
};
Branch monotone_branch(const Nonlinearity& f, double x, double radius = 100.0);

struct SolderSpec {
  int n = 0;
  int i0 = 0;  // node index of t0
  int i1 = 0;  // node index of t1
  double h0 = 0.0;
  double h1 = 0.0;
  int m = 1;
  double x_m = 0.0;
  double eps = 0.0;

  double t0() const noexcept { return i0 * std::numbers::pi / n; }
  double t1() const noexcept { return i1 * std::numbers::pi / n; }
};

/// Largest eps in {0.2, 0.1, 0.05, ...} for which the window [t0, t1]
/// (node indices) keeps |sin(mt)| > 1e-3 on [t0 - eps/m, t1 + eps/m] and the
/// worst-case right-hand side stays inside the branch of f' through x_m.
/// Throws SolderError(Window) if none down to 1e-9 works.
double admissible_eps(const Nonlinearity& f, int m, double x_m, int n, int i0, int i1);

/// SolderSpec with eps from admissible_eps and zero offsets.
SolderSpec make_solder_spec(const Nonlinearity& f, int m, double x_m, int n, int i0, int i1);

/// Throws SolderError if the window invariants fail.
void validate(const SolderSpec& spec);

/// The solder segment on nodes i0..i1: equal to x_m at both ends, and the
/// local m-argument through (t0, m t0 + h0) reaches m t1 + h1 at t1.
/// Returns x_m identically when |h0 - h1| <= 1e-13.
GridSegment xi_solder(const Nonlinearity& f, const SolderSpec& spec);

/// Local m-argument carried through the nodal values of `seg` from theta at
/// its first node; returns the value at its last node.
double angle_through(const Nonlinearity& f, int m, const GridSegment& seg, double theta);

}  // namespace slcrit
