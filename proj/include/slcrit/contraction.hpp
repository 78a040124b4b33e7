#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slcrit/critical.hpp"
#include "slcrit/funcspace.hpp"
#include "slcrit/nonlinearity.hpp"

namespace slcrit {

/// Samples U(theta_j, .) of a family over the circle (or a two-point family).
struct LoopFamily {
  int m = 1;
  int n = 0;
  std::vector<double> thetas;
  std::vector<GridFunction> samples;
  /// Bound on the C0 distance between consecutive samples.
  double resolution = std::numeric_limits<double>::infinity();

  bool closed() const;
};

class FamilyError : public std::invalid_argument {
 public:
  FamilyError(int sample, const std::string& what) : std::invalid_argument(what), sample_(sample) {}
  int sample() const noexcept { return sample_; }

 private:
  int sample_;
};

/// Throws FamilyError naming the first sample that is not a member at
/// tol_angle, is on the wrong grid, or breaks closure/resolution.
void validate(const Nonlinearity& f, const LoopFamily& family, double tol_angle);

struct LoopOptions {
  int samples = 32;
  double amplitude = 1e-2;
  std::uint64_t seed = 0;
  int modes = 5;
};

class LoopError : public std::runtime_error {
 public:
  LoopError(double theta, const std::string& what) : std::runtime_error(what), theta_(theta) {}
  double theta() const noexcept { return theta_; }

 private:
  double theta_;
};

/// base + a (cos(theta) p1 + sin(theta) p2), each sample projected back onto
/// C_m. p1, p2 are seeded random combinations of sin(kt). With samples >= 3
/// the thetas are j 2pi/samples for j = 0..samples and the last sample is a
/// copy of the first; with samples == 2 the thetas are {0, pi}.
LoopFamily make_loop(const Nonlinearity& f, int m, const GridFunction& base, const LoopOptions& options);

struct ContractionParams {
  double delta0 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double eta = 0.0;  // 0: derived from the solder windows
  double tol_wall = 0.05;
  int s_steps = 32;
  int poly_degree = 10;
  double tol_angle = 1e-6;
  double final_tol = 1e-6;
  int threads = 1;

  double delta2p() const noexcept { return delta1 / 2; }
  double delta1p() const noexcept { return 3 * delta1 / 4; }
  double delta0p() const noexcept { return 7 * delta1 / 8; }
};

/// delta1 = min(pi/(4m), 0.3) rounded down to a multiple of 8 grid cells,
/// delta2 = delta1/8, delta0 = 2.5 delta1.
ContractionParams default_params(int m, int n);

/// Rounds delta1 down to a multiple of 8 cells so all derived radii are
/// nodes.
double snap_delta1(double delta1, int n);

/// Throws std::invalid_argument on violated parameter invariants.
void validate(const ContractionParams& params, int m, int n);

/// Node indices of the radii used by the construction.
struct StageLayout {
  int n = 0;
  int d2 = 0;   // delta2
  int q = 0;    // delta1/4
  int p2 = 0;   // delta2'
  int p1 = 0;   // delta1'
  int p0 = 0;   // delta0'
  int d1 = 0;   // delta1

  static StageLayout from(const ContractionParams& params, int n);
};

struct ResidualRecord {
  int stage = 0;
  double s = 0.0;
  int theta_index = 0;
  double theta = 0.0;
  double residual = 0.0;
  double mu_AT = 0.0;
  double correction_norm = 0.0;
  double step_norm = 0.0;   // C0 distance to the previous substep
  double predictor_norm = 0.0;  // C0 size of the deformation before correction
  double pin_error = 0.0;   // C0 distance to u_star on the pinned windows (s >= 2)
};

struct Certification {
  bool stage0_matches = false;
  double max_residual = 0.0;
  double final_spread = 0.0;
  double max_pin_error = 0.0;
  bool corrections_bounded = false;
  bool l1_premise = false;
  bool c0_premise = false;
  bool certified = false;
};

struct Frame {
  double s = 0.0;
  GridFunction u;
};

struct HomotopyTrace {
  int m = 1;
  double x_m = 0.0;
  ContractionParams params;
  std::vector<LoopFamily> stages;  // stage 0..5 family at stage end
  std::vector<ResidualRecord> records;
  std::optional<GridFunction> u_star;
  double step1_min_derivative = 0.0;
  double eta = 0.0;
  double fit_error = 0.0;        // max C0 error of the stage-3 polynomial fits
  int fit_degree = 0;
  double stage3_C = 0.0;         // max C0 norm of the stage-3 family
  std::vector<double> mu_AI_end; // per theta, at s = 4
  std::vector<double> mu_AT_end;
  std::vector<double> l1_to_ustar;  // per theta, stage-4 end
  std::vector<double> c0_to_ustar;
  std::vector<double> l1_bound;
  std::vector<Frame> frames;     // stage 4, theta index 0
  Certification certification;

  double max_mu_AT_end() const;
};

class StageError : public std::runtime_error {
 public:
  StageError(int stage, double s, int theta_index, const std::string& what)
      : std::runtime_error(what), stage_(stage), s_(s), theta_index_(theta_index) {}
  int stage() const noexcept { return stage_; }
  double s() const noexcept { return s_; }
  int theta_index() const noexcept { return theta_index_; }

 private:
  int stage_;
  double s_;
  int theta_index_;
};

/// Stage abort carrying everything recorded before it.
class ContractionAbort : public std::runtime_error {
 public:
  ContractionAbort(const StageError& cause, HomotopyTrace trace)
      : std::runtime_error(cause.what()), cause_(cause), trace_(std::move(trace)) {}
  const StageError& cause() const noexcept { return cause_; }
  const HomotopyTrace& trace() const noexcept { return trace_; }

 private:
  StageError cause_;
  HomotopyTrace trace_;
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Exceptions are
/// rethrown for the smallest failing index.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

/// Context shared by the stages.
struct StageContext {
  const Nonlinearity* f = nullptr;
  int m = 1;
  double x_m = 0.0;
  ContractionParams params;
  StageLayout layout;
  double eta = 0.0;
  // Solder eps of the windows [q,p2], [p1,d1], [n-d1,n-p0], [n-p0,n-p1],
  // [n-p2,n-q] and the re-solder window [n-p1,n-p2].
  double eps_l1 = 0.0, eps_l2 = 0.0, eps_r1 = 0.0, eps_r2 = 0.0, eps_r3 = 0.0, eps_rs = 0.0;
};

StageContext make_context(const Nonlinearity& f, int m, double x_m, const ContractionParams& params, int n);

LoopFamily step1_flatten(const StageContext& ctx, const LoopFamily& family, HomotopyTrace& trace);
LoopFamily step2_anchor_ends(const StageContext& ctx, const LoopFamily& family, HomotopyTrace& trace);
GridFunction build_anchor(const StageContext& ctx, const LoopFamily& stage2);
LoopFamily step3_polynomialize(const StageContext& ctx, const LoopFamily& family, const GridFunction& u_star,
                               HomotopyTrace& trace);
LoopFamily step4_squeeze(const StageContext& ctx, const LoopFamily& family, const GridFunction& u_star,
                         HomotopyTrace& trace);
LoopFamily step5_collapse(const StageContext& ctx, const LoopFamily& family, const GridFunction& u_star,
                          HomotopyTrace& trace);

/// Stages 1-5 with certification. Throws FamilyError on an invalid input
/// family and ContractionAbort on a stage failure.
HomotopyTrace contract(const Nonlinearity& f, int m, double x_m, const LoopFamily& family,
                       const ContractionParams& params);

/// Least-squares fit x_m + (t - a)(b - t) sum_k c_k T_k on the nodes lo..hi,
/// exact (= x_m) at both ends. `degree` counts the full polynomial degree.
Vector polynomial_fit(const GridFunction& u, int lo, int hi, double x_m, int degree);

}  // namespace slcrit
