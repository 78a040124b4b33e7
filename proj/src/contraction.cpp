#include "slcrit/contraction.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "slcrit/pruefer.hpp"
#include "slcrit/solder.hpp"

namespace slcrit {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

double c0(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

// omega_m(u, t_i) - m t_i.
double offset_at(const Nonlinearity& f, const Vector& u, int n, int m, int i) {
  const PotentialSamples q = potential(f, u, kPi / n);
  return angle_at(q, m, 0, i, 0.0) - m * (i * kPi / n);
}

void put(Vector& v, const GridSegment& seg) { v.segment(seg.first, seg.values.size()) = seg.values; }

GridFunction dirichlet(int n, Vector v) {
  v[0] = v[n] = 0.0;
  return GridFunction(n, std::move(v), true);
}

SolderSpec spec_for(const StageContext& ctx, int i0, int i1, double eps, double h0, double h1) {
  SolderSpec s;
  s.n = ctx.layout.n;
  s.i0 = i0;
  s.i1 = i1;
  s.m = ctx.m;
  s.x_m = ctx.x_m;
  s.eps = eps;
  s.h0 = h0;
  s.h1 = h1;
  return s;
}

double pin_error(const StageLayout& L, const Vector& u, const Vector& us) {
  double e = 0.0;
  for (int i = 0; i <= L.p2; ++i) e = std::max(e, std::abs(u[i] - us[i]));
  for (int i = L.n - L.p2; i <= L.n; ++i) e = std::max(e, std::abs(u[i] - us[i]));
  return e;
}

ProjectOptions corrector_options() {
  ProjectOptions o;
  o.min_slope = 1e-10;
  return o;
}

// Per-theta output of a stage.
struct ThetaRun {
  std::optional<GridFunction> u;
  std::vector<ResidualRecord> records;
  double scalar = 0.0;
  double scalar2 = 0.0;
  std::vector<Frame> frames;
};

LoopFamily with_samples(const LoopFamily& family, std::vector<ThetaRun>& runs, HomotopyTrace& trace) {
  LoopFamily out = family;
  out.samples.clear();
  for (auto& r : runs) {
    out.samples.push_back(*r.u);
    trace.records.insert(trace.records.end(), r.records.begin(), r.records.end());
  }
  return out;
}

// Runs body(j) for each distinct sample; a closing duplicate copies the first.
std::vector<ThetaRun> run_thetas(const StageContext& ctx, const LoopFamily& family,
                                 const std::function<ThetaRun(int)>& body) {
  const int count = static_cast<int>(family.samples.size());
  const int distinct = family.closed() ? count - 1 : count;
  std::vector<ThetaRun> runs(count);
  parallel_for(distinct, ctx.params.threads, [&](int j) { runs[j] = body(j); });
  if (distinct < count) {
    runs[count - 1] = runs[0];
    for (auto& r : runs[count - 1].records) {
      r.theta_index = count - 1;
      r.theta = family.thetas[count - 1];
    }
    runs[count - 1].frames.clear();
  }
  return runs;
}

ResidualRecord make_record(int stage, double s, int j, double theta) {
  ResidualRecord r;
  r.stage = stage;
  r.s = s;
  r.theta_index = j;
  r.theta = theta;
  return r;
}

// Projection restoring membership; records the correction.
Projection correct(const StageContext& ctx, const GridFunction& u, const GridFunction& direction, int stage, double s,
                   int j, ResidualRecord& rec) {
  try {
    Projection p = project(*ctx.f, u, ctx.m, direction, corrector_options());
    rec.correction_norm = std::abs(p.tau) * direction.values().cwiseAbs().maxCoeff();
    return p;
  } catch (const ProjectionError& e) {
    throw StageError(stage, s, j, "stage " + std::to_string(stage) + " corrector failed at s = " + fmt(s) +
                                      ", theta index " + std::to_string(j) + ": " + e.what());
  }
}

GridSegment solder_or_throw(const StageContext& ctx, const SolderSpec& spec, int stage, double s, int j,
                            const std::string& extra = {}) {
  try {
    return xi_solder(*ctx.f, spec);
  } catch (const SolderError& e) {
    throw StageError(stage, s, j, "stage " + std::to_string(stage) + " solder on nodes [" + std::to_string(spec.i0) +
                                      ", " + std::to_string(spec.i1) + "] failed at s = " + fmt(s) +
                                      ", theta index " + std::to_string(j) + ": " + e.what() + extra);
  }
}

}  // namespace

bool LoopFamily::closed() const {
  return samples.size() >= 3 && thetas.size() == samples.size() &&
         samples.front().values() == samples.back().values();
}

void validate(const Nonlinearity& f, const LoopFamily& family, double tol_angle) {
  if (family.samples.empty()) throw FamilyError(-1, "loop family has no samples");
  if (family.thetas.size() != family.samples.size())
    throw FamilyError(-1, "loop family has " + std::to_string(family.thetas.size()) + " thetas but " +
                              std::to_string(family.samples.size()) + " samples");
  if (!std::is_sorted(family.thetas.begin(), family.thetas.end()))
    throw FamilyError(-1, "loop family thetas are not sorted");
  for (std::size_t j = 0; j < family.samples.size(); ++j) {
    const GridFunction& u = family.samples[j];
    const int jj = static_cast<int>(j);
    if (u.n() != family.n) throw FamilyError(jj, "sample " + std::to_string(j) + " is on a different grid");
    if (!u.dirichlet()) throw FamilyError(jj, "sample " + std::to_string(j) + " is not a Dirichlet function");
    const double r = residual(f, u, family.m);
    if (!(std::abs(r) <= tol_angle))
      throw FamilyError(jj, "sample " + std::to_string(j) + " (theta = " + fmt(family.thetas[j]) +
                                ") is not in C_m: residual " + fmt(r));
    if (j > 0 && !(c0(u.values(), family.samples[j - 1].values()) < family.resolution))
      throw FamilyError(jj, "samples " + std::to_string(j - 1) + " and " + std::to_string(j) +
                                " are farther apart than the family resolution");
  }
  if (family.samples.size() >= 3 && !family.closed())
    throw FamilyError(static_cast<int>(family.samples.size()) - 1, "loop family is not closed");
}

LoopFamily make_loop(const Nonlinearity& f, int m, const GridFunction& base, const LoopOptions& opt) {
  if (opt.samples < 2) throw std::invalid_argument("a loop family needs at least 2 samples");
  const int n = base.n();
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  auto random_mode = [&] {
    std::vector<double> c(opt.modes);
    for (auto& x : c) x = normal(rng);
    GridFunction p = GridFunction::sample(
        n,
        [&](double t) {
          double v = 0.0;
          for (int k = 1; k <= opt.modes; ++k) v += c[k - 1] * std::sin(k * t) / k;
          return v;
        },
        true);
    const double scale = p.values().cwiseAbs().maxCoeff();
    return GridFunction(n, p.values() / (scale > 0 ? scale : 1.0), true);
  };
  const GridFunction p1 = random_mode();
  const GridFunction p2 = random_mode();

  LoopFamily fam;
  fam.m = m;
  fam.n = n;
  const int distinct = opt.samples;
  if (opt.samples == 2) {
    fam.thetas = {0.0, kPi};
  } else {
    for (int j = 0; j <= distinct; ++j) fam.thetas.push_back(j == distinct ? 2 * kPi : 2 * kPi * j / distinct);
  }
  for (int j = 0; j < distinct; ++j) {
    const double th = fam.thetas[j];
    Vector v = base.values() + opt.amplitude * (std::cos(th) * p1.values() + std::sin(th) * p2.values());
    const GridFunction u = dirichlet(n, std::move(v));
    try {
      fam.samples.push_back(project(f, u, m).u);
    } catch (const ProjectionError& e) {
      throw LoopError(th, "projection failed at theta = " + fmt(th) + ": " + e.what());
    }
  }
  if (opt.samples > 2) fam.samples.push_back(fam.samples.front());
  return fam;
}

double snap_delta1(double delta1, int n) {
  const double h = kPi / n;
  const double k = std::floor(delta1 / (8 * h) + 1e-9);
  return k * 8 * h;
}

ContractionParams default_params(int m, int n) {
  ContractionParams p;
  p.delta1 = snap_delta1(std::min(kPi / (4 * m), 0.3), n);
  p.delta2 = p.delta1 / 8;
  p.delta0 = 2.5 * p.delta1;
  return p;
}

void validate(const ContractionParams& p, int m, int n) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("contraction parameters: " + what); };
  const double h = kPi / n;
  if (!(p.delta1 > 0)) fail("delta1 must be positive (grid too coarse for this m?)");
  const double cells = p.delta1 / h;
  if (std::abs(cells - std::round(cells)) > 1e-6 || std::lround(cells) % 8 != 0)
    fail("delta1 must be a multiple of 8 grid cells");
  if (!(p.delta1 < kPi / m)) fail("delta1 must be below pi/m");
  if (!(p.delta2 > 0 && p.delta2 < p.delta1 / 4)) fail("delta2 must lie in (0, delta1/4)");
  if (!(p.delta0 > 2 * p.delta1 && p.delta0 < kPi / 4)) fail("delta0 must lie in (2 delta1, pi/4)");
  if (!(p.eta >= 0)) fail("eta must be nonnegative");
  if (!(p.tol_wall > 0)) fail("tol_wall must be positive");
  if (p.s_steps < 1) fail("s_steps must be at least 1");
  if (p.poly_degree < 2) fail("poly_degree must be at least 2");
  if (!(p.tol_angle > 0) || !(p.final_tol > 0)) fail("tolerances must be positive");
  if (p.threads < 1) fail("threads must be at least 1");
}

StageLayout StageLayout::from(const ContractionParams& p, int n) {
  StageLayout L;
  L.n = n;
  const long d1 = std::lround(p.delta1 / (kPi / n));
  L.d1 = static_cast<int>(d1);
  L.q = L.d1 / 4;
  L.p2 = L.d1 / 2;
  L.p1 = 3 * L.d1 / 4;
  L.p0 = 7 * L.d1 / 8;
  L.d2 = static_cast<int>(std::lround(p.delta2 / (kPi / n)));
  return L;
}

double HomotopyTrace::max_mu_AT_end() const {
  double m = 0.0;
  for (double x : mu_AT_end) m = std::max(m, x);
  return m;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(threads, count));
  std::vector<std::exception_ptr> errors(count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int i = next++; i < count && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

StageContext make_context(const Nonlinearity& f, int m, double x_m, const ContractionParams& params, int n) {
  validate(params, m, n);
  StageContext ctx;
  ctx.f = &f;
  ctx.m = m;
  ctx.x_m = x_m;
  ctx.params = params;
  ctx.layout = StageLayout::from(params, n);
  const StageLayout& L = ctx.layout;
  auto eps = [&](int i0, int i1) {
    try {
      return admissible_eps(f, m, x_m, n, i0, i1);
    } catch (const SolderError& e) {
      throw StageError(2, 1.0, -1, std::string("solder window not admissible: ") + e.what());
    }
  };
  ctx.eps_l1 = eps(L.q, L.p2);
  ctx.eps_l2 = eps(L.p1, L.d1);
  ctx.eps_r1 = eps(n - L.d1, n - L.p0);
  ctx.eps_r2 = eps(n - L.p0, n - L.p1);
  ctx.eps_r3 = eps(n - L.p2, n - L.q);
  ctx.eps_rs = eps(n - L.p1, n - L.p2);
  const double eps_min = std::min({ctx.eps_l1, ctx.eps_l2, ctx.eps_r1, ctx.eps_r2, ctx.eps_r3, ctx.eps_rs});
  ctx.eta = params.eta > 0 ? params.eta : 0.05 * eps_min;
  if (!(1.5 * ctx.eta < std::min(ctx.eps_r1, ctx.eps_r2)))
    throw std::invalid_argument("eta = " + fmt(ctx.eta) + " is too large for the solder windows (1.5 eta must be below " +
                                fmt(std::min(ctx.eps_r1, ctx.eps_r2)) + ")");
  return ctx;
}

LoopFamily step1_flatten(const StageContext& ctx, const LoopFamily& family, HomotopyTrace& trace) {
  const Nonlinearity& f = *ctx.f;
  const int n = family.n, N = ctx.params.s_steps;
  const Vector b1 = bump_beta(ctx.params.delta1, n).values();
  const Vector b2 = bump_beta(ctx.params.delta2 / 2, n).values();
  const Vector b0 = bump_beta(ctx.params.delta0, n).values();

  auto runs = run_thetas(ctx, family, [&](int j) {
    ThetaRun run;
    const GridFunction& U0 = family.samples[j];
    Vector phi_v(n + 1);
    for (int i = 0; i <= n; ++i) phi_v[i] = b0[i] == 0.0 ? 0.0 : -b0[i] * f.eval_jet2(U0[i]).d2;
    const GridFunction phi = dirichlet(n, phi_v);
    const double deriv = d_omega(f, U0, ctx.m, phi, kPi);
    if (!(std::abs(deriv) >= 1e-10))
      throw StageError(1, 0.0, j, "stage 1: corrector derivative " + fmt(deriv) + " below 1e-10 at theta index " +
                                      std::to_string(j));
    run.scalar = std::abs(deriv);

    double xi = 0.0;
    GridFunction prev = U0;
    for (int k = 1; k <= N; ++k) {
      const double s = double(k) / N;
      Vector v(n + 1);
      for (int i = 0; i <= n; ++i)
        v[i] = (1.0 - s + s * b1[i]) * U0[i] + s * (b2[i] - b1[i]) * ctx.x_m + xi * phi[i];
      const GridFunction W = dirichlet(n, std::move(v));
      ResidualRecord rec = make_record(1, s, j, family.thetas[j]);
      rec.predictor_norm = c0(W.values(), prev.values());
      Projection p = correct(ctx, W, phi, 1, s, j, rec);
      xi += p.tau;
      GridFunction U = std::move(p.u);
      rec.residual = residual(f, U, ctx.m);
      rec.step_norm = c0(U.values(), prev.values());
      run.records.push_back(rec);
      prev = std::move(U);
    }
    run.u = std::move(prev);
    return run;
  });
  double dmin = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) dmin = std::min(dmin, r.scalar);
  trace.step1_min_derivative = dmin;
  return with_samples(family, runs, trace);
}

LoopFamily step2_anchor_ends(const StageContext& ctx, const LoopFamily& family, HomotopyTrace& trace) {
  const Nonlinearity& f = *ctx.f;
  const StageLayout& L = ctx.layout;
  const int n = family.n, N = ctx.params.s_steps, m = ctx.m;
  const double eta = ctx.eta;

  auto runs = run_thetas(ctx, family, [&](int j) {
    ThetaRun run;
    const GridFunction& U1 = family.samples[j];
    const PotentialSamples q1 = potential(f, U1);
    const double g_minus = angle_at(q1, m, 0, L.q, 0.0) - m * (L.q * kPi / n);
    const double g_plus = angle_at(q1, m, n, n - L.q, m * kPi) - m * ((n - L.q) * kPi / n);
    if (!(std::abs(g_minus) < std::min(ctx.eps_l1, ctx.eps_l2)))
      throw StageError(2, 1.0, j, "stage 2: left offset h- = " + fmt(g_minus) + " exceeds the solder eps " +
                                      fmt(std::min(ctx.eps_l1, ctx.eps_l2)) + "; shrink delta2 and rerun stage 1");
    if (!(std::abs(g_plus) < std::min({ctx.eps_r1, ctx.eps_r2, ctx.eps_r3})))
      throw StageError(2, 1.0, j, "stage 2: right offset h+ = " + fmt(g_plus) + " exceeds the solder eps " +
                                      fmt(std::min({ctx.eps_r1, ctx.eps_r2, ctx.eps_r3})) +
                                      "; shrink delta2 and rerun stage 1");
    GridFunction prev = U1;
    for (int k = 1; k <= N; ++k) {
      const double s = 1.0 + double(k) / N;
      const double r = double(N - k) / N;  // 2 - s
      const double hm = r * g_minus;
      const double h0p = eta + r * (g_plus - eta);
      const double h1p = r * g_plus;
      Vector v = U1.values();
      put(v, solder_or_throw(ctx, spec_for(ctx, L.q, L.p2, ctx.eps_l1, g_minus, hm), 2, s, j));
      put(v, solder_or_throw(ctx, spec_for(ctx, L.p1, L.d1, ctx.eps_l2, hm, g_minus), 2, s, j));
      put(v, solder_or_throw(ctx, spec_for(ctx, n - L.d1, n - L.p0, ctx.eps_r1, g_plus, h0p), 2, s, j));
      put(v, solder_or_throw(ctx, spec_for(ctx, n - L.p0, n - L.p1, ctx.eps_r2, h0p, h1p), 2, s, j));
      put(v, solder_or_throw(ctx, spec_for(ctx, n - L.p2, n - L.q, ctx.eps_r3, h1p, g_plus), 2, s, j));
      GridFunction U = dirichlet(n, std::move(v));
      ResidualRecord rec = make_record(2, s, j, family.thetas[j]);
      rec.residual = residual(f, U, m);
      rec.step_norm = rec.predictor_norm = c0(U.values(), prev.values());
      run.records.push_back(rec);
      prev = std::move(U);
    }
    run.u = std::move(prev);
    return run;
  });
  return with_samples(family, runs, trace);
}

GridFunction build_anchor(const StageContext& ctx, const LoopFamily& stage2) {
  const StageLayout& L = ctx.layout;
  const int n = stage2.n;
  const Vector& ref = stage2.samples.front().values();
  double spread = 0.0;
  for (const auto& u : stage2.samples) {
    for (int i = 0; i <= L.p1; ++i) spread = std::max(spread, std::abs(u[i] - ref[i]));
    for (int i = n - L.p0; i <= n; ++i) spread = std::max(spread, std::abs(u[i] - ref[i]));
  }
  if (!(spread < 1e-9))
    throw StageError(2, 2.0, -1, "stage-2 family depends on theta on the end windows (spread " + fmt(spread) + ")");
  Vector v = Vector::Constant(n + 1, ctx.x_m);
  v.head(L.p1 + 1) = ref.head(L.p1 + 1);
  v.tail(L.p1 + 1) = ref.tail(L.p1 + 1);
  return dirichlet(n, std::move(v));
}

Vector polynomial_fit(const GridFunction& u, int lo, int hi, double x_m, int degree) {
  const int count = hi - lo + 1;
  const int K = std::max(0, degree - 1);
  const double h = kPi / u.n();
  const double a = lo * h, b = hi * h;
  Vector out = Vector::Constant(count, x_m);
  if (K == 0 || count < 3) return out;
  Eigen::MatrixXd A(count, K);
  Vector rhs(count);
  std::vector<double> T(K);
  for (int r = 0; r < count; ++r) {
    const double t = (lo + r) * h;
    const double w = (t - a) * (b - t);
    const double x = (2 * t - a - b) / (b - a);
    for (int k = 0; k < K; ++k) T[k] = k == 0 ? 1.0 : (k == 1 ? x : 2 * x * T[k - 1] - T[k - 2]);
    for (int k = 0; k < K; ++k) A(r, k) = w * T[k];
    rhs[r] = u[lo + r] - x_m;
  }
  const Vector c = A.colPivHouseholderQr().solve(rhs);
  out.array() += (A * c).array();
  out[0] = out[count - 1] = x_m;
  return out;
}

LoopFamily step3_polynomialize(const StageContext& ctx, const LoopFamily& family, const GridFunction& u_star,
                               HomotopyTrace& trace) {
  const Nonlinearity& f = *ctx.f;
  const StageLayout& L = ctx.layout;
  const int n = family.n, N = ctx.params.s_steps, m = ctx.m;
  const double eta = ctx.eta;
  const int lo = L.p1, hi = n - L.p0;
  const double g_star = offset_at(f, u_star.values(), n, m, n - L.p1);

  auto assemble = [&](const GridFunction& U2, const Vector& P, int k) {
    const double a = double(N - k) / N, b = double(k) / N;
    Vector v = U2.values();
    for (int i = lo; i <= hi; ++i) {
      const double p = P[i - lo];
      if (v[i] != p) v[i] = a * v[i] + b * p;
    }
    return v;
  };

  auto runs = run_thetas(ctx, family, [&](int j) {
    ThetaRun run;
    const GridFunction& U2 = family.samples[j];
    int degree = ctx.params.poly_degree;
    Vector P;
    for (;; degree += 2) {
      P = polynomial_fit(U2, lo, hi, ctx.x_m, degree);
      const double h3 = offset_at(f, assemble(U2, P, N), n, m, hi);
      if (std::abs(h3 - eta) < 0.4 * eta) break;
      if (degree + 2 > 2 * ctx.params.poly_degree)
        throw StageError(3, 3.0, j, "stage 3: polynomial fit of degree " + std::to_string(degree) +
                                        " leaves the offset " + fmt(h3) + " outside (eta/2, 3 eta/2) with eta = " +
                                        fmt(eta));
    }
    run.scalar = (P - U2.values().segment(lo, hi - lo + 1)).cwiseAbs().maxCoeff();
    run.scalar2 = degree;

    GridFunction prev = U2;
    for (int k = 1; k <= N; ++k) {
      const double s = 2.0 + double(k) / N;
      Vector v = assemble(U2, P, k);
      const double h = offset_at(f, v, n, m, hi);
      if (!(h > eta / 2 && h < 1.5 * eta))
        throw StageError(3, s, j, "stage 3: offset h = " + fmt(h) + " left (eta/2, 3 eta/2) with eta = " + fmt(eta));
      put(v, solder_or_throw(ctx, spec_for(ctx, hi, n - L.p1, ctx.eps_r2, h, g_star), 3, s, j));
      v.tail(L.p1 + 1) = u_star.values().tail(L.p1 + 1);
      const GridFunction W = dirichlet(n, std::move(v));
      ResidualRecord rec = make_record(3, s, j, family.thetas[j]);
      rec.predictor_norm = c0(W.values(), prev.values());
      GridFunction U = correct(ctx, W, corrector_direction(f, W, ctx.params.delta1p()), 3, s, j, rec).u;
      rec.residual = residual(f, U, m);
      rec.step_norm = c0(U.values(), prev.values());
      rec.pin_error = pin_error(L, U.values(), u_star.values());
      run.records.push_back(rec);
      prev = std::move(U);
    }
    run.u = std::move(prev);
    return run;
  });
  for (const auto& r : runs) {
    trace.fit_error = std::max(trace.fit_error, r.scalar);
    trace.fit_degree = std::max(trace.fit_degree, static_cast<int>(r.scalar2));
  }
  return with_samples(family, runs, trace);
}

LoopFamily step4_squeeze(const StageContext& ctx, const LoopFamily& family, const GridFunction& u_star,
                         HomotopyTrace& trace) {
  const Nonlinearity& f = *ctx.f;
  const StageLayout& L = ctx.layout;
  const int n = family.n, N = ctx.params.s_steps, m = ctx.m;
  const double h = kPi / n, tol = ctx.params.tol_wall, x_m = ctx.x_m;
  const int a = L.p1, b = n - L.p1;  // A = [a, b]; both ends stay x_m
  const Vector& us = u_star.values();
  const double g_star = offset_at(f, us, n, m, n - L.p2);

  auto runs = run_thetas(ctx, family, [&](int j) {
    ThetaRun run;
    const GridFunction& U3 = family.samples[j];
    GridFunction prev = U3;
    std::vector<char> cls(n + 1);
    for (int k = 1; k <= N; ++k) {
      const double s = 3.0 + double(k) / N;
      const double W = double(N - k) / N * m * kPi;
      const AngleTrajectory traj = omega_m(f, prev, m);
      Vector v = us;
      int count_T = 0, count_I = 0;
      for (int i = a + 1; i < b; ++i) {
        const double g = traj.omega[i] - m * (i * h);
        if (std::abs(g) <= W) {
          cls[i] = 'I';
          v[i] = U3[i];
          ++count_I;
        } else if (std::abs(g) >= W + tol) {
          cls[i] = 'S';
          v[i] = x_m;
        } else {
          cls[i] = 'T';
          ++count_T;
        }
      }
      v[a] = v[b] = x_m;
      for (int i = a + 1; i < b;) {
        if (cls[i] != 'T') {
          ++i;
          continue;
        }
        int r = i;
        while (r < b && cls[r] == 'T') ++r;
        const int l = i - 1;
        for (int t = i; t < r; ++t) v[t] = v[l] + (v[r] - v[l]) * double(t - l) / double(r - l);
        i = r;
      }
      const double off = offset_at(f, v, n, m, b);
      std::ostringstream diag;
      diag << " (mu_AT = " << count_T * h << ", mu_AI = " << count_I * h << ", tol_wall = " << tol
           << "; a smaller tol_wall may help)";
      if (!(std::abs(off) < ctx.eps_rs))
        throw StageError(4, s, j, "stage 4: solder offset " + fmt(off) + " exceeds eps " + fmt(ctx.eps_rs) + diag.str());
      put(v, solder_or_throw(ctx, spec_for(ctx, b, n - L.p2, ctx.eps_rs, off, g_star), 4, s, j, diag.str()));
      const GridFunction W_u = dirichlet(n, std::move(v));
      ResidualRecord rec = make_record(4, s, j, family.thetas[j]);
      rec.predictor_norm = c0(W_u.values(), prev.values());
      rec.mu_AT = count_T * h;
      GridFunction U = correct(ctx, W_u, corrector_direction(f, W_u, ctx.params.delta1p()), 4, s, j, rec).u;
      rec.residual = residual(f, U, m);
      rec.step_norm = c0(U.values(), prev.values());
      rec.pin_error = pin_error(L, U.values(), us);
      run.records.push_back(rec);
      if (j == 0) run.frames.push_back({s, U});
      if (k == N) {
        run.scalar = count_I * h;
        run.scalar2 = count_T * h;
      }
      prev = std::move(U);
    }
    run.u = std::move(prev);
    return run;
  });
  trace.mu_AI_end.clear();
  trace.mu_AT_end.clear();
  for (const auto& r : runs) {
    trace.mu_AI_end.push_back(r.scalar);
    trace.mu_AT_end.push_back(r.scalar2);
  }
  trace.frames = runs.front().frames;
  return with_samples(family, runs, trace);
}

LoopFamily step5_collapse(const StageContext& ctx, const LoopFamily& family, const GridFunction& u_star,
                          HomotopyTrace& trace) {
  const Nonlinearity& f = *ctx.f;
  const StageLayout& L = ctx.layout;
  const int n = family.n, N = ctx.params.s_steps, m = ctx.m;
  const Vector& us = u_star.values();
  const int b = n - L.p1;
  const double g_star = offset_at(f, us, n, m, n - L.p2);

  auto runs = run_thetas(ctx, family, [&](int j) {
    ThetaRun run;
    const GridFunction& U4 = family.samples[j];
    GridFunction prev = U4;
    for (int k = 1; k <= N; ++k) {
      const double s = 4.0 + double(k) / N;
      const double wa = double(N - k) / N, wb = double(k) / N;
      Vector v = U4.values();
      for (int i = 0; i <= n; ++i)
        if (v[i] != us[i]) v[i] = wa * v[i] + wb * us[i];
      const double off = offset_at(f, v, n, m, b);
      if (!(std::abs(off) < ctx.eps_rs))
        throw StageError(5, s, j, "stage 5: solder offset " + fmt(off) + " exceeds eps " + fmt(ctx.eps_rs) +
                                      "; a smaller tol_wall at stage 4 may help");
      put(v, solder_or_throw(ctx, spec_for(ctx, b, n - L.p2, ctx.eps_rs, off, g_star), 5, s, j));
      const GridFunction W = dirichlet(n, std::move(v));
      ResidualRecord rec = make_record(5, s, j, family.thetas[j]);
      rec.predictor_norm = c0(W.values(), prev.values());
      GridFunction U = correct(ctx, W, corrector_direction(f, W, ctx.params.delta1p()), 5, s, j, rec).u;
      rec.residual = residual(f, U, m);
      rec.step_norm = c0(U.values(), prev.values());
      rec.pin_error = pin_error(L, U.values(), us);
      run.records.push_back(rec);
      prev = std::move(U);
    }
    run.u = std::move(prev);
    return run;
  });
  return with_samples(family, runs, trace);
}

HomotopyTrace contract(const Nonlinearity& f, int m, double x_m, const LoopFamily& family,
                       const ContractionParams& params) {
  validate(params, m, family.n);
  validate(f, family, params.tol_angle);
  HomotopyTrace trace;
  trace.m = m;
  trace.x_m = x_m;
  trace.params = params;
  trace.stages.push_back(family);
  StageContext ctx;
  try {
    ctx = make_context(f, m, x_m, params, family.n);
  } catch (const StageError& e) {
    throw ContractionAbort(e, std::move(trace));
  }
  const StageLayout& L = ctx.layout;
  const int n = family.n;
  trace.eta = ctx.eta;
  try {
    trace.stages.push_back(step1_flatten(ctx, trace.stages.back(), trace));
    trace.stages.push_back(step2_anchor_ends(ctx, trace.stages.back(), trace));
    trace.u_star = build_anchor(ctx, trace.stages.back());
    const Vector& us = trace.u_star->values();
    for (auto& r : trace.records)
      if (r.stage == 2 && r.s == 2.0) r.pin_error = pin_error(L, trace.stages[2].samples[r.theta_index].values(), us);
    const double r_star = residual(f, *trace.u_star, m);
    if (!(std::abs(r_star) <= params.tol_angle))
      throw StageError(2, 2.0, -1, "anchor u_* is not in C_m: residual " + fmt(r_star));
    trace.stages.push_back(step3_polynomialize(ctx, trace.stages.back(), *trace.u_star, trace));
    for (const auto& u : trace.stages.back().samples)
      trace.stage3_C = std::max(trace.stage3_C, u.values().cwiseAbs().maxCoeff());
    trace.stages.push_back(step4_squeeze(ctx, trace.stages.back(), *trace.u_star, trace));
    trace.stages.push_back(step5_collapse(ctx, trace.stages.back(), *trace.u_star, trace));
  } catch (const StageError& e) {
    throw ContractionAbort(e, std::move(trace));
  }

  const Vector& us = trace.u_star->values();
  const double h = kPi / n;
  const double C = trace.stage3_C;
  const double solder_width = (L.p1 - L.p2) * h;
  Certification& cert = trace.certification;
  cert.c0_premise = cert.l1_premise = true;
  for (std::size_t j = 0; j < trace.stages[4].samples.size(); ++j) {
    const Vector d = (trace.stages[4].samples[j].values() - us).cwiseAbs();
    trace.c0_to_ustar.push_back(d.maxCoeff());
    trace.l1_to_ustar.push_back(integrate(d, h));
    trace.l1_bound.push_back((2 * C + 1) * (trace.mu_AT_end[j] + trace.mu_AI_end[j] + solder_width));
    cert.c0_premise = cert.c0_premise && trace.c0_to_ustar[j] < 2 * C + 1;
    cert.l1_premise = cert.l1_premise && trace.l1_to_ustar[j] <= trace.l1_bound[j];
  }

  cert.stage0_matches = trace.stages[0].samples.size() == family.samples.size();
  for (std::size_t j = 0; cert.stage0_matches && j < family.samples.size(); ++j)
    cert.stage0_matches = trace.stages[0].samples[j].values() == family.samples[j].values();
  cert.corrections_bounded = true;
  const double ds = 1.0 / params.s_steps;
  for (const auto& r : trace.records) {
    cert.max_residual = std::max(cert.max_residual, std::abs(r.residual));
    if (r.s >= 2.0) cert.max_pin_error = std::max(cert.max_pin_error, r.pin_error);
    if (!(r.correction_norm <= 10 * ds)) cert.corrections_bounded = false;
  }
  for (const auto& u : trace.stages[5].samples) cert.final_spread = std::max(cert.final_spread, c0(u.values(), us));
  cert.certified = cert.stage0_matches && cert.max_residual <= params.tol_angle &&
                   cert.final_spread <= params.final_tol && cert.max_pin_error == 0.0 && cert.corrections_bounded &&
                   cert.c0_premise && cert.l1_premise;
  return trace;
}

}  // namespace slcrit
