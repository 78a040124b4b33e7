// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "slcrit/contraction.hpp"
#include "slcrit/critical.hpp"
#include "slcrit/solder.hpp"

using namespace slcrit;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

GridFunction random_smooth(std::mt19937_64& rng, int n, double c0) {
  std::normal_distribution<double> g;
  double c[6];
  for (double& x : c) x = g(rng);
  auto u = GridFunction::sample(
      n,
      [&](double t) {
        double s = 0;
        for (int k = 1; k <= 6; ++k) s += c[k - 1] * std::sin(k * t) / k;
        return s;
      },
      true);
  return GridFunction(n, c0 / norm(u, NormKind::C0) * u.values(), true);
}

double closed_form_error(int n) {
  const auto f = Nonlinearity::parse("0");
  double e = 0;
  for (int m = 1; m <= 3; ++m) {
    const auto traj = omega_m(f, GridFunction::zero(n), m);
    for (int i = 0; i <= n; ++i) e = std::max(e, std::abs(traj.omega[i] - std::atan(m * i * pi / n)));
  }
  return e;
}

struct ConstantPotential {
  double residual;
  double v_end;
};

ConstantPotential constant_potential(const char* text, int m, int n) {
  const auto f = Nonlinearity::parse(text);
  const auto z = GridFunction::zero(n);
  return {residual(f, z, m), shoot(f, z).v[n]};
}

Outcome c1() {
  const auto t0 = std::chrono::steady_clock::now();
  const double e = closed_form_error(4096);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {e < 1e-8 && secs < 1.0, "max |omega_m - arctan(mt)| = " + sci(e) + " over m = 1..3, n = 4096"};
}

Outcome c2() {
  const auto a = constant_potential("x^3 - 4*x", 2, 2048);
  const auto b = constant_potential("x^3 - 9*x", 3, 2048);
  const bool ok = std::abs(a.residual) < 1e-8 && std::abs(a.v_end) < 1e-9 && std::abs(b.residual) < 1e-8 &&
                  std::abs(b.v_end) < 1e-9;
  return {ok, "m = 2: residual " + sci(a.residual) + ", v(pi) " + sci(a.v_end) + "; m = 3: residual " +
                  sci(b.residual) + ", v(pi) " + sci(b.v_end)};
}

Outcome c3() {
  struct Case {
    const char* f;
    int m;
  };
  double worst = 0;
  for (const Case c : {Case{"x^2/2", 1}, Case{"x^2/2", 2}, Case{"x^2/2", 3}, Case{"x^3 - 9*x", 2}, Case{"x^3/3 - 2*x", 1}}) {
    const auto f = Nonlinearity::parse(c.f);
    const double x_m = critical_abscissa(f, c.m, analyze(f, -10, 10, c.m));
    const int n = 2048;
    const double delta = 0.2;
    const auto u = ramp_constant(x_m, delta, n);
    const auto traj = omega_m(f, u, c.m);
    const UniformGrid g(n);
    const int i0 = static_cast<int>(std::ceil(delta / g.spacing())), i1 = n - i0;
    for (int i = i0; i <= i1; ++i)
      worst = std::max(worst, std::abs(traj.omega[i] - (traj.omega[i0] + c.m * (g.t(i) - g.t(i0)))));
  }
  return {worst < 1e-9, "max deviation from slope m on [delta, pi - delta] = " + sci(worst) + " (5 cases)"};
}

Outcome c4() {
  const auto f = Nonlinearity::parse("x^2/2");
  const int n = 2048;
  const auto u = GridFunction::zero(n);
  const auto one = GridFunction(n, Vector::Ones(n + 1), false);
  const double expect = -(pi * pi * pi / 3) / (pi * pi + 1);
  const double d = d_omega(f, u, 1, one, pi);
  const double eps = 1e-5;
  auto fd = [&](const GridFunction& base, const GridFunction& phi, const Nonlinearity& g) {
    const GridFunction up(n, base.values() + eps * phi.values(), false);
    const GridFunction um(n, base.values() - eps * phi.values(), false);
    return (omega_m(g, up, 1).end() - omega_m(g, um, 1).end()) / (2 * eps);
  };
  const double rel_closed = std::abs(d - expect) / std::abs(expect);
  const double rel_fd = std::abs(d - fd(u, one, f)) / std::abs(d);

  std::mt19937_64 rng(4);
  const auto g = Nonlinearity::parse("x^3/3 - 2*x");
  const auto base = random_smooth(rng, n, 1.5);
  double worst = 0;
  for (int k = 0; k < 10; ++k) {
    const auto phi = random_smooth(rng, n, 1.0);
    const double dk = d_omega(g, base, 1, phi, pi);
    worst = std::max(worst, std::abs(dk - fd(base, phi, g)) / std::abs(dk));
  }
  return {rel_closed < 1e-8 && rel_fd < 1e-5 && worst < 1e-5,
          "closed form rel err " + sci(rel_closed) + ", fd rel err " + sci(rel_fd) + ", 10 random phi max rel err " +
              sci(worst)};
}

Outcome c5() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto f = Nonlinearity::parse("x^2/2");
  const auto report = analyze(f, -30, 30, 3);
  bool ok = true;
  double worst = 0;
  for (int m = 1; m <= 3; ++m) {
    const auto u = find_in_Cm(f, m, report, 2048);
    const double r = residual(f, u, m);
    worst = std::max(worst, std::abs(r));
    ok = ok && std::abs(r) < 1e-10 && zero_count(omega_m(f, u, m)) == m;
  }
  bool exp_fails = false;
  try {
    const auto e = Nonlinearity::parse("exp(x)");
    find_in_Cm(e, 1, analyze(e, -10, 10, 3), 2048);
  } catch (const ProjectionError&) {
    exp_fails = true;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok && exp_fails && secs < 5.0, "max |residual| " + sci(worst) + ", zero counts match, exp(x) " +
                                             (exp_fails ? "refused" : "NOT refused")};
}

Outcome c6() {
  const auto f = Nonlinearity::parse("x^2/2");
  const int n = 2048;
  const UniformGrid g(n);
  auto spec = make_solder_spec(f, 1, -1.0, n, g.nearest(pi / 4 + 0.05), n / 2);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> h(-spec.eps, spec.eps);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    spec.h0 = h(rng);
    spec.h1 = h(rng);
    const auto seg = xi_solder(f, spec);
    worst = std::max(worst, std::abs(angle_through(f, 1, seg, spec.t0() + spec.h0) - (spec.t1() + spec.h1)));
  }
  bool constant = true;
  for (double hh : {0.0, 0.5 * spec.eps, -0.9 * spec.eps}) {
    spec.h0 = spec.h1 = hh;
    const auto seg = xi_solder(f, spec);
    for (Eigen::Index k = 0; k < seg.values.size(); ++k) constant = constant && seg.values[k] == -1.0;
  }
  return {worst < 1e-8 && constant,
          "eps = " + sci(spec.eps) + ", max endpoint angle error " + sci(worst) + ", Xi(h,h) == x_m " +
              (constant ? "exactly" : "NOT exactly")};
}

Outcome c7() {
  const auto f = Nonlinearity::parse("x^2/2");
  const int n = 2048;
  const auto base = find_in_Cm(f, 1, analyze(f, -30, 30, 1), n);
  const UniformGrid g(n);
  const int i0 = g.nearest(pi / 4 + 0.05), i1 = n / 2;
  std::mt19937_64 rng(7);
  double worst = 0;
  for (int k = 0; k < 10; ++k) {
    const auto bump = random_smooth(rng, n, 1e-2);
    const auto u = project(f, GridFunction(n, base.values() + bump.values(), true), 1).u;
    const auto traj = omega_m(f, u, 1);
    AngleProfile p{n, i0, traj.omega.segment(i0, i1 - i0 + 1), Vector()};
    const auto seg = reconstruct_u(f, 1, p, u[i0]);
    worst = std::max(worst, (seg.values - u.values().segment(i0, i1 - i0 + 1)).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-6, "max C0 roundtrip error " + sci(worst) + " over 10 perturbed members"};
}

struct Fixture {
  Nonlinearity f = Nonlinearity::parse("x^2/2");
  GridFunction base = find_in_Cm(f, 1, analyze(f, -30, 30, 1), 2048);

  LoopFamily loop(int samples, double amplitude, std::uint64_t seed) const {
    LoopOptions o;
    o.samples = samples;
    o.amplitude = amplitude;
    o.seed = seed;
    return make_loop(f, 1, base, o);
  }
};

const Fixture& fixture() {
  static const Fixture fx;
  return fx;
}

std::string certificate(const HomotopyTrace& t) {
  const auto& c = t.certification;
  return "max residual " + sci(c.max_residual) + ", spread " + sci(c.final_spread) + ", pin error " +
         sci(c.max_pin_error);
}

bool contract_ok(const HomotopyTrace& t) {
  const auto& c = t.certification;
  return c.certified && c.max_residual <= 1e-6 && c.final_spread <= 1e-6 && c.max_pin_error == 0.0;
}

Outcome c8() {
  const auto& fx = fixture();
  const auto t0 = std::chrono::steady_clock::now();
  const auto loop = fx.loop(32, 1e-2, 0);
  const auto trace = contract(fx.f, 1, -1.0, loop, default_params(1, 2048));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto pair = fx.loop(2, 1e-2, 1);
  const auto trace2 = contract(fx.f, 1, -1.0, pair, default_params(1, 2048));
  return {contract_ok(trace) && contract_ok(trace2) && secs < 300,
          "loop: " + certificate(trace) + " in " + sci(secs) + " s; pair: " + certificate(trace2)};
}

Outcome c9() {
  const auto& fx = fixture();
  bool ok = true;
  std::string detail;
  for (double amplitude : {1e-2, 0.3}) {
    const auto loop = fx.loop(32, amplitude, 0);
    double prev = std::numeric_limits<double>::infinity();
    detail += (detail.empty() ? "" : "; ") + std::string("amplitude ") + sci(amplitude) + ":";
    for (double tol : {0.2, 0.1, 0.05, 0.025}) {
      auto p = default_params(1, 2048);
      p.tol_wall = tol;
      try {
        const double mu = contract(fx.f, 1, -1.0, loop, p).max_mu_AT_end();
        ok = ok && mu <= prev;
        prev = mu;
        detail += " " + sci(mu);
      } catch (const ContractionAbort& e) {
        ok = false;
        detail += std::string(" abort(") + e.what() + ")";
      }
    }
  }
  return {ok, "max mu(A_T) at s = 4 for tol_wall 0.2, 0.1, 0.05, 0.025: " + detail};
}

Outcome c10() {
  // The angle residual of a constant potential -m^2 has zero truncation error
  // (the right-hand side is identically m); it is reported, not ratio-tested.
  const double e1 = closed_form_error(1024), e2 = closed_form_error(2048);
  const auto a1 = constant_potential("x^3 - 4*x", 2, 1024), a2 = constant_potential("x^3 - 4*x", 2, 2048);
  const auto b1 = constant_potential("x^3 - 9*x", 3, 1024), b2 = constant_potential("x^3 - 9*x", 3, 2048);
  const double r1 = e1 / e2, r2 = std::abs(a1.v_end / a2.v_end), r3 = std::abs(b1.v_end / b2.v_end);
  const bool roundoff = std::max({std::abs(a1.residual), std::abs(a2.residual), std::abs(b1.residual),
                                  std::abs(b2.residual)}) < 1e-12;
  return {r1 >= 8 && r2 >= 8 && r3 >= 8 && roundoff,
          "ratios n=1024/2048: omega " + sci(r1) + ", v(pi) m=2 " + sci(r2) + ", v(pi) m=3 " + sci(r3) +
              "; angle residuals at round-off (" + sci(std::abs(a2.residual)) + ", " + sci(std::abs(b2.residual)) +
              ")"};
}

int run(const std::string& args) {
  const std::string cmd = std::string("'") + SLCRIT_BIN + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

bool same_tree(const fs::path& a, const fs::path& b, int& files) {
  files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) return false;
    ++files;
  }
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b))) return false;
  return true;
}

Outcome c11() {
  const fs::path dir = fs::temp_directory_path() / "slcrit_acceptance";
  fs::remove_all(dir);
  const std::string q = "'" + dir.string() + "/";
  const std::string loop = "loop --f 'x^2/2' --m 1 --samples 16 --seed 11 --out ";
  if (run(loop + q + "l1'") != 0 || run(loop + q + "l2'") != 0) return {false, "loop command failed"};
  const std::string contract = "contract --f 'x^2/2' --seed 11 " + q + "l1/loop.json' --out ";
  if (run(contract + q + "c1' --threads 1") != 0 || run(contract + q + "c4' --threads 4") != 0)
    return {false, "contract command failed"};
  int nl = 0, nc = 0;
  const bool loops = same_tree(dir / "l1", dir / "l2", nl);
  const bool traces = same_tree(dir / "c1", dir / "c4", nc);
  fs::remove_all(dir);
  return {loops && traces, std::to_string(nl) + " loop file(s) " + (loops ? "identical" : "DIFFER") + ", " +
                               std::to_string(nc) + " trace files with threads 1 vs 4 " +
                               (traces ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"closed-form angle", c1},        {"constant-potential criticality", c2},
      {"slope-m law", c3},              {"derivative formula", c4},
      {"constructive members", c5},     {"solder contract", c6},
      {"reconstruction roundtrip", c7}, {"contraction end-to-end", c8},
      {"wall tolerance monotonicity", c9}, {"grid convergence", c10},
      {"determinism", c11},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2zu %s  %s: %s (%.2f s)\n", k + 1, o.pass ? "PASS" : "FAIL", criteria[k].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
