#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "slcrit/contraction.hpp"
#include "slcrit/critical.hpp"
#include "slcrit/io.hpp"
#include "slcrit/nonlinearity.hpp"
#include "slcrit/pruefer.hpp"
#include "slcrit/solder.hpp"
#include "slcrit/svg.hpp"

namespace fs = std::filesystem;
using namespace slcrit;

namespace {

enum Exit { kOk = 0, kParse = 2, kAnalysis = 3, kInput = 4, kNoBracket = 5, kLoop = 6, kAbort = 7 };

struct Config {
  std::string f_expr;
  int m = 1;
  int n = 2048;
  std::vector<double> range{-10.0, 10.0};
  int mmax = 5;
  std::uint64_t seed = 0;
  std::string out;
  bool plot = false;
  bool frames = false;
  int threads = 0;
  double tol_angle = 1e-8;
  std::optional<double> tol_wall, delta1, delta2, eta;
  std::optional<int> s_steps, poly_degree;
  double amplitude = 1e-2;
  int samples = 32;
  std::string input;
};

int default_threads() {
  if (const char* env = std::getenv("SLCRIT_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Writes to out/name when --out is set, otherwise to stdout.
void emit(const Config& c, const std::string& name, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
  } else {
    write_text(fs::path(c.out) / name, text);
  }
}

TamenessReport analysis(const Config& c, const Nonlinearity& f) {
  if (c.range.size() != 2 || !(c.range[0] < c.range[1]))
    throw std::invalid_argument("--range needs LO < HI");
  return analyze(f, c.range[0], c.range[1], std::max(c.mmax, c.m));
}

int cmd_analyze(const Config& c) {
  const Nonlinearity f = Nonlinearity::parse(c.f_expr);
  emit(c, "report.json", to_json(analysis(c, f)).dump(2) + "\n");
  return kOk;
}

int cmd_omega(const Config& c) {
  const Nonlinearity f = Nonlinearity::parse(c.f_expr);
  const GridFunction u = read_grid_csv(fs::path(c.input), c.n);
  const AngleTrajectory traj = omega_m(f, u, c.m);
  std::ostringstream csv;
  write_trajectory_csv(csv, traj);
  emit(c, "omega.csv", csv.str());
  MembershipTolerance tol;
  tol.angle = c.tol_angle;
  const std::string report = to_json(membership(f, u, c.m, tol)).dump(2) + "\n";
  if (c.out.empty()) {
    std::cerr << report;
  } else {
    write_text(fs::path(c.out) / "membership.json", report);
  }
  if (c.plot) {
    const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
    write_text(dir / "omega.svg", plot_u_omega(u, traj, "u and omega_" + std::to_string(c.m)));
  }
  return kOk;
}

int cmd_find(const Config& c) {
  const Nonlinearity f = Nonlinearity::parse(c.f_expr);
  const TamenessReport report = analysis(c, f);
  const GridFunction u = find_in_Cm(f, c.m, report, c.n);
  std::ostringstream csv;
  write_grid_csv(csv, u);
  emit(c, "member.csv", csv.str());
  return kOk;
}

int cmd_project(const Config& c) {
  const Nonlinearity f = Nonlinearity::parse(c.f_expr);
  const GridFunction u = read_grid_csv(fs::path(c.input), c.n);
  const Projection p = project(f, u, c.m);
  std::ostringstream csv;
  write_grid_csv(csv, p.u);
  emit(c, "projected.csv", csv.str());
  std::cerr << "tau = " << format_double(p.tau) << ", iterations = " << p.iterations << '\n';
  return kOk;
}

double anchor_abscissa(const Config& c, const Nonlinearity& f, const TamenessReport& report) {
  if (!report.contains(c.m))
    throw AnalysisError("m = " + std::to_string(c.m) + " is not in sigma for f = " + c.f_expr);
  return critical_abscissa(f, c.m, report);
}

int cmd_loop(const Config& c) {
  const Nonlinearity f = Nonlinearity::parse(c.f_expr);
  const TamenessReport report = analysis(c, f);
  const GridFunction base = find_in_Cm(f, c.m, report, c.n);
  LoopOptions opt;
  opt.samples = c.samples;
  opt.amplitude = c.amplitude;
  opt.seed = c.seed;
  const LoopFamily fam = make_loop(f, c.m, base, opt);
  emit(c, "loop.json", to_json(fam).dump() + "\n");
  return kOk;
}

void write_frames(const fs::path& dir, const Nonlinearity& f, const HomotopyTrace& trace) {
  for (std::size_t k = 0; k < trace.frames.size(); ++k) {
    const Frame& fr = trace.frames[k];
    const AngleTrajectory traj = omega_m(f, fr.u, trace.m);
    const double wall = (4.0 - fr.s) * trace.m * std::numbers::pi;
    write_text(dir / "frames" / ("stage4_" + std::to_string(k) + ".svg"),
               plot_u_omega(fr.u, traj, "stage 4, s = " + format_double(fr.s), wall));
  }
}

int cmd_contract(const Config& c) {
  if (c.out.empty()) throw std::invalid_argument("contract needs --out DIR");
  const Nonlinearity f = Nonlinearity::parse(c.f_expr);
  const LoopFamily fam = read_loop(fs::path(c.input));
  Config cc = c;
  cc.m = fam.m;
  const TamenessReport report = analysis(cc, f);
  if (!report.tame) throw AnalysisError("f is not tame: " + report.tame_reason);
  const double x_m = anchor_abscissa(cc, f, report);

  ContractionParams p = default_params(fam.m, fam.n);
  if (c.delta1) {
    p.delta1 = snap_delta1(*c.delta1, fam.n);
    p.delta2 = p.delta1 / 8;
    p.delta0 = 2.5 * p.delta1;
  }
  if (c.delta2) p.delta2 = *c.delta2;
  if (c.eta) p.eta = *c.eta;
  if (c.tol_wall) p.tol_wall = *c.tol_wall;
  if (c.s_steps) p.s_steps = *c.s_steps;
  if (c.poly_degree) p.poly_degree = *c.poly_degree;
  p.threads = c.threads > 0 ? c.threads : default_threads();
  validate(p, fam.m, fam.n);

  const fs::path dir(c.out);
  try {
    const HomotopyTrace trace = contract(f, fam.m, x_m, fam, p);
    write_trace(dir, trace);
    if (c.frames) write_frames(dir, f, trace);
    const Certification& cert = trace.certification;
    std::cout << "certification\n"
              << "  stage0 matches input:   " << (cert.stage0_matches ? "yes" : "no") << '\n'
              << "  max |residual|:         " << format_double(cert.max_residual) << '\n'
              << "  final spread (C0):      " << format_double(cert.final_spread) << '\n'
              << "  max pin error:          " << format_double(cert.max_pin_error) << '\n'
              << "  corrections bounded:    " << (cert.corrections_bounded ? "yes" : "no") << '\n'
              << "  C0 / L1 premises:       " << (cert.c0_premise ? "yes" : "no") << " / "
              << (cert.l1_premise ? "yes" : "no") << '\n'
              << "  max mu(A_T) at s = 4:   " << format_double(trace.max_mu_AT_end()) << '\n'
              << "  certified:              " << (cert.certified ? "yes" : "no") << '\n';
    return cert.certified ? kOk : kAbort;
  } catch (const ContractionAbort& e) {
    write_trace(dir, e.trace());
    std::cerr << "stage " << e.cause().stage() << " aborted at s = " << format_double(e.cause().s()) << ": "
              << e.what() << "\npartial trace written to " << dir.string() << '\n';
    return kAbort;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical sets of nonlinear Sturm-Liouville operators"};
  app.require_subcommand(1);
  Config c;

  auto common = [&](CLI::App* sub, bool needs_m) {
    sub->add_option("--f", c.f_expr, "nonlinearity f(x)")->required();
    if (needs_m) sub->add_option("--m", c.m, "m-argument index")->check(CLI::PositiveNumber);
    sub->add_option("--range", c.range, "scan window LO HI")->expected(2);
    sub->add_option("--mmax", c.mmax, "largest m for sigma")->check(CLI::PositiveNumber);
    sub->add_option("--out", c.out, "output directory");
  };

  auto* an = app.add_subcommand("analyze", "classify f and list sigma");
  common(an, false);

  auto* om = app.add_subcommand("omega", "m-argument of a grid function");
  common(om, true);
  om->add_option("u_csv", c.input, "grid function CSV")->required();
  om->add_option("--n", c.n, "expected grid size");
  om->add_option("--tol-angle", c.tol_angle, "membership tolerance");
  om->add_flag("--plot", c.plot, "write omega.svg");

  auto* fi = app.add_subcommand("find", "construct a member of C_m");
  common(fi, true);
  fi->add_option("--n", c.n, "grid size");

  auto* pr = app.add_subcommand("project", "project onto C_m");
  common(pr, true);
  pr->add_option("u_csv", c.input, "grid function CSV")->required();
  pr->add_option("--n", c.n, "expected grid size");

  auto* lo = app.add_subcommand("loop", "build a loop family in C_m");
  common(lo, true);
  lo->add_option("--n", c.n, "grid size");
  lo->add_option("--seed", c.seed, "perturbation seed");
  lo->add_option("--amplitude", c.amplitude, "perturbation amplitude");
  lo->add_option("--samples", c.samples, "number of samples")->check(CLI::Range(2, 100000));

  auto* co = app.add_subcommand("contract", "contract a loop family to u_*");
  common(co, false);
  co->add_option("loop_json", c.input, "loop family JSON")->required();
  co->add_option("--threads", c.threads, "worker threads");
  co->add_option("--seed", c.seed, "unused; accepted for uniform configs");
  co->add_option("--tol-wall", c.tol_wall, "stage-4 wall tolerance");
  co->add_option("--s-steps", c.s_steps, "substeps per stage");
  co->add_option("--poly-degree", c.poly_degree, "stage-3 fit degree");
  co->add_option("--delta1", c.delta1, "stage-1 radius delta1");
  co->add_option("--delta2", c.delta2, "stage-1 radius delta2");
  co->add_option("--eta", c.eta, "stage-2 offset");
  co->add_flag("--frames", c.frames, "write stage-4 SVG frames");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParse;
  }

  try {
    if (an->parsed()) return cmd_analyze(c);
    if (om->parsed()) return cmd_omega(c);
    if (fi->parsed()) return cmd_find(c);
    if (pr->parsed()) return cmd_project(c);
    if (lo->parsed()) return cmd_loop(c);
    if (co->parsed()) return cmd_contract(c);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << '\n';
    return kAnalysis;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kAnalysis;
  } catch (const IoError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const GridError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const FamilyError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const ProjectionError& e) {
    std::cerr << "projection error: " << e.what() << '\n';
    return kNoBracket;
  } catch (const LoopError& e) {
    std::cerr << "loop error at theta = " << format_double(e.theta()) << ": " << e.what() << '\n';
    return kLoop;
  } catch (const ShootingOverflow& e) {
    std::cerr << "overflow: " << e.what() << '\n';
    return kAnalysis;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
