#include "slcrit/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace slcrit {

using nlohmann::json;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_grid_csv(std::ostream& out, const GridFunction& u) {
  const UniformGrid grid = u.grid();
  out << "t,u\n";
  for (int i = 0; i <= u.n(); ++i) out << format_double(grid.t(i)) << ',' << format_double(u[i]) << '\n';
}

void write_grid_csv(const std::filesystem::path& path, const GridFunction& u) {
  std::ostringstream s;
  write_grid_csv(s, u);
  write_text(path, s.str());
}

namespace {

double parse_number(std::string_view text, int line) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(x))
    throw IoError("line " + std::to_string(line) + ": '" + std::string(text) + "' is not a finite number");
  return x;
}

}  // namespace

GridFunction read_grid_csv(std::istream& in, int expected_n) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV input");
  if (line.rfind("t,", 0) != 0) throw IoError("CSV header must start with 't,'");
  std::vector<double> ts, us;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw IoError("line " + std::to_string(lineno) + ": expected two comma-separated columns");
    ts.push_back(parse_number(std::string_view(line).substr(0, comma), lineno));
    us.push_back(parse_number(std::string_view(line).substr(comma + 1), lineno));
  }
  const int rows = static_cast<int>(us.size());
  if (expected_n > 0 && rows != expected_n + 1)
    throw IoError("expected " + std::to_string(expected_n + 1) + " rows for n = " + std::to_string(expected_n) +
                  ", got " + std::to_string(rows));
  const int n = rows - 1;
  if (n < 16 || n % 2 != 0) throw IoError("row count " + std::to_string(rows) + " does not match an even grid n >= 16");
  const double h = std::numbers::pi / n;
  for (int i = 0; i <= n; ++i)
    if (std::abs(ts[i] - i * h) > 1e-9) throw IoError("row " + std::to_string(i) + ": t is not the grid node i*pi/n");
  Vector v = Eigen::Map<Vector>(us.data(), rows);
  const bool dirichlet = v[0] == 0.0 && v[n] == 0.0;
  return GridFunction(n, std::move(v), dirichlet);
}

GridFunction read_grid_csv(const std::filesystem::path& path, int expected_n) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_grid_csv(in, expected_n);
}

void write_trajectory_csv(std::ostream& out, const AngleTrajectory& traj) {
  const double h = std::numbers::pi / traj.n;
  out << "t,omega\n";
  for (int i = traj.first; i <= traj.last(); ++i)
    out << format_double(i * h) << ',' << format_double(traj.at_node(i)) << '\n';
}

json to_json(const TamenessReport& r) {
  json abscissas = json::array();
  for (const auto& set : r.abscissas) {
    json roots = json::array();
    for (const auto& a : set.roots) roots.push_back({{"x", a.x}, {"f2", a.f2}});
    abscissas.push_back({{"m", set.m}, {"roots", roots}});
  }
  return {{"sigma", r.sigma},
          {"abscissas", abscissas},
          {"appropriate", r.appropriate},
          {"appropriate_reason", r.appropriate_reason},
          {"tame", r.tame},
          {"tame_reason", r.tame_reason},
          {"scan_window", {r.x_lo, r.x_hi}}};
}

json to_json(const MembershipResult& r) {
  return {{"residual", r.residual}, {"member", r.member}, {"v_end", r.v_end},
          {"m", r.m},               {"n", r.n},           {"tol_angle", r.tol_angle}};
}

json to_json(const LoopFamily& family) {
  json samples = json::array();
  for (const auto& u : family.samples) samples.push_back(std::vector<double>(u.values().begin(), u.values().end()));
  return {{"m", family.m}, {"n", family.n}, {"thetas", family.thetas}, {"samples", samples}};
}

json to_json(const ContractionParams& p, int m, double x_m, double eta) {
  return {{"m", m},
          {"x_m", x_m},
          {"delta0", p.delta0},
          {"delta1", p.delta1},
          {"delta2", p.delta2},
          {"delta2_prime", p.delta2p()},
          {"delta1_prime", p.delta1p()},
          {"delta0_prime", p.delta0p()},
          {"eta", eta},
          {"tol_wall", p.tol_wall},
          {"s_steps", p.s_steps},
          {"poly_degree", p.poly_degree},
          {"tol_angle", p.tol_angle},
          {"final_tol", p.final_tol}};
}

json to_json(const Certification& c) {
  return {{"stage0_matches", c.stage0_matches},
          {"max_residual", c.max_residual},
          {"final_spread", c.final_spread},
          {"max_pin_error", c.max_pin_error},
          {"corrections_bounded", c.corrections_bounded},
          {"c0_premise", c.c0_premise},
          {"l1_premise", c.l1_premise},
          {"certified", c.certified}};
}

LoopFamily loop_from_json(const json& j) {
  try {
    LoopFamily fam;
    fam.m = j.at("m").get<int>();
    fam.n = j.at("n").get<int>();
    fam.thetas = j.at("thetas").get<std::vector<double>>();
    for (const auto& row : j.at("samples")) {
      const auto values = row.get<std::vector<double>>();
      if (static_cast<int>(values.size()) != fam.n + 1)
        throw IoError("loop sample has " + std::to_string(values.size()) + " values, expected " +
                      std::to_string(fam.n + 1));
      Vector v = Eigen::Map<const Vector>(values.data(), values.size());
      fam.samples.emplace_back(fam.n, std::move(v), true);
    }
    if (fam.samples.size() != fam.thetas.size()) throw IoError("loop JSON: thetas and samples differ in length");
    if (fam.m < 1) throw IoError("loop JSON: m must be positive");
    return fam;
  } catch (const json::exception& e) {
    throw IoError(std::string("loop JSON: ") + e.what());
  } catch (const GridError& e) {
    throw IoError(std::string("loop JSON: ") + e.what());
  }
}

LoopFamily read_loop(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(std::string("loop JSON: ") + e.what());
  }
  return loop_from_json(j);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_trace(const std::filesystem::path& dir, const HomotopyTrace& trace) {
  std::filesystem::create_directories(dir);
  write_text(dir / "params.json", to_json(trace.params, trace.m, trace.x_m, trace.eta).dump(2) + "\n");
  for (std::size_t k = 0; k < trace.stages.size(); ++k)
    for (std::size_t j = 0; j < trace.stages[k].samples.size(); ++j)
      write_grid_csv(dir / ("stage" + std::to_string(k)) / ("theta" + std::to_string(j) + ".csv"),
                     trace.stages[k].samples[j]);
  std::ostringstream r;
  r << "stage,s,theta,residual,mu_AT,correction_norm\n";
  for (const auto& rec : trace.records)
    r << rec.stage << ',' << format_double(rec.s) << ',' << format_double(rec.theta) << ','
      << format_double(rec.residual) << ',' << format_double(rec.mu_AT) << ',' << format_double(rec.correction_norm)
      << '\n';
  write_text(dir / "residuals.csv", r.str());
  if (trace.u_star) write_grid_csv(dir / "ustar.csv", *trace.u_star);
  if (trace.stages.size() == 6) {
    json cert = to_json(trace.certification);
    cert["max_mu_AT_end"] = trace.max_mu_AT_end();
    cert["fit_degree"] = trace.fit_degree;
    cert["fit_error"] = trace.fit_error;
    write_text(dir / "certification.json", cert.dump(2) + "\n");
  }
}

}  // namespace slcrit
