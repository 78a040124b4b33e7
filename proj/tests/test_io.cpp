#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "slcrit/io.hpp"
#include "slcrit/svg.hpp"

using namespace slcrit;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("slcrit_test_io_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("format_double round trips") {
  for (double x : {0.0, -1.0, pi, 1e-300, -2.5e17, 0.1}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("grid CSV round trip") {
  const auto u = GridFunction::sample(64, [](double t) { return std::sin(t) * std::exp(t); }, true);
  std::stringstream s;
  write_grid_csv(s, u);
  const std::string text = s.str();
  CHECK(text.rfind("t,u\n", 0) == 0);
  const auto back = read_grid_csv(s, 64);
  CHECK(back.values() == u.values());
  CHECK(back.dirichlet());

  std::stringstream again;
  write_grid_csv(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("grid CSV errors") {
  const auto u = GridFunction::zero(32);
  std::stringstream s;
  write_grid_csv(s, u);
  const std::string good = s.str();

  std::stringstream wrong_n(good);
  CHECK_THROWS_AS(read_grid_csv(wrong_n, 64), IoError);

  std::stringstream no_header("0,0\n1,1\n");
  CHECK_THROWS_AS(read_grid_csv(no_header), IoError);

  std::string bad = good;
  bad.replace(bad.find("\n", 4) + 1, 1, "x");
  std::stringstream bad_number(bad);
  CHECK_THROWS_AS(read_grid_csv(bad_number), IoError);

  std::stringstream odd("t,u\n0,0\n1,0\n");
  CHECK_THROWS_AS(read_grid_csv(odd), IoError);

  std::ostringstream shifted;
  shifted << "t,u\n";
  for (int i = 0; i <= 32; ++i) shifted << format_double(i * pi / 32 + 1e-3) << ",0\n";
  std::stringstream sh(shifted.str());
  CHECK_THROWS_AS(read_grid_csv(sh), IoError);

  CHECK_THROWS_AS(read_grid_csv(fs::path("/nonexistent/u.csv")), IoError);
}

TEST_CASE("trajectory CSV") {
  const auto f = Nonlinearity::parse("0");
  const auto traj = omega_m(f, GridFunction::zero(16), 2);
  std::ostringstream s;
  write_trajectory_csv(s, traj);
  std::istringstream in(s.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,omega");
  int rows = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const double t = std::stod(line.substr(0, comma)), w = std::stod(line.substr(comma + 1));
    CHECK(w == traj.omega[rows]);
    CHECK(t == rows * pi / 16);
    ++rows;
  }
  CHECK(rows == 17);
}

TEST_CASE("report and membership JSON") {
  const auto f = Nonlinearity::parse("x^2/2");
  const auto j = to_json(analyze(f, -30, 30, 3));
  CHECK(j["sigma"] == nlohmann::json::array({1, 2, 3}));
  CHECK(j["tame"] == true);
  CHECK(j["abscissas"][1]["m"] == 2);
  CHECK(j["abscissas"][1]["roots"][0]["x"].get<double>() == doctest::Approx(-4.0));
  CHECK(j["scan_window"][0] == -30.0);

  const auto mj = to_json(membership(Nonlinearity::parse("x^3 - 4*x"), GridFunction::zero(256), 2));
  for (const char* key : {"residual", "member", "v_end", "m", "n", "tol_angle"}) CHECK(mj.contains(key));
  CHECK(mj["member"] == true);
}

TEST_CASE("loop JSON round trip and errors") {
  LoopFamily fam;
  fam.m = 1;
  fam.n = 16;
  fam.thetas = {0.0, pi};
  fam.samples = {GridFunction::zero(16), GridFunction::sample(16, [](double t) { return std::sin(t); }, true)};
  const auto j = to_json(fam);
  const auto back = loop_from_json(j);
  CHECK(back.m == 1);
  CHECK(back.thetas == fam.thetas);
  CHECK(back.samples[1].values() == fam.samples[1].values());

  auto short_row = j;
  short_row["samples"][0].erase(0);
  CHECK_THROWS_AS(loop_from_json(short_row), IoError);
  auto missing = j;
  missing.erase("thetas");
  CHECK_THROWS_AS(loop_from_json(missing), IoError);
  auto not_dirichlet = j;
  not_dirichlet["samples"][0][0] = 1.0;
  CHECK_THROWS_AS(loop_from_json(not_dirichlet), IoError);

  const auto dir = scratch("loop");
  write_text(dir / "bad.json", "{\"m\": 1, \"n\": ");
  CHECK_THROWS_AS(read_loop(dir / "bad.json"), IoError);
  write_text(dir / "good.json", j.dump());
  CHECK(read_loop(dir / "good.json").samples.size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("svg plot") {
  const auto f = Nonlinearity::parse("x^2/2");
  const auto u = ramp_constant(-1.0, 0.3, 128);
  const auto traj = omega_m(f, u, 1);
  const std::string svg = plot_u_omega(u, traj, "test", 0.5);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("viewBox=\"0 0 800 600\"") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  CHECK(svg.find("#b22") != std::string::npos);
  CHECK(plot_u_omega(u, traj, "test", 0.5) == svg);
  CHECK(plot_u_omega(u, traj, "test").find("#b22") == std::string::npos);
}
