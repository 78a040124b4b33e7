#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "slcrit/critical.hpp"
#include "slcrit/pruefer.hpp"

using namespace slcrit;
using std::numbers::pi;

namespace {

const Nonlinearity& zero_f() {
  static const Nonlinearity f = Nonlinearity::parse("0");
  return f;
}
const Nonlinearity& cubic() {
  static const Nonlinearity f = Nonlinearity::parse("x^3 - 4*x");
  return f;
}
const Nonlinearity& quad() {
  static const Nonlinearity f = Nonlinearity::parse("x^2/2");
  return f;
}

GridFunction random_smooth(std::mt19937_64& rng, int n, double c0, int modes = 6) {
  std::normal_distribution<double> g;
  std::vector<double> c(modes);
  for (auto& x : c) x = g(rng);
  auto u = GridFunction::sample(
      n,
      [&](double t) {
        double s = 0;
        for (int k = 1; k <= modes; ++k) s += c[k - 1] * std::sin(k * t) / k;
        return s;
      },
      true);
  const double scale = c0 / norm(u, NormKind::C0);
  return GridFunction(n, scale * u.values(), true);
}

}  // namespace

TEST_CASE("shoot examples") {
  const auto u = GridFunction::sample(2048, [](double t) { return std::sin(3 * t); }, true);
  const auto s = shoot(zero_f(), u);
  const UniformGrid g(2048);
  double err = 0;
  for (int i = 0; i <= 2048; ++i) err = std::max({err, std::abs(s.v[i] - g.t(i)), std::abs(s.vp[i] - 1.0)});
  CHECK(err < 1e-10);

  const auto c = shoot(cubic(), GridFunction::zero(2048));
  CHECK(std::abs(c.v[2048]) < 1e-9);
  double cerr = 0;
  for (int i = 0; i <= 2048; ++i) cerr = std::max(cerr, std::abs(c.v[i] - std::sin(2 * g.t(i)) / 2));
  CHECK(cerr < 1e-9);
}

TEST_CASE("shoot step halving") {
  const auto u = ramp_constant(-1.0, 0.1, 2048);
  const double coarse = shoot(quad(), u).v[2048];
  const double fine = shoot(quad(), u.refined(2)).v[4096];
  CHECK(std::abs(coarse - fine) < 1e-8);
}

TEST_CASE("shooting overflow reports the abscissa") {
  const auto f = Nonlinearity::parse("exp(x)");
  const auto u = GridFunction(64, Vector::Constant(65, 800.0), false);
  CHECK_THROWS_AS(shoot(f, u), std::exception);
}

TEST_CASE("omega_m for the zero potential") {
  const auto u = GridFunction::zero(2048);
  const auto traj = omega_m(zero_f(), u, 2);
  const UniformGrid g(2048);
  double err = 0;
  for (int i = 0; i <= 2048; ++i) err = std::max(err, std::abs(traj.omega[i] - std::atan(2 * g.t(i))));
  CHECK(err < 1e-8);
  CHECK(zero_count(omega_m(zero_f(), u, 1)) == 0);
}

TEST_CASE("omega_m has slope m where f'(u) = -m^2") {
  for (int m : {1, 2, 3}) {
    const auto u = GridFunction(256, Vector::Constant(257, -double(m * m)), false);
    const auto traj = omega_m(quad(), u, m);
    const UniformGrid g(256);
    for (int i = 0; i <= 256; ++i) REQUIRE(std::abs(traj.omega[i] - m * g.t(i)) < 1e-12);
  }
  const auto c = omega_m(cubic(), GridFunction::zero(2048), 2);
  CHECK(std::abs(c.end() - 2 * pi) < 1e-8);
  CHECK(zero_count(c) == 2);
}

TEST_CASE("omega_local") {
  const auto u = ramp_constant(-1.0, 0.3, 1024);
  const auto global = omega_m(quad(), u, 1);
  const auto local = omega_local(quad(), u, 1, 0.0, 0.0, Direction::Forward);
  CHECK(local.omega == global.omega);

  // f'(u) = -1 on the flat part [0.3, pi - 0.3]; the local argument through
  // (t0, t0) is the line of slope 1.
  const int i0 = 128, i1 = 896;
  const double t0 = UniformGrid(1024).t(i0);
  const auto fwd = omega_local(quad(), u, 1, t0, t0, Direction::Forward);
  CHECK(fwd.first == i0);
  for (int i = i0; i <= i1; ++i) REQUIRE(std::abs(fwd.at_node(i) - UniformGrid(1024).t(i)) < 1e-12);

  const double t1 = UniformGrid(1024).t(i1);
  const auto bwd = omega_local(quad(), u, 1, t1, t1 + 0.01, Direction::Backward);
  CHECK(bwd.first == 0);
  CHECK(bwd.last() == i1);
  for (int i = i0; i <= i1; ++i) {
    const double t = UniformGrid(1024).t(i);
    const double expect = t + std::atan(std::tan(0.01));
    REQUIRE(std::abs(std::tan(bwd.at_node(i) - t) - std::tan(expect - t)) < 1e-3);
  }
  CHECK_THROWS(omega_local(quad(), u, 1, 0.1234, 0.0, Direction::Forward));
}

TEST_CASE("d_omega closed form") {
  const auto u = GridFunction::zero(2048);
  const auto one = GridFunction(2048, Vector::Ones(2049), false);
  const double expect = -(pi * pi * pi / 3) / (pi * pi + 1);
  CHECK(std::abs(d_omega(quad(), u, 1, one, pi) - expect) < 1e-8);

  const double eps = 1e-5;
  const auto up = GridFunction(2048, u.values() + eps * one.values(), false);
  const auto um = GridFunction(2048, u.values() - eps * one.values(), false);
  const double fd = (omega_m(quad(), up, 1).end() - omega_m(quad(), um, 1).end()) / (2 * eps);
  CHECK(std::abs(fd - expect) < 1e-6);

  CHECK(d_omega(quad(), u, 1, GridFunction::zero(2048), pi) == 0.0);
  const auto lin = Nonlinearity::parse("-3*x + 1");
  CHECK(d_omega(lin, u, 2, one, pi) == 0.0);
}

TEST_CASE("d_omega matches central differences on random directions") {
  std::mt19937_64 rng(17);
  const auto f = Nonlinearity::parse("x^3/3 - 2*x");
  const auto u = random_smooth(rng, 2048, 1.5);
  const int m = 1;
  for (int k = 0; k < 10; ++k) {
    const auto phi = random_smooth(rng, 2048, 1.0);
    const double eps = 1e-5;
    const auto up = GridFunction(2048, u.values() + eps * phi.values(), true);
    const auto um = GridFunction(2048, u.values() - eps * phi.values(), true);
    const double fd = (omega_m(f, up, m).end() - omega_m(f, um, m).end()) / (2 * eps);
    const double d = d_omega(f, u, m, phi, pi);
    INFO("direction " << k << ": fd = " << fd << " d = " << d);
    CHECK(std::abs(d - fd) <= 1e-5 * std::abs(fd) + 1e-9);
  }
}

TEST_CASE("right-hand side near the line of slope m") {
  const auto u = ramp_constant(-4.0, 0.4, 2048);
  const auto q = potential(quad(), u);
  const int m = 2;
  const auto traj = omega_m(q, m);
  int checked = 0;
  for (int i = 0; i <= 2048; ++i) {
    const double w = traj.omega[i];
    const double rhs = angle_rhs(m, q.node[i], w);
    if (std::abs(std::sin(w)) < 1e-6 || std::abs(q.node[i] + m * m) < 1e-6) {
      REQUIRE(std::abs(rhs - m) < 1e-5);
      ++checked;
    }
    if (q.node[i] < -m * m) REQUIRE(rhs >= m);
    if (q.node[i] > -m * m) REQUIRE(rhs <= m);
  }
  CHECK(checked > 100);
}

TEST_CASE("L1 Lipschitz bound on the end angle") {
  // Gronwall on the angle equation with |q| <= 2, f'' = 1:
  //   |d omega(pi)| <= exp(K pi) / m * ||u - w||_L1,  K = (m^2 + 2) / m.
  std::mt19937_64 rng(29);
  for (int m : {1, 2}) {
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
      const auto u = random_smooth(rng, 1024, 2.0);
      const auto w = random_smooth(rng, 1024, 2.0);
      const double dw = std::abs(omega_m(quad(), u, m).end() - omega_m(quad(), w, m).end());
      const double l1 = distance(u, w, NormKind::L1);
      worst = std::max(worst, dw / l1);
    }
    const double bound = std::exp((m * m + 2.0) / m * pi) / m;
    INFO("m = " << m << " worst ratio " << worst);
    CHECK(worst > 0);
    CHECK(worst <= bound);
  }
}

TEST_CASE("tan identity between shooting and the m-argument") {
  std::mt19937_64 rng(5);
  const auto u = random_smooth(rng, 2048, 3.0);
  for (int m : {1, 2, 3}) {
    const auto s = shoot(quad(), u);
    const auto traj = omega_m(quad(), u, m);
    for (int i = 0; i <= 2048; ++i) {
      const double rho = std::hypot(m * s.v[i], s.vp[i]);
      const double cross = m * s.v[i] * std::cos(traj.omega[i]) - s.vp[i] * std::sin(traj.omega[i]);
      REQUIRE(std::abs(cross) < 1e-8 * rho);
    }
  }
}

TEST_CASE("floor(omega / pi) never decreases") {
  std::mt19937_64 rng(41);
  for (int k = 0; k < 10; ++k) {
    const auto u = random_smooth(rng, 1024, 12.0);
    for (int m : {1, 2, 3}) {
      const auto traj = omega_m(quad(), u, m);
      double prev = -1;
      for (int i = 0; i <= 1024; ++i) {
        const double fl = std::floor(traj.omega[i] / pi);
        REQUIRE(fl >= prev);
        prev = fl;
      }
    }
  }
}

TEST_CASE("zero_count examples") {
  CHECK(zero_count(omega_m(cubic(), GridFunction::zero(2048), 2)) == 2);
  CHECK(zero_count(omega_m(zero_f(), GridFunction::zero(2048), 1)) == 0);

  const auto report = analyze(quad(), -30, 30, 5);
  const auto u = find_in_Cm(quad(), 3, report, 2048);
  CHECK(zero_count(omega_m(quad(), u, 3)) == 3);
  const auto s = shoot(quad(), u);
  int changes = 0;
  for (int i = 1; i < 2048; ++i)
    if ((s.v[i] > 0) != (s.v[i + 1] > 0)) ++changes;
  CHECK(changes + 1 == 3);
}
