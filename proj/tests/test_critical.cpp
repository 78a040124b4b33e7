#include <doctest.h>

#include <cmath>
#include <numbers>

#include "slcrit/critical.hpp"

using namespace slcrit;
using std::numbers::pi;

namespace {

const Nonlinearity& quad() {
  static const Nonlinearity f = Nonlinearity::parse("x^2/2");
  return f;
}

const TamenessReport& quad_report() {
  static const TamenessReport r = analyze(quad(), -30, 30, 5);
  return r;
}

}  // namespace

TEST_CASE("residual examples") {
  const auto z = GridFunction::zero(2048);
  CHECK(std::abs(residual(Nonlinearity::parse("x^3 - 4*x"), z, 2)) < 1e-8);
  CHECK(std::abs(residual(Nonlinearity::parse("0"), z, 1) - (std::atan(pi) - pi)) < 1e-8);

  const auto mr = membership(Nonlinearity::parse("x^3 - 4*x"), z, 2);
  CHECK(mr.member);
  CHECK(mr.m == 2);
  CHECK(mr.n == 2048);
  CHECK(std::abs(mr.v_end) < 1e-9);
  CHECK_FALSE(membership(Nonlinearity::parse("0"), z, 1).member);
}

TEST_CASE("find_in_Cm examples") {
  const auto u1 = find_in_Cm(quad(), 1, quad_report(), 2048);
  CHECK(std::abs(residual(quad(), u1, 1)) < 1e-10);
  CHECK(std::abs(shoot(quad(), u1).v[2048]) < 1e-6);
  CHECK(u1.dirichlet());

  const auto u3 = find_in_Cm(quad(), 3, quad_report(), 2048);
  CHECK(std::abs(residual(quad(), u3, 3)) < 1e-10);
  CHECK(zero_count(omega_m(quad(), u3, 3)) == 3);

  const auto e = Nonlinearity::parse("exp(x)");
  const auto re = analyze(e, -10, 10, 3);
  try {
    find_in_Cm(e, 1, re, 2048);
    FAIL("expected an error");
  } catch (const ProjectionError& err) {
    CHECK((err.kind() == ProjectionError::Kind::NoBracket || err.kind() == ProjectionError::Kind::NotInSigma));
  }
}

TEST_CASE("find_in_Cm output sits on both sides of -m^2") {
  for (const char* text : {"x^2/2", "x^3/3 - 2*x", "sin(x) - 5*x"}) {
    const auto f = Nonlinearity::parse(text);
    const auto report = analyze(f, -10, 10, 3);
    for (int m : report.sigma) {
      const auto u = find_in_Cm(f, m, report, 1024);
      const auto q = potential(f, u);
      INFO(text << " m = " << m);
      CHECK(std::abs(residual(f, u, m)) < 1e-10);
      CHECK(q.node.minCoeff() < -m * m);
      CHECK(q.node.maxCoeff() > -m * m);
    }
  }
}

TEST_CASE("project") {
  const auto u = find_in_Cm(quad(), 1, quad_report(), 2048);

  const auto fixed = project(quad(), u, 1);
  CHECK(fixed.tau == 0.0);
  CHECK(fixed.u.values() == u.values());

  const auto bumped = GridFunction::sample(2048, [&](double t) { return u.at(t) + 1e-3 * std::sin(2 * t); }, true);
  CHECK(std::abs(residual(quad(), bumped, 1)) > 1e-8);
  const auto p = project(quad(), bumped, 1);
  CHECK(std::abs(residual(quad(), p.u, 1)) < 1e-10);
  CHECK(distance(p.u, bumped, NormKind::C0) < 1e-2);
  CHECK(p.iterations >= 1);

  // f' = -1.01 keeps the residual inside the basin while f'' = 0.
  const auto lin = Nonlinearity::parse("-1.01*x");
  const auto one = GridFunction(2048, Vector::Ones(2049), false);
  try {
    project(lin, GridFunction::sample(2048, [](double t) { return std::sin(t); }, true), 1, one);
    FAIL("expected an error");
  } catch (const ProjectionError& err) {
    CHECK(err.kind() == ProjectionError::Kind::ZeroDerivative);
  }
}

TEST_CASE("project follows an explicit direction") {
  const auto u = find_in_Cm(quad(), 2, quad_report(), 1024);
  const auto bumped = GridFunction::sample(1024, [&](double t) { return u.at(t) + 2e-3 * std::sin(3 * t); }, true);
  const auto dir = corrector_direction(quad(), bumped, pi / 8);
  const auto p = project(quad(), bumped, 2, dir);
  CHECK(std::abs(residual(quad(), p.u, 2)) < 1e-10);
  const Vector expect = bumped.values() + p.tau * dir.values();
  CHECK((p.u.values() - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("membership is grid converged") {
  for (int m : {1, 2, 3}) {
    const auto u = find_in_Cm(quad(), m, quad_report(), 512);
    const double r1 = residual(quad(), u, m);
    const double r2 = residual(quad(), u.refined(2), m);
    const double r4 = residual(quad(), u.refined(4), m);
    INFO("m = " << m << ": " << r1 << ", " << r2 << ", " << r4);
    CHECK(std::abs(r1 - r2) < 16 * std::abs(r2 - r4) + 1e-12);
    CHECK(std::abs(r2) < 1e-8);
  }
}
