#include "slcrit/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace slcrit {

namespace {

struct Panel {
  double x0, y0, w, h;  // pixel box
  double lo, hi;        // data range

  double px(double t) const { return x0 + w * t / std::numbers::pi; }
  double py(double v) const { return y0 + h * (hi - v) / (hi - lo); }
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string polyline(const Panel& p, int first, const Vector& values, double h, const char* style) {
  std::ostringstream s;
  s << "<polyline fill=\"none\" " << style << " points=\"";
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (k) s << ' ';
    s << num(p.px((first + k) * h)) << ',' << num(p.py(values[k]));
  }
  s << "\"/>\n";
  return s.str();
}

std::string line(const Panel& p, double t0, double v0, double t1, double v1, const char* style) {
  return "<line x1=\"" + num(p.px(t0)) + "\" y1=\"" + num(p.py(v0)) + "\" x2=\"" + num(p.px(t1)) + "\" y2=\"" +
         num(p.py(v1)) + "\" " + style + "/>\n";
}

std::string frame(const Panel& p, const std::string& label) {
  std::ostringstream s;
  s << "<rect x=\"" << num(p.x0) << "\" y=\"" << num(p.y0) << "\" width=\"" << num(p.w) << "\" height=\"" << num(p.h)
    << "\" fill=\"none\" stroke=\"#888\"/>\n";
  s << "<text x=\"" << num(p.x0 + 4) << "\" y=\"" << num(p.y0 + 14) << "\" font-size=\"12\">" << label << "</text>\n";
  s << "<text x=\"" << num(p.x0 - 6) << "\" y=\"" << num(p.y0 + 4) << "\" font-size=\"10\" text-anchor=\"end\">"
    << num(p.hi) << "</text>\n";
  s << "<text x=\"" << num(p.x0 - 6) << "\" y=\"" << num(p.y0 + p.h) << "\" font-size=\"10\" text-anchor=\"end\">"
    << num(p.lo) << "</text>\n";
  return s.str();
}

std::pair<double, double> padded(double lo, double hi) {
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string plot_u_omega(const GridFunction& u, const AngleTrajectory& omega, const std::string& title,
                         std::optional<double> wall) {
  const double h = std::numbers::pi / u.n();
  const int m = omega.m;
  const double mpi = m * std::numbers::pi;

  auto [ulo, uhi] = padded(u.values().minCoeff(), u.values().maxCoeff());
  double wlo = std::min(0.0, omega.omega.minCoeff()), whi = std::max(mpi, omega.omega.maxCoeff());
  if (wall) {
    wlo = std::min(wlo, -*wall);
    whi = std::max(whi, mpi + *wall);
  }
  const auto [olo, ohi] = padded(wlo, whi);
  const Panel top{70, 40, 700, 240, ulo, uhi};
  const Panel bottom{70, 320, 700, 240, olo, ohi};

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n";
  s << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
  s << "<text x=\"400\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">" << title << "</text>\n";
  s << frame(top, "u(t)") << frame(bottom, "omega_" + std::to_string(m) + "(t)");
  s << polyline(top, 0, u.values(), h, "stroke=\"#1f4e9c\" stroke-width=\"1.5\"");
  s << line(bottom, 0, 0, std::numbers::pi, mpi, "stroke=\"#555\" stroke-dasharray=\"2,4\"");
  if (wall) {
    s << line(bottom, 0, *wall, std::numbers::pi, mpi + *wall, "stroke=\"#b22\" stroke-width=\"1\"");
    s << line(bottom, 0, -*wall, std::numbers::pi, mpi - *wall, "stroke=\"#b22\" stroke-width=\"1\"");
  }
  s << polyline(bottom, omega.first, omega.omega, h, "stroke=\"#0a7d3b\" stroke-width=\"1.5\"");
  s << "</svg>\n";
  return s.str();
}

}  // namespace slcrit
