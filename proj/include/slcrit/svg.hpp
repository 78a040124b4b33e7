#pragma once

#include <optional>
#include <string>

#include "slcrit/funcspace.hpp"
#include "slcrit/pruefer.hpp"

namespace slcrit {

/// 800x600 SVG with u on top and omega_m below, the line y = mt dotted.
/// With `wall` the lines y = mt +- wall are drawn as well.
std::string plot_u_omega(const GridFunction& u, const AngleTrajectory& omega, const std::string& title,
                         std::optional<double> wall = std::nullopt);

}  // namespace slcrit
