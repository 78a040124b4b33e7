#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "slcrit/contraction.hpp"
#include "slcrit/critical.hpp"
#include "slcrit/funcspace.hpp"
#include "slcrit/nonlinearity.hpp"
#include "slcrit/pruefer.hpp"

namespace slcrit {

/// Malformed CSV or JSON input.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g
std::string format_double(double x);

void write_grid_csv(std::ostream& out, const GridFunction& u);
void write_grid_csv(const std::filesystem::path& path, const GridFunction& u);

/// Reads "t,u" rows. With expected_n > 0 the row count must be expected_n+1.
GridFunction read_grid_csv(std::istream& in, int expected_n = 0);
GridFunction read_grid_csv(const std::filesystem::path& path, int expected_n = 0);

void write_trajectory_csv(std::ostream& out, const AngleTrajectory& traj);

nlohmann::json to_json(const TamenessReport& report);
nlohmann::json to_json(const MembershipResult& result);
nlohmann::json to_json(const LoopFamily& family);
nlohmann::json to_json(const ContractionParams& params, int m, double x_m, double eta);
nlohmann::json to_json(const Certification& cert);

LoopFamily loop_from_json(const nlohmann::json& j);
LoopFamily read_loop(const std::filesystem::path& path);

/// params.json, stage{k}/theta{j}.csv, residuals.csv, ustar.csv and
/// certification.json under `dir`.
void write_trace(const std::filesystem::path& dir, const HomotopyTrace& trace);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace slcrit
