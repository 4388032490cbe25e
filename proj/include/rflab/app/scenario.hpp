#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rflab/geometry/metric.hpp"
#include "rflab/reduced/geodesic.hpp"

namespace rflab::app {

inline constexpr const char* kSchema = "rflab.scenario/1";

/// Check identifiers a scenario may request.
const std::vector<std::string>& check_names();

/// Bad configuration. line is 1-based (0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& what);
  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] const std::string& message() const { return message_; }

 private:
  int line_;
  std::string message_;
};

struct ReducedSettings {
  reduced::Point base{0.5, 0.5};
  std::optional<double> base_time;  // default: the vertex on model spaces, t0 otherwise
  int targets = 6;                  // per side on the torus, radial count on model spaces
  double max_distance = 2.0;        // model spaces: largest unit-metric distance
  int identity_targets = 4;
  int theta_resolution = 8;
  int theta_times = 4;
};

struct Scenario {
  std::string name;
  nlohmann::json model;
  geometry::MetricModel metric;
  double t0 = 0.0;  // time at which model is the metric
  double t_begin = 0.0, t_end = 0.0;  // sampled window
  int samples = 9;
  std::vector<std::string> checks;
  std::map<std::string, double> tolerances;
  ReducedSettings reduced;
  double blowdown_alpha = 4.0;

  [[nodiscard]] bool has(const std::string& check) const;
  [[nodiscard]] double tol(const std::string& check) const;
};

struct Config {
  std::string schema;
  std::vector<Scenario> scenarios;
};

/// Parses and validates a whole config before anything runs. Accepts a single
/// scenario object or {"schema", "scenarios": [...]}.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

/// One verdict or record in a report.
struct CheckRecord {
  std::string check;
  std::string item;
  std::string status;  // pass, fail, error, refused
  double value = 0.0;  // measured (margin or residual, see message)
  double tol = 0.0;
  std::string message;
};

struct ScenarioResult {
  std::string name;
  std::vector<CheckRecord> records;
  nlohmann::json summary;  // fitted limits, flags, residual maxima
  std::map<std::string, std::string> files;  // relative path -> contents
  [[nodiscard]] bool ok() const;
  [[nodiscard]] nlohmann::json report() const;
};

/// Runs every requested check; numerical failures become error records.
ScenarioResult run_scenario(const Scenario& s);

/// Writes report.json and the series and plot files under dir.
void write_result(const ScenarioResult& r, const std::filesystem::path& dir);

enum ExitCode { kOk = 0, kCheckFailure = 1, kConfigError = 2 };

/// Loads, validates, runs (threads workers across scenarios) and writes each
/// scenario under out/<name>. Nothing is written when the config is invalid.
int run_config_file(const std::filesystem::path& config, const std::filesystem::path& out, int threads,
                    std::ostream& log);

}  // namespace rflab::app
