#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rflab::app {

enum class Suite { Fast, Full };

std::optional<Suite> parse_suite(const std::string& name);

/// One measured quantity inside a criterion.
struct Measurement {
  std::string what;
  double value = 0.0;
  std::string expected;  // e.g. "<= 1e-06"
  bool ok = false;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<Measurement> measurements;
  double seconds = 0.0;
  double budget = 0.0;  // wall-time limit, 0 when the criterion states none
  std::string error;
  [[nodiscard]] bool pass() const;
};

/// Runs criteria 1-10 in order, printing one PASS/FAIL line per criterion
/// as it completes. The full suite uses denser samples and larger grids.
std::vector<CriterionResult> run_acceptance(Suite suite, std::ostream& out);

}  // namespace rflab::app
