#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rflab::report {

/// Column-major numeric table written as CSV with %.17g, so values survive a
/// round trip and reruns are byte-identical.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  void add(std::string name, std::vector<double> values);
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::string csv() const;
};

std::string format_number(double v);

/// Writes through a temporary file and renames it into place.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace rflab::report
