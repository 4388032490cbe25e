#include "rflab/report/table.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace rflab::report {

void Table::add(std::string name, std::vector<double> values) {
  if (!columns.empty() && values.size() != columns.front().size()) {
    throw std::invalid_argument("table: column '" + name + "' has the wrong length");
  }
  header.push_back(std::move(name));
  columns.push_back(std::move(values));
}

std::size_t Table::rows() const { return columns.empty() ? 0 : columns.front().size(); }

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string Table::csv() const {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += '\n';
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ',';
      out += format_number(columns[c][r]);
    }
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << text;
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rflab::report
