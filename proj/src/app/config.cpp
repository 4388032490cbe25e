#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "rflab/app/scenario.hpp"
#include "rflab/geometry/serialize.hpp"

namespace rflab::app {

using nlohmann::json;

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"entropy", "harnack",     "mu_nu",   "reduced",
                                              "theta",   "asymptotics", "blowdown"};
  return names;
}

ConfigError::ConfigError(int line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line), message_(what) {}

bool Scenario::has(const std::string& check) const {
  return std::find(checks.begin(), checks.end(), check) != checks.end();
}

double Scenario::tol(const std::string& check) const {
  if (auto it = tolerances.find(check); it != tolerances.end()) return it->second;
  static const std::map<std::string, double> defaults{
      {"entropy", 1e-8}, {"harnack", 1e-6},  {"harnack_torus", 1e-3}, {"mu_nu", 1e-6},
      {"reduced", 1e-3}, {"identities", 1e-4}, {"theta", 1e-5},       {"asymptotics", 1e-3},
      {"blowdown", 1e-8}, {"constancy", 1e-6}};
  return defaults.at(check);
}

namespace {

// Line of every value in an already validated JSON text, keyed by JSON pointer.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : s_(text) {
    skip_ws();
    value("");
  }

  [[nodiscard]] int line_of(std::string ptr) const {
    for (;;) {
      if (auto it = lines_.find(ptr); it != lines_.end()) return it->second;
      if (ptr.empty()) return 0;
      ptr.erase(ptr.rfind('/'));
    }
  }

 private:
  void advance() {
    if (s_[pos_] == '\n') ++line_;
    ++pos_;
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) advance();
  }
  std::string string() {
    std::string out;
    advance();  // opening quote
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\') {
        advance();
      }
      out += s_[pos_];
      advance();
    }
    advance();
    return out;
  }
  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }
  void value(const std::string& ptr) {
    if (pos_ >= s_.size()) return;
    lines_.emplace(ptr, line_);
    const char c = s_[pos_];
    if (c == '{' || c == '[') {
      const char close = c == '{' ? '}' : ']';
      advance();
      skip_ws();
      for (int k = 0; pos_ < s_.size() && s_[pos_] != close; ++k) {
        std::string child = ptr + "/" + std::to_string(k);
        if (c == '{') {
          const int key_line = line_;
          child = ptr + "/" + escape(string());
          lines_.emplace(child, key_line);
          skip_ws();
          advance();  // ':'
          skip_ws();
        }
        value(child);
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ',') advance();
        skip_ws();
      }
      advance();
    } else if (c == '"') {
      string();
    } else {
      while (pos_ < s_.size() && !std::strchr(",]} \t\r\n", s_[pos_])) advance();
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

class Validator {
 public:
  explicit Validator(const LineIndex& idx) : idx_(idx) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    throw ConfigError(idx_.line_of(ptr), (ptr.empty() ? std::string("config") : ptr) + ": " + msg);
  }

  void only_keys(const json& j, const std::string& ptr, std::initializer_list<const char*> keys) const {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
        fail(ptr + "/" + it.key(), "unknown key '" + it.key() + "'");
      }
    }
  }

  double number(const json& j, const std::string& ptr) const {
    if (!j.is_number()) fail(ptr, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(ptr, "expected a finite number");
    return v;
  }

  int integer(const json& j, const std::string& ptr, int lo, int hi) const {
    if (!j.is_number_integer()) fail(ptr, "expected an integer");
    const auto v = j.get<long long>();
    if (v < lo || v > hi) fail(ptr, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
  }

 private:
  const LineIndex& idx_;
};

bool valid_name(const std::string& s) {
  return !s.empty() && s.size() <= 64 && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  }) && s.front() != '.';
}

Scenario parse_scenario(const json& j, const std::string& ptr, const Validator& v) {
  if (!j.is_object()) v.fail(ptr, "a scenario must be an object");
  v.only_keys(j, ptr, {"schema", "name", "model", "t0", "t_span", "samples", "checks", "tolerances",
                       "reduced", "blowdown_alpha"});
  Scenario s;
  if (!j.contains("name") || !j["name"].is_string()) v.fail(ptr + "/name", "missing string 'name'");
  s.name = j["name"].get<std::string>();
  if (!valid_name(s.name)) v.fail(ptr + "/name", "name must be 1-64 characters from [A-Za-z0-9_.-]");

  if (!j.contains("model")) v.fail(ptr, "missing 'model'");
  s.model = j["model"];
  try {
    s.metric = geometry::metric_from_json(s.model);
    std::visit([](const auto& m) { m.validate(); }, s.metric);
  } catch (const std::exception& e) {
    v.fail(ptr + "/model", e.what());
  }
  const auto kind = geometry::kind_of(s.metric);

  if (j.contains("t0")) s.t0 = v.number(j["t0"], ptr + "/t0");
  if (!j.contains("t_span")) v.fail(ptr, "missing 't_span'");
  const auto& span = j["t_span"];
  if (!span.is_array() || span.size() != 2) v.fail(ptr + "/t_span", "expected [t_begin, t_end]");
  s.t_begin = v.number(span[0], ptr + "/t_span/0");
  s.t_end = v.number(span[1], ptr + "/t_span/1");
  if (!(s.t_begin < s.t_end)) v.fail(ptr + "/t_span", "t_begin must be below t_end");
  if (s.t_begin < s.t0) v.fail(ptr + "/t_span", "t_span must start at or after t0");
  if (j.contains("samples")) s.samples = v.integer(j["samples"], ptr + "/samples", 3, 401);

  if (!j.contains("checks") || !j["checks"].is_array() || j["checks"].empty()) {
    v.fail(ptr + "/checks", "'checks' must be a nonempty array");
  }
  for (std::size_t k = 0; k < j["checks"].size(); ++k) {
    const auto p = ptr + "/checks/" + std::to_string(k);
    const auto& c = j["checks"][k];
    if (!c.is_string()) v.fail(p, "expected a check name");
    const auto name = c.get<std::string>();
    const auto& all = check_names();
    if (std::find(all.begin(), all.end(), name) == all.end()) v.fail(p, "unknown check '" + name + "'");
    if (s.has(name)) v.fail(p, "duplicate check '" + name + "'");
    const bool field_check = name == "reduced" || name == "theta";
    if (field_check && kind == geometry::ModelKind::Homogeneous) {
      v.fail(p, "check '" + name + "' is not available for homogeneous models");
    }
    if (name == "asymptotics" && kind == geometry::ModelKind::ConformalTorus) {
      v.fail(p, "check 'asymptotics' needs a homogeneous or model-space flow");
    }
    s.checks.push_back(name);
  }

  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    const auto p = ptr + "/tolerances";
    if (!t.is_object()) v.fail(p, "expected an object");
    for (auto it = t.begin(); it != t.end(); ++it) {
      try {
        (void)s.tol(it.key());
      } catch (const std::out_of_range&) {
        v.fail(p + "/" + it.key(), "unknown tolerance '" + it.key() + "'");
      }
      const double x = v.number(it.value(), p + "/" + it.key());
      if (!(x > 0.0)) v.fail(p + "/" + it.key(), "tolerances must be positive");
      s.tolerances[it.key()] = x;
    }
  }

  if (j.contains("reduced")) {
    const auto& r = j["reduced"];
    const auto p = ptr + "/reduced";
    if (!r.is_object()) v.fail(p, "expected an object");
    v.only_keys(r, p, {"base", "base_time", "targets", "max_distance", "identity_targets", "theta_resolution",
                       "theta_times"});
    auto& rs = s.reduced;
    if (r.contains("base")) {
      if (!r["base"].is_array() || r["base"].size() != 2) v.fail(p + "/base", "expected [x, y]");
      rs.base = {v.number(r["base"][0], p + "/base/0"), v.number(r["base"][1], p + "/base/1")};
    }
    if (r.contains("base_time")) rs.base_time = v.number(r["base_time"], p + "/base_time");
    if (r.contains("targets")) rs.targets = v.integer(r["targets"], p + "/targets", 1, 64);
    if (r.contains("max_distance")) {
      rs.max_distance = v.number(r["max_distance"], p + "/max_distance");
      if (!(rs.max_distance > 0.0)) v.fail(p + "/max_distance", "must be positive");
    }
    if (r.contains("identity_targets")) {
      rs.identity_targets = v.integer(r["identity_targets"], p + "/identity_targets", 0, 4096);
    }
    if (r.contains("theta_resolution")) {
      rs.theta_resolution = v.integer(r["theta_resolution"], p + "/theta_resolution", 2, 64);
    }
    if (r.contains("theta_times")) rs.theta_times = v.integer(r["theta_times"], p + "/theta_times", 2, 64);
    if (rs.base_time && *rs.base_time >= s.t_begin) {
      v.fail(p + "/base_time", "base_time must precede t_span");
    }
  }
  if (j.contains("blowdown_alpha")) {
    s.blowdown_alpha = v.number(j["blowdown_alpha"], ptr + "/blowdown_alpha");
    if (!(s.blowdown_alpha > 0.0)) v.fail(ptr + "/blowdown_alpha", "must be positive");
  }
  return s;
}

}  // namespace

Config parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + end, '\n'));
    throw ConfigError(line, "malformed JSON");
  }
  const LineIndex idx(text);
  const Validator v(idx);
  if (!root.is_object()) v.fail("", "the config must be a JSON object");
  if (!root.contains("schema") || !root["schema"].is_string()) v.fail("", "missing string 'schema'");
  Config cfg;
  cfg.schema = root["schema"].get<std::string>();
  if (cfg.schema != kSchema) v.fail("/schema", "unsupported schema '" + cfg.schema + "' (expected " + kSchema + ")");

  if (root.contains("scenarios")) {
    v.only_keys(root, "", {"schema", "scenarios"});
    const auto& arr = root["scenarios"];
    if (!arr.is_array() || arr.empty()) v.fail("/scenarios", "expected a nonempty array");
    for (std::size_t k = 0; k < arr.size(); ++k) {
      cfg.scenarios.push_back(parse_scenario(arr[k], "/scenarios/" + std::to_string(k), v));
    }
  } else {
    cfg.scenarios.push_back(parse_scenario(root, "", v));
  }
  std::set<std::string> seen;
  for (std::size_t k = 0; k < cfg.scenarios.size(); ++k) {
    if (!seen.insert(cfg.scenarios[k].name).second) {
      v.fail(root.contains("scenarios") ? "/scenarios/" + std::to_string(k) + "/name" : "/name",
             "duplicate scenario name '" + cfg.scenarios[k].name + "'");
    }
  }
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(0, "cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

}  // namespace rflab::app
