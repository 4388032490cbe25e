#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "rflab/app/acceptance.hpp"
#include "rflab/app/scenario.hpp"

namespace fs = std::filesystem;

#ifndef RFLAB_CONFIG_DIR
#define RFLAB_CONFIG_DIR "configs"
#endif

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for expander-side Ricci-flow monotonicity"};
  app.require_subcommand(1);

  std::string config, out = "lab_out", suite = "fast";
  int threads = 1;
  auto* run = app.add_subcommand("run", "Run the scenarios in a JSON config");
  run->add_option("config", config, "Scenario config (JSON)")->required();
  run->add_option("--out", out, "Output directory")->capture_default_str();
  run->add_option("--threads", threads, "Worker threads across scenarios")->check(CLI::PositiveNumber)->capture_default_str();

  auto* accept = app.add_subcommand("accept", "Run the acceptance criteria");
  accept->add_option("--suite", suite, "fast or full")->check(CLI::IsMember({"fast", "full"}))->capture_default_str();

  auto* list = app.add_subcommand("list", "List checks and bundled configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rflab::app::kConfigError;
  }

  if (*run) return rflab::app::run_config_file(config, out, threads, std::cout);

  if (*accept) {
    const auto results = rflab::app::run_acceptance(*rflab::app::parse_suite(suite), std::cout);
    for (const auto& r : results) {
      if (!r.pass()) return rflab::app::kCheckFailure;
    }
    return rflab::app::kOk;
  }

  if (*list) {
    std::cout << "checks:";
    for (const auto& c : rflab::app::check_names()) std::cout << " " << c;
    std::cout << "\nsuites: fast full\nconfigs (" << RFLAB_CONFIG_DIR << "):\n";
    std::error_code ec;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(RFLAB_CONFIG_DIR, ec)) {
      if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        const auto cfg = rflab::app::load_config(f);
        for (const auto& s : cfg.scenarios) {
          std::cout << "  " << f.filename().string() << ": " << s.name << " [";
          for (std::size_t k = 0; k < s.checks.size(); ++k) std::cout << (k ? " " : "") << s.checks[k];
          std::cout << "]\n";
        }
      } catch (const rflab::app::ConfigError& e) {
        std::cout << "  " << f.filename().string() << ": invalid (" << e.what() << ")\n";
      }
    }
  }
  return rflab::app::kOk;
}
