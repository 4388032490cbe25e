// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <cstring>
#include <iostream>

#include "rflab/app/acceptance.hpp"

int main(int argc, char** argv) {
  auto suite = rflab::app::Suite::Fast;
  if (argc > 1) {
    const auto parsed = rflab::app::parse_suite(argv[1]);
    if (!parsed) {
      std::cerr << "usage: acceptance [fast|full]\n";
      return 2;
    }
    suite = *parsed;
  }
  const auto results = rflab::app::run_acceptance(suite, std::cout);
  for (const auto& r : results) {
    if (!r.pass()) return 1;
  }
  return 0;
}
