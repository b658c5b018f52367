// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "sigmatrack/acceptance.hpp"

int main(int argc, char** argv) {
  sigmatrack::AcceptanceOptions opt;
  opt.work_dir = argc > 1 ? std::filesystem::path(argv[1])
                          : std::filesystem::temp_directory_path() / "sigmatrack_acceptance";
  int failed = 0;
  for (const auto& r : sigmatrack::run_acceptance(opt)) {
    std::cout << sigmatrack::format_result_line(r) << "\n";
    failed += r.passed ? 0 : 1;
  }
  std::cout << (failed == 0 ? "acceptance: all criteria passed\n"
                            : "acceptance: " + std::to_string(failed) + " criteria failed\n");
  return failed == 0 ? 0 : 1;
}
