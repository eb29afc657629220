// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion ids as arguments to run a
// subset. Exit status is nonzero when any selected criterion fails.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "statns/verify.hpp"

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));
  statns::VerifyOptions o;
  o.scratch = std::filesystem::temp_directory_path() / "statns_acceptance";
  o.log = &std::cout;
  const auto results = statns::run_acceptance(o, only);
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << results.size() - failed << "/" << results.size()
            << std::endl;
  std::filesystem::remove_all(o.scratch);
  return failed ? 1 : 0;
}
