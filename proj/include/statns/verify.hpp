#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace statns {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;  ///< runtime limit in seconds, 0 = none
};

struct VerifyOptions {
  unsigned workers = 0;
  std::filesystem::path scratch = "verify_scratch";  ///< archives written by criterion 11
  std::ostream* log = nullptr;
};

/// Acceptance criteria 1..11. Each check compares library results with an independent oracle
/// (finite differences, closed forms, exhaustive enumeration, re-runs) and never throws: failures
/// and exceptions are reported in `detail`.
CriterionResult verify_bregman(const VerifyOptions& o);
CriterionResult verify_eos(const VerifyOptions& o);
CriterionResult verify_conservation(const VerifyOptions& o);
CriterionResult verify_mms(const VerifyOptions& o);
CriterionResult verify_energy_inequality(const VerifyOptions& o);
CriterionResult verify_statistical_inequality(const VerifyOptions& o);
CriterionResult verify_markov(const VerifyOptions& o);
CriterionResult verify_transport(const VerifyOptions& o);
CriterionResult verify_continuity(const VerifyOptions& o);
CriterionResult verify_selection(const VerifyOptions& o);
CriterionResult verify_reproducibility(const VerifyOptions& o);

/// Runs the criteria in order (all when `only` is empty), logging one line per criterion.
std::vector<CriterionResult> run_acceptance(const VerifyOptions& o, const std::vector<int>& only = {});

/// "PASS  3 Solver conservation (1.2 s): ..." ; runtime over budget turns PASS into FAIL.
std::string format_result(const CriterionResult& r);

}  // namespace statns
