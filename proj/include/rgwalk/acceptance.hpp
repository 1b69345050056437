#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace rgwalk {

struct CriterionResult {
  int id = 0;
  std::string name;
  std::string suite;   // b0, disorder or calibration
  bool pass = false;
  double seconds = 0.0;
  double budget_seconds = 0.0;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::string> notes;  // flagged comparisons, failure reasons
};

struct AcceptanceOptions {
  std::uint64_t seed = 20260915;
  /// Progress lines; may be empty.
  std::function<void(const std::string&)> log;
};

inline constexpr int kCriteria = 10;

/// Runs criterion 1..10 at its full acceptance size. Module errors are caught
/// and reported as a failure with the error text in `notes`.
CriterionResult run_criterion(int id, const AcceptanceOptions& opts = {});

/// Suites: b0 = {1..5}, disorder = {6..9}, calibration = {10}, all = {1..10}.
std::vector<int> suite_criteria(const std::string& suite);

/// One summary line: "[PASS] 3 diffusion-constant identity (12.3 s) key=value ...".
std::string format_result(const CriterionResult& r);
/// JSON array of results.
std::string results_to_json(const std::vector<CriterionResult>& results);

}  // namespace rgwalk
