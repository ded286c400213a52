#pragma once

// The acceptance criteria as executable checks. Shared by the acceptance test
// binary and `pinchlab suite acceptance`.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace pinchlab::acceptance {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  double seconds = 0.0;
  double budget_seconds = 0.0;
  std::string detail;
  nlohmann::json data;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  /// Fills passed/detail/data; timing and the budget check are added by run().
  std::function<void(CriterionResult&)> body;
};

const std::vector<Criterion>& criteria();

/// Runs one criterion. Exceptions become a failed result.
CriterionResult run(const Criterion& c);

/// Runs all criteria in order, printing one line per criterion to `out` if given.
std::vector<CriterionResult> run_all(std::ostream* out = nullptr);

std::string format_line(const CriterionResult& r);
nlohmann::json to_json(const CriterionResult& r);

}  // namespace pinchlab::acceptance
