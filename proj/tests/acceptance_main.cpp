// Runs every acceptance criterion, one line per criterion; exits 1 if any fails.

#include <iostream>

#include "pinchlab/acceptance.hpp"

int main() {
  const auto results = pinchlab::acceptance::run_all(&std::cout);
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << (results.size() - failed) << "/" << results.size() << " acceptance criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
