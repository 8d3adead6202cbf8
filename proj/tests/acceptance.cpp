// Acceptance gate: runs every criterion and prints one PASS/FAIL line each.
// Exits nonzero when any criterion fails.

#include <cstdio>

#include "raddich/cli/acceptance.hpp"

int main() {
  const auto results = raddich::acceptance::run_all();
  int failed = 0;
  for (const auto& r : results) {
    std::printf("%s\n", raddich::acceptance::format_line(r).c_str());
    failed += !r.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
