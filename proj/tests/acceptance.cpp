// One line per acceptance criterion; exit status 1 if any gating criterion fails.

#include <iostream>

#include "dnrnn/validation.hpp"

int main() {
  using namespace dnrnn::validation;
  std::vector<CheckResult> results;
  for (int id = 1; id <= 10; ++id) {
    auto r = run_all({id}, dsa_manifest_from_env());
    std::cout << r.front().line() << std::endl;
    results.push_back(std::move(r.front()));
  }
  const bool ok = all_gating_passed(results);
  std::cout << (ok ? "acceptance: all gating criteria passed" : "acceptance: FAILED") << std::endl;
  return ok ? 0 : 1;
}
