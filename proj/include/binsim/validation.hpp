#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace binsim {

struct CheckResult {
  std::string suite;
  std::string check;
  bool pass = false;
  double statistic = 0.0;
  std::uint64_t dof = 0;
  double p_value = 1.0;
  std::string detail;
};

std::vector<std::string> validation_suite_names();

// Runs one named certification suite with a fixed seed. trials == 0 selects
// each check's default sample volume.
std::vector<CheckResult> run_validation_suite(const std::string& suite,
                                              std::uint64_t seed,
                                              std::uint64_t trials = 0);

}  // namespace binsim
