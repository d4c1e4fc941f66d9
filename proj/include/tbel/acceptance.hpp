#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tbel {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  int threads = 0;
  std::uint64_t seed = 20240601;
  std::string out_dir;  // when set, criteria dump their tables as CSV here
};

constexpr int kCriterionCount = 13;

const char* criterion_name(int id);
CriterionResult run_criterion(int id, const AcceptanceOptions& opt);

// "PASS C06 split-identity (12.3 s): ..." on one line.
std::string format_result(const CriterionResult& r);

}  // namespace tbel
