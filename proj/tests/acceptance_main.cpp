#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <vector>

#include "tbel/acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> ids;
  tbel::AcceptanceOptions opt;
  app.add_option("--criterion", ids, "criterion ids 1..13 (default: all)")->check(CLI::Range(1, tbel::kCriterionCount));
  app.add_option("--threads", opt.threads, "worker threads (0: hardware)");
  app.add_option("--seed", opt.seed, "master seed");
  app.add_option("--out", opt.out_dir, "directory for per-criterion CSV tables");
  CLI11_PARSE(app, argc, argv);
  if (ids.empty())
    for (int i = 1; i <= tbel::kCriterionCount; ++i) ids.push_back(i);
  if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);
  int failed = 0;
  for (int id : ids) {
    const tbel::CriterionResult r = tbel::run_criterion(id, opt);
    std::cout << tbel::format_result(r) << std::endl;
    if (!r.pass) ++failed;
  }
  std::cout << (ids.size() - failed) << "/" << ids.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
