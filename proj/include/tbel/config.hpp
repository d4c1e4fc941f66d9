#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tbel/bel.hpp"

namespace tbel {

// Thrown for malformed or out-of-range configuration (exit status 2).
struct ConfigError : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

struct ExperimentConfig {
  std::string scenario = "standard";
  double alpha = 4.0;
  double C = 1.0;
  int K_max = 64;
  double theta = 0.5;
  int N_u = 256;
  int N_x = 512;
  double dt = 1e-3;
  double T = 1.0;
  double t = 0.5;
  double s = 0.2;
  double eps = 0.2;
  double rho = 1e-2;
  long M_W = 2000;
  int M_beta = 64;
  std::uint64_t seed = 20240601;
  int threads = 0;
  std::string out_dir = "out";

  // Initial state: g(u) = 2 pi u + g_amp sin(2 pi g_mode u), or a density CSV.
  std::string initial = "sine";
  double g_amp = 0.3;
  int g_mode = 1;
  std::string density_file;

  // Direction h(u) = h_amp cos(2 pi h_mode u); h_kind = cos | const | zero.
  std::string h_kind = "cos";
  double h_amp = 1.0;
  int h_mode = 1;
  std::string convention = "gprime_h";

  // Functional: kind linear or interaction, profile a0 + sum a_n cos(nz) + b_n sin(nz).
  std::string functional = "linear";
  double phi_a0 = 0.0;
  std::vector<double> phi_a{1.0};
  std::vector<double> phi_b{};
  std::string pairing = "replica";

  std::vector<double> eps_list{0.4, 0.283, 0.2, 0.141, 0.1, 0.071, 0.05};
  std::vector<double> t_list{0.05, 0.1, 0.2, 0.4, 0.8};
  double kde_bandwidth = 0.15;
  int u_index = 64;
  double moment_p = 2.0;
  int moment_j = 2;
  int stride = 10;

  // Lines of the source file in order, for the manifest echo.
  std::vector<std::string> source_lines;
  std::vector<std::string> keys_set;

  static ExperimentConfig parse(std::istream& is);
  static ExperimentConfig load(const std::string& path);
  // Apply one key=value pair; unknown keys and malformed values throw ConfigError.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  FourierProfile profile() const;
  QuantileState initial_quantile() const;
  PerturbationDirection direction() const;
  TestFunctional test_functional() const;
  Convention conv() const;
  Pairing pair() const;
  McSettings mc() const;

  // Verbatim source echo followed by every resolved knob; no timestamps.
  void write_manifest(std::ostream& os, const std::string& command) const;
};

}  // namespace tbel
