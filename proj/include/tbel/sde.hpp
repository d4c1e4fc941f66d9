#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "tbel/field.hpp"
#include "tbel/noise.hpp"
#include "tbel/torus.hpp"

namespace tbel {

struct EngineOptions {
  int order = 1;  // 1: x and d_u x; 2: adds d_u^2 x; 3: adds d_u^3 x
  FieldMode field_mode = FieldMode::Auto;
  int field_grid = 1024;
  bool direct_euler_d1 = false;  // also integrate d_u x by plain Euler on the variation equation
};

// Particles x(u_j), j = 0..N_u-1, for n_beta idiosyncratic replicas sharing one common-noise path.
// The closing node u = 1 is never evolved: it is x(0) + 2*pi by pseudo-periodicity.
// d_u x is represented as g'(u) * exp(L), L the log of the stochastic exponential.
class Ensemble {
 public:
  Ensemble(const std::vector<double>& x0, const std::vector<double>& g1, const std::vector<double>& g2,
           const std::vector<double>& g3, const FourierProfile& profile, double dt, int n_beta,
           const EngineOptions& opt);
  Ensemble(const QuantileState& g, const FourierProfile& profile, double dt, int n_beta, const EngineOptions& opt);

  // Restore the initial state and select the noise streams of W-replica w (beta replicas b = 0..n_beta-1).
  void reset(std::uint64_t seed, std::uint64_t w);
  // Draw this step's increments from the selected streams and advance.
  void step();
  // Advance with explicit increments: re/im of width 2K+1, one beta increment per replica.
  void step_with(const double* re, const double* im, const double* dbeta);

  int n_u() const { return n_u_; }
  int n_beta() const { return n_beta_; }
  int order() const { return opt_.order; }
  int steps_done() const { return steps_; }
  double dt() const { return dt_; }
  double time() const { return dt_ * steps_; }
  const FourierProfile& profile() const { return profile_; }

  const double* x(int b) const { return x_.data() + off(b); }
  const double* log_factor(int b) const { return logf_.data() + off(b); }
  const double* d1(int b) const { return j_.data() + off(b); }
  const double* d2(int b) const { return d2_.data() + off(b); }
  const double* d3(int b) const { return d3_.data() + off(b); }
  const double* d1_euler(int b) const { return jeul_.data() + off(b); }
  const std::vector<double>& g1() const { return g1_; }

  // Increments consumed by the most recent step.
  const std::vector<double>& last_re() const { return re_; }
  const std::vector<double>& last_im() const { return im_; }
  double last_dbeta(int b) const { return db_[b]; }

 private:
  std::size_t off(int b) const { return static_cast<std::size_t>(b) * n_u_; }
  void advance();

  FourierProfile profile_;
  EngineOptions opt_;
  double dt_;
  int n_u_, n_beta_;
  int steps_ = 0;
  double half_drift_;
  std::vector<double> x0_, g1_, g2_, g3_;
  std::vector<double> x_, logf_, j_, d2_, d3_, jeul_;
  std::vector<double> re_, im_, db_;
  PhiloxKey ckey_{};
  std::vector<PhiloxKey> ikeys_;
  std::unique_ptr<NoiseField> field_;
};

// Full stored trajectory of one path on the closed grid.
struct PathState {
  std::uint64_t seed = 0;
  std::uint64_t w_index = 0;
  std::uint64_t b_index = 0;
  double dt = 0.0;
  int n_steps = 0;
  std::size_t n_u = 0;
  int order = 1;
  std::vector<double> g1;          // [N_u + 1]
  std::vector<double> x;           // [(n_steps+1) * (N_u+1)]
  std::vector<double> log_factor;  // log of d_u x / g'
  std::vector<double> d2, d3;      // present when order >= 2, 3
  std::vector<double> d1_euler;    // present when requested
  std::vector<double> dbeta;       // [n_steps]

  std::size_t width() const { return n_u + 1; }
  std::size_t idx(int i, std::size_t j) const { return static_cast<std::size_t>(i) * width() + j; }
  double time(int i) const { return dt * i; }
  double xv(int i, std::size_t j) const { return x[idx(i, j)]; }
  double d1(int i, std::size_t j) const { return g1[j] * std::exp(log_factor[idx(i, j)]); }
  double log_d1(int i, std::size_t j) const { return std::log(g1[j]) + log_factor[idx(i, j)]; }
  QuantileState snapshot(int i) const;
};

PathState evolve(const QuantileState& g, const FourierProfile& profile, const NoisePath& noise, int order,
                 EngineOptions opt = {});

// Flow Z_t^x from arbitrary starting points; d_x Z = exp(L) with the same log factor as evolve.
struct ParametricPath {
  double dt = 0.0;
  int n_steps = 0;
  std::size_t n_points = 0;
  std::vector<double> z;           // [(n_steps+1) * n_points]
  std::vector<double> log_factor;  // log d_x Z
  double zv(int i, std::size_t p) const { return z[static_cast<std::size_t>(i) * n_points + p]; }
  double dz(int i, std::size_t p) const { return std::exp(log_factor[static_cast<std::size_t>(i) * n_points + p]); }
};

ParametricPath evolve_parametric(const std::vector<double>& x0, const FourierProfile& profile, const NoisePath& noise,
                                 EngineOptions opt = {});

double realized_qv(const PathState& path, std::size_t u_index);

// Sup-in-time moment statistics of the derivative processes.
struct MomentReport {
  std::string name;
  double p = 2.0;
  int j = 1;
  Estimate estimate;
  double rhs = 0.0;    // right-hand-side functional of g (constant set to one)
  double ratio = 0.0;  // estimate / rhs
  long paths = 0;
};

struct MomentSamples {
  double p = 2.0;
  int j = 1;
  std::array<std::string, 5> names;
  std::array<std::vector<double>, 5> per_path;
  std::array<double, 5> rhs{};
};

MomentSamples moment_samples(const QuantileState& g, const FourierProfile& profile, long M_paths, double p, int j,
                             double T, double dt, std::uint64_t seed, int threads = 0, EngineOptions opt = {});

// Reports using the first `count` paths (all when count == 0).
std::vector<MomentReport> summarize_moments(const MomentSamples& s, std::size_t count = 0);

std::vector<MomentReport> moment_suite(const QuantileState& g, const FourierProfile& profile, long M_paths, double p,
                                       int j, double T, double dt, std::uint64_t seed, int threads = 0);

void write_trajectory_csv(std::ostream& os, const PathState& path, int stride = 1);

}  // namespace tbel
