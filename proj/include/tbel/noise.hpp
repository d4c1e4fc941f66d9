#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace tbel {

// Power-law coefficient family f_k = C (1 + k^2)^{-alpha/2}, |k| <= K_max.
struct FourierProfile {
  double alpha = 4.0;
  double C = 1.0;
  int K_max = 64;
  std::vector<double> f;  // f[k] for k = 0..K_max; f_{-k} = f_k
  double sum_sq = 0.0;    // sum over |k| <= K_max of f_k^2
  double sum_k2 = 0.0;    // sum over |k| <= K_max of f_k^2 k^2

  double coeff(int k) const { return f[static_cast<std::size_t>(k < 0 ? -k : k)]; }
  double qv_rate() const { return 1.0 + sum_sq; }
  bool degenerate() const { return C == 0.0; }
};

FourierProfile build_profile(double alpha, double C, int K_max);

// The f == 0 profile: no common noise, only the idiosyncratic Brownian motion.
FourierProfile zero_profile(int K_max);

double sum_k2_truncated(double alpha, double C, int K);

// Upper bound on the neglected tail sum_{|k| > K_max} f_k^2 k^2, measured against K = 4096.
double truncation_tail_bound(const FourierProfile& p);

// Philox4x32-10 counter-based generator.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

std::uint64_t splitmix64(std::uint64_t x);

// Keys for the common-noise streams of W-replica w and the idiosyncratic stream of (w, b).
PhiloxKey common_key(std::uint64_t seed, std::uint64_t w);
PhiloxKey idio_key(std::uint64_t seed, std::uint64_t w, std::uint64_t b);

// Increments of (W^k)_{|k|<=K} at one step: re[k+K], im[k+K], each N(0, dt).
void draw_common_step(const PhiloxKey& key, std::uint64_t step, int K, double dt, double* re, double* im);
double draw_idio_step(const PhiloxKey& key, std::uint64_t step, double dt);

// Materialized noise of one (W-replica, beta-replica) pair.
// Stream layout: mode k draws (Re, Im) from counter slot zigzag(k) of the common key; beta uses the idiosyncratic key.
// The layout does not depend on K_max, so lowering K_max keeps the retained modes' increments unchanged.
struct NoisePath {
  std::uint64_t seed = 0;
  std::uint64_t w_index = 0;
  std::uint64_t b_index = 0;
  int n_steps = 0;
  double dt = 0.0;
  int K_max = 0;
  std::vector<double> dW_re;  // [n_steps][2K+1], column k + K
  std::vector<double> dW_im;
  std::vector<double> dBeta;  // [n_steps]

  int width() const { return 2 * K_max + 1; }
  const double* re(int step) const { return dW_re.data() + static_cast<std::size_t>(step) * width(); }
  const double* im(int step) const { return dW_im.data() + static_cast<std::size_t>(step) * width(); }
  double re(int step, int k) const { return re(step)[k + K_max]; }
  double im(int step, int k) const { return im(step)[k + K_max]; }
};

NoisePath sample_noise(const FourierProfile& profile, std::uint64_t seed, int n_steps, double dt,
                       std::uint64_t w_index = 0, std::uint64_t b_index = 0);

NoisePath zero_noise(int K_max, int n_steps, double dt);

// Sum consecutive blocks of `factor` increments: the same Brownian path on a coarser grid.
NoisePath coarsen(const NoisePath& fine, int factor);

void write_manifest(std::ostream& os, const FourierProfile& p, std::uint64_t seed, int n_steps, double dt);

}  // namespace tbel
