#pragma once

#include <complex>
#include <iosfwd>
#include <vector>

#include "tbel/functionals.hpp"

namespace tbel {

// p(v) = sum_{|k|<=K_p} p_k e^{ikv}, p_{-k} = conj(p_k), p_0 = 1/(2 pi).
struct SpectralDensity {
  double t = 0.0;
  std::vector<std::complex<double>> p;  // k = 0..K_p

  int K_p() const { return static_cast<int>(p.size()) - 1; }
  double eval(double v) const;
  TorusDensity realize(std::size_t n_x) const;
  double energy() const;                  // sum over all k of |p_k|^2
  double high_mode_energy(int k0) const;  // sum over |k| > k0

  static SpectralDensity from_density(const TorusDensity& d, int K_p);
};

enum class LambdaMode { Super, Critical };

// (1 + sum f^2)/2 above threshold, sum f^2 / 2 at the critical value.
double diffusion_lambda(const FourierProfile& profile, LambdaMode mode);

struct SpdeOptions {
  int K_p = 64;
  LambdaMode mode = LambdaMode::Super;
  int snapshot_stride = 0;  // 0: initial and final only
};

struct SpdePath {
  std::vector<SpectralDensity> snapshots;
  double lambda = 0.0;
  double min_density = 0.0;  // smallest realized grid value over all snapshots
  bool positive = true;
};

SpdePath evolve_density(const TorusDensity& p0, const FourierProfile& profile, const NoisePath& noise,
                        const SpdeOptions& opt = {});

// Wrapped-Gaussian kernel density on an n_x-point grid.
TorusDensity kde_wrapped(const EmpiricalMeasure& samples, double bandwidth, std::size_t n_x = 512);
TorusDensity kde_wrapped(const std::vector<double>& samples, double bandwidth, std::size_t n_x = 512);

double l1_distance(const TorusDensity& a, const TorusDensity& b);

struct CriticalDiagnostic {
  double super_high = 0.0;
  double critical_high = 0.0;
  double ratio = 0.0;  // critical / super high-mode energy at the final time
};

CriticalDiagnostic critical_vs_super(const TorusDensity& p0, const FourierProfile& profile, const NoisePath& noise,
                                     int K_p = 64);

struct DensityComparison {
  double t = 0.0;
  double l1 = 0.0;
  double bandwidth = 0.0;
  TorusDensity spde;
  TorusDensity particles;
  double spde_min = 0.0;
};

// Particle ensemble (one common-noise replica w, M_beta idiosyncratic replicas) against the SPDE on the same W.
DensityComparison compare_particles_spde(const QuantileState& g, const FourierProfile& profile, double t, double dt,
                                         int M_beta, std::uint64_t seed, std::uint64_t w, double bandwidth,
                                         std::size_t n_x = 512, int K_p = 64);

// Rows t,x,p on an n_x grid.
void write_density_csv(std::ostream& os, const std::vector<SpectralDensity>& snaps, std::size_t n_x);

}  // namespace tbel
