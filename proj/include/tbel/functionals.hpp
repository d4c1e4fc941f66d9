#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tbel/sde.hpp"

namespace tbel {

enum class FunctionalKind { Linear, Interaction };

// Trigonometric moments C_n = int cos(nx) dmu, S_n = int sin(nx) dmu, n = 1..degree.
struct TrigMoments {
  std::vector<double> C, S;
};

// phi(mu) = a0 + sum_n a_n C_n + b_n S_n               (linear, profile a0 + sum a_n cos + b_n sin)
// phi(mu) = a0 + sum_n a_n (C_n^2 + S_n^2)              (interaction with even profile a0 + sum a_n cos(nz))
class TestFunctional {
 public:
  static constexpr int kMaxDegree = 8;

  static TestFunctional linear(double a0, std::vector<double> a, std::vector<double> b);
  static TestFunctional interaction(double a0, std::vector<double> a);
  static TestFunctional cosine() { return linear(0.0, {1.0}, {}); }

  FunctionalKind kind() const { return kind_; }
  int degree() const { return static_cast<int>(a_.size()); }
  double a0() const { return a0_; }
  const std::vector<double>& a() const { return a_; }
  const std::vector<double>& b() const { return b_; }
  bool constant() const;

  TrigMoments moments(const double* samples, std::size_t n) const;
  TrigMoments moments_of_density(const TorusDensity& p) const;

  double value(const TrigMoments& m) const;
  double value(const double* samples, std::size_t n) const { return value(moments(samples, n)); }
  // Linear functional derivative, canonicalized to zero mean against the uniform measure.
  double lfd(double v, const TrigMoments& m) const;
  // Lions derivative: the v-derivative of lfd.
  double lions(double v, const TrigMoments& m) const;
  // [dphi/dm](mu)(v) = lfd(v) - int lfd dmu.
  double bracket_lfd(double v, const TrigMoments& m) const;

  // The 2*pi-periodic profile and a bound on its sup norm.
  double profile(double z) const;
  double sup_bound() const;
  std::string describe() const;

 private:
  FunctionalKind kind_ = FunctionalKind::Linear;
  double a0_ = 0.0;
  std::vector<double> a_, b_;
};

// Samples of (Leb x P^beta) o x_t^{-1} for one common-noise realization.
struct EmpiricalMeasure {
  std::size_t n_u = 0;
  std::size_t m_beta = 0;
  std::vector<double> samples;  // replica-major, n_u per replica
};

EmpiricalMeasure build_empirical(const std::vector<PathState>& paths, int t_index);
EmpiricalMeasure empirical_from(const Ensemble& ens);

enum class Convention {
  Plain,   // directional derivative along g + rho h
  Scaled,  // along g + rho g' h
};

const char* to_string(Convention c);

struct McSettings {
  double dt = 1e-3;
  long M_W = 2000;
  int M_beta = 64;
  std::uint64_t seed = 20240601;
  int threads = 0;
  EngineOptions engine;
};

struct GradientReport {
  std::string estimator;
  double t = 0.0;
  double eps = 0.0;
  double rho = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  long M_W = 0;
  int M_beta = 0;
  std::uint64_t seed = 0;
  Convention convention = Convention::Plain;

  static const char* csv_header();
  void write_csv_row(std::ostream& os) const;
};

int steps_for(double t, double dt);

// P_t phi(mu_0^g) by outer Monte Carlo over W of phi at the beta-averaged empirical measure.
Estimate semigroup_value(const QuantileState& g, const TestFunctional& phi, const FourierProfile& profile, double t,
                         const McSettings& mc);

// Per-W-replica phi(mu_t) at each requested time; used by the finite-difference oracle.
std::vector<std::vector<double>> semigroup_paths(const QuantileState& g, const TestFunctional& phi,
                                                 const FourierProfile& profile, const std::vector<double>& times,
                                                 const McSettings& mc);

GradientReport gradient_direct(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                               const FourierProfile& profile, double t, const McSettings& mc,
                               Convention conv = Convention::Scaled);

// g moved by +/- rho along the convention's direction; order-1 derivatives only.
QuantileState perturb(const QuantileState& g, const PerturbationDirection& h, double rho, Convention conv);

GradientReport gradient_fd(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                           const FourierProfile& profile, double t, double rho, const McSettings& mc,
                           Convention conv = Convention::Plain);

std::vector<GradientReport> gradient_fd_multi(const QuantileState& g, const PerturbationDirection& h,
                                              const TestFunctional& phi, const FourierProfile& profile,
                                              const std::vector<double>& times, double rho, const McSettings& mc,
                                              Convention conv = Convention::Plain);

// int_0^{2 pi} d_mu phi(mu)(v) dv for the measure with density p, by an N-point trapezoid rule.
double zero_average_check(const TestFunctional& phi, const TorusDensity& p, std::size_t quadrature_n);

}  // namespace tbel
