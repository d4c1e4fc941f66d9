#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "tbel/functionals.hpp"

namespace tbel {

using cplx = std::complex<double>;

// c_k(A), k = 0..K_A, with A(y) = sum_k c_k e^{-iky} and c_{-k} = conj(c_k).
struct TransportField {
  int K_A = 0;
  std::vector<cplx> c;
  std::vector<double> grid;  // values on the x-grid when available
  int t_index = 0;

  cplx coeff(int k) const { return k >= 0 ? c[k] : std::conj(c[-k]); }
  double eval(double y) const;
};

struct MollifierSpec {
  double eps = 0.2;
  double multiplier(int k) const { return std::exp(-0.5 * double(k) * k * eps * eps); }
};

// Direction actually pushed through A: h itself or h / g' (see Convention).
std::vector<double> transport_weight(const PerturbationDirection& h, const std::vector<double>& g1, Convention conv);

// A_t = (d_u x_t)(F_t) h(F_t) sampled on the x-grid by monotone inversion of u -> x_t(u), then a DFT.
TransportField compute_A(const PathState& path, const PerturbationDirection& h, int t_index, std::size_t n_x = 512,
                         Convention conv = Convention::Scaled);

// c_k for k = 0..K by trapezoid quadrature of (1/2pi) int_0^1 J(u)^2 w(u) e^{ik x(u)} du over n open nodes.
void transport_coeffs_fast(const double* x, const double* J, const double* w, std::size_t n, int K, cplx* c);

TransportField mollify(const TransportField& field, const MollifierSpec& spec);

// Circular convolution of grid values with the wrapped Gaussian of standard deviation eps.
std::vector<double> convolve_wrapped_gaussian(const std::vector<double>& grid, double eps);

struct LambdaSet {
  std::vector<cplx> lambda;  // k = 0..min(K_A, K_max)
  double dropped_energy = 0.0;
  double total_energy = 0.0;
};

LambdaSet compute_lambda(const TransportField& field_eps, const FourierProfile& profile);

// sum_{|k| <= K} f_k lambda_k e^{-iky}
double reconstruct_from_lambda(const LambdaSet& l, const FourierProfile& profile, double y);

struct BELWeight {
  std::vector<std::vector<cplx>> lambda;  // per step, k = 0..K_max
  double stochastic_integral = 0.0;       // sum_k int Re(conj(lambda) dW^k), left-point
  double l2_norm = 0.0;                   // sum_k int |lambda_s^k|^2 ds
};

BELWeight compute_weight(const PathState& path, const NoisePath& noise, const PerturbationDirection& h,
                         const FourierProfile& profile, double eps, int t_index, Convention conv = Convention::Scaled);

struct KResult {
  std::vector<double> K;       // closed grid
  double omitted_bound = 0.0;  // dt * ||H||_inf * ||d_u x||_inf / sqrt(dt) over the dropped final step
};

KResult compute_K(const PathState& path, const PerturbationDirection& h, double eps, int t_index,
                  Convention conv = Convention::Scaled);

enum class Pairing {
  Replica,  // each beta-replica's weight multiplies phi of its own measure
  Measure,  // weight multiplies phi of the beta-averaged measure
};

struct BelOptions {
  std::vector<double> times{0.5};
  std::vector<double> eps{0.2};
  Convention conv = Convention::Scaled;
  Pairing pairing = Pairing::Replica;
  bool want_K = false;
  int energy_stride = 50;  // steps between dropped-energy probes
};

struct BelCell {
  double t = 0.0;
  double eps = 0.0;
  Estimate I1;          // paired according to BelOptions::pairing
  Estimate I1_replica;  // weight times phi of the replica's own measure
  Estimate I1_measure;  // weight times phi of the averaged measure
  Estimate I1_def;      // (1/t) E int int d_mu phi J_t/J_s A^eps(x_s) ds du, computed pathwise
  Estimate I2;
  Estimate total;  // I1 + I2, shared noise
  Estimate direct;
  Estimate split_gap;  // total - direct per replica
  Estimate weight_mean;  // (1/t) sum_k int Re(conj(lambda) dW), no functional
  Estimate weight_l2;
  Estimate K_sup;
  double dropped_energy = 0.0;    // max over probes of the energy beyond K_max
  double dropped_fraction = 0.0;  // max over probes of dropped / total energy
  bool dropped_warning = false;   // dropped energy above 1% of the weight's l2 norm
  double mollifier_contraction_max = 0.0;  // max over probes of ||A^eps||_inf / ||A||_inf
  double mollifier_error_ratio_max = 0.0;  // max over probes of ||A - A^eps||_inf / (eps sqrt(2/pi) ||A'||_inf)
};

std::vector<BelCell> run_bel(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                             const FourierProfile& profile, const McSettings& mc, const BelOptions& opt);

GradientReport estimate_I1(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                           const FourierProfile& profile, double t, double eps, const McSettings& mc,
                           Convention conv = Convention::Scaled);
GradientReport estimate_I2(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                           const FourierProfile& profile, double t, double eps, const McSettings& mc,
                           Convention conv = Convention::Scaled);

struct BelReport {
  GradientReport I1, I2, total, direct;
  double split_gap = 0.0;
  double split_gap_se = 0.0;
};

BelReport estimate_gradient_bel(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                                const FourierProfile& profile, double t, double eps, const McSettings& mc,
                                Convention conv = Convention::Scaled);

struct IbpResult {
  Estimate lhs;
  Estimate rhs;
  double combined_se = 0.0;  // standard error of the per-replica difference
  double gap = 0.0;
};

// Both sides of the idiosyncratic integration by parts at node u_index; the measure entering
// the functional derivative is built from the other beta-replicas of the same common noise.
IbpResult check_idiosyncratic_ibp(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                                  const FourierProfile& profile, double s, double t, std::size_t u_index, double eps,
                                  const McSettings& mc, Convention conv = Convention::Scaled);

struct RateRow {
  double t = 0.0;
  double eps = 0.0;
  BelCell bel;
  GradientReport fd;
  double scaled = 0.0;  // t^{2+theta} |gradient|
};

std::vector<RateRow> rate_sweep(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                                const FourierProfile& profile, const std::vector<double>& t_grid, double eps,
                                double theta, double rho, const McSettings& mc);

const char* sweep_csv_header();
void write_sweep_row(std::ostream& os, const BelCell& c, std::uint64_t seed);

}  // namespace tbel
