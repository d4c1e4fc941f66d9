#pragma once

#include <complex>
#include <vector>

namespace tbel {

// Trigonometric interpolant of N equispaced samples of a function with period L.
class PeriodicSeries {
 public:
  PeriodicSeries() = default;
  PeriodicSeries(const std::vector<double>& samples, double period);

  // m-th derivative of the interpolant at x (m = 0..3).
  double eval(double x, int m = 0) const;
  // Coefficient P_k of exp(2*pi*i*k*x/L), k = 0..N/2.
  const std::vector<std::complex<double>>& coeffs() const { return c_; }
  std::size_t size() const { return n_; }

 private:
  std::vector<std::complex<double>> c_;
  std::size_t n_ = 0;
  double omega_ = 1.0;
};

// c_k = (1/N) sum_j a_j exp(+i k 2 pi j / N) for k = 0..N/2, the discretization of (1/2pi) int a(y) e^{iky} dy.
std::vector<std::complex<double>> forward_coeffs(const std::vector<double>& samples);

// Real samples of sum_{|k|<=K} c_k e^{-iky} on an N-point grid, with c_{-k} = conj(c_k).
std::vector<double> synthesize(const std::vector<std::complex<double>>& c, std::size_t n);

}  // namespace tbel
