#include "tbel/spectral.hpp"

#include <cmath>

#include "fft.hpp"
#include "tbel/common.hpp"

namespace tbel {

PeriodicSeries::PeriodicSeries(const std::vector<double>& samples, double period)
    : n_(samples.size()), omega_(kTwoPi / period) {
  if (n_ < 2) throw InvalidArgument("PeriodicSeries needs at least two samples");
  detail::R2C fft(n_);
  for (std::size_t j = 0; j < n_; ++j) fft.in()[j] = samples[j];
  fft.run();
  c_.resize(n_ / 2 + 1);
  for (std::size_t k = 0; k <= n_ / 2; ++k) c_[k] = fft.out()[k] / static_cast<double>(n_);
}

double PeriodicSeries::eval(double x, int m) const {
  using cd = std::complex<double>;
  const std::size_t kmax = n_ / 2;
  const bool even = (n_ % 2 == 0);
  const cd e1 = std::polar(1.0, omega_ * x);
  cd e = e1;
  double s = (m == 0) ? c_[0].real() : 0.0;
  for (std::size_t k = 1; k <= kmax; ++k) {
    const double wk = omega_ * static_cast<double>(k);
    cd factor = 1.0;
    for (int i = 0; i < m; ++i) factor *= cd(0.0, wk);
    const double term = (factor * c_[k] * e).real();
    s += (even && k == kmax) ? term : 2.0 * term;
    e *= e1;
  }
  return s;
}

std::vector<std::complex<double>> forward_coeffs(const std::vector<double>& samples) {
  const std::size_t n = samples.size();
  detail::R2C fft(n);
  for (std::size_t j = 0; j < n; ++j) fft.in()[j] = samples[j];
  fft.run();
  std::vector<std::complex<double>> c(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) c[k] = std::conj(fft.out()[k]) / static_cast<double>(n);
  return c;
}

std::vector<double> synthesize(const std::vector<std::complex<double>>& c, std::size_t n) {
  detail::C2R fft(n);
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k <= half; ++k) fft.in()[k] = 0.0;
  for (std::size_t k = 0; k < c.size() && k <= half; ++k) {
    if (k == 0) {
      fft.in()[0] = c[0].real();
    } else if (k == half && n % 2 == 0) {
      fft.in()[k] = 2.0 * c[k].real();
    } else {
      fft.in()[k] = std::conj(c[k]);
    }
  }
  fft.run();
  return std::vector<double>(fft.out(), fft.out() + n);
}

}  // namespace tbel
