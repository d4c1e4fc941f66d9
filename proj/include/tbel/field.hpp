#pragma once

#include <memory>
#include <vector>

#include "tbel/noise.hpp"

namespace tbel {

namespace detail {
class C2R;
}

enum class FieldMode { Auto, Direct, Gridded };

// One step of the common-noise field xi(x) = sum_k f_k Re(e^{-ikx} dW^k) and its x-derivatives.
// Direct mode sums the modes at each point; gridded mode samples the field on a fine grid by FFT
// and interpolates with cubic Hermite splines (value and next derivative at the nodes).
class NoiseField {
 public:
  NoiseField(const FourierProfile& profile, int max_deriv, FieldMode mode = FieldMode::Auto, int grid_size = 1024);
  ~NoiseField();
  NoiseField(const NoiseField&) = delete;
  NoiseField& operator=(const NoiseField&) = delete;

  void set_increments(const double* dW_re, const double* dW_im);

  // out[m] = xi^{(m)}(x) for m = 0..max_deriv.
  void eval(double x, double* out) const;

  int max_deriv() const { return max_deriv_; }
  bool gridded() const { return gridded_; }
  bool zero() const { return zero_; }
  // Real Fourier form: xi(x) = sum_{k>=0} a_k cos(kx) + b_k sin(kx).
  const std::vector<double>& a() const { return a_; }
  const std::vector<double>& b() const { return b_; }

 private:
  FourierProfile profile_;
  int K_;
  int max_deriv_;
  bool gridded_;
  bool zero_ = true;
  int n_;
  double inv_h_ = 0.0;
  double h_ = 0.0;
  int stride_ = 0;
  std::vector<double> a_, b_;
  std::vector<double> grid_;  // node-major: grid_[j * stride_ + m]
  std::unique_ptr<detail::C2R> fft_;
};

// Reference evaluation by direct summation (independent of NoiseField).
double field_direct(const FourierProfile& profile, const double* dW_re, const double* dW_im, double x, int m);

}  // namespace tbel
