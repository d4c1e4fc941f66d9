#include "tbel/field.hpp"

#include <cmath>
#include <complex>

#include "fft.hpp"
#include "tbel/common.hpp"

namespace tbel {

NoiseField::NoiseField(const FourierProfile& profile, int max_deriv, FieldMode mode, int grid_size)
    : profile_(profile), K_(profile.K_max), max_deriv_(max_deriv), n_(grid_size) {
  if (max_deriv < 0 || max_deriv > 3) throw InvalidArgument("NoiseField: max_deriv must be in 0..3");
  if (mode == FieldMode::Auto) mode = (K_ >= 8) ? FieldMode::Gridded : FieldMode::Direct;
  gridded_ = (mode == FieldMode::Gridded);
  a_.assign(static_cast<std::size_t>(K_) + 1, 0.0);
  b_.assign(static_cast<std::size_t>(K_) + 1, 0.0);
  if (gridded_) {
    if (n_ < 2 * K_ + 2 || n_ % 2 != 0) throw InvalidArgument("NoiseField: grid too coarse for K_max");
    h_ = kTwoPi / n_;
    inv_h_ = n_ / kTwoPi;
    stride_ = max_deriv_ + 2;
    grid_.assign(static_cast<std::size_t>(n_) * stride_, 0.0);
    fft_ = std::make_unique<detail::C2R>(static_cast<std::size_t>(n_));
  }
}

NoiseField::~NoiseField() = default;

void NoiseField::set_increments(const double* re, const double* im) {
  const int K = K_;
  const auto& f = profile_.f;
  a_[0] = f[0] * re[K];
  b_[0] = 0.0;
  for (int k = 1; k <= K; ++k) {
    a_[k] = f[k] * (re[K + k] + re[K - k]);
    b_[k] = f[k] * (im[K + k] - im[K - k]);
  }
  zero_ = profile_.degenerate();
  if (!gridded_ || zero_) return;
  using cd = std::complex<double>;
  const int half = n_ / 2;
  for (int m = 0; m < stride_; ++m) {
    cd* X = fft_->in();
    X[0] = (m == 0) ? a_[0] : 0.0;
    for (int k = 1; k <= half; ++k) {
      if (k > K) {
        X[k] = 0.0;
        continue;
      }
      cd ik_m = 1.0;
      for (int r = 0; r < m; ++r) ik_m *= cd(0.0, double(k));
      X[k] = ik_m * cd(a_[k], -b_[k]) * 0.5;
    }
    fft_->run();
    const double* out = fft_->out();
    for (int j = 0; j < n_; ++j) grid_[static_cast<std::size_t>(j) * stride_ + m] = out[j];
  }
}

void NoiseField::eval(double x, double* out) const {
  if (zero_) {
    for (int m = 0; m <= max_deriv_; ++m) out[m] = 0.0;
    return;
  }
  if (gridded_) {
    const double s = x * inv_h_;
    const double fl = std::floor(s);
    const double t = s - fl;
    long long jj = static_cast<long long>(fl) % n_;
    if (jj < 0) jj += n_;
    const std::size_t j = static_cast<std::size_t>(jj);
    const std::size_t j1 = (j + 1 == static_cast<std::size_t>(n_)) ? 0 : j + 1;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = (t3 - 2 * t2 + t) * h_;
    const double h01 = -2 * t3 + 3 * t2, h11 = (t3 - t2) * h_;
    const double* g0 = grid_.data() + j * stride_;
    const double* g1 = grid_.data() + j1 * stride_;
    for (int m = 0; m <= max_deriv_; ++m) out[m] = h00 * g0[m] + h01 * g1[m] + h10 * g0[m + 1] + h11 * g1[m + 1];
    return;
  }
  const double s1 = std::sin(x), c1 = std::cos(x);
  double p0 = a_[0], q1 = 0, p2 = 0, q3 = 0;
  double ck = 1.0, sk = 0.0;
  for (int k = 1; k <= K_; ++k) {
    const double cn = ck * c1 - sk * s1;
    sk = sk * c1 + ck * s1;
    ck = cn;
    const double P = a_[k] * ck + b_[k] * sk;
    const double Q = -a_[k] * sk + b_[k] * ck;
    const double kk = double(k);
    p0 += P;
    q1 += kk * Q;
    p2 -= kk * kk * P;
    q3 -= kk * kk * kk * Q;
  }
  out[0] = p0;
  if (max_deriv_ >= 1) out[1] = q1;
  if (max_deriv_ >= 2) out[2] = p2;
  if (max_deriv_ >= 3) out[3] = q3;
}

double field_direct(const FourierProfile& profile, const double* re, const double* im, double x, int m) {
  // Literal form: sum over k of f_k Re(e^{-ikx} dW^k), differentiated m times in x.
  using cd = std::complex<double>;
  const int K = profile.K_max;
  double s = 0.0;
  for (int k = -K; k <= K; ++k) {
    const cd dW(re[k + K], im[k + K]);
    cd d = 1.0;
    for (int r = 0; r < m; ++r) d *= cd(0.0, -double(k));
    s += profile.coeff(k) * (d * std::exp(cd(0.0, -double(k) * x)) * dW).real();
  }
  return s;
}

}  // namespace tbel
