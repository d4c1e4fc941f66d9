#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

namespace tbel::detail {

// FFTW planning is not thread-safe; execution with new-array functions is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class R2C {
 public:
  explicit R2C(std::size_t n) : n_(n) {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~R2C() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  R2C(const R2C&) = delete;
  R2C& operator=(const R2C&) = delete;

  double* in() { return in_; }
  std::complex<double>* out() { return reinterpret_cast<std::complex<double>*>(out_); }
  void run() { fftw_execute(plan_); }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

class C2R {
 public:
  explicit C2R(std::size_t n) : n_(n) {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    in_ = fftw_alloc_complex(n / 2 + 1);
    out_ = fftw_alloc_real(n);
    plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~C2R() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  C2R(const C2R&) = delete;
  C2R& operator=(const C2R&) = delete;

  std::complex<double>* in() { return reinterpret_cast<std::complex<double>*>(in_); }
  double* out() { return out_; }
  // The input array is overwritten by FFTW.
  void run() { fftw_execute(plan_); }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  fftw_complex* in_;
  double* out_;
  fftw_plan plan_;
};

}  // namespace tbel::detail
