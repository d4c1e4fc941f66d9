#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbel {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 6.28318530717958647692;

// Input that violates an operation's precondition.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical breakdown detected at run time (non-finite state, failed inversion).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Cubic Hermite interpolation on [0,1] with endpoint values and slopes already scaled by the cell width.
inline double hermite(double y0, double y1, double m0, double m1, double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * m1;
}

inline double hermite_slope(double y0, double y1, double m0, double m1, double s) {
  const double s2 = s * s;
  return (6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * m1;
}

// Deterministic pairwise summation; result independent of thread count.
double pairwise_sum(const double* v, std::size_t n);
inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

// Sample mean and standard error of the mean.
Estimate mean_se(const std::vector<double>& v);

// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace tbel
