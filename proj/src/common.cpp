#include "tbel/common.hpp"

#include <numeric>

namespace tbel {

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

Estimate mean_se(const std::vector<double>& v) {
  Estimate e;
  const std::size_t n = v.size();
  if (n == 0) return e;
  e.value = pairwise_sum(v) / static_cast<double>(n);
  if (n < 2) return e;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = (v[i] - e.value) * (v[i] - e.value);
  const double var = pairwise_sum(d) / static_cast<double>(n - 1);
  e.std_error = std::sqrt(var / static_cast<double>(n));
  return e;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw InvalidArgument("ls_slope needs two or more matched points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace tbel
