#include "tbel/torus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "tbel/spectral.hpp"

namespace tbel {

namespace {

double wrap_0_2pi(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0) r += kTwoPi;
  return r;
}

// Monotone cubic Hermite spline through increasing nodes (x_i, y_i) with slopes d_i (Fritsch-Carlson limited).
class MonotoneHermite {
 public:
  MonotoneHermite(std::vector<double> x, std::vector<double> y, std::vector<double> d)
      : x_(std::move(x)), y_(std::move(y)), d_(std::move(d)) {
    for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
      const double h = x_[i + 1] - x_[i];
      const double delta = (y_[i + 1] - y_[i]) / h;
      if (delta <= 0) throw NumericalError("monotone spline: non-increasing data");
      const double a = d_[i] / delta;
      const double b = d_[i + 1] / delta;
      const double r = a * a + b * b;
      if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        d_[i] = tau * a * delta;
        d_[i + 1] = tau * b * delta;
      }
    }
  }

  double eval(double x) const {
    const std::size_t i = cell(x);
    const double h = x_[i + 1] - x_[i];
    return hermite(y_[i], y_[i + 1], d_[i] * h, d_[i + 1] * h, (x - x_[i]) / h);
  }

  // Solve eval(x) = y by bisection to |dx| <= tol.
  double invert(double y, double tol) const {
    auto it = std::upper_bound(y_.begin(), y_.end(), y);
    std::size_t i = (it == y_.begin()) ? 0 : static_cast<std::size_t>(it - y_.begin()) - 1;
    if (i + 1 >= y_.size()) i = y_.size() - 2;
    double lo = x_[i], hi = x_[i + 1];
    const double h = hi - lo;
    auto f = [&](double x) { return hermite(y_[i], y_[i + 1], d_[i] * h, d_[i + 1] * h, (x - x_[i]) / h) - y; };
    if (f(lo) > 0) return lo;
    if (f(hi) < 0) return hi;
    for (int it2 = 0; it2 < 200 && hi - lo > tol; ++it2) {
      const double mid = 0.5 * (lo + hi);
      if (f(mid) < 0) lo = mid;
      else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  std::size_t cell(double x) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = (it == x_.begin()) ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
  }

  std::vector<double> x_, y_, d_;
};

}  // namespace

double TorusDensity::mass() const {
  double s = pairwise_sum(values);
  return s * dx();
}

void TorusDensity::validate() const {
  if (values.size() < 4 || values.size() % 2 != 0) throw InvalidArgument("TorusDensity: grid size must be even and >= 4");
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("TorusDensity: values must be strictly positive and finite");
  }
  if (std::abs(mass() - 1.0) > 1e-10) throw InvalidArgument("TorusDensity: not normalized");
}

TorusDensity TorusDensity::from_function(std::size_t n_x, const std::function<double(double)>& p) {
  TorusDensity d;
  d.values.resize(n_x);
  for (std::size_t i = 0; i < n_x; ++i) d.values[i] = p(kTwoPi * static_cast<double>(i) / static_cast<double>(n_x));
  return d;
}

TorusDensity TorusDensity::uniform(std::size_t n_x) {
  TorusDensity d;
  d.values.assign(n_x, 1.0 / kTwoPi);
  return d;
}

int QuantileState::available_order() const {
  if (deriv1.empty()) return 0;
  if (deriv2.empty()) return 1;
  if (deriv3.empty()) return 2;
  return 3;
}

void QuantileState::validate() const {
  if (values.size() < 3) throw InvalidArgument("QuantileState: need at least two cells");
  const std::size_t n = values.size();
  if (std::abs(values.back() - values.front() - kTwoPi) > 1e-10)
    throw InvalidArgument("QuantileState: g(1) - g(0) must equal 2*pi");
  if (deriv1.size() != n) throw InvalidArgument("QuantileState: deriv1 missing or misshaped");
  for (double d : deriv1) {
    if (!(d > 0.0) || !std::isfinite(d)) throw InvalidArgument("QuantileState: deriv1 must be strictly positive");
  }
  if (std::abs(deriv1.back() - deriv1.front()) > 1e-10) throw InvalidArgument("QuantileState: deriv1 not 1-periodic");
  if (!deriv2.empty() && deriv2.size() != n) throw InvalidArgument("QuantileState: deriv2 misshaped");
  if (!deriv3.empty() && deriv3.size() != n) throw InvalidArgument("QuantileState: deriv3 misshaped");
}

double QuantileState::eval(double u) const {
  const double fl = std::floor(u);
  const double frac = u - fl;
  const double n = static_cast<double>(n_u());
  double s = frac * n;
  std::size_t j = static_cast<std::size_t>(s);
  if (j >= n_u()) j = n_u() - 1;
  const double h = 1.0 / n;
  const double v = hermite(values[j], values[j + 1], deriv1[j] * h, deriv1[j + 1] * h, s - static_cast<double>(j));
  return v + kTwoPi * fl;
}

QuantileState QuantileState::from_function(std::size_t n_u, const std::function<double(double)>& g,
                                           const std::function<double(double)>& g1,
                                           const std::function<double(double)>& g2,
                                           const std::function<double(double)>& g3) {
  QuantileState q;
  q.values.resize(n_u + 1);
  q.deriv1.resize(n_u + 1);
  if (g2) q.deriv2.resize(n_u + 1);
  if (g3) q.deriv3.resize(n_u + 1);
  for (std::size_t j = 0; j <= n_u; ++j) {
    const double u = static_cast<double>(j) / static_cast<double>(n_u);
    q.values[j] = g(u);
    q.deriv1[j] = g1(u);
    if (g2) q.deriv2[j] = g2(u);
    if (g3) q.deriv3[j] = g3(u);
  }
  q.values[n_u] = q.values[0] + kTwoPi;
  q.deriv1[n_u] = q.deriv1[0];
  if (g2) q.deriv2[n_u] = q.deriv2[0];
  if (g3) q.deriv3[n_u] = q.deriv3[0];
  return q;
}

void PerturbationDirection::validate() const {
  if (values.size() < 3 || deriv1.size() != values.size()) throw InvalidArgument("PerturbationDirection: misshaped");
  if (std::abs(values.back() - values.front()) > 1e-10 || std::abs(deriv1.back() - deriv1.front()) > 1e-10)
    throw InvalidArgument("PerturbationDirection: not 1-periodic");
}

double PerturbationDirection::sup_c1() const {
  double a = 0.0, b = 0.0;
  for (double v : values) a = std::max(a, std::abs(v));
  for (double v : deriv1) b = std::max(b, std::abs(v));
  return a + b;
}

PerturbationDirection PerturbationDirection::from_function(std::size_t n_u, const std::function<double(double)>& h,
                                                           const std::function<double(double)>& h1) {
  PerturbationDirection p;
  p.values.resize(n_u + 1);
  p.deriv1.resize(n_u + 1);
  for (std::size_t j = 0; j < n_u; ++j) {
    const double u = static_cast<double>(j) / static_cast<double>(n_u);
    p.values[j] = h(u);
    p.deriv1[j] = h1(u);
  }
  p.values[n_u] = p.values[0];
  p.deriv1[n_u] = p.deriv1[0];
  return p;
}

PerturbationDirection PerturbationDirection::zero(std::size_t n_u) {
  PerturbationDirection p;
  p.values.assign(n_u + 1, 0.0);
  p.deriv1.assign(n_u + 1, 0.0);
  return p;
}

double torus_distance(double x, double y) {
  const double d = std::fmod(std::abs(x - y), kTwoPi);
  return std::min(d, kTwoPi - d);
}

QuantileState density_to_quantile(const TorusDensity& p, double x0, std::size_t n_u) {
  p.validate();
  const std::size_t n_x = p.size();
  if (n_u == 0) n_u = n_x / 2;
  const PeriodicSeries ps(p.values, kTwoPi);
  const auto& c = ps.coeffs();
  const double c0 = c[0].real();
  const std::size_t kmax = n_x / 2;

  // Cumulative F(x) - F(x0) of the trigonometric interpolant, exact for its modes.
  auto cumulative = [&](double x) {
    double s = c0 * (x - x0);
    for (std::size_t k = 1; k <= kmax; ++k) {
      const double kk = static_cast<double>(k);
      const std::complex<double> diff = std::polar(1.0, kk * x) - std::polar(1.0, kk * x0);
      const double term = (c[k] * diff / std::complex<double>(0.0, kk)).real();
      s += (k == kmax) ? term : 2.0 * term;
    }
    return s;
  };

  const std::size_t nodes = n_x + 1;
  std::vector<double> xs(nodes), fs(nodes), ds(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    xs[i] = x0 + p.dx() * static_cast<double>(i);
    fs[i] = cumulative(xs[i]);
    ds[i] = ps.eval(xs[i]);
  }
  fs[0] = 0.0;
  // Total mass is one; pin the end node so the inverse closes exactly.
  fs[n_x] = 1.0;
  ds[n_x] = ds[0];
  for (double d : ds) {
    if (!(d > 0.0)) throw InvalidArgument("density_to_quantile: interpolated density not positive");
  }
  const MonotoneHermite spline(xs, fs, ds);

  QuantileState q;
  q.values.resize(n_u + 1);
  q.deriv1.resize(n_u + 1);
  q.deriv2.resize(n_u + 1);
  q.deriv3.resize(n_u + 1);
  for (std::size_t j = 0; j < n_u; ++j) {
    const double u = static_cast<double>(j) / static_cast<double>(n_u);
    const double x = (j == 0) ? x0 : spline.invert(u, 1e-12);
    const double pv = ps.eval(x, 0), p1 = ps.eval(x, 1), p2 = ps.eval(x, 2);
    q.values[j] = x;
    q.deriv1[j] = 1.0 / pv;
    q.deriv2[j] = -p1 / (pv * pv * pv);
    q.deriv3[j] = (3.0 * p1 * p1 - pv * p2) / std::pow(pv, 5);
  }
  q.values[n_u] = x0 + kTwoPi;
  q.deriv1[n_u] = q.deriv1[0];
  q.deriv2[n_u] = q.deriv2[0];
  q.deriv3[n_u] = q.deriv3[0];
  return q;
}

TorusDensity quantile_to_density(const QuantileState& g, std::size_t n_x) {
  if (g.deriv1.size() != g.values.size()) throw InvalidArgument("quantile_to_density: deriv1 missing");
  for (double d : g.deriv1) {
    if (!(d > 0.0)) throw InvalidArgument("quantile_to_density: deriv1 not positive");
  }
  const std::size_t n_u = g.n_u();
  if (n_x == 0) n_x = 2 * n_u;
  std::vector<double> us(n_u + 1);
  for (std::size_t j = 0; j <= n_u; ++j) us[j] = g.u(j);
  const MonotoneHermite spline(us, g.values, g.deriv1);
  const PeriodicSeries d1(std::vector<double>(g.deriv1.begin(), g.deriv1.end() - 1), 1.0);

  TorusDensity p;
  p.values.resize(n_x);
  const double base = g.values.front();
  for (std::size_t i = 0; i < n_x; ++i) {
    const double y = kTwoPi * static_cast<double>(i) / static_cast<double>(n_x);
    const double target = base + wrap_0_2pi(y - base);
    const double u = spline.invert(target, 1e-13);
    const double gp = d1.eval(u);
    if (!(gp > 0.0)) throw NumericalError("quantile_to_density: interpolated derivative not positive");
    p.values[i] = 1.0 / gp;
  }
  const double m = p.mass();
  for (double& v : p.values) v /= m;
  return p;
}

QuantileState canonical_rebase(const QuantileState& g) {
  const TorusDensity p = quantile_to_density(g, 2 * g.n_u());
  return density_to_quantile(p, 0.0, g.n_u());
}

double circular_wasserstein2(const TorusDensity& mu, const TorusDensity& nu) {
  mu.validate();
  nu.validate();
  const std::size_t n_q = std::max<std::size_t>(4096, 4 * std::max(mu.size(), nu.size()));

  // Quantile of the cell-wise constant density (cell mass by trapezoid), anchored at x = 0,
  // sampled at the midpoints u = (j + 1/2)/n_q.
  auto quantiles = [n_q](const TorusDensity& d) {
    const std::size_t n = d.size();
    std::vector<double> cdf(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + 0.5 * (d.values[i] + d.values[(i + 1) % n]) * d.dx();
    for (double& c : cdf) c /= cdf[n];
    std::vector<double> q(n_q);
    std::size_t i = 0;
    for (std::size_t j = 0; j < n_q; ++j) {
      const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(n_q);
      while (i + 1 < n && cdf[i + 1] < u) ++i;
      const double frac = (u - cdf[i]) / (cdf[i + 1] - cdf[i]);
      q[j] = d.dx() * (static_cast<double>(i) + frac);
    }
    return q;
  };
  // Interpolation acts on the second argument only; both orders are averaged for exact symmetry.
  auto one_way = [n_q](const std::vector<double>& qa, const std::vector<double>& qb) {

    // Lift of qb to all real u by pseudo-periodicity, linear between midpoints.
    auto qb_at = [&](double u) {
      const double pos = u * static_cast<double>(n_q) - 0.5;
      const double fl = std::floor(pos);
      const long long k = static_cast<long long>(fl);
      auto node = [&](long long m) {
        const long long n = static_cast<long long>(n_q);
        const long long r = ((m % n) + n) % n;
        const double wraps = static_cast<double>((m - r) / n);
        return qb[static_cast<std::size_t>(r)] + kTwoPi * wraps;
      };
      const double t = pos - fl;
      return (1.0 - t) * node(k) + t * node(k + 1);
    };
    auto cost = [&](double s) {
      std::vector<double> terms(n_q);
      for (std::size_t j = 0; j < n_q; ++j) {
        const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(n_q);
        const double d = qa[j] - qb_at(u + s);
        terms[j] = d * d;
      }
      return pairwise_sum(terms) / static_cast<double>(n_q);
    };

    const int scan = 128;
    double best_s = 0.0, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= scan; ++i) {
      const double s = -1.0 + 2.0 * i / scan;
      const double c = cost(s);
      if (c < best) {
        best = c;
        best_s = s;
      }
    }
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = best_s - 2.0 / scan, hi = best_s + 2.0 / scan;
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = cost(x1), f2 = cost(x2);
    while (hi - lo > 1e-12) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - invphi * (hi - lo);
        f1 = cost(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + invphi * (hi - lo);
        f2 = cost(x2);
      }
    }
    return std::min({best, f1, f2});
  };
  const std::vector<double> qa = quantiles(mu), qb = quantiles(nu);
  return std::sqrt(std::max(0.0, 0.5 * (one_way(qa, qb) + one_way(qb, qa))));
}

void write_csv(std::ostream& os, const TorusDensity& p) {
  os << "TorusDensity," << p.size() << "\n";
  os.precision(17);
  for (std::size_t i = 0; i < p.size(); ++i) os << p.node(i) << "," << p.values[i] << "\n";
}

TorusDensity read_density_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("TorusDensity,", 0) != 0)
    throw InvalidArgument("read_density_csv: missing TorusDensity header");
  const std::size_t n = std::stoul(line.substr(13));
  TorusDensity p;
  p.values.reserve(n);
  while (p.values.size() < n && std::getline(is, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidArgument("read_density_csv: malformed row");
    p.values.push_back(std::stod(line.substr(comma + 1)));
  }
  if (p.values.size() != n) throw InvalidArgument("read_density_csv: truncated file");
  p.validate();
  return p;
}

void write_csv(std::ostream& os, const QuantileState& g) {
  os << "QuantileState," << g.n_u() << "\n";
  os.precision(17);
  for (std::size_t j = 0; j <= g.n_u(); ++j) os << g.u(j) << "," << g.values[j] << "\n";
}

}  // namespace tbel
