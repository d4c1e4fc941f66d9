#include "tbel/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>
#include <sstream>

#include "tbel/parallel.hpp"

namespace tbel {

namespace {

// Exact reduction to the canonical representative in [-pi, pi].
double reduce(double v) { return std::remainder(v, kTwoPi); }

}  // namespace

TestFunctional TestFunctional::linear(double a0, std::vector<double> a, std::vector<double> b) {
  const std::size_t deg = std::max(a.size(), b.size());
  if (deg > static_cast<std::size_t>(kMaxDegree)) throw InvalidArgument("TestFunctional: degree above 8");
  a.resize(deg, 0.0);
  b.resize(deg, 0.0);
  TestFunctional f;
  f.kind_ = FunctionalKind::Linear;
  f.a0_ = a0;
  f.a_ = std::move(a);
  f.b_ = std::move(b);
  return f;
}

TestFunctional TestFunctional::interaction(double a0, std::vector<double> a) {
  if (a.size() > static_cast<std::size_t>(kMaxDegree)) throw InvalidArgument("TestFunctional: degree above 8");
  TestFunctional f;
  f.kind_ = FunctionalKind::Interaction;
  f.a0_ = a0;
  f.b_.assign(a.size(), 0.0);
  f.a_ = std::move(a);
  return f;
}

bool TestFunctional::constant() const {
  for (std::size_t n = 0; n < a_.size(); ++n) {
    if (a_[n] != 0.0 || b_[n] != 0.0) return false;
  }
  return true;
}

TrigMoments TestFunctional::moments(const double* samples, std::size_t n) const {
  const int deg = degree();
  TrigMoments m;
  m.C.assign(deg, 0.0);
  m.S.assign(deg, 0.0);
  if (deg == 0 || n == 0) return m;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = samples[i];
    for (int k = 1; k <= deg; ++k) {
      m.C[k - 1] += std::cos(k * x);
      m.S[k - 1] += std::sin(k * x);
    }
  }
  for (int k = 0; k < deg; ++k) {
    m.C[k] /= static_cast<double>(n);
    m.S[k] /= static_cast<double>(n);
  }
  return m;
}

TrigMoments TestFunctional::moments_of_density(const TorusDensity& p) const {
  const int deg = degree();
  TrigMoments m;
  m.C.assign(deg, 0.0);
  m.S.assign(deg, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = p.node(i);
    for (int k = 1; k <= deg; ++k) {
      m.C[k - 1] += std::cos(k * x) * p.values[i] * p.dx();
      m.S[k - 1] += std::sin(k * x) * p.values[i] * p.dx();
    }
  }
  return m;
}

double TestFunctional::value(const TrigMoments& m) const {
  double s = a0_;
  for (int k = 0; k < degree(); ++k) {
    if (kind_ == FunctionalKind::Linear) s += a_[k] * m.C[k] + b_[k] * m.S[k];
    else s += a_[k] * (m.C[k] * m.C[k] + m.S[k] * m.S[k]);
  }
  return s;
}

double TestFunctional::lfd(double v, const TrigMoments& m) const {
  v = reduce(v);
  double s = 0.0;
  for (int k = 1; k <= degree(); ++k) {
    const double c = std::cos(k * v), sn = std::sin(k * v);
    if (kind_ == FunctionalKind::Linear) s += a_[k - 1] * c + b_[k - 1] * sn;
    else s += 2.0 * a_[k - 1] * (c * m.C[k - 1] + sn * m.S[k - 1]);
  }
  return s;
}

double TestFunctional::lions(double v, const TrigMoments& m) const {
  v = reduce(v);
  double s = 0.0;
  for (int k = 1; k <= degree(); ++k) {
    const double c = std::cos(k * v), sn = std::sin(k * v);
    if (kind_ == FunctionalKind::Linear) s += k * (-a_[k - 1] * sn + b_[k - 1] * c);
    else s += 2.0 * a_[k - 1] * k * (-sn * m.C[k - 1] + c * m.S[k - 1]);
  }
  return s;
}

double TestFunctional::bracket_lfd(double v, const TrigMoments& m) const {
  double mean = 0.0;
  for (int k = 0; k < degree(); ++k) {
    if (kind_ == FunctionalKind::Linear) mean += a_[k] * m.C[k] + b_[k] * m.S[k];
    else mean += 2.0 * a_[k] * (m.C[k] * m.C[k] + m.S[k] * m.S[k]);
  }
  return lfd(v, m) - mean;
}

double TestFunctional::profile(double z) const {
  z = reduce(z);
  double s = a0_;
  for (int k = 1; k <= degree(); ++k) s += a_[k - 1] * std::cos(k * z) + b_[k - 1] * std::sin(k * z);
  return s;
}

double TestFunctional::sup_bound() const {
  double s = std::abs(a0_);
  for (int k = 0; k < degree(); ++k) s += std::abs(a_[k]) + std::abs(b_[k]);
  return s;
}

std::string TestFunctional::describe() const {
  std::ostringstream os;
  os << (kind_ == FunctionalKind::Linear ? "linear" : "interaction") << " a0=" << a0_ << " a=[";
  for (std::size_t k = 0; k < a_.size(); ++k) os << (k ? " " : "") << a_[k];
  os << "] b=[";
  for (std::size_t k = 0; k < b_.size(); ++k) os << (k ? " " : "") << b_[k];
  os << "]";
  return os.str();
}

EmpiricalMeasure build_empirical(const std::vector<PathState>& paths, int t_index) {
  if (paths.empty()) throw InvalidArgument("build_empirical: no paths");
  EmpiricalMeasure m;
  m.n_u = paths.front().n_u;
  m.m_beta = paths.size();
  for (const auto& p : paths) {
    if (p.seed != paths.front().seed || p.w_index != paths.front().w_index)
      throw InvalidArgument("build_empirical: paths do not share the common noise");
    if (p.n_u != m.n_u) throw InvalidArgument("build_empirical: grid mismatch");
    if (t_index < 0 || t_index > p.n_steps) throw InvalidArgument("build_empirical: t_index out of range");
    for (std::size_t j = 0; j < m.n_u; ++j) {
      const double v = p.xv(t_index, j);
      if (!std::isfinite(v)) throw NumericalError("build_empirical: non-finite sample");
      m.samples.push_back(v);
    }
  }
  return m;
}

EmpiricalMeasure empirical_from(const Ensemble& ens) {
  EmpiricalMeasure m;
  m.n_u = static_cast<std::size_t>(ens.n_u());
  m.m_beta = static_cast<std::size_t>(ens.n_beta());
  m.samples.assign(ens.x(0), ens.x(0) + m.n_u * m.m_beta);
  return m;
}

const char* to_string(Convention c) { return c == Convention::Plain ? "plain_h" : "gprime_h"; }

const char* GradientReport::csv_header() { return "estimator,t,eps,rho,value,std_error,M_W,M_beta,seed"; }

void GradientReport::write_csv_row(std::ostream& os) const {
  os.precision(12);
  os << estimator << "," << t << "," << eps << "," << rho << "," << value << "," << std_error << "," << M_W << ","
     << M_beta << "," << seed << "\n";
}

int steps_for(double t, double dt) {
  const double r = t / dt;
  const long n = std::lround(r);
  if (std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r)) throw InvalidArgument("time is not a multiple of dt");
  return static_cast<int>(n);
}

std::vector<std::vector<double>> semigroup_paths(const QuantileState& g, const TestFunctional& phi,
                                                 const FourierProfile& profile, const std::vector<double>& times,
                                                 const McSettings& mc) {
  std::vector<int> snaps;
  for (double t : times) snaps.push_back(steps_for(t, mc.dt));
  if (!std::is_sorted(snaps.begin(), snaps.end())) throw InvalidArgument("semigroup: times must be increasing");
  EngineOptions opt = mc.engine;
  opt.order = 1;
  auto run = [&](std::size_t w) {
    Ensemble ens(g, profile, mc.dt, mc.M_beta, opt);
    ens.reset(mc.seed, w);
    std::vector<double> out;
    const std::size_t ns = static_cast<std::size_t>(ens.n_u()) * ens.n_beta();
    for (int target : snaps) {
      while (ens.steps_done() < target) ens.step();
      out.push_back(phi.value(ens.x(0), ns));
    }
    return out;
  };
  return parallel_map<std::vector<double>>(static_cast<std::size_t>(mc.M_W), mc.threads, run);
}

Estimate semigroup_value(const QuantileState& g, const TestFunctional& phi, const FourierProfile& profile, double t,
                         const McSettings& mc) {
  g.validate();
  if (t < 0) throw InvalidArgument("semigroup_value: t must be non-negative");
  if (t == 0.0) return {phi.value(g.values.data(), g.n_u()), 0.0};
  const auto rows = semigroup_paths(g, phi, profile, {t}, mc);
  std::vector<double> v(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) v[i] = rows[i][0];
  return mean_se(v);
}

GradientReport gradient_direct(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                               const FourierProfile& profile, double t, const McSettings& mc, Convention conv) {
  g.validate();
  h.validate();
  const int n_steps = steps_for(t, mc.dt);
  const std::size_t n = g.n_u();
  std::vector<double> hw(n);
  for (std::size_t j = 0; j < n; ++j) hw[j] = (conv == Convention::Scaled) ? h.values[j] : h.values[j] / g.deriv1[j];
  EngineOptions opt = mc.engine;
  opt.order = 1;
  auto run = [&](std::size_t w) {
    Ensemble ens(g, profile, mc.dt, mc.M_beta, opt);
    ens.reset(mc.seed, w);
    for (int i = 0; i < n_steps; ++i) ens.step();
    const TrigMoments mom = phi.moments(ens.x(0), n * ens.n_beta());
    double acc = 0.0;
    for (int b = 0; b < ens.n_beta(); ++b) {
      const double* x = ens.x(b);
      const double* J = ens.d1(b);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += phi.lions(x[j], mom) * J[j] * hw[j];
      acc += s / static_cast<double>(n);
    }
    return acc / ens.n_beta();
  };
  const auto vals = parallel_map<double>(static_cast<std::size_t>(mc.M_W), mc.threads, run);
  const Estimate e = mean_se(vals);
  GradientReport r;
  r.estimator = "direct";
  r.t = t;
  r.value = e.value;
  r.std_error = e.std_error;
  r.M_W = mc.M_W;
  r.M_beta = mc.M_beta;
  r.seed = mc.seed;
  r.convention = conv;
  return r;
}

QuantileState perturb(const QuantileState& g, const PerturbationDirection& h, double rho, Convention conv) {
  const std::size_t n = g.n_u();
  if (h.n_u() != n) throw InvalidArgument("perturb: grid mismatch");
  QuantileState q;
  q.values.resize(n + 1);
  q.deriv1.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    double d, d1;
    if (conv == Convention::Plain) {
      d = h.values[j];
      d1 = h.deriv1[j];
    } else {
      if (g.deriv2.empty()) throw InvalidArgument("perturb: the g'h direction needs g''");
      d = g.deriv1[j] * h.values[j];
      d1 = g.deriv2[j] * h.values[j] + g.deriv1[j] * h.deriv1[j];
    }
    q.values[j] = g.values[j] + rho * d;
    q.deriv1[j] = g.deriv1[j] + rho * d1;
    if (!(q.deriv1[j] > 0.0)) throw InvalidArgument("perturb: rho breaks monotonicity of g");
  }
  q.values[n] = q.values[0] + kTwoPi;
  q.deriv1[n] = q.deriv1[0];
  return q;
}

std::vector<GradientReport> gradient_fd_multi(const QuantileState& g, const PerturbationDirection& h,
                                              const TestFunctional& phi, const FourierProfile& profile,
                                              const std::vector<double>& times, double rho, const McSettings& mc,
                                              Convention conv) {
  if (!(rho > 0.0)) throw InvalidArgument("gradient_fd: rho must be positive");
  const QuantileState gp = perturb(g, h, rho, conv);
  const QuantileState gm = perturb(g, h, -rho, conv);
  const auto up = semigroup_paths(gp, phi, profile, times, mc);
  const auto dn = semigroup_paths(gm, phi, profile, times, mc);
  std::vector<GradientReport> out;
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> d(up.size());
    for (std::size_t w = 0; w < up.size(); ++w) d[w] = (up[w][k] - dn[w][k]) / (2.0 * rho);
    const Estimate e = mean_se(d);
    GradientReport r;
    r.estimator = "fd";
    r.t = times[k];
    r.rho = rho;
    r.value = e.value;
    r.std_error = e.std_error;
    r.M_W = mc.M_W;
    r.M_beta = mc.M_beta;
    r.seed = mc.seed;
    r.convention = conv;
    out.push_back(r);
  }
  return out;
}

GradientReport gradient_fd(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                           const FourierProfile& profile, double t, double rho, const McSettings& mc, Convention conv) {
  return gradient_fd_multi(g, h, phi, profile, {t}, rho, mc, conv).front();
}

double zero_average_check(const TestFunctional& phi, const TorusDensity& p, std::size_t quadrature_n) {
  p.validate();
  const TrigMoments m = phi.moments_of_density(p);
  std::vector<double> v(quadrature_n);
  for (std::size_t i = 0; i < quadrature_n; ++i)
    v[i] = phi.lions(kTwoPi * static_cast<double>(i) / static_cast<double>(quadrature_n), m);
  return pairwise_sum(v) * kTwoPi / static_cast<double>(quadrature_n);
}

}  // namespace tbel
