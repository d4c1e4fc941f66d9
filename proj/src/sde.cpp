#include "tbel/sde.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "tbel/parallel.hpp"
#include "tbel/spectral.hpp"

namespace tbel {

namespace {

std::vector<double> open_part(const std::vector<double>& v) {
  if (v.empty()) return {};
  return std::vector<double>(v.begin(), v.end() - 1);
}

}  // namespace

Ensemble::Ensemble(const std::vector<double>& x0, const std::vector<double>& g1, const std::vector<double>& g2,
                   const std::vector<double>& g3, const FourierProfile& profile, double dt, int n_beta,
                   const EngineOptions& opt)
    : profile_(profile), opt_(opt), dt_(dt), n_u_(static_cast<int>(x0.size())), n_beta_(n_beta),
      x0_(x0), g1_(g1), g2_(g2), g3_(g3) {
  if (opt_.order < 1 || opt_.order > 3) throw InvalidArgument("Ensemble: order must be 1, 2 or 3");
  if (!(dt > 0.0)) throw InvalidArgument("Ensemble: dt must be positive");
  if (n_beta < 1) throw InvalidArgument("Ensemble: need at least one beta replica");
  if (g1_.size() != x0_.size()) throw InvalidArgument("Ensemble: derivative grid does not match state grid");
  if (opt_.order >= 2 && g2_.size() != x0_.size()) throw InvalidArgument("Ensemble: order 2 needs g''");
  if (opt_.order >= 3 && g3_.size() != x0_.size()) throw InvalidArgument("Ensemble: order 3 needs g'''");
  for (double d : g1_) {
    if (!(d > 0.0)) throw InvalidArgument("Ensemble: g' must be positive");
  }
  half_drift_ = 0.5 * profile_.sum_k2 * dt_;
  field_ = std::make_unique<NoiseField>(profile_, opt_.order, opt_.field_mode, opt_.field_grid);
  re_.assign(static_cast<std::size_t>(2 * profile_.K_max + 1), 0.0);
  im_.assign(re_.size(), 0.0);
  db_.assign(static_cast<std::size_t>(n_beta_), 0.0);
  ikeys_.resize(static_cast<std::size_t>(n_beta_));
  reset(0, 0);
}

Ensemble::Ensemble(const QuantileState& g, const FourierProfile& profile, double dt, int n_beta,
                   const EngineOptions& opt)
    : Ensemble(open_part(g.values), open_part(g.deriv1), open_part(g.deriv2), open_part(g.deriv3), profile, dt,
               n_beta, opt) {
  if (opt.order > g.available_order()) throw InvalidArgument("evolve: order exceeds available derivatives of g");
}

void Ensemble::reset(std::uint64_t seed, std::uint64_t w) {
  steps_ = 0;
  const std::size_t n = static_cast<std::size_t>(n_u_) * n_beta_;
  x_.resize(n);
  logf_.assign(n, 0.0);
  j_.resize(n);
  if (opt_.order >= 2) d2_.resize(n);
  if (opt_.order >= 3) d3_.resize(n);
  if (opt_.direct_euler_d1) jeul_.resize(n);
  for (int b = 0; b < n_beta_; ++b) {
    std::copy(x0_.begin(), x0_.end(), x_.begin() + off(b));
    std::copy(g1_.begin(), g1_.end(), j_.begin() + off(b));
    if (opt_.order >= 2) std::copy(g2_.begin(), g2_.end(), d2_.begin() + off(b));
    if (opt_.order >= 3) std::copy(g3_.begin(), g3_.end(), d3_.begin() + off(b));
    if (opt_.direct_euler_d1) std::copy(g1_.begin(), g1_.end(), jeul_.begin() + off(b));
  }
  ckey_ = common_key(seed, w);
  for (int b = 0; b < n_beta_; ++b) ikeys_[b] = idio_key(seed, w, static_cast<std::uint64_t>(b));
}

void Ensemble::step() {
  draw_common_step(ckey_, static_cast<std::uint64_t>(steps_), profile_.K_max, dt_, re_.data(), im_.data());
  for (int b = 0; b < n_beta_; ++b) db_[b] = draw_idio_step(ikeys_[b], static_cast<std::uint64_t>(steps_), dt_);
  advance();
}

void Ensemble::step_with(const double* re, const double* im, const double* dbeta) {
  std::copy(re, re + re_.size(), re_.begin());
  std::copy(im, im + im_.size(), im_.begin());
  std::copy(dbeta, dbeta + n_beta_, db_.begin());
  advance();
}

void Ensemble::advance() {
  field_->set_increments(re_.data(), im_.data());
  const int order = opt_.order;
  const bool eul = opt_.direct_euler_d1;
  double e[4] = {0, 0, 0, 0};
  double check = 0.0;
  for (int b = 0; b < n_beta_; ++b) {
    const std::size_t o = off(b);
    double* x = x_.data() + o;
    double* lf = logf_.data() + o;
    double* J = j_.data() + o;
    const double dbeta = db_[b];
    for (int i = 0; i < n_u_; ++i) {
      field_->eval(x[i], e);
      const double Ji = J[i];
      x[i] = x[i] + e[0] + dbeta;
      lf[i] += e[1] - half_drift_;
      if (order >= 3) {
        double& d2 = d2_[o + i];
        double& d3 = d3_[o + i];
        d3 = d3 + e[3] * Ji * Ji * Ji + 3.0 * e[2] * Ji * d2 + e[1] * d3;
        d2 = d2 + e[2] * Ji * Ji + e[1] * d2;
        check += d3;
      } else if (order == 2) {
        double& d2 = d2_[o + i];
        d2 = d2 + e[2] * Ji * Ji + e[1] * d2;
        check += d2;
      }
      if (eul) jeul_[o + i] *= 1.0 + e[1];
      J[i] = g1_[i] * std::exp(lf[i]);
      check += x[i] + lf[i];
    }
  }
  ++steps_;
  if (!std::isfinite(check)) throw NumericalError("engine: non-finite state at step " + std::to_string(steps_));
}

QuantileState PathState::snapshot(int i) const {
  QuantileState q;
  const std::size_t w = width();
  q.values.assign(x.begin() + idx(i, 0), x.begin() + idx(i, 0) + w);
  q.deriv1.resize(w);
  for (std::size_t j = 0; j < w; ++j) q.deriv1[j] = d1(i, j);
  if (!d2.empty()) q.deriv2.assign(d2.begin() + idx(i, 0), d2.begin() + idx(i, 0) + w);
  if (!d3.empty()) q.deriv3.assign(d3.begin() + idx(i, 0), d3.begin() + idx(i, 0) + w);
  return q;
}

PathState evolve(const QuantileState& g, const FourierProfile& profile, const NoisePath& noise, int order,
                 EngineOptions opt) {
  g.validate();
  if (noise.K_max != profile.K_max) throw InvalidArgument("evolve: noise and profile disagree on K_max");
  opt.order = order;
  Ensemble ens(g, profile, noise.dt, 1, opt);
  PathState p;
  p.seed = noise.seed;
  p.w_index = noise.w_index;
  p.b_index = noise.b_index;
  p.dt = noise.dt;
  p.n_steps = noise.n_steps;
  p.n_u = g.n_u();
  p.order = order;
  p.g1 = g.deriv1;
  p.dbeta = noise.dBeta;
  const std::size_t w = p.width();
  const std::size_t total = static_cast<std::size_t>(noise.n_steps + 1) * w;
  p.x.resize(total);
  p.log_factor.resize(total);
  if (order >= 2) p.d2.resize(total);
  if (order >= 3) p.d3.resize(total);
  if (opt.direct_euler_d1) p.d1_euler.resize(total);
  const std::size_t n = p.n_u;
  auto store = [&](int i) {
    const std::size_t base = static_cast<std::size_t>(i) * w;
    std::copy(ens.x(0), ens.x(0) + n, p.x.begin() + base);
    p.x[base + n] = p.x[base] + kTwoPi;
    std::copy(ens.log_factor(0), ens.log_factor(0) + n, p.log_factor.begin() + base);
    p.log_factor[base + n] = p.log_factor[base];
    if (order >= 2) {
      std::copy(ens.d2(0), ens.d2(0) + n, p.d2.begin() + base);
      p.d2[base + n] = p.d2[base];
    }
    if (order >= 3) {
      std::copy(ens.d3(0), ens.d3(0) + n, p.d3.begin() + base);
      p.d3[base + n] = p.d3[base];
    }
    if (opt.direct_euler_d1) {
      std::copy(ens.d1_euler(0), ens.d1_euler(0) + n, p.d1_euler.begin() + base);
      p.d1_euler[base + n] = p.d1_euler[base];
    }
  };
  store(0);
  for (int i = 0; i < noise.n_steps; ++i) {
    ens.step_with(noise.re(i), noise.im(i), &noise.dBeta[i]);
    store(i + 1);
  }
  return p;
}

ParametricPath evolve_parametric(const std::vector<double>& x0, const FourierProfile& profile, const NoisePath& noise,
                                 EngineOptions opt) {
  if (x0.empty()) throw InvalidArgument("evolve_parametric: no starting points");
  if (noise.K_max != profile.K_max) throw InvalidArgument("evolve_parametric: noise and profile disagree on K_max");
  opt.order = 1;
  opt.direct_euler_d1 = false;
  const std::vector<double> ones(x0.size(), 1.0);
  Ensemble ens(x0, ones, {}, {}, profile, noise.dt, 1, opt);
  ParametricPath p;
  p.dt = noise.dt;
  p.n_steps = noise.n_steps;
  p.n_points = x0.size();
  const std::size_t total = static_cast<std::size_t>(noise.n_steps + 1) * x0.size();
  p.z.resize(total);
  p.log_factor.resize(total);
  auto store = [&](int i) {
    const std::size_t base = static_cast<std::size_t>(i) * x0.size();
    std::copy(ens.x(0), ens.x(0) + x0.size(), p.z.begin() + base);
    std::copy(ens.log_factor(0), ens.log_factor(0) + x0.size(), p.log_factor.begin() + base);
  };
  store(0);
  for (int i = 0; i < noise.n_steps; ++i) {
    ens.step_with(noise.re(i), noise.im(i), &noise.dBeta[i]);
    store(i + 1);
  }
  return p;
}

double realized_qv(const PathState& path, std::size_t u_index) {
  if (u_index > path.n_u) throw InvalidArgument("realized_qv: u_index out of range");
  double s = 0.0;
  for (int i = 0; i < path.n_steps; ++i) {
    const double d = path.xv(i + 1, u_index) - path.xv(i, u_index);
    s += d * d;
  }
  return s;
}

namespace {

double lp_pow(const double* v, std::size_t n, double p) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = std::pow(std::abs(v[i]), p);
  return pairwise_sum(t) / static_cast<double>(n);
}

double sup_abs(const double* v, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(v[i]));
  return m;
}

std::vector<double> g_derivative(const QuantileState& g, int k) {
  const std::size_t n = g.n_u();
  switch (k) {
    case 1:
      return open_part(g.deriv1);
    case 2:
      if (g.deriv2.empty()) throw InvalidArgument("moment_suite: g'' required");
      return open_part(g.deriv2);
    case 3:
      if (g.deriv3.empty()) throw InvalidArgument("moment_suite: g''' required");
      return open_part(g.deriv3);
    case 4: {
      const PeriodicSeries s(g_derivative(g, 3), 1.0);
      std::vector<double> out(n);
      for (std::size_t j = 0; j < n; ++j) out[j] = s.eval(g.u(j), 1);
      return out;
    }
    default:
      throw InvalidArgument("moment_suite: derivative order out of range");
  }
}

}  // namespace

MomentSamples moment_samples(const QuantileState& g, const FourierProfile& profile, long M_paths, double p, int j,
                             double T, double dt, std::uint64_t seed, int threads, EngineOptions opt) {
  if (j < 1 || j > 3) throw InvalidArgument("moment_suite: j must be 1, 2 or 3");
  if (p < 1.0) throw InvalidArgument("moment_suite: p must be >= 1");
  if (M_paths < 1) throw InvalidArgument("moment_suite: need at least one path");
  g.validate();
  const int n_steps = static_cast<int>(std::llround(T / dt));
  opt.order = std::max(opt.order, std::max(j, std::min(g.available_order(), 2)));
  opt.order = std::min(opt.order, g.available_order());
  if (opt.order < j) throw InvalidArgument("moment_suite: g lacks derivatives of order j");
  const std::size_t n = g.n_u();

  MomentSamples s;
  s.p = p;
  s.j = j;
  s.names = {"A2_Lp_d1", "A3_d1_at_0", "A4_Lp_dj", "A5_Linf_dj", "A6_Linf_inv_d1"};

  using Row = std::array<double, 5>;
  auto run_path = [&](std::size_t w) -> Row {
    Ensemble ens(g, profile, dt, 1, opt);
    ens.reset(seed, w);
    Row sup{0, 0, 0, 0, 0};
    std::vector<double> inv(n);
    auto observe = [&]() {
      const double* J = ens.d1(0);
      const double* dj = (j == 1) ? J : (j == 2 ? ens.d2(0) : ens.d3(0));
      for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 / J[i];
      const Row r{lp_pow(J, n, p), std::pow(J[0], p), lp_pow(dj, n, p), std::pow(sup_abs(dj, n), p),
                  std::pow(sup_abs(inv.data(), n), p)};
      for (int m = 0; m < 5; ++m) sup[m] = std::max(sup[m], r[m]);
    };
    observe();
    for (int i = 0; i < n_steps; ++i) {
      ens.step();
      observe();
    }
    return sup;
  };
  const auto rows = parallel_map<Row>(static_cast<std::size_t>(M_paths), threads, run_path);
  for (int m = 0; m < 5; ++m) {
    s.per_path[m].resize(rows.size());
    for (std::size_t w = 0; w < rows.size(); ++w) s.per_path[m][w] = rows[w][m];
  }

  const auto g1 = g_derivative(g, 1);
  std::vector<double> inv_g1(n);
  for (std::size_t i = 0; i < n; ++i) inv_g1[i] = 1.0 / g1[i];
  s.rhs[0] = lp_pow(g1.data(), n, p);
  s.rhs[1] = std::pow(g1[0], p);
  {
    const auto gj = g_derivative(g, j);
    double r = 1.0 + lp_pow(gj.data(), n, p);
    for (int k = 1; k <= j - 1; ++k) {
      const auto gk = g_derivative(g, k);
      r += std::pow(sup_abs(gk.data(), n), j * p);
    }
    s.rhs[2] = r;
  }
  {
    double r = 1.0;
    if (g.available_order() >= j + 1 || j + 1 == 4) {
      const auto gj1 = g_derivative(g, j + 1);
      r += lp_pow(gj1.data(), n, p);
    }
    for (int k = 1; k <= j; ++k) {
      const auto gk = g_derivative(g, k);
      r += std::pow(sup_abs(gk.data(), n), (j + 1) * p);
    }
    s.rhs[3] = r;
  }
  {
    double r = 1.0 + 1.0 / std::pow(g1[0], p) + lp_pow(inv_g1.data(), n, 4 * p);
    if (!g.deriv2.empty()) {
      const auto g2 = g_derivative(g, 2);
      r += lp_pow(g2.data(), n, 2 * p);
    }
    r += std::pow(sup_abs(g1.data(), n), 4 * p);
    s.rhs[4] = r;
  }
  return s;
}

std::vector<MomentReport> summarize_moments(const MomentSamples& s, std::size_t count) {
  std::vector<MomentReport> out;
  for (int m = 0; m < 5; ++m) {
    const auto& v = s.per_path[m];
    const std::size_t c = (count == 0 || count > v.size()) ? v.size() : count;
    const std::vector<double> head(v.begin(), v.begin() + c);
    for (double x : head) {
      if (!std::isfinite(x)) throw NumericalError("moment_suite: non-finite statistic in " + s.names[m]);
    }
    MomentReport r;
    r.name = s.names[m];
    r.p = s.p;
    r.j = (m == 2 || m == 3) ? s.j : 1;
    r.estimate = mean_se(head);
    r.rhs = s.rhs[m];
    r.ratio = r.estimate.value / r.rhs;
    r.paths = static_cast<long>(c);
    out.push_back(r);
  }
  return out;
}

std::vector<MomentReport> moment_suite(const QuantileState& g, const FourierProfile& profile, long M_paths, double p,
                                       int j, double T, double dt, std::uint64_t seed, int threads) {
  return summarize_moments(moment_samples(g, profile, M_paths, p, j, T, dt, seed, threads));
}

void write_trajectory_csv(std::ostream& os, const PathState& path, int stride) {
  os << "t,u,x,d1\n";
  os.precision(17);
  for (int i = 0; i <= path.n_steps; i += std::max(1, stride)) {
    for (std::size_t j = 0; j <= path.n_u; ++j) {
      os << path.time(i) << "," << static_cast<double>(j) / static_cast<double>(path.n_u) << "," << path.xv(i, j)
         << "," << path.d1(i, j) << "\n";
    }
  }
}

}  // namespace tbel
