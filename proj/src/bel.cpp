#include "tbel/bel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <ostream>

#include "tbel/parallel.hpp"
#include "tbel/spectral.hpp"

namespace tbel {

namespace {

constexpr double kSqrt2OverPi = 0.79788456080286535588;

// Scratch for the per-step Fourier work on one replica's open grid.
class StepKernel {
 public:
  StepKernel(std::size_t n, int K) : n_(n), K_(K), zr_(n), zi_(n), pr_(n), pi_(n), cr_(K + 1), ci_(K + 1) {}

  // c_k = (1/2pi)(1/n) sum_j J_j^2 w_j e^{i k x_j}, k = 0..K.
  void coeffs(const double* x, const double* J, const double* w) {
    const std::size_t n = n_;
    double* zr = zr_.data();
    double* zi = zi_.data();
    double* pr = pr_.data();
    double* pi = pi_.data();
    const double scale = 1.0 / (kTwoPi * static_cast<double>(n));
    double c0 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      zr[j] = std::cos(x[j]);
      zi[j] = std::sin(x[j]);
      const double q = J[j] * J[j] * w[j] * scale;
      pr[j] = q * zr[j];
      pi[j] = q * zi[j];
      c0 += q;
    }
    cr_[0] = c0;
    ci_[0] = 0.0;
    for (int k = 1; k <= K_; ++k) {
      double sr = 0.0, si = 0.0;
#pragma omp simd reduction(+ : sr, si)
      for (std::size_t j = 0; j < n; ++j) {
        sr += pr[j];
        si += pi[j];
      }
      cr_[k] = sr;
      ci_[k] = si;
      if (k == K_) break;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) {
        const double r = pr[j] * zr[j] - pi[j] * zi[j];
        const double i = pr[j] * zi[j] + pi[j] * zr[j];
        pr[j] = r;
        pi[j] = i;
      }
    }
  }

  // out[e*n + j] = sum_{|k|<=K} ce_k e^{-ik x_j} for each coefficient set e, using the nodes of the last coeffs() call.
  // cre/cim hold ne rows of K+1 entries.
  void eval(const double* cre, const double* cim, int ne, double* out) {
    const std::size_t n = n_;
    const std::size_t w = static_cast<std::size_t>(K_) + 1;
    double* zr = zr_.data();
    double* zi = zi_.data();
    double* pr = pr_.data();
    double* pi = pi_.data();
    for (int e = 0; e < ne; ++e) {
      double* o = out + e * n;
      const double c0 = cre[e * w];
      for (std::size_t j = 0; j < n; ++j) o[j] = c0;
    }
    for (std::size_t j = 0; j < n; ++j) {
      pr[j] = zr[j];
      pi[j] = zi[j];
    }
    for (int k = 1; k <= K_; ++k) {
      for (int e = 0; e < ne; ++e) {
        const double ar = 2.0 * cre[e * w + k];
        const double ai = 2.0 * cim[e * w + k];
        double* o = out + e * n;
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) o[j] += ar * pr[j] + ai * pi[j];
      }
      if (k == K_) break;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) {
        const double r = pr[j] * zr[j] - pi[j] * zi[j];
        const double i = pr[j] * zi[j] + pi[j] * zr[j];
        pr[j] = r;
        pi[j] = i;
      }
    }
  }

  const std::vector<double>& cr() const { return cr_; }
  const std::vector<double>& ci() const { return ci_; }

 private:
  std::size_t n_;
  int K_;
  std::vector<double> zr_, zi_, pr_, pi_;
  std::vector<double> cr_, ci_;
};

double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::abs(a));
  return m;
}

struct ProbeStats {
  double dropped = 0.0;
  double dropped_fraction = 0.0;
  double contraction = 0.0;
  double error_ratio = 0.0;
};

// Mollifier diagnostics from coefficients c_0..c_{K_A} of A.
ProbeStats probe(const std::vector<cplx>& c, double eps, int K_max) {
  const int KA = static_cast<int>(c.size()) - 1;
  const MollifierSpec spec{eps};
  std::vector<cplx> ce(c.size()), dc(c.size());
  double dropped = 0.0;
  for (int k = 0; k <= KA; ++k) {
    ce[k] = c[k] * spec.multiplier(k);
    dc[k] = c[k] * cplx(0.0, -static_cast<double>(k));
    if (k > K_max) dropped += 2.0 * std::norm(ce[k]);
  }
  double total = std::norm(ce[0]);
  for (int k = 1; k <= KA; ++k) total += 2.0 * std::norm(ce[k]);
  const std::size_t ng = 4 * static_cast<std::size_t>(KA + 1);
  const auto a = synthesize(c, ng);
  const auto ae = synthesize(ce, ng);
  const auto da = synthesize(dc, ng);
  std::vector<double> diff(ng);
  for (std::size_t i = 0; i < ng; ++i) diff[i] = a[i] - ae[i];
  ProbeStats s;
  s.dropped = dropped;
  s.dropped_fraction = total > 0.0 ? dropped / total : 0.0;
  const double sa = sup_abs(a);
  s.contraction = sa > 0.0 ? sup_abs(ae) / sa : 0.0;
  const double bound = eps * kSqrt2OverPi * sup_abs(da);
  const double err = sup_abs(diff);
  s.error_ratio = bound > 0.0 ? err / bound : (err > 0.0 ? INFINITY : 0.0);
  return s;
}

std::vector<double> open_weight(const PerturbationDirection& h, const std::vector<double>& g1, Convention conv,
                                std::size_t n) {
  auto w = transport_weight(h, g1, conv);
  w.resize(n);
  return w;
}

GradientReport make_report(const char* name, double t, double eps, const Estimate& e, const McSettings& mc,
                           Convention conv) {
  GradientReport r;
  r.estimator = name;
  r.t = t;
  r.eps = eps;
  r.value = e.value;
  r.std_error = e.std_error;
  r.M_W = mc.M_W;
  r.M_beta = mc.M_beta;
  r.seed = mc.seed;
  r.convention = conv;
  return r;
}

}  // namespace

double TransportField::eval(double y) const {
  double s = c.empty() ? 0.0 : c[0].real();
  const cplx e1 = std::polar(1.0, -y);
  cplx e = e1;
  for (int k = 1; k <= K_A; ++k) {
    s += 2.0 * (c[k] * e).real();
    e *= e1;
  }
  return s;
}

std::vector<double> transport_weight(const PerturbationDirection& h, const std::vector<double>& g1, Convention conv) {
  if (h.values.size() != g1.size()) throw InvalidArgument("transport_weight: grid mismatch");
  std::vector<double> w(h.values);
  if (conv == Convention::Plain)
    for (std::size_t j = 0; j < w.size(); ++j) w[j] /= g1[j];
  return w;
}

TransportField compute_A(const PathState& path, const PerturbationDirection& h, int t_index, std::size_t n_x,
                         Convention conv) {
  if (t_index < 0 || t_index > path.n_steps) throw InvalidArgument("compute_A: t_index out of range");
  if (n_x < 8 || n_x % 2) throw InvalidArgument("compute_A: N_x must be even and at least 8");
  const std::size_t n = path.n_u;
  if (h.n_u() != n) throw InvalidArgument("compute_A: grid mismatch");
  const auto hw = transport_weight(h, path.g1, conv);
  std::vector<double> xs(n), ps(n), xc(n + 1);
  for (std::size_t j = 0; j <= n; ++j) xc[j] = path.xv(t_index, j);
  for (std::size_t j = 0; j < n; ++j) {
    xs[j] = xc[j] - kTwoPi * static_cast<double>(j) / static_cast<double>(n);
    ps[j] = path.d1(t_index, j) * hw[j];
  }
  for (std::size_t j = 0; j < n; ++j)
    if (!(xc[j + 1] > xc[j])) throw NumericalError("compute_A: x_t is not increasing in u");
  const PeriodicSeries X(xs, 1.0), P(ps, 1.0);
  const double x0 = xc[0];
  TransportField f;
  f.t_index = t_index;
  f.grid.resize(n_x);
  for (std::size_t i = 0; i < n_x; ++i) {
    const double y = kTwoPi * static_cast<double>(i) / static_cast<double>(n_x);
    double target = x0 + std::fmod(y - x0, kTwoPi);
    if (target < x0) target += kTwoPi;
    const std::size_t cell = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(std::upper_bound(xc.begin(), xc.end(), target) - xc.begin()) - 1);
    double lo = static_cast<double>(cell) / n, hi = static_cast<double>(cell + 1) / n;
    double u = lo + (hi - lo) * (target - xc[cell]) / (xc[cell + 1] - xc[cell]);
    bool done = false;
    for (int it = 0; it < 100 && !done; ++it) {
      const double r = X.eval(u) + kTwoPi * u - target;
      if (r > 0) hi = u;
      else lo = u;
      const double d = X.eval(u, 1) + kTwoPi;
      double un = u - r / d;
      if (!(d > 0) || un <= lo || un >= hi) un = 0.5 * (lo + hi);
      if (std::abs(un - u) < 1e-15 || hi - lo < 1e-15) done = true;
      u = un;
    }
    if (!done) throw NumericalError("compute_A: inversion of x_t did not converge");
    f.grid[i] = P.eval(u);
  }
  const auto c = forward_coeffs(f.grid);
  f.K_A = static_cast<int>(n_x / 2) - 1;
  f.c.assign(c.begin(), c.begin() + f.K_A + 1);
  f.c[0] = cplx(f.c[0].real(), 0.0);
  return f;
}

void transport_coeffs_fast(const double* x, const double* J, const double* w, std::size_t n, int K, cplx* c) {
  StepKernel ker(n, K);
  ker.coeffs(x, J, w);
  for (int k = 0; k <= K; ++k) c[k] = cplx(ker.cr()[k], ker.ci()[k]);
}

TransportField mollify(const TransportField& field, const MollifierSpec& spec) {
  if (!(spec.eps > 0.0)) throw InvalidArgument("mollify: eps must be positive");
  TransportField out = field;
  for (int k = 0; k <= field.K_A; ++k) out.c[k] = field.c[k] * spec.multiplier(k);
  if (!field.grid.empty()) out.grid = synthesize(out.c, field.grid.size());
  return out;
}

std::vector<double> convolve_wrapped_gaussian(const std::vector<double>& grid, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("convolve_wrapped_gaussian: eps must be positive");
  const std::size_t n = grid.size();
  const double dx = kTwoPi / static_cast<double>(n);
  const int L = static_cast<int>(std::ceil(12.0 * eps / kTwoPi)) + 1;
  std::vector<double> kernel(n);
  const double norm = 1.0 / (eps * std::sqrt(kTwoPi));
  for (std::size_t m = 0; m < n; ++m) {
    const double z = dx * static_cast<double>(m);
    double s = 0.0;
    for (int l = -L; l <= L; ++l) {
      const double d = z + kTwoPi * l;
      s += std::exp(-0.5 * d * d / (eps * eps));
    }
    kernel[m] = s * norm * dx;
  }
  std::vector<double> out(n), terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < n; ++m) terms[m] = grid[m] * kernel[(i + n - m) % n];
    out[i] = pairwise_sum(terms);
  }
  return out;
}

LambdaSet compute_lambda(const TransportField& field_eps, const FourierProfile& profile) {
  const int K = std::min(field_eps.K_A, profile.K_max);
  LambdaSet l;
  l.lambda.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    const double f = profile.coeff(k);
    if (f == 0.0) throw NumericalError("compute_lambda: zero noise coefficient");
    l.lambda[k] = field_eps.c[k] / f;
  }
  l.lambda[0] = cplx(l.lambda[0].real(), 0.0);
  l.total_energy = std::norm(field_eps.c[0]);
  for (int k = 1; k <= field_eps.K_A; ++k) {
    const double e = 2.0 * std::norm(field_eps.c[k]);
    l.total_energy += e;
    if (k > K) l.dropped_energy += e;
  }
  return l;
}

double reconstruct_from_lambda(const LambdaSet& l, const FourierProfile& profile, double y) {
  double s = profile.coeff(0) * l.lambda[0].real();
  const cplx e1 = std::polar(1.0, -y);
  cplx e = e1;
  for (std::size_t k = 1; k < l.lambda.size(); ++k) {
    s += 2.0 * profile.coeff(static_cast<int>(k)) * (l.lambda[k] * e).real();
    e *= e1;
  }
  return s;
}

BELWeight compute_weight(const PathState& path, const NoisePath& noise, const PerturbationDirection& h,
                         const FourierProfile& profile, double eps, int t_index, Convention conv) {
  if (t_index < 0 || t_index > path.n_steps || t_index > noise.n_steps)
    throw InvalidArgument("compute_weight: t_index out of range");
  if (noise.K_max < profile.K_max) throw InvalidArgument("compute_weight: noise has fewer modes than the profile");
  const std::size_t n = path.n_u;
  const int K = profile.K_max;
  const auto w = open_weight(h, path.g1, conv, n);
  const MollifierSpec spec{eps};
  StepKernel ker(n, K);
  std::vector<double> J(n);
  BELWeight out;
  std::vector<double> l2_terms, ito_terms;
  for (int i = 0; i < t_index; ++i) {
    const double* x = path.x.data() + path.idx(i, 0);
    for (std::size_t j = 0; j < n; ++j) J[j] = path.d1(i, j);
    ker.coeffs(x, J.data(), w.data());
    std::vector<cplx> lam(K + 1);
    double l2 = 0.0, ito = 0.0;
    for (int k = 0; k <= K; ++k) {
      lam[k] = cplx(ker.cr()[k], ker.ci()[k]) * spec.multiplier(k) / profile.coeff(k);
      if (k == 0) {
        lam[0] = cplx(lam[0].real(), 0.0);
        l2 += std::norm(lam[0]);
        ito += lam[0].real() * noise.re(i, 0);
      } else {
        l2 += 2.0 * std::norm(lam[k]);
        ito += lam[k].real() * (noise.re(i, k) + noise.re(i, -k)) + lam[k].imag() * (noise.im(i, k) - noise.im(i, -k));
      }
    }
    l2_terms.push_back(l2 * path.dt);
    ito_terms.push_back(ito);
    out.lambda.push_back(std::move(lam));
  }
  out.l2_norm = pairwise_sum(l2_terms);
  out.stochastic_integral = pairwise_sum(ito_terms);
  return out;
}

KResult compute_K(const PathState& path, const PerturbationDirection& h, double eps, int t_index, Convention conv) {
  if (t_index <= 0 || t_index > path.n_steps) throw InvalidArgument("compute_K: t_index must be in 1..n_steps");
  if (!(eps > 0.0)) throw InvalidArgument("compute_K: eps must be positive");
  const std::size_t n = path.n_u;
  const auto w = open_weight(h, path.g1, conv, n);
  const double dt = path.dt;
  const double t = dt * t_index;
  // Coefficient range of the fast quadrature; the mollified tail beyond it is below rounding for eps >= 0.05.
  const int K = static_cast<int>(n / 2) - 1;
  const MollifierSpec spec{eps};
  StepKernel ker(n, K);
  std::vector<double> J(n), Ae(n), cre(K + 1), cim(K + 1);
  std::vector<double> S(n, 0.0), P1(n, 0.0), P2(n, 0.0);
  double h_last = 0.0, j_last = 0.0;
  for (int i = 0; i < t_index; ++i) {
    const double* x = path.x.data() + path.idx(i, 0);
    for (std::size_t j = 0; j < n; ++j) J[j] = path.d1(i, j);
    if (i < t_index - 1) {
      ker.coeffs(x, J.data(), w.data());
      for (int k = 0; k <= K; ++k) {
        cre[k] = ker.cr()[k] * spec.multiplier(k);
        cim[k] = ker.ci()[k] * spec.multiplier(k);
      }
      ker.eval(cre.data(), cim.data(), 1, Ae.data());
      const double wt = dt / (t - dt * i);
      for (std::size_t j = 0; j < n; ++j) {
        const double H = (J[j] * w[j] - Ae[j]) / J[j];
        P1[j] += wt * H;
        P2[j] += wt * H * S[j];
      }
    } else {
      ker.coeffs(x, J.data(), w.data());
      for (int k = 0; k <= K; ++k) {
        cre[k] = ker.cr()[k] * spec.multiplier(k);
        cim[k] = ker.ci()[k] * spec.multiplier(k);
      }
      ker.eval(cre.data(), cim.data(), 1, Ae.data());
      for (std::size_t j = 0; j < n; ++j) {
        h_last = std::max(h_last, std::abs((J[j] * w[j] - Ae[j]) / J[j]));
        j_last = std::max(j_last, J[j]);
      }
    }
    for (std::size_t j = 0; j < n; ++j) S[j] += J[j] * path.dbeta[i];
  }
  KResult r;
  r.K.resize(n + 1);
  for (std::size_t j = 0; j < n; ++j) r.K[j] = S[j] * P1[j] - P2[j];
  r.K[n] = r.K[0];
  r.omitted_bound = std::sqrt(dt) * h_last * j_last;
  return r;
}

std::vector<BelCell> run_bel(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                             const FourierProfile& profile, const McSettings& mc, const BelOptions& opt) {
  g.validate();
  h.validate();
  if (h.n_u() != g.n_u()) throw InvalidArgument("run_bel: grid mismatch between g and h");
  if (opt.times.empty() || opt.eps.empty()) throw InvalidArgument("run_bel: empty time or eps list");
  for (double e : opt.eps)
    if (!(e > 0.0)) throw InvalidArgument("run_bel: eps must be positive");
  if (profile.degenerate()) throw InvalidArgument("run_bel: the weights need a non-degenerate noise profile");
  if (opt.pairing == Pairing::Replica && phi.kind() != FunctionalKind::Linear)
    throw InvalidArgument("run_bel: replica pairing requires a linear functional");
  if (mc.M_W < 2 || mc.M_beta < 1) throw InvalidArgument("run_bel: need M_W >= 2 and M_beta >= 1");

  std::vector<int> snaps;
  for (double t : opt.times) {
    if (!(t > 0.0)) throw InvalidArgument("run_bel: times must be positive");
    snaps.push_back(steps_for(t, mc.dt));
  }
  if (!std::is_sorted(snaps.begin(), snaps.end()) || std::adjacent_find(snaps.begin(), snaps.end()) != snaps.end())
    throw InvalidArgument("run_bel: times must be strictly increasing");

  const std::size_t n = g.n_u();
  const int K = profile.K_max;
  const int KP = static_cast<int>(n / 2) - 1;
  const int ne = static_cast<int>(opt.eps.size());
  const int nt = static_cast<int>(snaps.size());
  const int B = mc.M_beta;
  const double dt = mc.dt;
  const auto hw = open_weight(h, g.deriv1, opt.conv, n);

  const std::size_t wk = static_cast<std::size_t>(K) + 1;
  std::vector<double> mult(ne * wk), inv_f(wk);
  for (int k = 0; k <= K; ++k) inv_f[k] = 1.0 / profile.coeff(k);
  for (int e = 0; e < ne; ++e)
    for (int k = 0; k <= K; ++k) mult[e * wk + k] = MollifierSpec{opt.eps[e]}.multiplier(k);

  // Per-W outputs: [cell][quantity]
  enum Q { qI1r, qI1m, qI1d, qI2, qDir, qW, qL2, qKs, qDrop, qDropF, qContr, qErr, qCount };
  const int cells = nt * ne;
  EngineOptions eopt = mc.engine;
  eopt.order = 1;

  auto run = [&](std::size_t w) {
    std::vector<double> out(static_cast<std::size_t>(cells) * qCount, 0.0);
    Ensemble ens(g, profile, dt, B, eopt);
    ens.reset(mc.seed, w);
    StepKernel ker(n, K);
    StepKernel probe_ker(n, KP);
    std::vector<double> cre(ne * wk), cim(ne * wk), Ae(ne * n);
    std::vector<double> lam_r(static_cast<std::size_t>(B) * ne * wk), lam_i(lam_r.size());
    std::vector<double> ito(static_cast<std::size_t>(B) * ne, 0.0), l2(ito.size(), 0.0);
    std::vector<double> R1(static_cast<std::size_t>(B) * ne * n, 0.0), R2(R1.size(), 0.0);
    std::vector<double> S, P1, P2, Jold;
    if (opt.want_K) {
      S.assign(static_cast<std::size_t>(B) * n, 0.0);
      P1.assign(static_cast<std::size_t>(B) * ne * nt * n, 0.0);
      P2.assign(P1.size(), 0.0);
      Jold.resize(static_cast<std::size_t>(B) * n);
    }
    std::vector<ProbeStats> pmax(ne);
    std::vector<double> cprobe_r, cprobe_i;
    int next_snap = 0;
    const int n_final = snaps.back();
    for (int step = 0; step < n_final; ++step) {
      const double s_time = dt * step;
      for (int b = 0; b < B; ++b) {
        const double* x = ens.x(b);
        const double* J = ens.d1(b);
        ker.coeffs(x, J, hw.data());
        if (b == 0 && opt.energy_stride > 0 && step % opt.energy_stride == 0) {
          probe_ker.coeffs(x, J, hw.data());
          std::vector<cplx> c(KP + 1);
          for (int k = 0; k <= KP; ++k) c[k] = cplx(probe_ker.cr()[k], probe_ker.ci()[k]);
          for (int e = 0; e < ne; ++e) {
            const ProbeStats ps = probe(c, opt.eps[e], K);
            pmax[e].dropped = std::max(pmax[e].dropped, ps.dropped);
            pmax[e].dropped_fraction = std::max(pmax[e].dropped_fraction, ps.dropped_fraction);
            pmax[e].contraction = std::max(pmax[e].contraction, ps.contraction);
            pmax[e].error_ratio = std::max(pmax[e].error_ratio, ps.error_ratio);
          }
        }
        const double* cr = ker.cr().data();
        const double* ci = ker.ci().data();
        for (int e = 0; e < ne; ++e) {
          double* lr = lam_r.data() + (static_cast<std::size_t>(b) * ne + e) * wk;
          double* li = lam_i.data() + (static_cast<std::size_t>(b) * ne + e) * wk;
          double sq = 0.0;
          for (int k = 0; k <= K; ++k) {
            const double m = mult[e * wk + k];
            cre[e * wk + k] = cr[k] * m;
            cim[e * wk + k] = ci[k] * m;
            lr[k] = cr[k] * m * inv_f[k];
            li[k] = (k == 0) ? 0.0 : ci[k] * m * inv_f[k];
            sq += (k == 0 ? 1.0 : 2.0) * (lr[k] * lr[k] + li[k] * li[k]);
          }
          cim[e * wk] = 0.0;
          l2[b * ne + e] += sq * dt;
        }
        ker.eval(cre.data(), cim.data(), ne, Ae.data());
        for (int e = 0; e < ne; ++e) {
          double* r1 = R1.data() + (static_cast<std::size_t>(b) * ne + e) * n;
          double* r2 = R2.data() + (static_cast<std::size_t>(b) * ne + e) * n;
          const double* ae = Ae.data() + static_cast<std::size_t>(e) * n;
          for (std::size_t j = 0; j < n; ++j) {
            const double inv = 1.0 / J[j];
            r1[j] += dt * ae[j] * inv;
            r2[j] += dt * (J[j] * hw[j] - ae[j]) * inv;
          }
          if (opt.want_K) {
            const double* s = S.data() + static_cast<std::size_t>(b) * n;
            for (int m = next_snap; m < nt; ++m) {
              if (step >= snaps[m] - 1) continue;
              const double wt = dt / (dt * snaps[m] - s_time);
              const std::size_t off = ((static_cast<std::size_t>(b) * ne + e) * nt + m) * n;
              for (std::size_t j = 0; j < n; ++j) {
                const double H = (J[j] * hw[j] - ae[j]) / J[j];
                P1[off + j] += wt * H;
                P2[off + j] += wt * H * s[j];
              }
            }
          }
        }
        if (opt.want_K) std::copy(J, J + n, Jold.data() + static_cast<std::size_t>(b) * n);
      }

      ens.step();

      const double* re = ens.last_re().data() + K;
      const double* im = ens.last_im().data() + K;
      for (int b = 0; b < B; ++b) {
        for (int e = 0; e < ne; ++e) {
          const double* lr = lam_r.data() + (static_cast<std::size_t>(b) * ne + e) * wk;
          const double* li = lam_i.data() + (static_cast<std::size_t>(b) * ne + e) * wk;
          double acc = lr[0] * re[0];
          for (int k = 1; k <= K; ++k) acc += lr[k] * (re[k] + re[-k]) + li[k] * (im[k] - im[-k]);
          ito[b * ne + e] += acc;
        }
        if (opt.want_K) {
          const double db = ens.last_dbeta(b);
          double* s = S.data() + static_cast<std::size_t>(b) * n;
          const double* jo = Jold.data() + static_cast<std::size_t>(b) * n;
          for (std::size_t j = 0; j < n; ++j) s[j] += jo[j] * db;
        }
      }

      if (step + 1 == snaps[next_snap]) {
        const int m = next_snap++;
        const double T = dt * snaps[m];
        const TrigMoments mom_all = phi.moments(ens.x(0), n * B);
        const double phi_all = phi.value(mom_all);
        std::vector<double> lj(n);
        for (int b = 0; b < B; ++b) {
          const double* x = ens.x(b);
          const double* J = ens.d1(b);
          const double phi_b = phi.value(x, n);
          for (std::size_t j = 0; j < n; ++j) lj[j] = phi.lions(x[j], mom_all) * J[j];
          double dir = 0.0;
          for (std::size_t j = 0; j < n; ++j) dir += lj[j] * hw[j];
          dir /= static_cast<double>(n);
          for (int e = 0; e < ne; ++e) {
            double* o = out.data() + static_cast<std::size_t>(m * ne + e) * qCount;
            const double* r1 = R1.data() + (static_cast<std::size_t>(b) * ne + e) * n;
            const double* r2 = R2.data() + (static_cast<std::size_t>(b) * ne + e) * n;
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              s1 += lj[j] * r1[j];
              s2 += lj[j] * r2[j];
            }
            const double wt = ito[b * ne + e] / T;
            o[qI1r] += phi_b * wt;
            o[qI1m] += phi_all * wt;
            o[qI1d] += s1 / (static_cast<double>(n) * T);
            o[qI2] += s2 / (static_cast<double>(n) * T);
            o[qDir] += dir;
            o[qW] += wt;
            o[qL2] += l2[b * ne + e];
            if (opt.want_K) {
              const std::size_t off = ((static_cast<std::size_t>(b) * ne + e) * nt + m) * n;
              const double* s = S.data() + static_cast<std::size_t>(b) * n;
              double ks = 0.0;
              for (std::size_t j = 0; j < n; ++j) ks = std::max(ks, std::abs(s[j] * P1[off + j] - P2[off + j]));
              o[qKs] += ks;
            }
          }
        }
        for (int e = 0; e < ne; ++e) {
          double* o = out.data() + static_cast<std::size_t>(m * ne + e) * qCount;
          for (int q = 0; q < qDrop; ++q) o[q] /= B;
          o[qDrop] = pmax[e].dropped;
          o[qDropF] = pmax[e].dropped_fraction;
          o[qContr] = pmax[e].contraction;
          o[qErr] = pmax[e].error_ratio;
        }
      }
    }
    return out;
  };

  const auto per_w = parallel_map<std::vector<double>>(static_cast<std::size_t>(mc.M_W), mc.threads, run);
  const std::size_t M = per_w.size();
  std::vector<BelCell> cells_out;
  std::vector<double> col(M);
  auto est = [&](std::size_t base, auto&& f) {
    for (std::size_t w = 0; w < M; ++w) col[w] = f(per_w[w].data() + base);
    return mean_se(col);
  };
  for (int m = 0; m < nt; ++m) {
    for (int e = 0; e < ne; ++e) {
      const std::size_t base = static_cast<std::size_t>(m * ne + e) * qCount;
      BelCell c;
      c.t = opt.times[m];
      c.eps = opt.eps[e];
      c.I1_replica = est(base, [](const double* o) { return o[qI1r]; });
      c.I1_measure = est(base, [](const double* o) { return o[qI1m]; });
      c.I1 = opt.pairing == Pairing::Replica ? c.I1_replica : c.I1_measure;
      const int q1 = opt.pairing == Pairing::Replica ? qI1r : qI1m;
      c.I1_def = est(base, [](const double* o) { return o[qI1d]; });
      c.I2 = est(base, [](const double* o) { return o[qI2]; });
      c.total = est(base, [q1](const double* o) { return o[q1] + o[qI2]; });
      c.direct = est(base, [](const double* o) { return o[qDir]; });
      c.split_gap = est(base, [q1](const double* o) { return o[q1] + o[qI2] - o[qDir]; });
      c.weight_mean = est(base, [](const double* o) { return o[qW]; });
      c.weight_l2 = est(base, [](const double* o) { return o[qL2]; });
      if (opt.want_K) c.K_sup = est(base, [](const double* o) { return o[qKs]; });
      for (std::size_t w = 0; w < M; ++w) {
        const double* o = per_w[w].data() + base;
        c.dropped_energy = std::max(c.dropped_energy, o[qDrop]);
        c.dropped_fraction = std::max(c.dropped_fraction, o[qDropF]);
        c.mollifier_contraction_max = std::max(c.mollifier_contraction_max, o[qContr]);
        c.mollifier_error_ratio_max = std::max(c.mollifier_error_ratio_max, o[qErr]);
      }
      c.dropped_warning = c.dropped_energy > 0.01 * c.weight_l2.value;
      cells_out.push_back(c);
    }
  }
  return cells_out;
}

namespace {

BelCell single_cell(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                    const FourierProfile& profile, double t, double eps, const McSettings& mc, Convention conv) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0, 1)");
  BelOptions opt;
  opt.times = {t};
  opt.eps = {eps};
  opt.conv = conv;
  return run_bel(g, h, phi, profile, mc, opt).front();
}

}  // namespace

GradientReport estimate_I1(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                           const FourierProfile& profile, double t, double eps, const McSettings& mc, Convention conv) {
  const BelCell c = single_cell(g, h, phi, profile, t, eps, mc, conv);
  return make_report("I1", t, eps, c.I1, mc, conv);
}

GradientReport estimate_I2(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                           const FourierProfile& profile, double t, double eps, const McSettings& mc, Convention conv) {
  const BelCell c = single_cell(g, h, phi, profile, t, eps, mc, conv);
  return make_report("I2", t, eps, c.I2, mc, conv);
}

BelReport estimate_gradient_bel(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                                const FourierProfile& profile, double t, double eps, const McSettings& mc,
                                Convention conv) {
  const BelCell c = single_cell(g, h, phi, profile, t, eps, mc, conv);
  BelReport r;
  r.I1 = make_report("I1", t, eps, c.I1, mc, conv);
  r.I2 = make_report("I2", t, eps, c.I2, mc, conv);
  r.total = make_report("bel", t, eps, c.total, mc, conv);
  r.direct = make_report("direct", t, eps, c.direct, mc, conv);
  r.split_gap = c.split_gap.value;
  r.split_gap_se = c.split_gap.std_error;
  return r;
}

IbpResult check_idiosyncratic_ibp(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                                  const FourierProfile& profile, double s, double t, std::size_t u_index, double eps,
                                  const McSettings& mc, Convention conv) {
  g.validate();
  h.validate();
  if (!(s >= 0.0 && s < t)) throw InvalidArgument("ibp: need 0 <= s < t");
  if (!(eps > 0.0)) throw InvalidArgument("ibp: eps must be positive");
  if (mc.M_beta < 2) throw InvalidArgument("ibp: the leave-one-out measure needs M_beta >= 2");
  const std::size_t n = g.n_u();
  if (u_index >= n) throw InvalidArgument("ibp: u_index must be an open-grid node");
  const int ns = steps_for(s, mc.dt);
  const int nt = steps_for(t, mc.dt);
  const int K = profile.K_max;
  const int B = mc.M_beta;
  const auto hw = open_weight(h, g.deriv1, conv, n);
  const MollifierSpec spec{eps};
  EngineOptions eopt = mc.engine;
  eopt.order = 1;

  auto run = [&](std::size_t w) {
    Ensemble ens(g, profile, mc.dt, B, eopt);
    ens.reset(mc.seed, w);
    StepKernel ker(n, K);
    std::vector<double> H(B, 0.0), I(B, 0.0);
    while (ens.steps_done() < ns) ens.step();
    for (int b = 0; b < B; ++b) {
      const double* x = ens.x(b);
      const double* J = ens.d1(b);
      ker.coeffs(x, J, hw.data());
      const double y = x[u_index];
      double ae = ker.cr()[0];
      for (int k = 1; k <= K; ++k) {
        const double m = spec.multiplier(k);
        ae += 2.0 * m * (ker.cr()[k] * std::cos(k * y) + ker.ci()[k] * std::sin(k * y));
      }
      H[b] = (J[u_index] * hw[u_index] - ae) / J[u_index];
    }
    while (ens.steps_done() < nt) {
      std::vector<double> jl(B);
      for (int b = 0; b < B; ++b) jl[b] = ens.d1(b)[u_index];
      ens.step();
      for (int b = 0; b < B; ++b) I[b] += jl[b] * ens.last_dbeta(b);
    }
    double lhs = 0.0, rhs = 0.0;
    std::vector<double> loo;
    for (int b = 0; b < B; ++b) {
      loo.clear();
      for (int o = 0; o < B; ++o)
        if (o != b) loo.insert(loo.end(), ens.x(o), ens.x(o) + n);
      const TrigMoments mom = phi.moments(loo.data(), loo.size());
      const double xt = ens.x(b)[u_index];
      lhs += phi.lions(xt, mom) * ens.d1(b)[u_index] * H[b];
      rhs += phi.bracket_lfd(xt, mom) * H[b] * I[b] / (t - s);
    }
    return std::array<double, 2>{lhs / B, rhs / B};
  };
  const auto per_w = parallel_map<std::array<double, 2>>(static_cast<std::size_t>(mc.M_W), mc.threads, run);
  std::vector<double> l(per_w.size()), r(per_w.size()), d(per_w.size());
  for (std::size_t w = 0; w < per_w.size(); ++w) {
    l[w] = per_w[w][0];
    r[w] = per_w[w][1];
    d[w] = l[w] - r[w];
  }
  IbpResult res;
  res.lhs = mean_se(l);
  res.rhs = mean_se(r);
  const Estimate de = mean_se(d);
  res.gap = de.value;
  res.combined_se = de.std_error;
  return res;
}

std::vector<RateRow> rate_sweep(const QuantileState& g, const PerturbationDirection& h, const TestFunctional& phi,
                                const FourierProfile& profile, const std::vector<double>& t_grid, double eps,
                                double theta, double rho, const McSettings& mc) {
  BelOptions opt;
  opt.times = t_grid;
  opt.eps = {eps};
  opt.conv = Convention::Plain;
  const auto cells = run_bel(g, h, phi, profile, mc, opt);
  const auto fd = gradient_fd_multi(g, h, phi, profile, t_grid, rho, mc, Convention::Plain);
  std::vector<RateRow> rows;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    RateRow r;
    r.t = t_grid[i];
    r.eps = eps;
    r.bel = cells[i];
    r.fd = fd[i];
    r.scaled = std::pow(r.t, 2.0 + theta) * std::abs(r.bel.total.value);
    rows.push_back(r);
  }
  return rows;
}

const char* sweep_csv_header() {
  return "t,eps,I1,I1_se,I2,I2_se,total,direct,direct_se,weight_l2,dropped_energy,seed";
}

void write_sweep_row(std::ostream& os, const BelCell& c, std::uint64_t seed) {
  os.precision(12);
  os << c.t << "," << c.eps << "," << c.I1.value << "," << c.I1.std_error << "," << c.I2.value << ","
     << c.I2.std_error << "," << c.total.value << "," << c.direct.value << "," << c.direct.std_error << ","
     << c.weight_l2.value << "," << c.dropped_energy << "," << seed << "\n";
}

}  // namespace tbel
