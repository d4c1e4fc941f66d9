#include "tbel/spde.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "tbel/spectral.hpp"

namespace tbel {

using cd = std::complex<double>;

double SpectralDensity::eval(double v) const {
  double s = p[0].real();
  const cd e1 = std::polar(1.0, v);
  cd e = e1;
  for (std::size_t k = 1; k < p.size(); ++k) {
    s += 2.0 * (p[k] * e).real();
    e *= e1;
  }
  return s;
}

TorusDensity SpectralDensity::realize(std::size_t n_x) const {
  if (n_x < 2 * p.size()) throw InvalidArgument("realize: grid too coarse for the retained modes");
  std::vector<cd> c(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) c[k] = std::conj(p[k]);
  return TorusDensity{synthesize(c, n_x)};
}

double SpectralDensity::energy() const {
  double s = std::norm(p[0]);
  for (std::size_t k = 1; k < p.size(); ++k) s += 2.0 * std::norm(p[k]);
  return s;
}

double SpectralDensity::high_mode_energy(int k0) const {
  double s = 0.0;
  for (int k = std::max(k0 + 1, 1); k <= K_p(); ++k) s += 2.0 * std::norm(p[k]);
  return s;
}

SpectralDensity SpectralDensity::from_density(const TorusDensity& d, int K_p) {
  d.validate();
  if (K_p < 1 || static_cast<std::size_t>(K_p) >= d.size() / 2)
    throw InvalidArgument("from_density: K_p must be below N_x/2");
  const auto c = forward_coeffs(d.values);
  SpectralDensity s;
  s.p.resize(K_p + 1);
  for (int k = 0; k <= K_p; ++k) s.p[k] = std::conj(c[k]);
  s.p[0] = 1.0 / kTwoPi;
  return s;
}

double diffusion_lambda(const FourierProfile& profile, LambdaMode mode) {
  return mode == LambdaMode::Super ? 0.5 * (1.0 + profile.sum_sq) : 0.5 * profile.sum_sq;
}

SpdePath evolve_density(const TorusDensity& p0, const FourierProfile& profile, const NoisePath& noise,
                        const SpdeOptions& opt) {
  if (noise.K_max < profile.K_max) throw InvalidArgument("evolve_density: noise has fewer modes than the profile");
  const int Kp = opt.K_p;
  const int Kf = profile.K_max;
  SpectralDensity cur = SpectralDensity::from_density(p0, Kp);
  const double dt = noise.dt;
  const double lam = diffusion_lambda(profile, opt.mode);
  const std::size_t n_check = std::max<std::size_t>(4 * static_cast<std::size_t>(Kp + 1), p0.size());

  SpdePath out;
  out.lambda = lam;
  auto record = [&](const SpectralDensity& s) {
    const TorusDensity r = s.realize(n_check);
    const double m = *std::min_element(r.values.begin(), r.values.end());
    if (out.snapshots.empty() || m < out.min_density) out.min_density = m;
    if (m <= 0.0) out.positive = false;
    out.snapshots.push_back(s);
  };
  record(cur);

  std::vector<double> decay(Kp + 1);
  for (int k = 0; k <= Kp; ++k) decay[k] = std::exp(-lam * double(k) * k * dt);
  // xi(v) = sum_m xh_m e^{imv}, m = -Kf..Kf stored at m + Kf
  std::vector<cd> xh(2 * Kf + 1), full(2 * Kp + 1), next(Kp + 1);
  for (int i = 0; i < noise.n_steps; ++i) {
    xh[Kf] = profile.coeff(0) * noise.re(i, 0);
    for (int m = 1; m <= Kf; ++m) {
      const double a = profile.coeff(m) * (noise.re(i, m) + noise.re(i, -m));
      const double b = profile.coeff(m) * (noise.im(i, m) - noise.im(i, -m));
      xh[Kf + m] = cd(0.5 * a, -0.5 * b);
      xh[Kf - m] = std::conj(xh[Kf + m]);
    }
    for (int k = 0; k <= Kp; ++k) full[Kp + k] = cur.p[k];
    for (int k = 1; k <= Kp; ++k) full[Kp - k] = std::conj(cur.p[k]);
    next[0] = cur.p[0];
    for (int k = 1; k <= Kp; ++k) {
      cd conv = 0.0;
      const int mlo = std::max(-Kf, k - Kp), mhi = std::min(Kf, k + Kp);
      for (int m = mlo; m <= mhi; ++m) conv += full[Kp + k - m] * xh[Kf + m];
      next[k] = decay[k] * (cur.p[k] - cd(0.0, double(k)) * conv);
      if (!std::isfinite(next[k].real()) || !std::isfinite(next[k].imag()))
        throw NumericalError("evolve_density: non-finite mode at step " + std::to_string(i));
    }
    cur.p = next;
    cur.t = dt * (i + 1);
    if (std::abs(cur.p[0].real() - 1.0 / kTwoPi) * kTwoPi > 1e-12) throw NumericalError("evolve_density: mass drift");
    const bool last = (i + 1 == noise.n_steps);
    if (last || (opt.snapshot_stride > 0 && (i + 1) % opt.snapshot_stride == 0)) record(cur);
  }
  return out;
}

TorusDensity kde_wrapped(const std::vector<double>& samples, double bandwidth, std::size_t n_x) {
  if (!(bandwidth > 0.0)) throw InvalidArgument("kde_wrapped: bandwidth must be positive");
  if (samples.empty()) throw InvalidArgument("kde_wrapped: no samples");
  if (n_x < 8 || n_x % 2) throw InvalidArgument("kde_wrapped: N_x must be even and at least 8");
  const int K = static_cast<int>(n_x / 2) - 1;
  std::vector<double> cr(K + 1, 0.0), ci(K + 1, 0.0);
  for (double s : samples) {
    const cd e1 = std::polar(1.0, s);
    cd e = e1;
    for (int k = 1; k <= K; ++k) {
      cr[k] += e.real();
      ci[k] += e.imag();
      e *= e1;
    }
  }
  // Density coefficients in the synthesize convention: c_k = (1/2pi) E[e^{iks}] e^{-k^2 bw^2/2}.
  std::vector<cd> c(K + 1);
  const double ns = static_cast<double>(samples.size());
  c[0] = 1.0 / kTwoPi;
  for (int k = 1; k <= K; ++k) {
    const double damp = std::exp(-0.5 * double(k) * k * bandwidth * bandwidth) / (kTwoPi * ns);
    c[k] = cd(cr[k], ci[k]) * damp;
  }
  return TorusDensity{synthesize(c, n_x)};
}

TorusDensity kde_wrapped(const EmpiricalMeasure& samples, double bandwidth, std::size_t n_x) {
  return kde_wrapped(samples.samples, bandwidth, n_x);
}

double l1_distance(const TorusDensity& a, const TorusDensity& b) {
  if (a.size() != b.size()) throw InvalidArgument("l1_distance: grid mismatch");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a.values[i] - b.values[i]);
  return pairwise_sum(d) * a.dx();
}

CriticalDiagnostic critical_vs_super(const TorusDensity& p0, const FourierProfile& profile, const NoisePath& noise,
                                     int K_p) {
  SpdeOptions o;
  o.K_p = K_p;
  o.mode = LambdaMode::Super;
  const auto sup = evolve_density(p0, profile, noise, o);
  o.mode = LambdaMode::Critical;
  const auto crit = evolve_density(p0, profile, noise, o);
  CriticalDiagnostic d;
  d.super_high = sup.snapshots.back().high_mode_energy(K_p / 2);
  d.critical_high = crit.snapshots.back().high_mode_energy(K_p / 2);
  d.ratio = d.super_high > 0.0 ? d.critical_high / d.super_high : INFINITY;
  return d;
}

DensityComparison compare_particles_spde(const QuantileState& g, const FourierProfile& profile, double t, double dt,
                                         int M_beta, std::uint64_t seed, std::uint64_t w, double bandwidth,
                                         std::size_t n_x, int K_p) {
  const int n_steps = steps_for(t, dt);
  EngineOptions eopt;
  Ensemble ens(g, profile, dt, M_beta, eopt);
  ens.reset(seed, w);
  for (int i = 0; i < n_steps; ++i) ens.step();
  const EmpiricalMeasure em = empirical_from(ens);

  const NoisePath noise = sample_noise(profile, seed, n_steps, dt, w, 0);
  const TorusDensity p0 = quantile_to_density(g, n_x);
  SpdeOptions o;
  o.K_p = K_p;
  const SpdePath path = evolve_density(p0, profile, noise, o);

  DensityComparison c;
  c.t = t;
  c.bandwidth = bandwidth;
  c.spde = path.snapshots.back().realize(n_x);
  c.particles = kde_wrapped(em, bandwidth, n_x);
  c.l1 = l1_distance(c.spde, c.particles);
  c.spde_min = path.min_density;
  return c;
}

void write_density_csv(std::ostream& os, const std::vector<SpectralDensity>& snaps, std::size_t n_x) {
  os.precision(12);
  os << "t,x,p\n";
  for (const auto& s : snaps) {
    const TorusDensity d = s.realize(n_x);
    for (std::size_t i = 0; i < n_x; ++i) os << s.t << "," << d.node(i) << "," << d.values[i] << "\n";
  }
}

}  // namespace tbel
