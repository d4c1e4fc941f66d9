#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "tbel/spde.hpp"

using namespace tbel;
using cplx = std::complex<double>;

namespace {

TorusDensity bump(std::size_t n) {
  return TorusDensity::from_function(n, [](double x) {
    return (1.0 + 0.6 * std::cos(x) + 0.2 * std::sin(3 * x)) / kTwoPi;
  });
}

}  // namespace

TEST_CASE("spectral density round trip and normalization") {
  const SpectralDensity s = SpectralDensity::from_density(bump(256), 32);
  CHECK(s.p[0].real() == doctest::Approx(1.0 / kTwoPi).epsilon(1e-14));
  CHECK(std::abs(s.p[1] - cplx(0.3 / kTwoPi, 0.0)) <= 1e-12);
  const TorusDensity r = s.realize(256);
  const TorusDensity b = bump(256);
  for (std::size_t i = 0; i < 256; ++i) CHECK(r.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
  CHECK(s.eval(1.0) == doctest::Approx((1.0 + 0.6 * std::cos(1.0) + 0.2 * std::sin(3.0)) / kTwoPi).epsilon(1e-12));
}

TEST_CASE("uniform density is a fixed point without common noise") {
  const FourierProfile p = zero_profile(32);
  const NoisePath noise = sample_noise(p, 4, 300, 1e-3);
  const SpdePath path = evolve_density(TorusDensity::uniform(256), p, noise);
  const SpectralDensity& last = path.snapshots.back();
  CHECK(last.p[0].real() == doctest::Approx(1.0 / kTwoPi).epsilon(1e-15));
  for (int k = 1; k <= last.K_p(); ++k) CHECK(std::abs(last.p[k]) <= 1e-12);
}

TEST_CASE("without common noise the equation is the heat flow") {
  const FourierProfile p = zero_profile(8);
  const int N = 400;
  const double dt = 1e-3;
  const NoisePath noise = sample_noise(p, 4, N, dt);
  const SpdePath path = evolve_density(bump(256), p, noise);
  CHECK(path.lambda == doctest::Approx(0.5));
  const SpectralDensity s0 = SpectralDensity::from_density(bump(256), 64);
  const SpectralDensity& s = path.snapshots.back();
  for (int k = 0; k <= 4; ++k) {
    const cplx expect = s0.p[k] * std::exp(-0.5 * k * k * N * dt);
    CHECK(std::abs(s.p[k] - expect) <= 1e-14);
  }
  CHECK(path.positive);
}

TEST_CASE("mass is conserved and snapshots follow the stride") {
  const FourierProfile p = build_profile(4.0, 1.0, 32);
  const NoisePath noise = sample_noise(p, 6, 200, 1e-3);
  SpdeOptions o;
  o.snapshot_stride = 50;
  const SpdePath path = evolve_density(bump(256), p, noise, o);
  CHECK(path.snapshots.size() == 5);
  for (const auto& s : path.snapshots) CHECK(s.realize(256).mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(path.snapshots[2].t == doctest::Approx(0.1));
  std::ostringstream os;
  write_density_csv(os, path.snapshots, 256);
  CHECK(os.str().rfind("t,x,p\n", 0) == 0);
}

TEST_CASE("diffusion coefficient") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  CHECK(diffusion_lambda(p, LambdaMode::Super) == doctest::Approx(0.5 * (1.0 + p.sum_sq)));
  CHECK(diffusion_lambda(p, LambdaMode::Critical) == doctest::Approx(0.5 * p.sum_sq));
}

TEST_CASE("critical diffusion keeps more high-mode energy") {
  const FourierProfile p = build_profile(4.0, 1.0, 32);
  const NoisePath noise = sample_noise(p, 2, 300, 1e-3);
  const CriticalDiagnostic d = critical_vs_super(bump(256), p, noise);
  CHECK(d.ratio > 1.0);
}

TEST_CASE("wrapped kernel density estimate") {
  std::vector<double> s;
  for (int i = 0; i < 1000; ++i) s.push_back(kTwoPi * (i + 0.5) / 1000.0 + 3 * kTwoPi * (i % 3 - 1));
  const TorusDensity k = kde_wrapped(s, 0.15, 256);
  CHECK(k.mass() == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : k.values) CHECK(v == doctest::Approx(1.0 / kTwoPi).epsilon(1e-6));
  const TorusDensity one = kde_wrapped(std::vector<double>{1.0}, 0.3, 256);
  double mx = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < 256; ++i)
    if (one.values[i] > mx) mx = one.values[i], arg = i;
  CHECK(std::abs(one.node(arg) - 1.0) <= one.dx());
  CHECK(mx == doctest::Approx(1.0 / (0.3 * std::sqrt(kTwoPi))).epsilon(1e-3));
  for (double v : one.values) CHECK(v >= -1e-15);
  CHECK(l1_distance(k, k) == 0.0);
  CHECK(l1_distance(k, one) > 0.1);
}

TEST_CASE("particles track the density equation") {
  const QuantileState g = density_to_quantile(bump(256), 0.0, 128);
  const FourierProfile p = build_profile(4.0, 1.0, 32);
  const DensityComparison c = compare_particles_spde(g, p, 0.2, 1e-3, 64, 3, 0, 0.15, 256);
  CHECK(c.l1 < 0.05);
  CHECK(c.spde_min > 0.0);
}

TEST_CASE("zero increments give the heat flow at the full diffusion constant") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  const NoisePath noise = zero_noise(16, 200, 1e-3);
  const SpdePath path = evolve_density(bump(256), p, noise);
  const SpectralDensity s0 = SpectralDensity::from_density(bump(256), 64);
  const double lam = 0.5 * (1.0 + p.sum_sq);
  double prev = s0.energy();
  for (int k = 0; k <= 3; ++k)
    CHECK(std::abs(path.snapshots.back().p[k] - s0.p[k] * std::exp(-lam * k * k * 0.2)) <= 1e-8);
  CHECK(path.snapshots.back().energy() <= prev);
}

TEST_CASE("kernel density recovers a wrapped Gaussian") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(1.0, 0.5);
  std::vector<double> s(1000000);
  for (double& v : s) v = n(rng);
  const TorusDensity k = kde_wrapped(s, 0.1, 512);
  const TorusDensity ref = TorusDensity::from_function(512, [](double x) {
    double v = 0.0;
    for (int m = -5; m <= 5; ++m) v += std::exp(-0.5 * std::pow((x - 1.0 + m * kTwoPi) / 0.5, 2)) / (0.5 * std::sqrt(kTwoPi));
    return v;
  });
  CHECK(l1_distance(k, ref) <= 0.02);
}
