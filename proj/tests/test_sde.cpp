#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tbel/sde.hpp"

using namespace tbel;

namespace {

QuantileState sine_state(std::size_t n, double a) {
  return QuantileState::from_function(
      n, [a](double u) { return kTwoPi * u + a * std::sin(kTwoPi * u); },
      [a](double u) { return kTwoPi + a * kTwoPi * std::cos(kTwoPi * u); },
      [a](double u) { return -a * kTwoPi * kTwoPi * std::sin(kTwoPi * u); },
      [a](double u) { return -a * kTwoPi * kTwoPi * kTwoPi * std::cos(kTwoPi * u); });
}

}  // namespace

TEST_CASE("structural invariants along a path") {
  const FourierProfile p = build_profile(4.0, 1.0, 32);
  const QuantileState g = sine_state(128, 0.3);
  const PathState path = evolve(g, p, sample_noise(p, 11, 500, 1e-3), 2);
  for (int i = 0; i <= path.n_steps; ++i) {
    REQUIRE(path.xv(i, 128) == path.xv(i, 0) + kTwoPi);
    for (std::size_t j = 0; j < 128; ++j) {
      REQUIRE(path.xv(i, j + 1) > path.xv(i, j));
      REQUIRE(path.d1(i, j) > 0.0);
    }
  }
}

TEST_CASE("without common noise every particle moves by the same Brownian shift") {
  const FourierProfile p = zero_profile(8);
  const QuantileState g = sine_state(64, 0.3);
  const NoisePath noise = sample_noise(p, 5, 200, 1e-3);
  const PathState path = evolve(g, p, noise, 1);
  double beta = 0.0;
  for (int i = 0; i < 200; ++i) beta += path.dbeta[i];
  for (std::size_t j = 0; j <= 64; ++j) {
    CHECK(path.xv(200, j) == doctest::Approx(g.values[j] + beta).epsilon(1e-12));
    CHECK(path.log_factor[path.idx(200, j)] == 0.0);
  }
}

TEST_CASE("grid flow agrees with the parametric flow started from the grid") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  const QuantileState g = sine_state(64, 0.3);
  const NoisePath noise = sample_noise(p, 9, 300, 1e-3);
  const PathState path = evolve(g, p, noise, 1);
  std::vector<double> x0(g.values.begin(), g.values.end() - 1);
  const ParametricPath z = evolve_parametric(x0, p, noise);
  for (int i = 0; i <= 300; i += 50)
    for (std::size_t j = 0; j < 64; ++j) {
      REQUIRE(z.zv(i, j) == path.xv(i, j));
      REQUIRE(z.log_factor[static_cast<std::size_t>(i) * 64 + j] == path.log_factor[path.idx(i, j)]);
    }
}

TEST_CASE("log-factor derivative tracks the derivative of the flow") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  const NoisePath fine = sample_noise(p, 4, 1600, 2.5e-4);
  const double x = 1.1, d = 1e-5;
  std::vector<double> err;
  for (int factor : {4, 2, 1}) {
    const NoisePath noise = factor == 1 ? fine : coarsen(fine, factor);
    const ParametricPath z = evolve_parametric({x - d, x, x + d}, p, noise);
    const int n = noise.n_steps;
    const double fd = (z.zv(n, 2) - z.zv(n, 0)) / (2 * d);
    err.push_back(std::abs(z.dz(n, 1) - fd) / fd);
  }
  for (double e : err) CHECK(e < 5e-3);
}

TEST_CASE("realized quadratic variation") {
  const FourierProfile p = build_profile(4.0, 1.0, 2);
  CHECK(p.qv_rate() == doctest::Approx(2.1282).epsilon(1e-4));
  const QuantileState g = sine_state(8, 0.3);
  double qv = 0.0;
  for (std::uint64_t w = 0; w < 10; ++w) qv += realized_qv(evolve(g, p, sample_noise(p, 2, 10000, 1e-4, w), 1), 3) / 10;
  CHECK(qv == doctest::Approx(p.qv_rate()).epsilon(0.03));
}

TEST_CASE("moment suite is independent of the thread count") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  const QuantileState g = sine_state(32, 0.3);
  const auto a = moment_suite(g, p, 12, 2.0, 2, 0.2, 1e-3, 3, 1);
  const auto b = moment_suite(g, p, 12, 2.0, 2, 0.2, 1e-3, 3, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].estimate.value == b[i].estimate.value);
    CHECK(a[i].estimate.std_error == b[i].estimate.std_error);
  }
}

TEST_CASE("moments collapse to their deterministic values without common noise") {
  const QuantileState g = sine_state(64, 0.3);
  const auto rows = moment_suite(g, zero_profile(8), 8, 2.0, 2, 0.2, 1e-3, 3, 1);
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.estimate.value));
    CHECK(r.estimate.std_error == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("zero increments leave x fixed and drift the log factor") {
  const FourierProfile p = build_profile(4.0, 1.0, 8);
  const QuantileState g = sine_state(32, 0.3);
  const PathState path = evolve(g, p, zero_noise(8, 100, 1e-3), 1);
  for (std::size_t j = 0; j <= 32; ++j) {
    CHECK(path.xv(100, j) == g.values[j]);
    CHECK(path.log_factor[path.idx(100, j)] == doctest::Approx(-0.5 * 0.1 * p.sum_k2).epsilon(1e-12));
    CHECK(path.log_factor[path.idx(0, j)] == 0.0);
  }
}

TEST_CASE("two steps match a hand-unrolled update") {
  const FourierProfile p = build_profile(4.0, 1.0, 1);
  const QuantileState g = sine_state(8, 0.3);
  const NoisePath noise = sample_noise(p, 77, 2, 1e-2);
  EngineOptions opt;
  opt.field_mode = FieldMode::Direct;
  const PathState path = evolve(g, p, noise, 1, opt);
  for (std::size_t j = 0; j < 8; ++j) {
    double x = g.values[j], L = 0.0;
    for (int i = 0; i < 2; ++i) {
      double dx = noise.dBeta[i], dL = 0.0;
      for (int k = -1; k <= 1; ++k) {
        const double f = p.coeff(k), re = noise.re(i, k), im = noise.im(i, k);
        dx += f * (std::cos(k * x) * re + std::sin(k * x) * im);
        dL += f * k * (std::cos(k * x) * im - std::sin(k * x) * re);
      }
      x += dx;
      L += dL - 0.5 * p.sum_k2 * noise.dt;
    }
    CHECK(path.xv(2, j) == doctest::Approx(x).epsilon(1e-14));
    CHECK(path.log_factor[path.idx(2, j)] == doctest::Approx(L).epsilon(1e-13));
  }
}

TEST_CASE("u-derivative agrees with a finite difference of the particle field") {
  const FourierProfile p = build_profile(4.0, 1.0, 32);
  const QuantileState g = sine_state(512, 0.3);
  const PathState path = evolve(g, p, sample_noise(p, 6, 300, 1e-3), 1);
  double err = 0.0, ref = 0.0;
  for (std::size_t j = 1; j < 512; ++j) {
    const double fd = (path.xv(300, j + 1) - path.xv(300, j - 1)) * 256.0;
    err += std::pow(path.d1(300, j) - fd, 2);
    ref += std::pow(fd, 2);
  }
  CHECK(std::sqrt(err / ref) < 5e-3);
}

TEST_CASE("flow increments stay comparable to the initial separation") {
  const FourierProfile p = build_profile(4.0, 1.0, 32);
  for (double d : {1e-1, 1e-2, 1e-3}) {
    double m = 0.0;
    for (std::uint64_t w = 0; w < 40; ++w) {
      const NoisePath noise = sample_noise(p, 31, 500, 1e-3, w);
      const ParametricPath z = evolve_parametric({1.0, 1.0 + d}, p, noise);
      double sup = 0.0;
      for (int i = 0; i <= 500; ++i) sup = std::max(sup, std::abs(z.zv(i, 1) - z.zv(i, 0)) / d);
      m += sup * sup / 40;
    }
    CHECK(m < 10.0);
    CHECK(m > 0.1);
  }
}

TEST_CASE("moment ratio for the L2 derivative norm is one without common noise") {
  const QuantileState g = sine_state(64, 0.3);
  const auto rows = moment_suite(g, zero_profile(8), 4, 2.0, 2, 0.2, 1e-3, 3, 1);
  CHECK(rows.front().name == "A2_Lp_d1");
  CHECK(rows.front().ratio == doctest::Approx(1.0).epsilon(1e-12));
}
