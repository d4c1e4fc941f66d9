#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "tbel/spectral.hpp"
#include "tbel/torus.hpp"

using namespace tbel;

namespace {

QuantileState sine_state(std::size_t n, double a) {
  return QuantileState::from_function(
      n, [a](double u) { return kTwoPi * u + a * std::sin(kTwoPi * u); },
      [a](double u) { return kTwoPi + a * kTwoPi * std::cos(kTwoPi * u); });
}

}  // namespace

TEST_CASE("torus distance wraps") {
  CHECK(torus_distance(0.1, kTwoPi - 0.1) == doctest::Approx(0.2));
  CHECK(torus_distance(1.0, 1.0 + 3 * kTwoPi) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(torus_distance(0.0, kPi) == doctest::Approx(kPi));
}

TEST_CASE("uniform density has the identity quantile") {
  const QuantileState g = density_to_quantile(TorusDensity::uniform(256), 0.0, 128);
  for (std::size_t j = 0; j <= g.n_u(); ++j) {
    CHECK(g.values[j] == doctest::Approx(kTwoPi * g.u(j)).epsilon(1e-10));
    CHECK(g.deriv1[j] == doctest::Approx(kTwoPi).epsilon(1e-10));
  }
}

TEST_CASE("quantile and density round trip") {
  const QuantileState g = sine_state(256, 0.3);
  const TorusDensity p = quantile_to_density(g, 512);
  CHECK(p.mass() == doctest::Approx(1.0).epsilon(1e-8));
  // p(g(u)) g'(u) = 1
  for (std::size_t j = 0; j < 256; j += 17) {
    const double x = g.values[j];
    const std::size_t i = static_cast<std::size_t>(std::llround(x / p.dx())) % 512;
    if (std::abs(p.node(i) - x) < 1e-12) CHECK(p.values[i] * g.deriv1[j] == doctest::Approx(1.0).epsilon(1e-6));
  }
  const QuantileState back = density_to_quantile(p, g.values[0], 256);
  for (std::size_t j = 0; j <= 256; j += 8) CHECK(back.values[j] == doctest::Approx(g.values[j]).epsilon(1e-6));
  CHECK(circular_wasserstein2(p, p) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pseudo-periodic evaluation") {
  const QuantileState g = sine_state(128, 0.3);
  CHECK(g.eval(1.25) == doctest::Approx(g.eval(0.25) + kTwoPi).epsilon(1e-12));
  CHECK(g.eval(-0.5) == doctest::Approx(g.eval(0.5) - kTwoPi).epsilon(1e-12));
  CHECK(g.eval(0.3) == doctest::Approx(kTwoPi * 0.3 + 0.3 * std::sin(kTwoPi * 0.3)).epsilon(1e-7));
}

TEST_CASE("validation rejects broken inputs") {
  TorusDensity bad = TorusDensity::uniform(16);
  bad.values[3] = -1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  QuantileState g = sine_state(16, 0.3);
  g.values[16] += 0.1;
  CHECK_THROWS_AS(g.validate(), InvalidArgument);
  CHECK_THROWS_AS(sine_state(16, 1.5).validate(), InvalidArgument);
}

TEST_CASE("density csv round trip") {
  const TorusDensity p = quantile_to_density(sine_state(64, 0.2), 128);
  std::stringstream ss;
  ss.precision(17);
  write_csv(ss, p);
  const TorusDensity q = read_density_csv(ss);
  REQUIRE(q.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(q.values[i] == doctest::Approx(p.values[i]).epsilon(1e-14));
  std::istringstream junk("not,a,density\n");
  CHECK_THROWS(read_density_csv(junk));
}

TEST_CASE("periodic series interpolates trigonometric polynomials exactly") {
  std::vector<double> s(32);
  for (std::size_t i = 0; i < 32; ++i) {
    const double x = kTwoPi * i / 32.0;
    s[i] = 1.0 + std::cos(3 * x) - 0.5 * std::sin(5 * x);
  }
  const PeriodicSeries ps(s, kTwoPi);
  for (double x : {0.1, 2.3, 5.9}) {
    CHECK(ps.eval(x) == doctest::Approx(1.0 + std::cos(3 * x) - 0.5 * std::sin(5 * x)).epsilon(1e-12));
    CHECK(ps.eval(x, 1) == doctest::Approx(-3 * std::sin(3 * x) - 2.5 * std::cos(5 * x)).epsilon(1e-11));
  }
  const auto c = forward_coeffs(s);
  CHECK(c[0].real() == doctest::Approx(1.0));
  CHECK(c[3].real() == doctest::Approx(0.5));
  const auto back = synthesize(c, 32);
  for (std::size_t i = 0; i < 32; ++i) CHECK(back[i] == doctest::Approx(s[i]).epsilon(1e-12));
}

TEST_CASE("torus distance is a metric") {
  CHECK(torus_distance(0.0, 0.0) == 0.0);
  CHECK(torus_distance(1.0, 4.0) == doctest::Approx(3.0));
  std::uint64_t s = 12345;
  auto next = [&s]() {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    return kTwoPi * static_cast<double>(s >> 11) / 9007199254740992.0;
  };
  for (int i = 0; i < 1000; ++i) {
    const double a = next(), b = next(), c = next();
    REQUIRE(torus_distance(a, b) == torus_distance(b, a));
    REQUIRE(torus_distance(a, c) <= torus_distance(a, b) + torus_distance(b, c) + 1e-12);
    REQUIRE(torus_distance(a, b) <= kPi);
  }
}

TEST_CASE("circular Wasserstein distance") {
  auto bump = [](double c) {
    return TorusDensity::from_function(512, [c](double x) {
      return std::exp(8.0 * (std::cos(x - c) - 1.0));
    });
  };
  auto normalized = [](TorusDensity d) {
    double m = 0.0;
    for (double v : d.values) m += v * d.dx();
    for (double& v : d.values) v /= m;
    return d;
  };
  const TorusDensity a = normalized(bump(0.0)), b = normalized(bump(0.5));
  // A rigid rotation moves every unit of mass by the same arc.
  CHECK(circular_wasserstein2(a, b) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(circular_wasserstein2(a, b) == circular_wasserstein2(b, a));
  CHECK(circular_wasserstein2(TorusDensity::uniform(64), TorusDensity::uniform(64)) == doctest::Approx(0.0).epsilon(1e-9));
  const TorusDensity c = normalized(bump(0.5 + 64 * a.dx())), d = normalized(bump(64 * a.dx()));
  CHECK(circular_wasserstein2(c, d) == doctest::Approx(circular_wasserstein2(b, a)).epsilon(1e-4));
}

TEST_CASE("round trip of a cosine density at 512 points") {
  const TorusDensity p = TorusDensity::from_function(512, [](double x) { return (1.0 + 0.5 * std::cos(x)) / kTwoPi; });
  const QuantileState g = density_to_quantile(p, 0.0, 512);
  const TorusDensity q = quantile_to_density(g, 512);
  double err = 0.0;
  for (std::size_t i = 0; i < 512; ++i) err = std::max(err, std::abs(q.values[i] - p.values[i]));
  CHECK(err <= 1e-6);
  for (std::size_t j = 0; j <= 512; j += 32)
    CHECK(g.deriv1[j] * (1.0 + 0.5 * std::cos(g.values[j])) / kTwoPi == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("moving the base point translates the quantile in u") {
  const TorusDensity p = TorusDensity::from_function(512, [](double x) { return (1.0 + 0.5 * std::cos(x)) / kTwoPi; });
  const QuantileState g0 = density_to_quantile(p, 0.0, 256);
  const QuantileState g1 = density_to_quantile(p, 1.0, 256);
  // g1(u) = g0(u + c) with c = F0(1).
  const double c = (1.0 + 0.5 * std::sin(1.0)) / kTwoPi;
  for (double u : {0.0, 0.2, 0.55, 0.9}) CHECK(g1.eval(u) == doctest::Approx(g0.eval(u + c)).epsilon(1e-7));
  const QuantileState r = canonical_rebase(g1);
  CHECK(r.values[0] >= 0.0);
  CHECK(r.values[0] < kTwoPi);
}

TEST_CASE("inverted density matches a stratified histogram of g(U)") {
  const double a = 0.3;
  const QuantileState g = sine_state(512, a);
  const TorusDensity p = quantile_to_density(g, 512);
  const int bins = 128, n = 1000000;
  std::vector<double> hist(bins, 0.0);
  for (int i = 0; i < n; ++i) {
    const double u = (i + 0.5) / n;
    const double x = std::fmod(kTwoPi * u + a * std::sin(kTwoPi * u) + kTwoPi, kTwoPi);
    hist[static_cast<std::size_t>(x / kTwoPi * bins) % bins] += 1.0 / n;
  }
  double l1 = 0.0;
  for (int b = 0; b < bins; ++b) {
    double mass = 0.0;
    for (int i = 0; i < 4; ++i) {
      // trapezoid over the four grid cells of the bin
      const std::size_t k = static_cast<std::size_t>(4 * b + i);
      mass += 0.5 * (p.values[k] + p.values[(k + 1) % 512]) * p.dx();
    }
    l1 += std::abs(mass - hist[b]);
  }
  CHECK(l1 <= 0.01);
}
