#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tbel/common.hpp"
#include "tbel/field.hpp"
#include "tbel/noise.hpp"

using namespace tbel;

TEST_CASE("philox4x32-10 known answers") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("power-law profile") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  CHECK(p.coeff(1) == doctest::Approx(0.25));
  CHECK(p.coeff(-3) == doctest::Approx(0.01));
  double s = 0.0, s2 = 0.0;
  for (int k = -16; k <= 16; ++k) {
    const double f = std::pow(1.0 + k * k, -2.0);
    s += f * f;
    s2 += f * f * k * k;
  }
  CHECK(p.sum_sq == doctest::Approx(s).epsilon(1e-14));
  CHECK(p.sum_k2 == doctest::Approx(s2).epsilon(1e-14));
  CHECK(zero_profile(8).degenerate());
  CHECK(truncation_tail_bound(p) >= 0.0);
}

TEST_CASE("increments are reproducible, independent of K_max, and have variance dt") {
  const double dt = 1e-3;
  const NoisePath a = sample_noise(build_profile(4.0, 1.0, 8), 7, 4000, dt, 3, 1);
  const NoisePath b = sample_noise(build_profile(4.0, 1.0, 16), 7, 4000, dt, 3, 1);
  const NoisePath c = sample_noise(build_profile(4.0, 1.0, 8), 7, 4000, dt, 3, 1);
  double v = 0.0, cross = 0.0;
  long n = 0;
  for (int i = 0; i < 4000; ++i) {
    for (int k = -8; k <= 8; ++k) {
      REQUIRE(a.re(i, k) == b.re(i, k));
      REQUIRE(a.im(i, k) == b.im(i, k));
      v += a.re(i, k) * a.re(i, k) + a.im(i, k) * a.im(i, k);
      n += 2;
    }
    cross += a.re(i, 1) * a.re(i, 2);
    REQUIRE(a.re(i, 0) == c.re(i, 0));
  }
  CHECK(v / n == doctest::Approx(dt).epsilon(0.03));
  CHECK(std::abs(cross / 4000) < 5.0 * dt / std::sqrt(4000.0));
  const NoisePath other = sample_noise(build_profile(4.0, 1.0, 8), 8, 10, dt, 3, 1);
  CHECK(other.re(0, 0) != a.re(0, 0));
}

TEST_CASE("coarsening sums blocks") {
  const NoisePath f = sample_noise(build_profile(4.0, 1.0, 4), 1, 40, 1e-3);
  const NoisePath c = coarsen(f, 4);
  CHECK(c.n_steps == 10);
  CHECK(c.dt == doctest::Approx(4e-3));
  for (int i = 0; i < 10; ++i)
    for (int k = -4; k <= 4; ++k) {
      double s = 0.0;
      for (int r = 0; r < 4; ++r) s += f.re(4 * i + r, k);
      CHECK(c.re(i, k) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("noise field matches direct summation") {
  const FourierProfile p = build_profile(4.0, 1.0, 32);
  const NoisePath noise = sample_noise(p, 3, 2, 1e-2);
  for (FieldMode mode : {FieldMode::Direct, FieldMode::Gridded}) {
    NoiseField field(p, 3, mode, 1024);
    field.set_increments(noise.re(1), noise.im(1));
    const double tol = mode == FieldMode::Direct ? 1e-12 : 1e-6;
    for (double x : {0.0, 0.3, 1.7, 4.1, 6.2}) {
      double out[4];
      field.eval(x, out);
      for (int m = 0; m <= 3; ++m) {
        const double ref = field_direct(p, noise.re(1), noise.im(1), x, m);
        CHECK(std::abs(out[m] - ref) <= tol * (1.0 + std::abs(ref)));
      }
    }
  }
}

TEST_CASE("degenerate profile gives a zero field") {
  const FourierProfile p = zero_profile(8);
  const NoisePath noise = sample_noise(p, 3, 2, 1e-2);
  NoiseField field(p, 1, FieldMode::Direct);
  field.set_increments(noise.re(0), noise.im(0));
  double out[2];
  field.eval(1.0, out);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("small profiles by hand") {
  const FourierProfile p = build_profile(4.0, 1.0, 2);
  CHECK(p.coeff(0) == 1.0);
  CHECK(p.coeff(1) == doctest::Approx(0.25));
  CHECK(p.coeff(2) == doctest::Approx(0.04));
  const FourierProfile q = build_profile(4.0, 1.0, 0);
  CHECK(q.sum_sq == 1.0);
  CHECK(q.qv_rate() == 2.0);
  CHECK(sum_k2_truncated(4.0, 1.0, 64) == doctest::Approx(sum_k2_truncated(4.0, 1.0, 2048)).epsilon(0.01));
  CHECK_THROWS_AS(build_profile(-1.0, 1.0, 4), InvalidArgument);
  CHECK_THROWS_AS(build_profile(4.0, 0.0, 4), InvalidArgument);
}

TEST_CASE("idiosyncratic increments have variance dt") {
  const PhiloxKey key = idio_key(42, 0, 0);
  const int n = 100000;
  const double dt = 1e-3;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = draw_idio_step(key, static_cast<std::uint64_t>(i), dt);
    s += d;
    s2 += d * d;
  }
  CHECK(std::abs(s / n) <= 4.0 * std::sqrt(dt / n));
  CHECK(std::abs(s2 / n - dt) <= 4.0 * dt * std::sqrt(2.0 / n));
  CHECK(draw_idio_step(key, 17, dt) == draw_idio_step(idio_key(42, 0, 0), 17, dt));
  CHECK(draw_idio_step(key, 17, dt) != draw_idio_step(idio_key(42, 0, 1), 17, dt));
}
