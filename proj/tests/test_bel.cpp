#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "tbel/bel.hpp"

using namespace tbel;

namespace {

QuantileState sine_state(std::size_t n, double a) {
  return QuantileState::from_function(
      n, [a](double u) { return kTwoPi * u + a * std::sin(kTwoPi * u); },
      [a](double u) { return kTwoPi + a * kTwoPi * std::cos(kTwoPi * u); },
      [a](double u) { return -a * kTwoPi * kTwoPi * std::sin(kTwoPi * u); });
}

QuantileState identity_state(std::size_t n) { return sine_state(n, 0.0); }

PerturbationDirection cos_dir(std::size_t n) {
  return PerturbationDirection::from_function(
      n, [](double u) { return std::cos(kTwoPi * u); }, [](double u) { return -kTwoPi * std::sin(kTwoPi * u); });
}

PerturbationDirection const_dir(std::size_t n) {
  return PerturbationDirection::from_function(n, [](double) { return 1.0; }, [](double) { return 0.0; });
}

PathState still_path(const QuantileState& g, int steps) {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  return evolve(g, p, sample_noise(p, 1, steps, 1e-3), 1);
}

}  // namespace

TEST_CASE("transport field of trivial configurations") {
  const PathState path = still_path(identity_state(128), 1);
  const TransportField one = compute_A(path, const_dir(128), 0, 256);
  CHECK(one.coeff(0).real() == doctest::Approx(kTwoPi).epsilon(1e-12));
  CHECK(std::abs(one.coeff(1)) <= 1e-12);
  const TransportField c = compute_A(path, cos_dir(128), 0, 256);
  CHECK(c.coeff(1).real() == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(c.coeff(-1).real() == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(std::abs(c.coeff(0)) <= 1e-12);
  CHECK(std::abs(c.coeff(2)) <= 1e-12);
  const TransportField z = compute_A(path, PerturbationDirection::zero(128), 0, 256);
  for (const auto& ck : z.c) CHECK(ck == cplx(0.0, 0.0));
}

TEST_CASE("transport field matches its pointwise definition along the flow") {
  const FourierProfile p = build_profile(4.0, 1.0, 32);
  const QuantileState g = sine_state(256, 0.3);
  const PerturbationDirection h = cos_dir(256);
  const NoisePath noise = sample_noise(p, 21, 200, 1e-3);
  const PathState path = evolve(g, p, noise, 1);
  for (Convention conv : {Convention::Plain, Convention::Scaled}) {
    const TransportField A = compute_A(path, h, 200, 512, conv);
    // Off-grid labels pushed through the same flow.
    std::vector<double> u, x0;
    for (int m = 0; m < 16; ++m) {
      u.push_back((m + 0.37) / 16.0);
      x0.push_back(kTwoPi * u.back() + 0.3 * std::sin(kTwoPi * u.back()));
    }
    const ParametricPath z = evolve_parametric(x0, p, noise);
    for (std::size_t m = 0; m < u.size(); ++m) {
      const double g1 = kTwoPi + 0.3 * kTwoPi * std::cos(kTwoPi * u[m]);
      const double J = g1 * z.dz(200, m);
      const double hw = std::cos(kTwoPi * u[m]) / (conv == Convention::Plain ? g1 : 1.0);
      CHECK(std::abs(A.eval(z.zv(200, m)) - J * hw) <= 1e-8);
    }
  }
}

TEST_CASE("mollifier multiplier and convolution") {
  CHECK(MollifierSpec{1.0}.multiplier(1) == doctest::Approx(std::exp(-0.5)));
  CHECK(MollifierSpec{1.0}.multiplier(1) == doctest::Approx(0.60653).epsilon(1e-5));
  const PathState path = still_path(sine_state(128, 0.3), 50);
  const TransportField A = compute_A(path, cos_dir(128), 50, 256);
  const TransportField Ae = mollify(A, MollifierSpec{0.3});
  for (int k = 0; k <= 5; ++k) CHECK(std::abs(Ae.coeff(k) - A.coeff(k) * std::exp(-0.045 * k * k)) <= 1e-15);
  REQUIRE(A.grid.size() == 256);
  const auto conv = convolve_wrapped_gaussian(A.grid, 0.3);
  for (std::size_t i = 0; i < 256; i += 16) {
    const double y = kTwoPi * i / 256.0;
    CHECK(std::abs(conv[i] - Ae.eval(y)) <= 1e-8);
  }
  double lo = 1e300, hi = -1e300;
  for (double v : A.grid) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : conv) CHECK((v >= lo - 1e-12 && v <= hi + 1e-12));
}

TEST_CASE("weights of the cosine field") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  const PathState path = still_path(identity_state(128), 1);
  const TransportField Ae = mollify(compute_A(path, cos_dir(128), 0, 256), MollifierSpec{0.2});
  const LambdaSet l = compute_lambda(Ae, p);
  const double expect = kPi * std::exp(-0.02) / 0.25;
  CHECK(l.lambda[1].real() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(l.lambda[0]) <= 1e-12);
  CHECK(l.dropped_energy <= 1e-20);
  for (double y : {0.0, 1.0, 2.5})
    CHECK(reconstruct_from_lambda(l, p, y) == doctest::Approx(Ae.eval(y)).epsilon(1e-12));
}

TEST_CASE("zero direction gives zero weights and zero estimates") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  const QuantileState g = sine_state(64, 0.3);
  const NoisePath noise = sample_noise(p, 3, 100, 1e-3);
  const PathState path = evolve(g, p, noise, 1);
  const auto h = PerturbationDirection::zero(64);
  const BELWeight w = compute_weight(path, noise, h, p, 0.2, 100);
  CHECK(w.stochastic_integral == 0.0);
  CHECK(w.l2_norm == 0.0);
  McSettings mc;
  mc.dt = 1e-3;
  mc.M_W = 4;
  mc.M_beta = 2;
  BelOptions bo;
  bo.times = {0.1};
  const BelCell c = run_bel(g, h, TestFunctional::cosine(), p, mc, bo).front();
  CHECK(c.I1.value == 0.0);
  CHECK(c.I2.value == 0.0);
  CHECK(c.total.value == 0.0);
}

TEST_CASE("weight integral matches a direct left-point sum") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  const QuantileState g = sine_state(128, 0.3);
  const PerturbationDirection h = cos_dir(128);
  const NoisePath noise = sample_noise(p, 8, 60, 1e-3);
  const PathState path = evolve(g, p, noise, 1);
  const BELWeight w = compute_weight(path, noise, h, p, 0.3, 60);
  REQUIRE(w.lambda.size() == 60);
  double ito = 0.0, l2 = 0.0;
  for (int i = 0; i < 60; ++i) {
    const auto& lam = w.lambda[i];
    for (int k = -16; k <= 16; ++k) {
      const cplx lk = k >= 0 ? lam[k] : std::conj(lam[-k]);
      ito += lk.real() * noise.re(i, k) + lk.imag() * noise.im(i, k);
      l2 += std::norm(lk) * 1e-3;
    }
  }
  CHECK(w.l2_norm == doctest::Approx(l2).epsilon(1e-10));
  CHECK(w.stochastic_integral == doctest::Approx(ito).epsilon(1e-10));
}

TEST_CASE("remainder kernel without common noise has a closed form") {
  const FourierProfile p = zero_profile(8);
  const QuantileState g = identity_state(128);
  const PerturbationDirection h = cos_dir(128);
  const int N = 100;
  const double dt = 1e-3, eps = 0.3;
  const NoisePath noise = sample_noise(p, 13, N, dt);
  const PathState path = evolve(g, p, noise, 1);
  const KResult K = compute_K(path, h, eps, N, Convention::Scaled);
  const double t = N * dt;
  double sw = 0.0, sws = 0.0, beta = 0.0;
  for (int n = 0; n < N; ++n) {
    if (n < N - 1) {
      const double wt = dt / (t - n * dt);
      sw += wt;
      sws += wt * kTwoPi * beta;
    }
    beta += path.dbeta[n];
  }
  const double scale = (1.0 - std::exp(-0.5 * eps * eps)) * (kTwoPi * beta * sw - sws);
  for (std::size_t j = 0; j <= 128; j += 8)
    CHECK(std::abs(K.K[j] - scale * std::cos(kTwoPi * g.u(j))) <= 1e-10 * (1.0 + std::abs(scale)));
}

TEST_CASE("estimator is independent of the thread count") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  const QuantileState g = sine_state(64, 0.3);
  McSettings mc;
  mc.dt = 2e-3;
  mc.M_W = 6;
  mc.M_beta = 3;
  mc.seed = 99;
  BelOptions bo;
  bo.times = {0.1, 0.2};
  bo.eps = {0.2, 0.4};
  bo.want_K = true;
  mc.threads = 1;
  const auto a = run_bel(g, cos_dir(64), TestFunctional::cosine(), p, mc, bo);
  mc.threads = 3;
  const auto b = run_bel(g, cos_dir(64), TestFunctional::cosine(), p, mc, bo);
  REQUIRE(a.size() == 4);
  REQUIRE(b.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a[i].total.value == b[i].total.value);
    CHECK(a[i].I2.std_error == b[i].I2.std_error);
    CHECK(a[i].K_sup.value == b[i].K_sup.value);
  }
  CHECK(a[0].t == doctest::Approx(0.1));
  CHECK(a[1].eps == doctest::Approx(0.4));
}

TEST_CASE("invalid estimator inputs") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  const QuantileState g = sine_state(64, 0.3);
  McSettings mc;
  mc.M_W = 4;
  mc.M_beta = 2;
  BelOptions bo;
  bo.eps = {0.0};
  CHECK_THROWS_AS(run_bel(g, cos_dir(64), TestFunctional::cosine(), p, mc, bo), InvalidArgument);
  bo.eps = {0.2};
  CHECK_THROWS_AS(run_bel(g, cos_dir(64), TestFunctional::cosine(), zero_profile(16), mc, bo), InvalidArgument);
  CHECK_THROWS_AS(run_bel(g, cos_dir(64), TestFunctional::interaction(0.0, {1.0}), p, mc, bo), InvalidArgument);
}

TEST_CASE("sweep csv header") {
  CHECK(std::string(sweep_csv_header()) == "t,eps,I1,I1_se,I2,I2_se,total,direct,direct_se,weight_l2,dropped_energy,seed");
}

TEST_CASE("real-field symmetry and contraction through the pipeline") {
  const FourierProfile p = build_profile(4.0, 1.0, 64);
  const QuantileState g = sine_state(256, 0.3);
  const PathState path = evolve(g, p, sample_noise(p, 2, 100, 1e-3), 1);
  const TransportField A = compute_A(path, cos_dir(256), 100, 512);
  CHECK(A.c[0].imag() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(A.coeff(-3) == std::conj(A.coeff(3)));
  const TransportField Ae = mollify(A, MollifierSpec{0.2});
  double a = 0.0, ae = 0.0;
  for (int i = 0; i < 512; ++i) {
    const double y = kTwoPi * i / 512;
    a = std::max(a, std::abs(A.eval(y)));
    ae = std::max(ae, std::abs(Ae.eval(y)));
  }
  CHECK(ae <= a);
  const LambdaSet l = compute_lambda(Ae, p);
  CHECK(l.lambda[0].imag() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(l.dropped_energy <= 0.01 * l.total_energy);
  for (double y : {0.4, 3.3})
    CHECK(std::abs(reconstruct_from_lambda(l, p, y) - Ae.eval(y)) <= std::sqrt(l.dropped_energy) * 10 + 1e-12);
}

TEST_CASE("zero direction gives a zero remainder kernel") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  const PathState path = evolve(sine_state(64, 0.3), p, sample_noise(p, 3, 50, 1e-3), 1);
  const KResult K = compute_K(path, PerturbationDirection::zero(64), 0.2, 50);
  for (double v : K.K) CHECK(v == 0.0);
  CHECK_THROWS_AS(compute_K(path, cos_dir(64), 0.2, 0), InvalidArgument);
}

TEST_CASE("weight has zero mean and constant functionals have zero first term") {
  const FourierProfile p = build_profile(4.0, 1.0, 16);
  McSettings mc;
  mc.dt = 2e-3;
  mc.M_W = 200;
  mc.M_beta = 1;
  mc.seed = 4;
  BelOptions bo;
  bo.times = {0.1};
  const BelCell c = run_bel(sine_state(64, 0.3), cos_dir(64), TestFunctional::linear(1.5, {}, {}), p, mc, bo).front();
  CHECK(std::abs(c.weight_mean.value) <= 3.0 * c.weight_mean.std_error);
  CHECK(std::abs(c.I1.value) <= 3.0 * c.I1.std_error);
  CHECK(c.I2.value == 0.0);
  CHECK(c.weight_l2.value > 0.0);
}

TEST_CASE("zero direction gives zero on both sides of the idiosyncratic identity") {
  McSettings mc;
  mc.dt = 2e-3;
  mc.M_W = 4;
  mc.M_beta = 4;
  const IbpResult r = check_idiosyncratic_ibp(sine_state(128, 0.3), PerturbationDirection::zero(128),
                                              TestFunctional::cosine(), build_profile(4.0, 1.0, 16), 0.04, 0.1, 64,
                                              0.2, mc);
  CHECK(r.lhs.value == 0.0);
  CHECK(r.rhs.value == 0.0);
}
