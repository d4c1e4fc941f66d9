#include "tbel/noise.hpp"

#include <cmath>
#include <ostream>

#include "tbel/common.hpp"

namespace tbel {

FourierProfile build_profile(double alpha, double C, int K_max) {
  if (!(alpha > 0.0)) throw InvalidArgument("build_profile: alpha must be positive");
  if (!(C > 0.0)) throw InvalidArgument("build_profile: C must be positive");
  if (K_max < 0) throw InvalidArgument("build_profile: K_max must be non-negative");
  FourierProfile p;
  p.alpha = alpha;
  p.C = C;
  p.K_max = K_max;
  p.f.resize(static_cast<std::size_t>(K_max) + 1);
  for (int k = 0; k <= K_max; ++k) p.f[k] = C * std::pow(1.0 + double(k) * k, -alpha / 2.0);
  p.sum_sq = p.f[0] * p.f[0];
  for (int k = 1; k <= K_max; ++k) {
    p.sum_sq += 2.0 * p.f[k] * p.f[k];
    p.sum_k2 += 2.0 * p.f[k] * p.f[k] * double(k) * k;
  }
  return p;
}

FourierProfile zero_profile(int K_max) {
  FourierProfile p;
  p.alpha = 0.0;
  p.C = 0.0;
  p.K_max = K_max;
  p.f.assign(static_cast<std::size_t>(K_max) + 1, 0.0);
  return p;
}

double sum_k2_truncated(double alpha, double C, int K) {
  double s = 0.0;
  for (int k = K; k >= 1; --k) s += 2.0 * C * C * double(k) * k * std::pow(1.0 + double(k) * k, -alpha);
  return s;
}

double truncation_tail_bound(const FourierProfile& p) {
  if (p.degenerate()) return 0.0;
  return std::max(0.0, sum_k2_truncated(p.alpha, p.C, 4096) - sum_k2_truncated(p.alpha, p.C, p.K_max));
}

namespace {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

inline void box_muller(const PhiloxCounter& r, double& z0, double& z1) {
  constexpr double inv53 = 1.0 / 9007199254740992.0;
  const std::uint64_t a = ((static_cast<std::uint64_t>(r[0]) << 32) | r[1]) >> 11;
  const std::uint64_t b = ((static_cast<std::uint64_t>(r[2]) << 32) | r[3]) >> 11;
  const double u1 = (static_cast<double>(a) + 1.0) * inv53;
  const double u2 = static_cast<double>(b) * inv53;
  const double rad = std::sqrt(-2.0 * std::log(u1));
  z0 = rad * std::cos(kTwoPi * u2);
  z1 = rad * std::sin(kTwoPi * u2);
}

inline std::uint32_t zigzag(int k) { return k >= 0 ? 2u * static_cast<std::uint32_t>(k) : 2u * static_cast<std::uint32_t>(-k) - 1u; }

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(0xD2511F53u, c[0], hi0, lo0);
    mulhilo(0xCD9E8D57u, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += 0x9E3779B9u;
    k[1] += 0xBB67AE85u;
  }
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

PhiloxKey common_key(std::uint64_t seed, std::uint64_t w) {
  const std::uint64_t x = splitmix64(splitmix64(seed ^ 0xC0FFEE0000000001ull) ^ w);
  return {static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(x >> 32)};
}

PhiloxKey idio_key(std::uint64_t seed, std::uint64_t w, std::uint64_t b) {
  const std::uint64_t x = splitmix64(splitmix64(splitmix64(seed ^ 0xB5E7A00000000002ull) ^ w) ^ b);
  return {static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(x >> 32)};
}

void draw_common_step(const PhiloxKey& key, std::uint64_t step, int K, double dt, double* re, double* im) {
  const double s = std::sqrt(dt);
  for (int k = -K; k <= K; ++k) {
    const PhiloxCounter ctr = {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), zigzag(k), 0u};
    double z0, z1;
    box_muller(philox4x32(ctr, key), z0, z1);
    re[k + K] = s * z0;
    im[k + K] = s * z1;
  }
}

double draw_idio_step(const PhiloxKey& key, std::uint64_t step, double dt) {
  const PhiloxCounter ctr = {static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), 0u, 1u};
  double z0, z1;
  box_muller(philox4x32(ctr, key), z0, z1);
  return std::sqrt(dt) * z0;
}

NoisePath sample_noise(const FourierProfile& profile, std::uint64_t seed, int n_steps, double dt, std::uint64_t w_index,
                       std::uint64_t b_index) {
  if (n_steps < 1) throw InvalidArgument("sample_noise: n_steps must be >= 1");
  if (!(dt > 0.0)) throw InvalidArgument("sample_noise: dt must be positive");
  NoisePath n;
  n.seed = seed;
  n.w_index = w_index;
  n.b_index = b_index;
  n.n_steps = n_steps;
  n.dt = dt;
  n.K_max = profile.K_max;
  const std::size_t width = static_cast<std::size_t>(n.width());
  n.dW_re.resize(width * n_steps);
  n.dW_im.resize(width * n_steps);
  n.dBeta.resize(n_steps);
  const PhiloxKey ck = common_key(seed, w_index);
  const PhiloxKey ik = idio_key(seed, w_index, b_index);
  for (int i = 0; i < n_steps; ++i) {
    draw_common_step(ck, static_cast<std::uint64_t>(i), profile.K_max, dt, n.dW_re.data() + width * i,
                     n.dW_im.data() + width * i);
    n.dBeta[i] = draw_idio_step(ik, static_cast<std::uint64_t>(i), dt);
  }
  return n;
}

NoisePath zero_noise(int K_max, int n_steps, double dt) {
  NoisePath n;
  n.n_steps = n_steps;
  n.dt = dt;
  n.K_max = K_max;
  n.dW_re.assign(static_cast<std::size_t>(n.width()) * n_steps, 0.0);
  n.dW_im.assign(static_cast<std::size_t>(n.width()) * n_steps, 0.0);
  n.dBeta.assign(n_steps, 0.0);
  return n;
}

NoisePath coarsen(const NoisePath& fine, int factor) {
  if (factor < 1 || fine.n_steps % factor != 0) throw InvalidArgument("coarsen: factor must divide n_steps");
  NoisePath c = fine;
  c.n_steps = fine.n_steps / factor;
  c.dt = fine.dt * factor;
  const std::size_t w = static_cast<std::size_t>(fine.width());
  c.dW_re.assign(w * c.n_steps, 0.0);
  c.dW_im.assign(w * c.n_steps, 0.0);
  c.dBeta.assign(c.n_steps, 0.0);
  for (int i = 0; i < c.n_steps; ++i) {
    for (int r = 0; r < factor; ++r) {
      const std::size_t src = static_cast<std::size_t>(i) * factor + r;
      for (std::size_t m = 0; m < w; ++m) {
        c.dW_re[w * i + m] += fine.dW_re[w * src + m];
        c.dW_im[w * i + m] += fine.dW_im[w * src + m];
      }
      c.dBeta[i] += fine.dBeta[src];
    }
  }
  return c;
}

void write_manifest(std::ostream& os, const FourierProfile& p, std::uint64_t seed, int n_steps, double dt) {
  os.precision(17);
  os << "alpha=" << p.alpha << "\n"
     << "C=" << p.C << "\n"
     << "K_max=" << p.K_max << "\n"
     << "seed=" << seed << "\n"
     << "n_steps=" << n_steps << "\n"
     << "dt=" << dt << "\n"
     << "sum_sq=" << p.sum_sq << "\n"
     << "sum_k2=" << p.sum_k2 << "\n"
     << "qv_rate=" << p.qv_rate() << "\n"
     << "tail_bound=" << truncation_tail_bound(p) << "\n";
}

}  // namespace tbel
