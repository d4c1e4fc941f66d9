#include "tbel/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace tbel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long n = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  }
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

bool multiple_of(double t, double dt) {
  const double r = t / dt;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::istream& is) {
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    c.source_lines.push_back(line);
    std::string body = line;
    const auto hash = body.find('#');
    if (hash != std::string::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config: line " + std::to_string(lineno) + " has no '='");
    c.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse(in);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const std::map<std::string, std::function<void(const std::string&)>> table{
      {"scenario", [&](const std::string& v) { scenario = v; }},
      {"alpha", [&](const std::string& v) { alpha = to_double(key, v); }},
      {"C", [&](const std::string& v) { C = to_double(key, v); }},
      {"K_max", [&](const std::string& v) { K_max = static_cast<int>(to_long(key, v)); }},
      {"theta", [&](const std::string& v) { theta = to_double(key, v); }},
      {"N_u", [&](const std::string& v) { N_u = static_cast<int>(to_long(key, v)); }},
      {"N_x", [&](const std::string& v) { N_x = static_cast<int>(to_long(key, v)); }},
      {"dt", [&](const std::string& v) { dt = to_double(key, v); }},
      {"T", [&](const std::string& v) { T = to_double(key, v); }},
      {"t", [&](const std::string& v) { t = to_double(key, v); }},
      {"s", [&](const std::string& v) { s = to_double(key, v); }},
      {"eps", [&](const std::string& v) { eps = to_double(key, v); }},
      {"rho", [&](const std::string& v) { rho = to_double(key, v); }},
      {"M_W", [&](const std::string& v) { M_W = to_long(key, v); }},
      {"M_beta", [&](const std::string& v) { M_beta = static_cast<int>(to_long(key, v)); }},
      {"seed",
       [&](const std::string& v) {
         const long n = to_long(key, v);
         require(n >= 0, "seed must be non-negative");
         seed = static_cast<std::uint64_t>(n);
       }},
      {"threads", [&](const std::string& v) { threads = static_cast<int>(to_long(key, v)); }},
      {"out_dir", [&](const std::string& v) { out_dir = v; }},
      {"initial", [&](const std::string& v) { initial = v; }},
      {"g_amp", [&](const std::string& v) { g_amp = to_double(key, v); }},
      {"g_mode", [&](const std::string& v) { g_mode = static_cast<int>(to_long(key, v)); }},
      {"density_file", [&](const std::string& v) { density_file = v; }},
      {"h_kind", [&](const std::string& v) { h_kind = v; }},
      {"h_amp", [&](const std::string& v) { h_amp = to_double(key, v); }},
      {"h_mode", [&](const std::string& v) { h_mode = static_cast<int>(to_long(key, v)); }},
      {"convention", [&](const std::string& v) { convention = v; }},
      {"functional", [&](const std::string& v) { functional = v; }},
      {"phi_a0", [&](const std::string& v) { phi_a0 = to_double(key, v); }},
      {"phi_a", [&](const std::string& v) { phi_a = to_list(key, v); }},
      {"phi_b", [&](const std::string& v) { phi_b = to_list(key, v); }},
      {"pairing", [&](const std::string& v) { pairing = v; }},
      {"eps_list", [&](const std::string& v) { eps_list = to_list(key, v); }},
      {"t_list", [&](const std::string& v) { t_list = to_list(key, v); }},
      {"kde_bandwidth", [&](const std::string& v) { kde_bandwidth = to_double(key, v); }},
      {"u_index", [&](const std::string& v) { u_index = static_cast<int>(to_long(key, v)); }},
      {"moment_p", [&](const std::string& v) { moment_p = to_double(key, v); }},
      {"moment_j", [&](const std::string& v) { moment_j = static_cast<int>(to_long(key, v)); }},
      {"stride", [&](const std::string& v) { stride = static_cast<int>(to_long(key, v)); }},
  };
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second(value);
  if (std::find(keys_set.begin(), keys_set.end(), key) == keys_set.end()) keys_set.push_back(key);
  const bool has_alpha = std::find(keys_set.begin(), keys_set.end(), "alpha") != keys_set.end();
  const bool has_theta = std::find(keys_set.begin(), keys_set.end(), "theta") != keys_set.end();
  if (key == "theta" && !has_alpha) alpha = 3.5 + theta;
  if (key == "alpha" && !has_theta) theta = alpha - 3.5;
}

void ExperimentConfig::validate() const {
  require(alpha > 0.0, "alpha must be positive");
  require(std::abs(alpha - (3.5 + theta)) <= 1e-12, "alpha and theta must satisfy alpha = 7/2 + theta");
  require(C >= 0.0, "C must be non-negative");
  require(K_max >= 1 && K_max <= 4096, "K_max must lie in 1..4096");
  require(N_u >= 8 && N_u % 2 == 0, "N_u must be even and at least 8");
  require(N_x >= 2 * N_u && N_x % 2 == 0, "N_x must be even and at least 2 N_u");
  require(dt > 0.0 && dt <= 0.1, "dt must lie in (0, 0.1]");
  require(T > 0.0, "T must be positive");
  require(t > 0.0 && t <= T + 1e-12, "t must lie in (0, T]");
  require(multiple_of(t, dt), "t must be a multiple of dt");
  require(s >= 0.0 && multiple_of(s, dt), "s must be a non-negative multiple of dt");
  require(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
  require(rho > 0.0, "rho must be positive");
  require(M_W >= 2, "M_W must be at least 2");
  require(M_beta >= 1, "M_beta must be at least 1");
  require(threads >= 0, "threads must be non-negative");
  require(initial == "sine" || initial == "density", "initial must be sine or density");
  if (initial == "sine") {
    require(g_mode >= 1, "g_mode must be positive");
    require(std::abs(g_amp) * g_mode < 1.0, "g_amp * g_mode must be below 1 for a monotone quantile");
  } else {
    require(!density_file.empty(), "initial = density needs density_file");
  }
  require(h_kind == "cos" || h_kind == "const" || h_kind == "zero", "h_kind must be cos, const or zero");
  require(h_mode >= 0, "h_mode must be non-negative");
  require(convention == "gprime_h" || convention == "plain_h", "convention must be gprime_h or plain_h");
  require(functional == "linear" || functional == "interaction", "functional must be linear or interaction");
  require(phi_a.size() <= 8 && phi_b.size() <= 8, "functional degree is at most 8");
  require(functional == "linear" || phi_b.empty(), "interaction functionals take no phi_b");
  require(pairing == "replica" || pairing == "measure", "pairing must be replica or measure");
  require(!eps_list.empty(), "eps_list must not be empty");
  for (double e : eps_list) require(e > 0.0 && e < 1.0, "eps_list entries must lie in (0, 1)");
  require(!t_list.empty(), "t_list must not be empty");
  for (std::size_t i = 0; i < t_list.size(); ++i) {
    require(t_list[i] > 0.0 && t_list[i] <= T + 1e-12, "t_list entries must lie in (0, T]");
    require(multiple_of(t_list[i], dt), "t_list entries must be multiples of dt");
    require(i == 0 || t_list[i] > t_list[i - 1], "t_list must be increasing");
  }
  require(kde_bandwidth > 0.0, "kde_bandwidth must be positive");
  require(u_index >= 0 && u_index < N_u, "u_index must lie in [0, N_u)");
  require(moment_p >= 1.0, "moment_p must be at least 1");
  require(moment_j >= 1 && moment_j <= 3, "moment_j must lie in 1..3");
  require(stride >= 1, "stride must be positive");
}

FourierProfile ExperimentConfig::profile() const { return C == 0.0 ? zero_profile(K_max) : build_profile(alpha, C, K_max); }

QuantileState ExperimentConfig::initial_quantile() const {
  if (initial == "density") {
    std::ifstream in(density_file);
    if (!in) throw ConfigError("config: cannot open density_file " + density_file);
    return density_to_quantile(read_density_csv(in), 0.0, static_cast<std::size_t>(N_u));
  }
  const double a = g_amp, w = kTwoPi * g_mode;
  return QuantileState::from_function(
      static_cast<std::size_t>(N_u), [=](double u) { return kTwoPi * u + a * std::sin(w * u); },
      [=](double u) { return kTwoPi + a * w * std::cos(w * u); },
      [=](double u) { return -a * w * w * std::sin(w * u); },
      [=](double u) { return -a * w * w * w * std::cos(w * u); });
}

PerturbationDirection ExperimentConfig::direction() const {
  const std::size_t n = static_cast<std::size_t>(N_u);
  if (h_kind == "zero") return PerturbationDirection::zero(n);
  const double a = h_amp;
  if (h_kind == "const")
    return PerturbationDirection::from_function(n, [=](double) { return a; }, [](double) { return 0.0; });
  const double w = kTwoPi * h_mode;
  return PerturbationDirection::from_function(n, [=](double u) { return a * std::cos(w * u); },
                                              [=](double u) { return -a * w * std::sin(w * u); });
}

TestFunctional ExperimentConfig::test_functional() const {
  if (functional == "interaction") return TestFunctional::interaction(phi_a0, phi_a);
  return TestFunctional::linear(phi_a0, phi_a, phi_b);
}

Convention ExperimentConfig::conv() const { return convention == "plain_h" ? Convention::Plain : Convention::Scaled; }

Pairing ExperimentConfig::pair() const { return pairing == "measure" ? Pairing::Measure : Pairing::Replica; }

McSettings ExperimentConfig::mc() const {
  McSettings m;
  m.dt = dt;
  m.M_W = M_W;
  m.M_beta = M_beta;
  m.seed = seed;
  m.threads = threads;
  return m;
}

void ExperimentConfig::write_manifest(std::ostream& os, const std::string& command) const {
  os.precision(15);
  os << "command = " << command << "\n";
  os << "[source]\n";
  for (const auto& l : source_lines) os << l << "\n";
  os << "[resolved]\n";
  os << "scenario = " << scenario << "\n"
     << "alpha = " << alpha << "\n"
     << "C = " << C << "\n"
     << "K_max = " << K_max << "\n"
     << "theta = " << theta << "\n"
     << "N_u = " << N_u << "\n"
     << "N_x = " << N_x << "\n"
     << "dt = " << dt << "\n"
     << "T = " << T << "\n"
     << "t = " << t << "\n"
     << "s = " << s << "\n"
     << "eps = " << eps << "\n"
     << "rho = " << rho << "\n"
     << "M_W = " << M_W << "\n"
     << "M_beta = " << M_beta << "\n"
     << "seed = " << seed << "\n"
     << "initial = " << initial << "\n"
     << "g_amp = " << g_amp << "\n"
     << "g_mode = " << g_mode << "\n"
     << "density_file = " << density_file << "\n"
     << "h_kind = " << h_kind << "\n"
     << "h_amp = " << h_amp << "\n"
     << "h_mode = " << h_mode << "\n"
     << "convention = " << convention << "\n"
     << "functional = " << functional << "\n"
     << "phi_a0 = " << phi_a0 << "\n"
     << "phi_a = " << join(phi_a) << "\n"
     << "phi_b = " << join(phi_b) << "\n"
     << "pairing = " << pairing << "\n"
     << "eps_list = " << join(eps_list) << "\n"
     << "t_list = " << join(t_list) << "\n"
     << "kde_bandwidth = " << kde_bandwidth << "\n"
     << "u_index = " << u_index << "\n"
     << "moment_p = " << moment_p << "\n"
     << "moment_j = " << moment_j << "\n"
     << "stride = " << stride << "\n";
  const FourierProfile prof = profile();
  os << "[noise]\n"
     << "sum_sq = " << prof.sum_sq << "\n"
     << "sum_k2 = " << prof.sum_k2 << "\n"
     << "qv_rate = " << prof.qv_rate() << "\n"
     << "tail_bound = " << truncation_tail_bound(prof) << "\n";
}

}  // namespace tbel
