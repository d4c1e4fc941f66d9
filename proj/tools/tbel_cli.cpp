#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tbel/acceptance.hpp"
#include "tbel/bel.hpp"
#include "tbel/config.hpp"
#include "tbel/report.hpp"
#include "tbel/spde.hpp"

using namespace tbel;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  long long seed = -1;
  int threads = -1;
  std::string out;
  bool plot = false;
};

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.source_lines.push_back(kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (c.threads >= 0) cfg.threads = c.threads;
  if (!c.out.empty()) cfg.out_dir = c.out;
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  return cfg;
}

std::string path_in(const ExperimentConfig& cfg, const std::string& name) { return cfg.out_dir + "/" + name; }

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
  std::ofstream f(path_in(cfg, name));
  if (!f) throw std::runtime_error("cannot write " + path_in(cfg, name));
  f.precision(12);
  return f;
}

void manifest(const ExperimentConfig& cfg, const std::string& cmd, const std::vector<std::string>& checks = {}) {
  auto f = open_out(cfg, cmd + "_manifest.txt");
  cfg.write_manifest(f, cmd);
  if (!checks.empty()) {
    f << "[checks]\n";
    for (const auto& c : checks) f << c << "\n";
  }
}

void cmd_simulate(const ExperimentConfig& cfg, bool plot) {
  const FourierProfile prof = cfg.profile();
  const QuantileState g = cfg.initial_quantile();
  const int n_steps = steps_for(cfg.t, cfg.dt);
  const NoisePath noise = sample_noise(prof, cfg.seed, n_steps, cfg.dt, 0, 0);
  const PathState p = evolve(g, prof, noise, std::min(3, g.available_order()));
  {
    auto f = open_out(cfg, "trajectory.csv");
    write_trajectory_csv(f, p, cfg.stride);
  }
  long order_fail = 0, deriv_fail = 0, period_fail = 0;
  for (int i = 0; i <= p.n_steps; ++i) {
    if (p.xv(i, p.n_u) != p.xv(i, 0) + kTwoPi) ++period_fail;
    for (std::size_t j = 0; j <= p.n_u; ++j) {
      if (!(p.d1(i, j) > 0.0)) ++deriv_fail;
      if (j < p.n_u && !(p.xv(i, j + 1) > p.xv(i, j))) ++order_fail;
    }
  }
  const double qv = realized_qv(p, 0);
  std::vector<std::string> checks{"pseudo_periodicity_failures = " + std::to_string(period_fail),
                                  "nonpositive_d1 = " + std::to_string(deriv_fail),
                                  "monotonicity_failures = " + std::to_string(order_fail),
                                  "realized_qv_u0 = " + std::to_string(qv),
                                  "expected_qv = " + std::to_string(prof.qv_rate() * cfg.t)};
  manifest(cfg, "simulate", checks);
  {
    auto f = open_out(cfg, "noise_manifest.txt");
    write_manifest(f, prof, cfg.seed, n_steps, cfg.dt);
  }
  if (plot) {
    PlotSpec ps{"particle trajectories", "t", "x_t(u)", false, false, {}};
    for (std::size_t j = 0; j < p.n_u; j += std::max<std::size_t>(1, p.n_u / 8)) {
      Series s{"u=" + std::to_string(g.u(j)).substr(0, 5), {}, {}, {}, true};
      for (int i = 0; i <= p.n_steps; i += cfg.stride) {
        s.x.push_back(p.time(i));
        s.y.push_back(p.xv(i, j));
      }
      ps.series.push_back(s);
    }
    write_svg(path_in(cfg, "trajectory.svg"), ps);
  }
  std::cout << "simulate: " << n_steps << " steps, realized QV at u=0 " << qv << " (expected "
            << prof.qv_rate() * cfg.t << ")\n";
  if (period_fail || deriv_fail || order_fail) throw CheckFailed("simulate: structural invariant violated");
}

void cmd_gradient(const ExperimentConfig& cfg, bool plot) {
  const FourierProfile prof = cfg.profile();
  const QuantileState g = cfg.initial_quantile();
  const PerturbationDirection h = cfg.direction();
  const TestFunctional phi = cfg.test_functional();
  const McSettings mc = cfg.mc();
  GradientReport direct = gradient_direct(g, h, phi, prof, cfg.t, mc, cfg.conv());
  GradientReport fd = gradient_fd(g, h, phi, prof, cfg.t, cfg.rho, mc, cfg.conv());
  std::vector<GradientReport> rows{direct, fd};
  if (!prof.degenerate()) {
    BelOptions bo;
    bo.times = {cfg.t};
    bo.eps = {cfg.eps};
    bo.conv = cfg.conv();
    bo.pairing = cfg.pair();
    const BelCell c = run_bel(g, h, phi, prof, mc, bo).front();
    auto mk = [&](const char* name, const Estimate& e) {
      GradientReport r = direct;
      r.estimator = name;
      r.eps = cfg.eps;
      r.value = e.value;
      r.std_error = e.std_error;
      return r;
    };
    rows.push_back(mk("I1", c.I1));
    rows.push_back(mk("I2", c.I2));
    rows.push_back(mk("bel", c.total));
    if (c.dropped_warning) std::cerr << "warning: dropped-mode energy exceeds 1% of the weight norm\n";
  }
  {
    auto f = open_out(cfg, "gradient.csv");
    f << GradientReport::csv_header() << "\n";
    for (const auto& r : rows) r.write_csv_row(f);
  }
  manifest(cfg, "gradient", {std::string("convention = ") + to_string(cfg.conv())});
  if (plot) {
    PlotSpec ps{"gradient estimators", "estimator index", "value", false, false, {}};
    for (std::size_t i = 0; i < rows.size(); ++i)
      ps.series.push_back(Series{rows[i].estimator, {double(i)}, {rows[i].value}, {rows[i].std_error}, false});
    write_svg(path_in(cfg, "gradient.svg"), ps);
  }
  for (const auto& r : rows) std::cout << r.estimator << " " << r.value << " +- " << r.std_error << "\n";
}

void cmd_eps_sweep(const ExperimentConfig& cfg, bool plot) {
  const FourierProfile prof = cfg.profile();
  BelOptions bo;
  bo.times = {cfg.t};
  bo.eps = cfg.eps_list;
  bo.conv = cfg.conv();
  bo.pairing = cfg.pair();
  bo.want_K = true;
  const auto cells = run_bel(cfg.initial_quantile(), cfg.direction(), cfg.test_functional(), prof, cfg.mc(), bo);
  std::vector<double> le, li, lk, ll;
  {
    auto f = open_out(cfg, "eps_sweep.csv");
    f << sweep_csv_header() << "\n";
    for (const auto& c : cells) {
      write_sweep_row(f, c, cfg.seed);
      le.push_back(std::log(c.eps));
      li.push_back(std::log(std::abs(c.I2.value)));
      lk.push_back(std::log(c.K_sup.value));
      ll.push_back(std::log(c.weight_l2.value));
    }
  }
  const double si = ls_slope(le, li), sk = ls_slope(le, lk), sl = ls_slope(le, ll);
  {
    auto f = open_out(cfg, "eps_sweep_fit.csv");
    f << "quantity,slope\nI2," << si << "\nK_sup," << sk << "\nweight_l2," << sl << "\n";
    f << "eps,K_sup,K_sup_se\n";
    for (const auto& c : cells) f << c.eps << "," << c.K_sup.value << "," << c.K_sup.std_error << "\n";
  }
  manifest(cfg, "eps-sweep");
  if (plot) {
    PlotSpec ps{"remainder scaling", "eps", "magnitude", true, true, {}};
    Series a{"|I2|", {}, {}, {}, true}, b{"sup K", {}, {}, {}, true}, fit{"fit |I2|", {}, {}, {}, true};
    double a0 = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) a0 += li[i] - si * le[i];
    a0 /= static_cast<double>(cells.size());
    for (const auto& c : cells) {
      a.x.push_back(c.eps);
      a.y.push_back(std::abs(c.I2.value));
      a.err.push_back(c.I2.std_error);
      b.x.push_back(c.eps);
      b.y.push_back(c.K_sup.value);
      fit.x.push_back(c.eps);
      fit.y.push_back(std::exp(a0 + si * std::log(c.eps)));
    }
    ps.series = {a, b, fit};
    write_svg(path_in(cfg, "eps_sweep.svg"), ps);
  }
  std::cout << "eps-sweep: slope I2 " << si << ", slope K " << sk << ", slope weight l2 " << sl << "\n";
}

void cmd_rate_sweep(const ExperimentConfig& cfg, bool plot) {
  const auto rows = rate_sweep(cfg.initial_quantile(), cfg.direction(), cfg.test_functional(), cfg.profile(),
                               cfg.t_list, cfg.eps, cfg.theta, cfg.rho, cfg.mc());
  double cmax = 0.0;
  bool finite = true, blowup = rows.size() > 1;
  {
    auto f = open_out(cfg, "rate_sweep.csv");
    f << sweep_csv_header() << "\n";
    for (const auto& r : rows) write_sweep_row(f, r.bel, cfg.seed);
  }
  {
    auto f = open_out(cfg, "rate_sweep_fd.csv");
    f << GradientReport::csv_header() << "\n";
    for (const auto& r : rows) r.fd.write_csv_row(f);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    finite = finite && std::isfinite(rows[i].scaled);
    cmax = std::max(cmax, rows[i].scaled);
    if (i + 1 < rows.size() && !(rows[i].scaled > rows[i + 1].scaled)) blowup = false;
  }
  {
    auto f = open_out(cfg, "rate_sweep_scaled.csv");
    f << "t,abs_gradient,scaled,weight_l2,I2\n";
    for (const auto& r : rows)
      f << r.t << "," << std::abs(r.bel.total.value) << "," << r.scaled << "," << r.bel.weight_l2.value << ","
        << r.bel.I2.value << "\n";
    f << "C_g_empirical," << cmax << "\n";
  }
  manifest(cfg, "rate-sweep", {"C_g_empirical = " + std::to_string(cmax)});
  if (plot) {
    PlotSpec ps{"rate sweep", "t", "value", true, false, {}};
    Series b{"bel", {}, {}, {}, true}, d{"fd", {}, {}, {}, true}, s{"t^(2+theta)|grad|", {}, {}, {}, true};
    for (const auto& r : rows) {
      b.x.push_back(r.t);
      b.y.push_back(r.bel.total.value);
      b.err.push_back(r.bel.total.std_error);
      d.x.push_back(r.t);
      d.y.push_back(r.fd.value);
      d.err.push_back(r.fd.std_error);
      s.x.push_back(r.t);
      s.y.push_back(r.scaled);
    }
    ps.series = {b, d, s};
    write_svg(path_in(cfg, "rate_sweep.svg"), ps);
  }
  std::cout << "rate-sweep: empirical C_g " << cmax << "\n";
  if (!finite || blowup) throw CheckFailed("rate-sweep: scaled gradient not bounded on the grid");
}

void cmd_ibp(const ExperimentConfig& cfg) {
  if (!(cfg.s < cfg.t)) throw ConfigError("config: s must be smaller than t");
  const IbpResult r = check_idiosyncratic_ibp(cfg.initial_quantile(), cfg.direction(), cfg.test_functional(),
                                              cfg.profile(), cfg.s, cfg.t, static_cast<std::size_t>(cfg.u_index),
                                              cfg.eps, cfg.mc(), cfg.conv());
  {
    auto f = open_out(cfg, "ibp.csv");
    f << "s,t,u_index,eps,lhs,lhs_se,rhs,rhs_se,gap,combined_se,seed\n";
    f << cfg.s << "," << cfg.t << "," << cfg.u_index << "," << cfg.eps << "," << r.lhs.value << ","
      << r.lhs.std_error << "," << r.rhs.value << "," << r.rhs.std_error << "," << r.gap << "," << r.combined_se
      << "," << cfg.seed << "\n";
  }
  manifest(cfg, "ibp-check");
  std::cout << "ibp-check: lhs " << r.lhs.value << " rhs " << r.rhs.value << " gap " << r.gap << " (se "
            << r.combined_se << ")\n";
  if (std::abs(r.gap) > 3.0 * r.combined_se) throw CheckFailed("ibp-check: sides differ by more than 3 se");
}

void cmd_density(const ExperimentConfig& cfg, bool plot) {
  const FourierProfile prof = cfg.profile();
  const QuantileState g = cfg.initial_quantile();
  const DensityComparison c = compare_particles_spde(g, prof, cfg.t, cfg.dt, cfg.M_beta, cfg.seed, 0,
                                                     cfg.kde_bandwidth, static_cast<std::size_t>(cfg.N_x));
  const NoisePath noise = sample_noise(prof, cfg.seed, steps_for(cfg.t, cfg.dt), cfg.dt, 0, 0);
  const TorusDensity p0 = quantile_to_density(g, static_cast<std::size_t>(cfg.N_x));
  const CriticalDiagnostic crit = critical_vs_super(p0, prof, noise);
  SpdeOptions so;
  so.snapshot_stride = cfg.stride;
  const SpdePath path = evolve_density(p0, prof, noise, so);
  {
    auto f = open_out(cfg, "density_compare.csv");
    f << "t,L1_distance,bandwidth\n" << c.t << "," << c.l1 << "," << c.bandwidth << "\n";
  }
  {
    auto f = open_out(cfg, "density_profiles.csv");
    f << "x,spde,particles\n";
    for (std::size_t i = 0; i < c.spde.size(); ++i)
      f << c.spde.node(i) << "," << c.spde.values[i] << "," << c.particles.values[i] << "\n";
  }
  {
    auto f = open_out(cfg, "density_snapshots.csv");
    write_density_csv(f, path.snapshots, static_cast<std::size_t>(cfg.N_x));
  }
  manifest(cfg, "density-compare",
           {"critical_to_super_high_mode_ratio = " + std::to_string(crit.ratio),
            "spde_min_density = " + std::to_string(c.spde_min)});
  if (plot) {
    PlotSpec ps{"particle vs SPDE density", "x", "density", false, false, {}};
    Series a{"spde", {}, {}, {}, true}, b{"particle KDE", {}, {}, {}, true};
    for (std::size_t i = 0; i < c.spde.size(); ++i) {
      a.x.push_back(c.spde.node(i));
      a.y.push_back(c.spde.values[i]);
      b.x.push_back(c.spde.node(i));
      b.y.push_back(c.particles.values[i]);
    }
    ps.series = {a, b};
    write_svg(path_in(cfg, "density_compare.svg"), ps);
  }
  std::cout << "density-compare: L1 " << c.l1 << " (bandwidth " << c.bandwidth << "), critical/super high-mode ratio "
            << crit.ratio << "\n";
  if (c.l1 > 0.05) throw CheckFailed("density-compare: L1 distance above 0.05");
}

void cmd_moments(const ExperimentConfig& cfg, bool plot) {
  const auto rows = moment_suite(cfg.initial_quantile(), cfg.profile(), cfg.M_W, cfg.moment_p, cfg.moment_j, cfg.t,
                                 cfg.dt, cfg.seed, cfg.threads);
  {
    auto f = open_out(cfg, "moments.csv");
    f << "name,p,j,estimate,std_error,rhs,ratio,paths\n";
    for (const auto& r : rows)
      f << r.name << "," << r.p << "," << r.j << "," << r.estimate.value << "," << r.estimate.std_error << ","
        << r.rhs << "," << r.ratio << "," << r.paths << "\n";
  }
  manifest(cfg, "moments");
  if (plot) {
    PlotSpec ps{"moment ratios", "statistic index", "estimate / rhs", false, false, {}};
    for (std::size_t i = 0; i < rows.size(); ++i)
      ps.series.push_back(Series{rows[i].name, {double(i)}, {rows[i].ratio}, {}, false});
    write_svg(path_in(cfg, "moments.svg"), ps);
  }
  for (const auto& r : rows) std::cout << r.name << " " << r.estimate.value << " ratio " << r.ratio << "\n";
}

void cmd_validate(const ExperimentConfig& cfg, const std::vector<int>& ids) {
  AcceptanceOptions ao;
  ao.seed = cfg.seed;
  ao.threads = cfg.threads;
  ao.out_dir = cfg.out_dir;
  std::vector<std::string> lines;
  bool all = true;
  for (int id : ids) {
    const CriterionResult r = run_criterion(id, ao);
    lines.push_back(format_result(r));
    std::cout << lines.back() << std::endl;
    all = all && r.pass;
  }
  manifest(cfg, "validate", lines);
  if (!all) throw CheckFailed("validate: at least one acceptance criterion failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transport-noise particle system: simulation, gradient estimators and validation"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config_path, "key=value configuration file");
    sub->add_option("--set", c.overrides, "override a configuration key (key=value)");
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--threads", c.threads, "worker threads (0: hardware)");
    sub->add_option("--out", c.out, "output directory");
    sub->add_flag("--plot", c.plot, "also write SVG plots");
  };
  auto* sim = app.add_subcommand("simulate", "evolve one path, write trajectories and check invariants");
  auto* grad = app.add_subcommand("gradient", "direct, finite-difference and BEL gradients");
  auto* eps = app.add_subcommand("eps-sweep", "remainder and weight scaling in eps");
  auto* rate = app.add_subcommand("rate-sweep", "gradient estimates across a grid of times");
  auto* ibp = app.add_subcommand("ibp-check", "both sides of the idiosyncratic integration by parts");
  auto* dens = app.add_subcommand("density-compare", "particle density against the SPDE on shared noise");
  auto* val = app.add_subcommand("validate", "run the acceptance suite");
  auto* mom = app.add_subcommand("moments", "moment statistics of the derivative processes");
  std::vector<int> criteria;
  val->add_option("--criterion", criteria, "criterion ids (default: all)");
  for (auto* s : {sim, grad, eps, rate, ibp, dens, val, mom}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig cfg = resolve(c);
    if (sim->parsed()) cmd_simulate(cfg, c.plot);
    else if (grad->parsed()) cmd_gradient(cfg, c.plot);
    else if (eps->parsed()) cmd_eps_sweep(cfg, c.plot);
    else if (rate->parsed()) cmd_rate_sweep(cfg, c.plot);
    else if (ibp->parsed()) cmd_ibp(cfg);
    else if (dens->parsed()) cmd_density(cfg, c.plot);
    else if (mom->parsed()) cmd_moments(cfg, c.plot);
    else if (val->parsed()) {
      if (criteria.empty())
        for (int i = 1; i <= kCriterionCount; ++i) criteria.push_back(i);
      cmd_validate(cfg, criteria);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CheckFailed& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
