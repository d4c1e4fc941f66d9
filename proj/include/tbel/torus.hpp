#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tbel/common.hpp"

namespace tbel {

// Density on the open grid x_i = 2*pi*i/N_x.
struct TorusDensity {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double dx() const { return kTwoPi / static_cast<double>(values.size()); }
  double node(std::size_t i) const { return dx() * static_cast<double>(i); }
  double mass() const;
  void validate() const;

  static TorusDensity from_function(std::size_t n_x, const std::function<double(double)>& p);
  static TorusDensity uniform(std::size_t n_x);
};

// Pseudo-periodic quantile function on the closed grid u_j = j/N_u, j = 0..N_u.
struct QuantileState {
  std::vector<double> values;
  std::vector<double> deriv1;
  std::vector<double> deriv2;
  std::vector<double> deriv3;

  std::size_t n_u() const { return values.size() - 1; }
  double u(std::size_t j) const { return static_cast<double>(j) / static_cast<double>(n_u()); }
  int available_order() const;
  void validate() const;

  // Evaluate g at any real u using the pseudo-periodic extension and Hermite interpolation.
  double eval(double u) const;

  static QuantileState from_function(std::size_t n_u, const std::function<double(double)>& g,
                                     const std::function<double(double)>& g1,
                                     const std::function<double(double)>& g2 = nullptr,
                                     const std::function<double(double)>& g3 = nullptr);
};

// 1-periodic perturbation direction on the closed grid.
struct PerturbationDirection {
  std::vector<double> values;
  std::vector<double> deriv1;

  std::size_t n_u() const { return values.size() - 1; }
  void validate() const;
  double sup_c1() const;

  static PerturbationDirection from_function(std::size_t n_u, const std::function<double(double)>& h,
                                             const std::function<double(double)>& h1);
  static PerturbationDirection zero(std::size_t n_u);
};

double torus_distance(double x, double y);

double circular_wasserstein2(const TorusDensity& mu, const TorusDensity& nu);

QuantileState density_to_quantile(const TorusDensity& p, double x0 = 0.0, std::size_t n_u = 0);

TorusDensity quantile_to_density(const QuantileState& g, std::size_t n_x = 0);

// Translate g in u so that g(0) lies in [0, 2*pi).
QuantileState canonical_rebase(const QuantileState& g);

void write_csv(std::ostream& os, const TorusDensity& p);
// Reads the format written by write_csv(TorusDensity).
TorusDensity read_density_csv(std::istream& is);
void write_csv(std::ostream& os, const QuantileState& g);

}  // namespace tbel
