#pragma once

#include <vector>

#include "ydl/core.hpp"

namespace ydl {

// Column heights p_1 >= p_2 >= ... > 0; the zero tail is implicit.
struct YoungDiagram {
  std::vector<int> columns;

  long long area() const;
  int length() const { return static_cast<int>(columns.size()); }
  // 1-based; 0 past the last positive column
  int column(int i) const { return i >= 1 && i <= length() ? columns[i - 1] : 0; }
  bool valid(Statistics s) const;
  void validate(Statistics s) const;  // throws InvariantError

  bool operator==(const YoungDiagram&) const = default;
};

struct GrandcanonicalParams {
  double epsilon = 0.5;
  int scale_N = 1;
  double shape = kAlpha;  // alpha for U, beta for RU
  int truncation_x_max = 1;
};

double log_partition_sum(double epsilon, Statistics s);
double partition_sum(double epsilon, Statistics s);

// expected area: sum over sites x of x * E[difference at x]
double mean_size(double epsilon, Statistics s);

// default tol is 1e-6 * N^2
double calibrate_epsilon(Statistics s, int N, double tol = -1.0);

// closed-form bound on sum_{x > x_max} x a/(1 -+ a), a = eps^x
double tail_mass_bound(double epsilon, Statistics s, int x_max);
int choose_truncation(double epsilon, Statistics s, int N);

GrandcanonicalParams make_params(Statistics s, int N, double tol = -1.0);
GrandcanonicalParams make_params_for_epsilon(Statistics s, double epsilon, int N);

// per-site moments of the independent height differences, a = eps^x
double site_mean(double a, Statistics s);
double site_variance(double a, Statistics s);

// Draws the height differences at sites 1..x_max.
class GrandcanonicalSampler {
 public:
  GrandcanonicalSampler(const GrandcanonicalParams& params, Statistics s);

  // out[x-1] = height difference at site x
  void sample_differences(Rng& rng, std::vector<int>& out) const;
  YoungDiagram sample(Rng& rng) const;

  const GrandcanonicalParams& params() const { return params_; }
  Statistics statistics() const { return stats_; }

 private:
  GrandcanonicalParams params_;
  Statistics stats_;
  std::vector<double> threshold_;  // U: 1 - a ; RU: a/(1+a)
  std::vector<double> inv_log_a_;  // U only
};

YoungDiagram diagram_from_differences(const std::vector<int>& differences);
YoungDiagram sample_grandcanonical(const GrandcanonicalParams& params, Statistics s, Rng& rng);

struct CurvePoint {
  double psi;
  double rho;
};

CurvePoint vershik_curve(Statistics s, double u);
double static_covariance(Statistics s, double u, double v);

// exact finite-N counterparts under the truncated product measure
double finite_n_mean_height(const GrandcanonicalParams& params, Statistics s, double u);
double finite_n_covariance(const GrandcanonicalParams& params, Statistics s, double u, double v);

}  // namespace ydl
