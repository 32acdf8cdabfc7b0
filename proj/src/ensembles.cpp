#include "ydl/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ydl {

long long YoungDiagram::area() const {
  long long n = 0;
  for (int c : columns) n += c;
  return n;
}

bool YoungDiagram::valid(Statistics s) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] <= 0) return false;
    if (i > 0) {
      if (columns[i] > columns[i - 1]) return false;
      if (s == Statistics::RU && columns[i] == columns[i - 1]) return false;
    }
  }
  return true;
}

void YoungDiagram::validate(Statistics s) const {
  if (!valid(s)) {
    std::string msg = "invalid ";
    msg += s == Statistics::U ? "partition" : "strict partition";
    msg += " of length " + std::to_string(columns.size());
    throw InvariantError(msg);
  }
}

namespace {

void check_epsilon(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("epsilon must lie in (0,1), got " + std::to_string(eps));
}

// sum_{x > X} x eps^x
double weighted_geometric_tail(double eps, double X) {
  double one_minus = -std::expm1(std::log(eps));
  return std::exp((X + 1.0) * std::log(eps)) * ((X + 1.0) - X * eps) / (one_minus * one_minus);
}

}  // namespace

double log_partition_sum(double epsilon, Statistics s) {
  check_epsilon(epsilon);
  const double le = std::log(epsilon);
  const double one_minus = -std::expm1(le);
  double acc = 0.0;
  for (long k = 1;; ++k) {
    double a = std::exp(static_cast<double>(k) * le);
    acc += s == Statistics::U ? -std::log1p(-a) : std::log1p(a);
    // remaining terms are bounded by sum_{j>k} eps^j / (1 - eps^j)
    double tail = a * epsilon / (one_minus * (1.0 - a * epsilon));
    if (tail < 1e-14 * std::max(1.0, acc) || a == 0.0) break;
  }
  return acc;
}

double partition_sum(double epsilon, Statistics s) { return std::exp(log_partition_sum(epsilon, s)); }

double site_mean(double a, Statistics s) { return s == Statistics::U ? a / (1.0 - a) : a / (1.0 + a); }

double site_variance(double a, Statistics s) {
  if (s == Statistics::U) {
    double d = 1.0 - a;
    return a / (d * d);
  }
  double d = 1.0 + a;
  return a / (d * d);
}

double mean_size(double epsilon, Statistics s) {
  if (epsilon >= 1.0) throw DomainError("mean size diverges for epsilon >= 1");
  check_epsilon(epsilon);
  const double le = std::log(epsilon);
  double acc = 0.0;
  for (long x = 1;; ++x) {
    double a = std::exp(static_cast<double>(x) * le);
    acc += static_cast<double>(x) * site_mean(a, s);
    double bound = weighted_geometric_tail(epsilon, static_cast<double>(x));
    if (s == Statistics::U) bound /= (1.0 - a * epsilon);
    if (bound < 1e-12) break;
  }
  return acc;
}

double calibrate_epsilon(Statistics s, int N, double tol) {
  if (N < 1) throw ConfigError("N must be >= 1");
  const double target = static_cast<double>(N) * N;
  if (tol <= 0.0) tol = 1e-6 * target;
  // bisection in s = -log eps; mean size decreases in s
  auto mean_at = [&](double sl) { return mean_size(std::exp(-sl), s); };
  double lo = 0.5 * shape_constant(s) / N;
  double hi = 2.0 * shape_constant(s) / N;
  while (mean_at(lo) < target) lo *= 0.5;
  while (mean_at(hi) > target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double m = mean_at(mid);
    if (std::abs(m - target) <= tol) return std::exp(-mid);
    if (m > target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-16 * hi) break;
  }
  double eps = std::exp(-0.5 * (lo + hi));
  if (std::abs(mean_size(eps, s) - target) > tol)
    throw InvariantError("calibration did not reach tolerance " + std::to_string(tol));
  return eps;
}

double tail_mass_bound(double epsilon, Statistics s, int x_max) {
  check_epsilon(epsilon);
  double bound = weighted_geometric_tail(epsilon, x_max);
  if (s == Statistics::U) bound /= (1.0 - std::pow(epsilon, x_max + 1.0));
  return bound;
}

int choose_truncation(double epsilon, Statistics s, int N) {
  double target = 1e-9 * static_cast<double>(N) * N;
  int x = static_cast<int>(std::ceil(12.0 * N / shape_constant(s)));
  x = std::max(x, 8);
  while (tail_mass_bound(epsilon, s, x) >= target) x = static_cast<int>(std::ceil(x * 1.25));
  return x;
}

GrandcanonicalParams make_params_for_epsilon(Statistics s, double epsilon, int N) {
  check_epsilon(epsilon);
  GrandcanonicalParams p;
  p.epsilon = epsilon;
  p.scale_N = N;
  p.shape = shape_constant(s);
  p.truncation_x_max = choose_truncation(epsilon, s, N);
  return p;
}

GrandcanonicalParams make_params(Statistics s, int N, double tol) {
  return make_params_for_epsilon(s, calibrate_epsilon(s, N, tol), N);
}

GrandcanonicalSampler::GrandcanonicalSampler(const GrandcanonicalParams& params, Statistics s)
    : params_(params), stats_(s) {
  check_epsilon(params.epsilon);
  const int X = params.truncation_x_max;
  const double le = std::log(params.epsilon);
  threshold_.resize(X);
  if (s == Statistics::U) inv_log_a_.resize(X);
  for (int x = 1; x <= X; ++x) {
    double la = x * le;
    double a = std::exp(la);
    if (s == Statistics::U) {
      threshold_[x - 1] = -std::expm1(la);
      inv_log_a_[x - 1] = 1.0 / la;
    } else {
      threshold_[x - 1] = a / (1.0 + a);
    }
  }
}

void GrandcanonicalSampler::sample_differences(Rng& rng, std::vector<int>& out) const {
  const std::size_t X = threshold_.size();
  out.assign(X, 0);
  if (stats_ == Statistics::U) {
    // geometric with P(k) = a^k (1-a) by inversion; most sites are 0
    for (std::size_t i = 0; i < X; ++i) {
      double u = uniform01(rng);
      if (u < threshold_[i]) continue;
      out[i] = static_cast<int>(std::floor(std::log1p(-u) * inv_log_a_[i]));
    }
  } else {
    for (std::size_t i = 0; i < X; ++i) out[i] = uniform01(rng) < threshold_[i] ? 1 : 0;
  }
}

YoungDiagram GrandcanonicalSampler::sample(Rng& rng) const {
  std::vector<int> d;
  sample_differences(rng, d);
  return diagram_from_differences(d);
}

YoungDiagram diagram_from_differences(const std::vector<int>& differences) {
  YoungDiagram p;
  for (std::size_t x = differences.size(); x >= 1; --x) {
    for (int k = 0; k < differences[x - 1]; ++k) p.columns.push_back(static_cast<int>(x));
  }
  return p;
}

YoungDiagram sample_grandcanonical(const GrandcanonicalParams& params, Statistics s, Rng& rng) {
  return GrandcanonicalSampler(params, s).sample(rng);
}

CurvePoint vershik_curve(Statistics s, double u) {
  if (s == Statistics::U) {
    if (!(u > 0.0)) throw DomainError("U curve is singular at u <= 0");
    double em = -std::expm1(-kAlpha * u);  // 1 - e^{-alpha u}
    return {-std::log(em) / kAlpha, 1.0 / std::expm1(kAlpha * u)};
  }
  if (!(u >= 0.0)) throw DomainError("RU curve is defined for u >= 0");
  double e = std::exp(-kBeta * u);
  return {std::log1p(e) / kBeta, e / (1.0 + e)};
}

double static_covariance(Statistics s, double u, double v) {
  double w = std::max(u, v);
  return vershik_curve(s, w).rho / shape_constant(s);
}

double finite_n_mean_height(const GrandcanonicalParams& params, Statistics s, double u) {
  const double N = params.scale_N;
  const double le = std::log(params.epsilon);
  long first = static_cast<long>(std::floor(N * u)) + 1;
  double acc = 0.0;
  for (long x = std::max(1L, first); x <= params.truncation_x_max; ++x) acc += site_mean(std::exp(x * le), s);
  return acc / N;
}

double finite_n_covariance(const GrandcanonicalParams& params, Statistics s, double u, double v) {
  const double N = params.scale_N;
  const double le = std::log(params.epsilon);
  long first = static_cast<long>(std::floor(N * std::max(u, v))) + 1;
  double acc = 0.0;
  for (long x = std::max(1L, first); x <= params.truncation_x_max; ++x) acc += site_variance(std::exp(x * le), s);
  return acc / N;
}

}  // namespace ydl
