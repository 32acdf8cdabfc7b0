#include "ydl/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ydl {

UniformGrid UniformGrid::span(double a, double b, double step, Coordinate c) {
  if (!(step > 0.0)) throw ConfigError("grid step must be positive");
  if (!(b > a)) throw ConfigError("grid end must exceed its start");
  UniformGrid g;
  g.coordinate = c;
  g.step = step;
  if (c == Coordinate::logarithmic) {
    if (!(a > 0.0)) throw ConfigError("logarithmic grid needs a positive start");
    g.start = std::log(a);
    g.count = static_cast<std::size_t>(std::llround((std::log(b) - g.start) / step)) + 1;
  } else {
    g.start = a;
    g.count = static_cast<std::size_t>(std::llround((b - a) / step)) + 1;
  }
  if (g.count < 2) throw ConfigError("grid needs at least two nodes");
  return g;
}

double UniformGrid::at(std::size_t i) const {
  double c = coord(i);
  return coordinate == Coordinate::logarithmic ? std::exp(c) : c;
}

double Profile::interpolate(double x) const {
  double c = x;
  if (grid.coordinate == Coordinate::logarithmic) {
    if (!(x > 0.0)) throw DomainError("logarithmic profile evaluated at u <= 0");
    c = std::log(x);
  }
  double t = (c - grid.start) / grid.step;
  const double last = static_cast<double>(values.size() - 1);
  if (t < -1e-9 || t > last + 1e-9) throw DomainError("profile evaluated outside its grid at " + std::to_string(x));
  t = std::clamp(t, 0.0, last);
  auto i = static_cast<std::size_t>(t);
  if (i >= values.size() - 1) return values.back();
  double f = t - static_cast<double>(i);
  return values[i] * (1.0 - f) + values[i + 1] * f;
}

void Profile::validate() const {
  if (values.size() < 2) throw ConfigError("profile needs at least two values");
  if (values.size() != grid.count) throw ConfigError("profile length does not match its grid");
  if (!(grid.step > 0.0)) throw ConfigError("profile grid step must be positive");
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError("profile contains a non-finite value");
}

bool Profile::non_increasing(double tol) const {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[i - 1] + tol) return false;
  return true;
}

Profile make_profile(const UniformGrid& grid, const std::function<double(double)>& f, DomainKind domain) {
  Profile p;
  p.grid = grid;
  p.domain = domain;
  p.values.resize(grid.count);
  for (std::size_t i = 0; i < grid.count; ++i) p.values[i] = f(grid.at(i));
  return p;
}

double sup_distance(const Profile& a, const Profile& b, double lo, double hi) {
  if (!(a.grid == b.grid)) throw ConfigError("profiles live on different grids");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double u = a.u(i);
    if (u < lo || u > hi) continue;
    d = std::max(d, std::abs(a.values[i] - b.values[i]));
  }
  return d;
}

double height_function(const YoungDiagram& p, double u) {
  auto it = std::partition_point(p.columns.begin(), p.columns.end(), [u](int c) { return c > u; });
  return static_cast<double>(it - p.columns.begin());
}

Profile scaled_height(const YoungDiagram& p, int N, const UniformGrid& grid) {
  const double n = N;
  return make_profile(grid, [&](double u) { return height_function(p, n * u) / n; });
}

ZetaCounts zeta_counts(const OccupancyWindow& etabar, long x) {
  if (etabar.kind != OccupancyKind::wasep_etabar) throw ConfigError("zeta counts need a rotated occupancy window");
  if (etabar.values.empty() || etabar.values.front() != 1 || etabar.values.back() != 0)
    throw TruncationError("window does not reach the far-field pattern");
  ZetaCounts z{0, 0};
  for (std::size_t k = 0; k < etabar.values.size(); ++k) {
    long site = etabar.origin + static_cast<long>(k);
    if (site <= x && etabar.values[k] == 0) ++z.zminus;
    if (site >= x + 1 && etabar.values[k] == 1) ++z.zplus;
  }
  if (x > etabar.last()) z.zminus += x - etabar.last();
  if (x + 1 < etabar.first()) z.zplus += etabar.first() - x - 1;
  return z;
}

double lattice_height_exact(const YoungDiagram& p, double x) {
  const int K = p.length();
  if (x <= -K) return -x;
  if (x >= p.column(1)) return x;
  // staircase vertices (u - y, u + y), left to right
  double px = -K, ph = K;
  for (int j = K; j >= 1; --j) {
    const double u = p.columns[j - 1];
    const double seg[2][2] = {{u - j, u + j}, {u - j + 1, u + j - 1}};
    for (const auto& q : seg) {
      if (x <= q[0]) {
        if (q[0] == px) return q[1];
        return ph + (q[1] - ph) * (x - px) / (q[0] - px);
      }
      px = q[0];
      ph = q[1];
    }
  }
  return x;
}

long lattice_height(const YoungDiagram& p, long x) {
  return std::lround(lattice_height_exact(p, static_cast<double>(x)));
}

namespace {

// #{i >= 1 : p_i - i >= x}
double rotated_count(const YoungDiagram& p, double x) {
  const int K = p.length();
  long n = 0;
  for (int i = 1; i <= K; ++i) {
    if (p.columns[i - 1] - i >= x)
      ++n;
    else
      break;
  }
  double fl = std::floor(-x);
  if (fl > K) n += static_cast<long>(fl) - K;
  return static_cast<double>(n);
}

}  // namespace

double lattice_height_approx(const YoungDiagram& p, double x) { return 2.0 * rotated_count(p, x) + x; }

long lattice_height_approx(const YoungDiagram& p, long x) {
  return 2 * static_cast<long>(rotated_count(p, static_cast<double>(x))) + x;
}

RotatedCurves::RotatedCurves(const YoungDiagram& p, long lo, long hi) : diagram_(&p), lo_(lo), hi_(hi) {
  if (hi < lo) throw ConfigError("empty tabulation range");
  const std::size_t n = static_cast<std::size_t>(hi - lo + 1);
  exact_.resize(n);
  count_.resize(n);
  for (std::size_t k = 0; k < n; ++k) exact_[k] = lattice_height_exact(p, static_cast<double>(lo + static_cast<long>(k)));
  // counts from the right: rotated sites p_i - i decrease in i
  const int K = p.length();
  int i = 1;
  for (std::size_t k = n; k-- > 0;) {
    const long x = lo + static_cast<long>(k);
    while (i <= K && p.columns[i - 1] - i >= x) ++i;
    long c = i - 1;
    if (-x > K) c += -x - K;
    count_[k] = c;
  }
}

double RotatedCurves::exact(double x) const {
  if (x < lo_ || x >= hi_) return lattice_height_exact(*diagram_, x);
  const double f = std::floor(x);
  const std::size_t k = static_cast<std::size_t>(static_cast<long>(f) - lo_);
  const double w = x - f;
  return w == 0.0 ? exact_[k] : exact_[k] + w * (exact_[k + 1] - exact_[k]);
}

double RotatedCurves::approx(double x) const {
  const double c = std::ceil(x);
  if (c < lo_ || c > hi_) return lattice_height_approx(*diagram_, x);
  return 2.0 * static_cast<double>(count_[static_cast<std::size_t>(static_cast<long>(c) - lo_)]) + x;
}

double rotated_height(const YoungDiagram& p, double v) {
  return lattice_height_exact(p, std::numbers::sqrt2 * v) / std::numbers::sqrt2;
}

double rotated_height_approx(const YoungDiagram& p, double v) {
  return lattice_height_approx(p, std::numbers::sqrt2 * v) / std::numbers::sqrt2;
}

double rotated_height_scaled(const YoungDiagram& p, int N, double v) { return rotated_height(p, N * v) / N; }

double rotated_height_scaled_approx(const YoungDiagram& p, int N, double v) {
  return rotated_height_approx(p, N * v) / N;
}

namespace {

void check_exclusion(const OccupancyWindow& eta) {
  if (eta.kind != OccupancyKind::exclusion_eta) throw ConfigError("Hopf-Cole transform needs an exclusion window");
  if (eta.origin > 1) throw TruncationError("window starts after site 1");
  for (int v : eta.values)
    if (v != 0 && v != 1) throw InvariantError("exclusion window holds a value outside {0,1}");
}

// suffix[k] = number of particles at sites >= k, k = 0..last+1
std::vector<long> suffix_counts(const OccupancyWindow& eta) {
  long last = std::max(eta.last(), 0L);
  std::vector<long> s(static_cast<std::size_t>(last) + 2, 0);
  for (long x = last; x >= 0; --x) s[x] = s[x + 1] + (x >= 1 ? eta.at(x) : 0);
  return s;
}

}  // namespace

std::vector<double> hopf_cole_lattice(const OccupancyWindow& eta, double epsilon, long x_max) {
  check_exclusion(eta);
  auto s = suffix_counts(eta);
  const double le = std::log(epsilon);
  std::vector<double> z(static_cast<std::size_t>(x_max));
  for (long x = 1; x <= x_max; ++x) {
    long cnt = x < static_cast<long>(s.size()) ? s[x] : 0;
    z[x - 1] = std::exp(-le * static_cast<double>(cnt));
  }
  return z;
}

Profile hopf_cole_field(const OccupancyWindow& eta, double epsilon, int N, const UniformGrid& grid) {
  check_exclusion(eta);
  if (grid.coordinate != Coordinate::linear || grid.start < 0.0) throw DomainError("Hopf-Cole field lives on u >= 0");
  auto s = suffix_counts(eta);
  const double le = std::log(epsilon);
  auto tail = [&](long x) { return x < static_cast<long>(s.size()) ? s[std::max(x, 0L)] : 0L; };
  return make_profile(grid, [&](double u) {
    double nu = N * u;
    auto n = static_cast<long>(std::floor(nu));
    double count = static_cast<double>(tail(n + 1));
    if (u >= 1.0 / N) count += (static_cast<double>(n) + 1.0 - nu) * eta.at(n);
    return std::exp(-le * count);
  });
}

double hopf_cole_height(double field_value, double epsilon, int N) {
  return std::log(field_value) / (-static_cast<double>(N) * std::log(epsilon));
}

LatticeField symmetrize_hopf_cole(const std::vector<double>& zeta, double epsilon) {
  const long X = static_cast<long>(zeta.size());
  if (X < 2) throw ConfigError("need zeta on at least two sites");
  const double le = std::log(epsilon);
  LatticeField f;
  f.origin = 2 - X;
  f.values.resize(static_cast<std::size_t>(2 * X - 1));
  for (long x = f.origin; x <= X; ++x) {
    long y = x >= 1 ? x : 2 - x;
    f.values[static_cast<std::size_t>(x - f.origin)] = std::exp(-le * y / 2.0) * zeta[y - 1];
  }
  return f;
}

LineChart::LineChart(const Profile& rho, std::optional<double> left_mass) {
  if (rho.grid.coordinate != Coordinate::linear) throw ConfigError("line chart needs a linear grid");
  const std::size_t n = rho.size();
  const double h = rho.grid.step;
  v_.resize(n);
  z_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    v_[i] = rho.u(i);
    if (!(rho.values[i] < 1.0)) throw DomainError("density reaches 1; the line chart is not invertible");
  }
  double tail = 0.0;
  if (left_mass) {
    tail = *left_mass;
  } else {
    double f0 = 1.0 - rho.values[0], f1 = 1.0 - rho.values[1];
    if (f1 > f0 && f0 > 0.0) tail = f0 * h / std::log(f1 / f0);
  }
  z_[0] = tail;
  for (std::size_t i = 1; i < n; ++i) z_[i] = z_[i - 1] + 0.5 * h * ((1.0 - rho.values[i - 1]) + (1.0 - rho.values[i]));
}

double LineChart::forward(double v) const {
  if (v < v_.front() - 1e-12 || v > v_.back() + 1e-12) throw DomainError("line chart evaluated outside its grid");
  auto it = std::upper_bound(v_.begin(), v_.end(), v);
  std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - v_.begin()), 1, v_.size() - 1);
  double f = (v - v_[k - 1]) / (v_[k] - v_[k - 1]);
  return z_[k - 1] + f * (z_[k] - z_[k - 1]);
}

double LineChart::inverse(double u) const {
  if (u < z_.front() - 1e-12 || u > z_.back() + 1e-12) throw DomainError("line chart inverse outside its range");
  auto it = std::upper_bound(z_.begin(), z_.end(), u);
  std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - z_.begin()), 1, z_.size() - 1);
  double f = (u - z_[k - 1]) / (z_[k] - z_[k - 1]);
  return v_[k - 1] + f * (v_[k] - v_[k - 1]);
}

namespace {

// d psi / du at every node, second order
std::vector<double> node_derivative(const Profile& p) {
  const std::size_t n = p.size();
  const double h = p.grid.step;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0)
      d[i] = (-3.0 * p.values[0] + 4.0 * p.values[1] - p.values[2]) / (2.0 * h);
    else if (i == n - 1)
      d[i] = (3.0 * p.values[n - 1] - 4.0 * p.values[n - 2] + p.values[n - 3]) / (2.0 * h);
    else
      d[i] = (p.values[i + 1] - p.values[i - 1]) / (2.0 * h);
    if (p.grid.coordinate == Coordinate::logarithmic) d[i] /= p.u(i);
  }
  return d;
}

}  // namespace

std::pair<double, double> phi_u_range(const Profile& psi) {
  return {psi.u(0) - psi.values.front(), psi.u(psi.size() - 1) - psi.values.back()};
}

Profile phi_u(const Profile& psi, const UniformGrid& v_grid) {
  psi.validate();
  if (psi.size() < 3) throw ConfigError("phi_u needs at least three nodes");
  auto dpsi = node_derivative(psi);
  const std::size_t n = psi.size();
  std::vector<double> G(n), rho(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(dpsi[i] < 0.0)) throw DomainError("height profile is not strictly decreasing");
    G[i] = psi.u(i) - psi.values[i];
    if (i > 0 && !(G[i] > G[i - 1])) throw DomainError("u - psi(u) is not increasing");
    rho[i] = -dpsi[i] / (1.0 - dpsi[i]);
  }
  return make_profile(
      v_grid,
      [&](double v) {
        if (v < G.front() - 1e-12 || v > G.back() + 1e-12) throw DomainError("requested v outside the image of u - psi");
        auto it = std::upper_bound(G.begin(), G.end(), v);
        std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - G.begin()), 1, n - 1);
        double f = (v - G[k - 1]) / (G[k] - G[k - 1]);
        return rho[k - 1] + f * (rho[k] - rho[k - 1]);
      },
      DomainKind::whole_line);
}

Profile phi_u_inverse(const Profile& rho, const UniformGrid& u_grid, std::optional<double> left_mass) {
  rho.validate();
  for (double r : rho.values)
    if (!(r > 0.0 && r < 1.0)) throw DomainError("density must lie in (0,1)");
  if (!rho.non_increasing()) throw DomainError("density must be non-increasing");
  LineChart chart(rho, left_mass);
  const std::size_t n = rho.size();
  const double h = rho.grid.step;
  // upper[i] = int_{v_i}^inf rho
  std::vector<double> upper(n);
  double tail = 0.0;
  double r1 = rho.values[n - 1], r2 = rho.values[n - 2];
  if (r2 > r1 && r1 > 0.0) tail = r1 * h / std::log(r2 / r1);
  upper[n - 1] = tail;
  for (std::size_t i = n - 1; i-- > 0;) upper[i] = upper[i + 1] + 0.5 * h * (rho.values[i] + rho.values[i + 1]);
  Profile out = make_profile(u_grid, [&](double u) {
    double v = chart.inverse(u);
    double t = (v - rho.grid.start) / h;
    auto k = std::min(static_cast<std::size_t>(std::max(t, 0.0)), n - 2);
    double f = t - static_cast<double>(k);
    return upper[k] * (1.0 - f) + upper[k + 1] * f;
  });
  out.domain = DomainKind::half_line_open;
  return out;
}

double norm_weight(const WeightedNorm& w, double u) {
  switch (w.kind) {
    case NormKind::L2_r_line:
      return std::exp(-2.0 * w.r * std::abs(u));
    case NormKind::L2_r_halfline:
      return std::exp(-2.0 * w.r * u);
    case NormKind::L2_tilde_r: {
      if (!(w.r > 0.0)) throw DomainError("weighted space needs r > 0");
      if (!(u > 0.0)) throw DomainError("weight is defined for u > 0");
      double near = (1.0 + 2.0 * w.r / kAlpha) * std::log(u);
      double far = -2.0 * w.r * u;
      if (u <= 1.0) return std::exp(near);
      if (u >= 2.0) return std::exp(far);
      double t = u - 1.0;
      double s = t * t * (3.0 - 2.0 * t);
      return std::exp((1.0 - s) * near + s * far);
    }
  }
  return 0.0;
}

NormResult weighted_norm(const Profile& f, const WeightedNorm& w) {
  f.validate();
  const std::size_t n = f.size();
  const bool logc = f.grid.coordinate == Coordinate::logarithmic;
  auto integrand = [&](std::size_t i) {
    double u = f.u(i);
    double val = f.values[i] * f.values[i] * norm_weight(w, u);
    return logc ? val * u : val;
  };
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) acc += 0.5 * f.grid.step * (integrand(i) + integrand(i + 1));

  const double u0 = f.u(0), u1 = f.u(n - 1);
  const double i0 = f.values[0] * f.values[0] * norm_weight(w, u0);
  const double i1 = f.values[n - 1] * f.values[n - 1] * norm_weight(w, u1);
  double tail = 0.0;
  switch (w.kind) {
    case NormKind::L2_r_line:
      tail = (i0 + i1) / (2.0 * w.r);
      break;
    case NormKind::L2_r_halfline:
      tail = i1 / (2.0 * w.r) + i0 * std::max(u0, 0.0);
      break;
    case NormKind::L2_tilde_r:
      tail = i1 / (2.0 * w.r) + i0 * u0 / (2.0 + 2.0 * w.r / kAlpha);
      break;
  }
  NormResult r;
  r.value = std::sqrt(acc);
  r.tail_estimate = tail;
  r.coverage_ok = tail <= 1e-8 * acc || (acc == 0.0 && tail == 0.0);
  return r;
}

}  // namespace ydl
