#include "ydl/spde.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "tridiagonal.hpp"

namespace ydl {

double neumann_heat_kernel(double t, double u, double v) {
  if (!(t > 0.0)) throw DomainError("heat kernel needs t > 0");
  double a = u - v, b = u + v;
  return (std::exp(-a * a / (4.0 * t)) + std::exp(-b * b / (4.0 * t))) / std::sqrt(4.0 * std::numbers::pi * t);
}

namespace {

// counter-seeded stream for one noise step
struct StepStream {
  using result_type = std::uint64_t;
  std::uint64_t state;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

}  // namespace

NoiseField::NoiseField(const UniformGrid& grid, double dt, NoiseSymmetry symmetry, std::uint64_t seed)
    : grid_(grid), dt_(dt), symmetry_(symmetry), seed_(seed) {
  if (grid.coordinate != Coordinate::linear) throw ConfigError("noise needs a linear grid");
  if (!(dt > 0.0)) throw ConfigError("noise time step must be positive");
  independent_ = grid.count;
  if (symmetry == NoiseSymmetry::even_reflected) {
    if (grid.count % 2 == 0) throw ConfigError("reflected noise needs an odd number of nodes");
    centre_ = (grid.count - 1) / 2;
    if (std::abs(grid.coord(centre_)) > 1e-9 * grid.step) throw ConfigError("reflected noise needs a grid symmetric about 0");
    independent_ = centre_ + 1;
  }
}

void NoiseField::draws(std::size_t step, std::vector<double>& z) const {
  StepStream s{derive_seed(seed_, step)};
  std::normal_distribution<double> nd;
  z.resize(independent_);
  for (auto& x : z) x = nd(s);
}

double NoiseField::cell_width(std::size_t i) const {
  if (i == 0 || i + 1 == grid_.count) return 0.5 * grid_.step;
  return grid_.step;
}

void NoiseField::cell_increments(std::size_t step, std::vector<double>& out) const {
  std::vector<double> z;
  draws(step, z);
  out.resize(grid_.count);
  const double h = grid_.step;
  if (symmetry_ == NoiseSymmetry::plain) {
    for (std::size_t i = 0; i < grid_.count; ++i) out[i] = z[i] * std::sqrt(dt_ * cell_width(i));
    return;
  }
  for (std::size_t i = 0; i < grid_.count; ++i) {
    std::size_t j = i >= centre_ ? i - centre_ : centre_ - i;
    double half_cell = (j == 0 || j == centre_) ? 0.5 * h : h;
    out[i] = (j == 0 ? 2.0 : 1.0) * z[j] * std::sqrt(dt_ * half_cell);
  }
}

void NoiseField::increments(std::size_t step, std::vector<double>& out) const {
  std::vector<double> z;
  draws(step, z);
  out.resize(grid_.count);
  const double scale = 1.0 / std::sqrt(dt_ * grid_.step);
  for (std::size_t i = 0; i < grid_.count; ++i) {
    std::size_t j = i;
    if (symmetry_ == NoiseSymmetry::even_reflected) j = i >= centre_ ? i - centre_ : centre_ - i;
    out[i] = z[j] * scale;
  }
}

SpdeCoefficients coefficients_from_drift_diffusion(const UniformGrid& grid, const std::vector<double>& a,
                                                   const std::vector<double>& b, const std::vector<double>& c,
                                                   const std::vector<double>& sigma, BoundarySpec left,
                                                   BoundarySpec right) {
  const std::size_t n = grid.count;
  if (a.size() != n || b.size() != n || c.size() != n || sigma.size() != n)
    throw ConfigError("coefficient arrays do not match the grid");
  const double h = grid.step;
  std::vector<double> logs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(a[i] > 0.0) || !std::isfinite(a[i])) throw DomainError("diffusion coefficient must be positive and finite");
    if (!(sigma[i] >= 0.0) || !std::isfinite(sigma[i])) throw DomainError("noise amplitude must be >= 0 and finite");
    if (i > 0) logs[i] = logs[i - 1] + 0.5 * h * (b[i - 1] / a[i - 1] + b[i] / a[i]);
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  SpdeCoefficients co;
  co.conductance.resize(n - 1);
  co.mass.resize(n);
  for (std::size_t i = 0; i < n; ++i) co.mass[i] = std::exp(logs[i] - top) / a[i];
  for (std::size_t i = 0; i + 1 < n; ++i) co.conductance[i] = std::exp(0.5 * (logs[i] + logs[i + 1]) - top);
  co.potential = c;
  co.sigma = sigma;
  co.left = left;
  co.right = right;
  return co;
}

namespace {

bool is_dirichlet(const BoundarySpec& b) { return b.kind == BoundaryKind::dirichlet_farfield; }

struct Rows {
  std::vector<double> lo, di, up, width;
  std::vector<char> fixed;
};

void build_rows(const SpdeCoefficients& co, const UniformGrid& grid, Rows& r) {
  const std::size_t n = grid.count;
  if (co.conductance.size() + 1 != n || co.mass.size() != n || co.potential.size() != n || co.sigma.size() != n)
    throw ConfigError("SPDE coefficients do not match the grid");
  const double h = grid.step;
  r.lo.assign(n, 0.0);
  r.di.assign(n, 0.0);
  r.up.assign(n, 0.0);
  r.width.assign(n, h);
  r.fixed.assign(n, 0);
  r.fixed[0] = is_dirichlet(co.left);
  r.fixed[n - 1] = is_dirichlet(co.right);
  r.width[0] = 0.5 * h;
  r.width[n - 1] = 0.5 * h;
  for (std::size_t i = 0; i < n; ++i) {
    if (r.fixed[i]) continue;
    double denom = co.mass[i] * r.width[i] * h;
    double kl = i > 0 ? co.conductance[i - 1] : 0.0;
    double kr = i + 1 < n ? co.conductance[i] : 0.0;
    r.lo[i] = kl / denom;
    r.up[i] = kr / denom;
    r.di[i] = -(r.lo[i] + r.up[i]) + co.potential[i];
  }
}

struct SpdeStepper {
  std::size_t steps;
  double dt;
  std::size_t every;
};

SpdeStepper spde_stepper(const PdeGrid& g) {
  if (!(g.dt > 0.0) || !(g.t_end > 0.0)) throw ConfigError("SPDE needs dt > 0 and t_end > 0");
  SpdeStepper s;
  s.steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(g.t_end / g.dt - 1e-9)));
  s.dt = g.t_end / static_cast<double>(s.steps);
  s.every = g.output_every > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(g.output_every / s.dt)))
                                 : s.steps;
  return s;
}

}  // namespace

void run_linear_spde(const std::vector<double>& psi0, const CoefficientSchedule& schedule, const PdeGrid& grid,
                     const NoiseField* noise, const SpdeObserver& observer) {
  const std::size_t n = grid.space.count;
  if (psi0.size() != n) throw ConfigError("initial field does not match the SPDE grid");
  if (grid.space.coordinate != Coordinate::linear) throw ConfigError("SPDE solvers need a linear grid");
  SpdeStepper st = spde_stepper(grid);
  if (noise) {
    if (!(noise->grid() == grid.space)) throw ConfigError("noise grid differs from the SPDE grid");
    if (std::abs(noise->dt() - st.dt) > 1e-12 * st.dt) throw ConfigError("noise time step differs from the SPDE step");
  }
  SpdeCoefficients co;
  Rows r;
  std::vector<double> psi = psi0, rhs(n), L(n), D(n), U(n), inc, scratch;
  const double half = 0.5 * st.dt;
  observer(0.0, psi);
  for (std::size_t k = 1; k <= st.steps; ++k) {
    schedule((static_cast<double>(k) - 0.5) * st.dt, co);
    build_rows(co, grid.space, r);
    if (noise) noise->cell_increments(k - 1, inc);
    for (std::size_t i = 0; i < n; ++i) {
      if (r.fixed[i]) {
        rhs[i] = 0.0;
        L[i] = U[i] = 0.0;
        D[i] = 1.0;
        continue;
      }
      double Ap = r.di[i] * psi[i] + (i > 0 ? r.lo[i] * psi[i - 1] : 0.0) + (i + 1 < n ? r.up[i] * psi[i + 1] : 0.0);
      rhs[i] = psi[i] + half * Ap;
      if (noise) rhs[i] += co.sigma[i] * inc[i] / r.width[i];
      L[i] = -half * r.lo[i];
      D[i] = 1.0 - half * r.di[i];
      U[i] = -half * r.up[i];
    }
    detail::solve_tridiagonal(L, D, U, rhs, scratch);
    psi.swap(rhs);
    if (k % st.every == 0 || k == st.steps) observer(st.dt * static_cast<double>(k), psi);
  }
}

namespace {

// density values at the grid nodes at time t
void density_on(const ProfileSeries& series, double t, const UniformGrid& grid, std::vector<double>& out) {
  out.resize(grid.count);
  if (series.frames.size() == 1 || t <= series.times.front()) {
    const Profile& p = series.frames.front();
    for (std::size_t i = 0; i < grid.count; ++i) out[i] = p.grid == grid ? p.values[i] : p.interpolate(grid.at(i));
    return;
  }
  Profile p = series.at(t);
  for (std::size_t i = 0; i < grid.count; ++i) out[i] = p.grid == grid ? p.values[i] : p.interpolate(grid.at(i));
}

}  // namespace

CoefficientSchedule ru_schedule(const ProfileSeries& rho_r, double beta, const UniformGrid& grid) {
  return [&rho_r, beta, grid](double t, SpdeCoefficients& co) {
    std::vector<double> rho;
    density_on(rho_r, t, grid, rho);
    const std::size_t n = grid.count;
    std::vector<double> a(n, 1.0), b(n), c(n, 0.0), s(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (rho[i] < 0.0 || rho[i] > 1.0) throw DomainError("RU density outside [0,1]");
      b[i] = beta * (1.0 - 2.0 * rho[i]);
      s[i] = std::sqrt(2.0 * rho[i] * (1.0 - rho[i]));
    }
    co = coefficients_from_drift_diffusion(grid, a, b, c, s, {BoundaryKind::neumann_zero, 0.0},
                                           {BoundaryKind::dirichlet_farfield, 0.0});
  };
}

CoefficientSchedule u_schedule(const ProfileSeries& rho_u, double alpha, const UniformGrid& grid) {
  return [&rho_u, alpha, grid](double t, SpdeCoefficients& co) {
    std::vector<double> rho;
    density_on(rho_u, t, grid, rho);
    const std::size_t n = grid.count;
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(rho[i] > 0.0)) throw DomainError("rho_U must be positive on the SPDE grid");
      m[i] = rho[i] / (1.0 + rho[i]);
    }
    const double top = alpha * grid.back();
    co.conductance.resize(n - 1);
    co.mass.resize(n);
    co.potential.assign(n, 0.0);
    co.sigma.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      co.mass[i] = std::exp(alpha * grid.at(i) - top);
      co.sigma[i] = std::sqrt(2.0 * m[i]);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      // m is close to exponential in u, so the geometric mean is the natural midpoint value
      double mh = std::sqrt(m[i] * m[i + 1]);
      double uh = grid.at(i) + 0.5 * grid.step;
      co.conductance[i] = std::exp(alpha * uh - top) * (1.0 - mh) * (1.0 - mh);
    }
    co.left = {BoundaryKind::neumann_zero, 0.0};
    co.right = {BoundaryKind::dirichlet_farfield, 0.0};
  };
}

CoefficientSchedule line_schedule(const ProfileSeries& rho, double alpha, const UniformGrid& grid) {
  return [&rho, alpha, grid](double t, SpdeCoefficients& co) {
    std::vector<double> r;
    density_on(rho, t, grid, r);
    const std::size_t n = grid.count;
    std::vector<double> a(n, 1.0), b(n), c(n, 0.0), s(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (r[i] < 0.0 || r[i] > 1.0) throw DomainError("line density outside [0,1]");
      b[i] = alpha * (1.0 - 2.0 * r[i]);
      s[i] = std::sqrt(2.0 * r[i] * (1.0 - r[i]));
    }
    co = coefficients_from_drift_diffusion(grid, a, b, c, s, {BoundaryKind::dirichlet_farfield, 0.0},
                                           {BoundaryKind::dirichlet_farfield, 0.0});
  };
}

CoefficientSchedule phi_bar_schedule(const ProfileSeries& omega, const ProfileSeries& rho_r, double beta,
                                     const UniformGrid& grid) {
  if (grid.count % 2 == 0 || std::abs(grid.coord((grid.count - 1) / 2)) > 1e-9 * grid.step)
    throw ConfigError("symmetrised equation needs a grid symmetric about 0");
  return [&omega, &rho_r, beta, grid](double t, SpdeCoefficients& co) {
    const std::size_t n = grid.count;
    const Profile w = omega.at(t);
    const Profile r = rho_r.at(t);
    co.conductance.assign(n - 1, 1.0);
    co.mass.assign(n, 1.0);
    co.potential.assign(n, -beta * beta / 4.0);
    co.sigma.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double x = std::abs(grid.at(i));
      double rho = r.interpolate(x);
      co.sigma[i] = std::exp(beta * x / 2.0) * beta * w.interpolate(x) * std::sqrt(2.0 * rho * (1.0 - rho));
    }
    co.left = {BoundaryKind::neumann_zero, 0.0};
    co.right = {BoundaryKind::neumann_zero, 0.0};
  };
}

namespace {

ProfileSeries collect(const Profile& psi0, const CoefficientSchedule& schedule, const PdeGrid& grid,
                      const NoiseField* noise) {
  psi0.validate();
  if (!(psi0.grid == grid.space)) throw ConfigError("initial field does not live on the SPDE grid");
  ProfileSeries out;
  run_linear_spde(psi0.values, schedule, grid, noise, [&](double t, const std::vector<double>& f) {
    out.times.push_back(t);
    Profile p = psi0;
    p.values = f;
    out.frames.push_back(std::move(p));
  });
  return out;
}

}  // namespace

ProfileSeries solve_spde_ru(const Profile& psi0, const ProfileSeries& rho_r, double beta, const PdeGrid& grid,
                            const NoiseField* noise) {
  if (std::abs(grid.space.start) > 1e-12) throw ConfigError("RU fluctuation grid must start at 0");
  return collect(psi0, ru_schedule(rho_r, beta, grid.space), grid, noise);
}

ProfileSeries solve_spde_u(const Profile& psi0, const ProfileSeries& rho_u, double alpha, const PdeGrid& grid,
                           const NoiseField* noise) {
  if (!(grid.space.start > 0.0)) throw ConfigError("U fluctuation grid must start at u_min > 0");
  return collect(psi0, u_schedule(rho_u, alpha, grid.space), grid, noise);
}

ProfileSeries solve_spde_line(const Profile& psi0, const ProfileSeries& rho, double alpha, const PdeGrid& grid,
                              const NoiseField* noise) {
  return collect(psi0, line_schedule(rho, alpha, grid.space), grid, noise);
}

ProfileSeries solve_spde_phi_bar(const Profile& phi0, const ProfileSeries& omega, const ProfileSeries& rho_r,
                                 double beta, const PdeGrid& grid, const NoiseField* noise) {
  if (noise && noise->symmetry() != NoiseSymmetry::even_reflected)
    throw ConfigError("symmetrised equation needs even-reflected noise");
  return collect(phi0, phi_bar_schedule(omega, rho_r, beta, grid.space), grid, noise);
}

Profile rotate_line_field(const Profile& psi_bar) {
  Profile out = psi_bar;
  out.grid.start = psi_bar.grid.start / std::numbers::sqrt2;
  out.grid.step = psi_bar.grid.step / std::numbers::sqrt2;
  for (double& v : out.values) v *= std::numbers::sqrt2;
  return out;
}

Profile recover_psi_r(const Profile& phi_bar, const Profile& omega, double beta) {
  std::size_t c = 0;
  while (c < phi_bar.size() && phi_bar.u(c) < -1e-9 * phi_bar.grid.step) ++c;
  if (c + 2 > phi_bar.size()) throw ConfigError("symmetrised field has no half-line part");
  Profile out;
  out.grid = phi_bar.grid;
  out.grid.start = phi_bar.u(c);
  out.grid.count = phi_bar.size() - c;
  out.domain = DomainKind::half_line_closed;
  out.values.resize(out.grid.count);
  for (std::size_t i = 0; i < out.grid.count; ++i) {
    double u = out.grid.at(i);
    out.values[i] = std::exp(-beta * u / 2.0) * phi_bar.values[c + i] / (beta * omega.interpolate(std::max(u, 0.0)));
  }
  return out;
}

Profile transform_line_to_u(const Profile& psi_bar, const Profile& rho, const UniformGrid& u_grid,
                            std::optional<double> left_mass) {
  LineChart chart(rho, left_mass);
  Profile out = make_profile(u_grid, [&](double u) {
    double v = chart.inverse(u);
    return psi_bar.interpolate(v) / (1.0 - rho.interpolate(v));
  });
  out.domain = DomainKind::half_line_open;
  return out;
}

LinearSystem assemble_system(const SpdeCoefficients& co, const UniformGrid& grid) {
  Rows r;
  build_rows(co, grid, r);
  LinearSystem sys;
  for (std::size_t i = 0; i < grid.count; ++i)
    if (!r.fixed[i]) sys.free_nodes.push_back(i);
  const auto m = static_cast<Eigen::Index>(sys.free_nodes.size());
  sys.A = Eigen::MatrixXd::Zero(m, m);
  sys.noise_rate.resize(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    std::size_t i = sys.free_nodes[static_cast<std::size_t>(a)];
    sys.A(a, a) = r.di[i];
    if (a > 0 && sys.free_nodes[static_cast<std::size_t>(a - 1)] + 1 == i) sys.A(a, a - 1) = r.lo[i];
    if (a + 1 < m && sys.free_nodes[static_cast<std::size_t>(a + 1)] == i + 1) sys.A(a, a + 1) = r.up[i];
    sys.noise_rate(a) = co.sigma[i] * co.sigma[i] / r.width[i];
  }
  return sys;
}

Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& q) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw InvariantError("eigen-decomposition failed in the Lyapunov oracle");
  const Eigen::VectorXcd lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (!(lam(i).real() < 0.0)) throw DomainError("drift operator is not stable");
  const Eigen::MatrixXcd V = es.eigenvectors();
  const Eigen::MatrixXcd Vinv = V.inverse();
  Eigen::MatrixXcd Qt = Vinv * q.cast<std::complex<double>>().asDiagonal() * Vinv.adjoint();
  for (Eigen::Index i = 0; i < Qt.rows(); ++i)
    for (Eigen::Index j = 0; j < Qt.cols(); ++j) Qt(i, j) = -Qt(i, j) / (lam(i) + std::conj(lam(j)));
  Eigen::MatrixXd X = (V * Qt * V.adjoint()).real();
  return 0.5 * (X + X.transpose());
}

Eigen::MatrixXd propagate_covariance(const Eigen::MatrixXd& X0, const CoefficientSchedule& schedule,
                                     const UniformGrid& grid, double dt, double t_end) {
  PdeGrid g;
  g.space = grid;
  g.dt = dt;
  g.t_end = t_end;
  SpdeStepper st = spde_stepper(g);
  Eigen::MatrixXd X = X0;
  SpdeCoefficients co;
  for (std::size_t k = 1; k <= st.steps; ++k) {
    schedule((static_cast<double>(k) - 0.5) * st.dt, co);
    LinearSystem sys = assemble_system(co, grid);
    if (sys.A.rows() != X.rows()) throw ConfigError("covariance size does not match the free nodes");
    const auto m = sys.A.rows();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
    Eigen::PartialPivLU<Eigen::MatrixXd> lhs(I - 0.5 * st.dt * sys.A);
    Eigen::MatrixXd R = lhs.solve(I + 0.5 * st.dt * sys.A);
    Eigen::MatrixXd P = lhs.solve(I);
    X = R * X * R.transpose() + st.dt * P * sys.noise_rate.asDiagonal() * P.transpose();
  }
  return 0.5 * (X + X.transpose());
}

NaturalBoundaryReport natural_boundary_check(const std::function<double(double)>& rho_u, double alpha) {
  NaturalBoundaryReport rep;
  const int per_decade = 4000;
  const int decades = 6;
  const int n = per_decade * decades + 1;
  const double dt = std::log(10.0) / per_decade;
  // nodes y_j = 10^{-6} e^{j dt}, j = 0..n-1, the last one is y = 1
  auto y_at = [&](int j) { return std::exp(std::log(1e-6) + j * dt); };
  auto ratio = [&](double y) {
    const double d = 1e-4;
    double drho = (rho_u(y * (1.0 + d)) - rho_u(y * (1.0 - d))) / (2.0 * y * d);
    return 2.0 * alpha - 4.0 * drho / (1.0 + rho_u(y));
  };
  // inner[j] = int_{y_j}^1 2b/sigma^2, log of the scale density
  std::vector<double> inner(n, 0.0), scale(n, 0.0);
  double prev = ratio(y_at(n - 1)) * y_at(n - 1);
  for (int j = n - 2; j >= 0; --j) {
    double cur = ratio(y_at(j)) * y_at(j);
    inner[j] = inner[j + 1] + 0.5 * dt * (cur + prev);
    prev = cur;
  }
  for (int j = n - 2; j >= 0; --j) {
    double f1 = std::exp(inner[j + 1]) * y_at(j + 1);
    double f0 = std::exp(inner[j]) * y_at(j);
    scale[j] = scale[j + 1] - 0.5 * dt * (f0 + f1);
  }
  for (int k = 2; k <= 6; ++k) {
    int j = (6 - k) * per_decade;
    rep.u_values.push_back(std::pow(10.0, -k));
    rep.scale_values.push_back(scale[j]);
  }
  rep.diverging = true;
  for (std::size_t k = 1; k < rep.scale_values.size(); ++k) {
    double g = std::abs(rep.scale_values[k]) / std::abs(rep.scale_values[k - 1]);
    rep.growth.push_back(g);
    if (!(rep.scale_values[k] < rep.scale_values[k - 1]) || g < 2.0) rep.diverging = false;
  }
  rep.sigma_at_unit_density = 1.0 / (1.0 + rho_u(std::log(2.0) / alpha));
  return rep;
}

}  // namespace ydl
