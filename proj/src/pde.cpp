#include "ydl/pde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tridiagonal.hpp"

namespace ydl {

Profile ProfileSeries::at(double t) const {
  if (frames.empty()) throw ConfigError("empty profile series");
  if (t <= times.front()) return frames.front();
  if (t >= times.back()) return frames.back();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t k = static_cast<std::size_t>(it - times.begin());
  double f = (t - times[k - 1]) / (times[k] - times[k - 1]);
  Profile p = frames[k - 1];
  for (std::size_t i = 0; i < p.size(); ++i) p.values[i] = (1.0 - f) * frames[k - 1].values[i] + f * frames[k].values[i];
  return p;
}

double ProfileSeries::max_deviation(const Profile& ref, double lo, double hi) const {
  double d = 0.0;
  for (const auto& f : frames) d = std::max(d, sup_distance(f, ref, lo, hi));
  return d;
}

namespace {

struct Stepper {
  std::size_t steps;
  double dt;
  std::size_t every;
  bool emit(std::size_t k) const { return k % every == 0 || k == steps; }
};

Stepper make_stepper(const PdeGrid& g) {
  if (!(g.dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(g.t_end > 0.0)) throw ConfigError("t_end must be positive");
  Stepper s;
  s.steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(g.t_end / g.dt - 1e-9)));
  s.dt = g.t_end / static_cast<double>(s.steps);
  s.every = s.steps;
  if (g.output_every > 0.0)
    s.every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(g.output_every / s.dt)));
  return s;
}

void check_on_grid(const Profile& p, const PdeGrid& g) {
  p.validate();
  if (!(p.grid == g.space)) throw ConfigError("initial profile does not live on the solver grid");
  if (p.size() < 3) throw ConfigError("solver grid needs at least three nodes");
}

void check_diffusive_cfl(double dt, double h, double diffusivity = 1.0) {
  if (dt > 0.4 * h * h / diffusivity * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "explicit step dt=" << dt << " violates dt <= 0.4 du^2 / D = " << 0.4 * h * h / diffusivity;
    throw ConfigError(os.str());
  }
}

void push_frame(ProfileSeries& out, double t, const Profile& shape, const std::vector<double>& values) {
  out.times.push_back(t);
  Profile p = shape;
  p.values = values;
  out.frames.push_back(std::move(p));
}

}  // namespace

ProfileSeries solve_burgers(const Profile& rho0, double alpha, const PdeGrid& grid, BurgersBoundary boundary) {
  check_on_grid(rho0, grid);
  if (grid.space.coordinate != Coordinate::linear) throw ConfigError("Burgers solver needs a linear grid");
  for (double r : rho0.values)
    if (r < 0.0 || r > 1.0) throw DomainError("density outside [0,1]");
  const double h = grid.space.step;
  Stepper st = make_stepper(grid);
  check_diffusive_cfl(st.dt, h);
  if (alpha * h / 2.0 > 1.0) throw ConfigError("cell Peclet number alpha du / 2 exceeds 1");

  const std::size_t n = rho0.size();
  std::vector<double> r = rho0.values, flux(n + 1, 0.0);
  ProfileSeries out;
  push_frame(out, 0.0, rho0, r);
  const bool periodic = boundary == BurgersBoundary::periodic;
  for (std::size_t k = 1; k <= st.steps; ++k) {
    // flux through the right face of node i
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = i + 1;
      if (j == n) {
        if (!periodic) break;
        j = 0;
      }
      double mob = 0.5 * (r[i] * (1.0 - r[i]) + r[j] * (1.0 - r[j]));
      flux[i] = (r[j] - r[i]) / h + alpha * mob;
    }
    if (periodic) {
      double last = flux[n - 1];
      for (std::size_t i = n; i-- > 0;) r[i] += st.dt * (flux[i] - (i == 0 ? last : flux[i - 1])) / h;
    } else {
      double prev = flux[0];
      for (std::size_t i = 1; i + 1 < n; ++i) {
        double cur = flux[i];
        r[i] += st.dt * (cur - prev) / h;
        prev = cur;
      }
    }
    if (st.emit(k)) push_frame(out, st.dt * static_cast<double>(k), rho0, r);
  }
  return out;
}

ProfileSeries solve_omega(const Profile& omega0, double beta, const PdeGrid& grid) {
  check_on_grid(omega0, grid);
  if (grid.space.coordinate != Coordinate::linear) throw ConfigError("omega solver needs a linear grid");
  if (!(beta > 0.0)) throw DomainError("Robin parameter must be positive");
  for (double w : omega0.values)
    if (w < 1.0 - 1e-12) throw DomainError("omega must be >= 1");
  const double h = grid.space.step;
  const std::size_t n = omega0.size();
  Stepper st = make_stepper(grid);
  const bool implicit = grid.scheme == Scheme::semi_implicit;
  if (!implicit) check_diffusive_cfl(st.dt, h);

  // operator rows; node 0 carries the ghost-point Robin closure
  std::vector<double> lo(n, 0.0), di(n, 0.0), up(n, 0.0);
  di[0] = -2.0 / (h * h) + beta / h - beta * beta / 2.0;
  up[0] = 2.0 / (h * h);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    lo[i] = 1.0 / (h * h) - beta / (2.0 * h);
    di[i] = -2.0 / (h * h);
    up[i] = 1.0 / (h * h) + beta / (2.0 * h);
  }
  auto apply = [&](const std::vector<double>& w, std::vector<double>& out) {
    out.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i)
      out[i] = di[i] * w[i] + up[i] * w[i + 1] + (i > 0 ? lo[i] * w[i - 1] : 0.0);
  };
  std::vector<double> L(n), D(n), U(n);
  const double half = 0.5 * st.dt;
  for (std::size_t i = 0; i < n; ++i) {
    L[i] = -half * lo[i];
    D[i] = 1.0 - half * di[i];
    U[i] = -half * up[i];
  }
  L[n - 1] = 0.0;
  D[n - 1] = 1.0;
  U[n - 1] = 0.0;

  std::vector<double> w = omega0.values, Aw, scratch;
  w[n - 1] = 1.0;
  ProfileSeries out;
  auto monitor = [&](double t) {
    double slope = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h);
    double res = std::abs(2.0 * slope + beta * w[0]);
    if (res > 1e-3) {
      std::ostringstream os;
      os << "Robin residual " << res << " at t=" << t;
      out.warnings.push_back(os.str());
    }
  };
  push_frame(out, 0.0, omega0, w);
  monitor(0.0);
  for (std::size_t k = 1; k <= st.steps; ++k) {
    apply(w, Aw);
    if (implicit) {
      for (std::size_t i = 0; i + 1 < n; ++i) Aw[i] = w[i] + half * Aw[i];
      Aw[n - 1] = 1.0;
      detail::solve_tridiagonal(L, D, U, Aw, scratch);
      w.swap(Aw);
    } else {
      for (std::size_t i = 0; i + 1 < n; ++i) w[i] += st.dt * Aw[i];
    }
    if (st.emit(k)) {
      double t = st.dt * static_cast<double>(k);
      push_frame(out, t, omega0, w);
      monitor(t);
    }
  }
  return out;
}

double psi_u_stable_dt(const Profile& psi) {
  const double h = psi.grid.step;
  const bool logc = psi.grid.coordinate == Coordinate::logarithmic;
  double dmax = 0.0;
  for (std::size_t i = 0; i + 1 < psi.size(); ++i) {
    double s = (psi.values[i + 1] - psi.values[i]) / h;
    double d;
    if (logc) {
      double uh = std::exp(psi.grid.coord(i) + 0.5 * h);
      double ui = std::min(psi.u(i), psi.u(i + 1));
      d = uh / ((uh - s) * (uh - s) * ui * h * h);
    } else {
      d = 1.0 / ((1.0 - s) * (1.0 - s) * h * h);
    }
    dmax = std::max(dmax, d);
  }
  return 0.4 / dmax;
}

ProfileSeries solve_psi_u(const Profile& psi0, double alpha, const PdeGrid& grid) {
  check_on_grid(psi0, grid);
  const std::size_t n = psi0.size();
  const double h = grid.space.step;
  const bool logc = grid.space.coordinate == Coordinate::logarithmic;
  if (!(psi0.u(0) > 0.0)) throw DomainError("U height solver needs u_min > 0");
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!(psi0.values[i + 1] < psi0.values[i])) throw DomainError("initial height is not strictly decreasing");
  Stepper st = make_stepper(grid);
  double limit = psi_u_stable_dt(psi0);
  if (st.dt > limit * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "explicit step dt=" << st.dt << " exceeds the stability limit " << limit;
    throw ConfigError(os.str());
  }

  std::vector<double> uh(n - 1), un(n);
  for (std::size_t i = 0; i < n; ++i) un[i] = psi0.u(i);
  for (std::size_t i = 0; i + 1 < n; ++i) uh[i] = logc ? std::exp(grid.space.coord(i) + 0.5 * h) : 0.0;

  std::vector<double> p = psi0.values, F(n - 1);
  ProfileSeries out;
  push_frame(out, 0.0, psi0, p);
  bool warned = false;
  for (std::size_t k = 1; k <= st.steps; ++k) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double s = (p[i + 1] - p[i]) / h;
      double denom = logc ? uh[i] - s : 1.0 - s;
      if (!(denom > 0.0)) throw SingularityError("1 - psi' vanished during the U height solve");
      F[i] = s / denom;
      if (s >= 0.0 && !warned) {
        out.warnings.push_back("height lost strict monotonicity");
        warned = true;
      }
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double div = (F[i] - F[i - 1]) / h;
      if (logc) div /= un[i];
      p[i] += st.dt * (div + alpha * 0.5 * (F[i] + F[i - 1]));
    }
    if (st.emit(k)) push_frame(out, st.dt * static_cast<double>(k), psi0, p);
  }
  return out;
}

namespace {

void check_ru_slopes(const Profile& psi0) {
  const double h = psi0.grid.step;
  for (std::size_t i = 0; i + 1 < psi0.size(); ++i) {
    double s = (psi0.values[i + 1] - psi0.values[i]) / h;
    if (s > 1e-12 || s < -1.0 - 1e-12) throw DomainError("RU height slope outside [-1, 0]");
  }
  const auto& v = psi0.values;
  double s0 = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
  if (std::abs(s0 + 0.5) > 1e-2) throw DomainError("RU height needs slope -1/2 at the origin");
}

}  // namespace

ProfileSeries solve_psi_ru(const Profile& psi0, double beta, const PdeGrid& grid, RuRoute route) {
  check_on_grid(psi0, grid);
  if (grid.space.coordinate != Coordinate::linear || std::abs(grid.space.start) > 1e-12)
    throw ConfigError("RU height solver needs a linear grid starting at 0");
  check_ru_slopes(psi0);

  if (route == RuRoute::via_omega) {
    Profile w0 = psi0;
    for (double& v : w0.values) v = std::exp(beta * v);
    ProfileSeries ws = solve_omega(w0, beta, grid);
    for (auto& f : ws.frames)
      for (double& v : f.values) v = std::log(v) / beta;
    return ws;
  }

  const std::size_t n = psi0.size();
  const double h = grid.space.step;
  Stepper st = make_stepper(grid);
  check_diffusive_cfl(st.dt, h);
  std::vector<double> p = psi0.values, next(n);
  ProfileSeries out;
  push_frame(out, 0.0, psi0, p);
  for (std::size_t k = 1; k <= st.steps; ++k) {
    // ghost value p_{-1} = p_1 + h encodes psi'(0) = -1/2
    next[0] = p[0] + st.dt * ((2.0 * p[1] - 2.0 * p[0] + h) / (h * h) - beta / 4.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double d1 = (p[i + 1] - p[i - 1]) / (2.0 * h);
      double d2 = (p[i + 1] - 2.0 * p[i] + p[i - 1]) / (h * h);
      next[i] = p[i] + st.dt * (d2 + beta * d1 * (1.0 + d1));
    }
    next[n - 1] = p[n - 1];
    p.swap(next);
    if (st.emit(k)) push_frame(out, st.dt * static_cast<double>(k), psi0, p);
  }
  return out;
}

ProfileSeries solve_rho_u(const Profile& rho_u0, double alpha, const PdeGrid& grid) {
  check_on_grid(rho_u0, grid);
  if (grid.space.coordinate != Coordinate::linear) throw ConfigError("rho_U solver needs a linear grid");
  for (double r : rho_u0.values)
    if (!(r > 0.0)) throw DomainError("rho_U must be positive");
  const std::size_t n = rho_u0.size();
  const double h = grid.space.step;
  Stepper st = make_stepper(grid);
  // the flux depends on rho through m = rho/(1+rho), whose slope is at most 1
  check_diffusive_cfl(st.dt, h);
  std::vector<double> r = rho_u0.values, m(n), flux(n - 1);
  ProfileSeries out;
  push_frame(out, 0.0, rho_u0, r);
  for (std::size_t k = 1; k <= st.steps; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = r[i] / (1.0 + r[i]);
      if (!(m[i] > 0.0 && m[i] < 1.0)) throw SingularityError("m = rho/(1+rho) left (0,1)");
    }
    for (std::size_t i = 0; i + 1 < n; ++i) flux[i] = (m[i + 1] - m[i]) / h + alpha * 0.5 * (m[i] + m[i + 1]);
    for (std::size_t i = 1; i + 1 < n; ++i) r[i] += st.dt * (flux[i] - flux[i - 1]) / h;
    if (st.emit(k)) push_frame(out, st.dt * static_cast<double>(k), rho_u0, r);
  }
  return out;
}

ProfileSeries solve_linear_explicit(const Profile& f0, const CoefficientField& coefficients, BoundaryKind left,
                                    BoundaryKind right, const PdeGrid& grid) {
  check_on_grid(f0, grid);
  if (grid.space.coordinate != Coordinate::linear) throw ConfigError("linear solver needs a linear grid");
  const std::size_t n = f0.size();
  const double h = grid.space.step;
  Stepper st = make_stepper(grid);
  LinearCoefficients co;
  std::vector<double> f = f0.values, next(n);
  ProfileSeries out;
  push_frame(out, 0.0, f0, f);
  for (std::size_t k = 1; k <= st.steps; ++k) {
    double t = st.dt * static_cast<double>(k - 1);
    coefficients(t, co);
    if (co.a.size() != n || co.b.size() != n || co.c.size() != n) throw ConfigError("coefficient arrays mismatch grid");
    if (k == 1) {
      double amax = *std::max_element(co.a.begin(), co.a.end());
      check_diffusive_cfl(st.dt, h, amax);
    }
    for (std::size_t i = 0; i < n; ++i) {
      bool edge_l = i == 0, edge_r = i == n - 1;
      if ((edge_l && left != BoundaryKind::neumann_zero) || (edge_r && right != BoundaryKind::neumann_zero)) {
        next[i] = f[i];
        continue;
      }
      double fl = edge_l ? f[1] : f[i - 1];
      double fr = edge_r ? f[n - 2] : f[i + 1];
      double d2 = (fr - 2.0 * f[i] + fl) / (h * h);
      double d1 = (fr - fl) / (2.0 * h);
      next[i] = f[i] + st.dt * (co.a[i] * d2 + co.b[i] * d1 + co.c[i] * f[i]);
    }
    f.swap(next);
    if (st.emit(k)) push_frame(out, st.dt * static_cast<double>(k), f0, f);
  }
  return out;
}

double rho_infinity(double v, double C, double alpha) {
  if (!(C > 0.0)) throw DomainError("shift constant must be positive");
  double e = alpha * v;
  if (e > 0.0) {
    double x = std::exp(-e);
    return C * x / (1.0 + C * x);
  }
  return C / (std::exp(e) + C);
}

double rho_u_infinity(double u, double alpha) {
  if (!(u > 0.0)) throw DomainError("rho_U is singular at u <= 0");
  return 1.0 / std::expm1(alpha * u);
}

double omega_infinity(double u, double beta) { return 1.0 + std::exp(-beta * u); }

double equilibrium_zeta(double v, double alpha) {
  double e = alpha * v;
  return e > 30.0 ? v + std::log1p(std::exp(-e)) / alpha : std::log1p(std::exp(e)) / alpha;
}

double equilibrium_zeta_inverse(double u, double alpha) {
  if (!(u > 0.0)) throw DomainError("equilibrium chart inverse needs u > 0");
  return std::log(std::expm1(alpha * u)) / alpha;
}

Profile stationary_profile(StationaryKind kind, const UniformGrid& grid, double shape, double C) {
  switch (kind) {
    case StationaryKind::rho_line:
      return make_profile(grid, [&](double v) { return rho_infinity(v, C, shape); }, DomainKind::whole_line);
    case StationaryKind::rho_u:
      return make_profile(grid, [&](double u) { return rho_u_infinity(u, shape); }, DomainKind::half_line_open);
    case StationaryKind::omega:
      return make_profile(grid, [&](double u) { return omega_infinity(u, shape); });
    case StationaryKind::psi_u:
      return make_profile(
          grid,
          [&](double u) {
            if (!(u > 0.0)) throw DomainError("U curve is singular at u <= 0");
            return -std::log(-std::expm1(-shape * u)) / shape;
          },
          DomainKind::half_line_open);
    case StationaryKind::psi_ru:
      return make_profile(grid, [&](double u) { return std::log1p(std::exp(-shape * u)) / shape; });
    case StationaryKind::rho_ru:
      return make_profile(grid, [&](double u) { return 1.0 / (std::exp(shape * u) + 1.0); });
  }
  throw ConfigError("unknown stationary profile");
}

}  // namespace ydl
