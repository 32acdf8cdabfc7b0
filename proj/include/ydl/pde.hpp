#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ydl/core.hpp"
#include "ydl/transforms.hpp"

namespace ydl {

enum class Scheme { explicit_euler, semi_implicit };

struct PdeGrid {
  UniformGrid space;
  double dt = 1e-4;
  double t_end = 1.0;
  Scheme scheme = Scheme::explicit_euler;
  double output_every = 0.0;  // 0: initial and final frame only
};

enum class BoundaryKind { robin_omega, neumann_zero, dirichlet_farfield, none_natural };

struct BoundarySpec {
  BoundaryKind kind = BoundaryKind::dirichlet_farfield;
  double parameter = 0.0;
};

struct ProfileSeries {
  std::vector<double> times;
  std::vector<Profile> frames;
  std::vector<std::string> warnings;

  const Profile& final_frame() const { return frames.back(); }
  // linear in time between frames
  Profile at(double t) const;
  // max over frames of the sup distance to ref on [lo, hi]
  double max_deviation(const Profile& ref, double lo = -1e300, double hi = 1e300) const;
};

enum class BurgersBoundary { clamped, periodic };

ProfileSeries solve_burgers(const Profile& rho0, double alpha, const PdeGrid& grid,
                            BurgersBoundary boundary = BurgersBoundary::clamped);

// Robin condition 2 w'(0) + beta w(0) = 0 at the left end, w = 1 at the right end
ProfileSeries solve_omega(const Profile& omega0, double beta, const PdeGrid& grid);

// psi0 may live on a linear or a logarithmic grid; both ends keep their initial values
ProfileSeries solve_psi_u(const Profile& psi0, double alpha, const PdeGrid& grid);

enum class RuRoute { direct, via_omega };
ProfileSeries solve_psi_ru(const Profile& psi0, double beta, const PdeGrid& grid, RuRoute route);

ProfileSeries solve_rho_u(const Profile& rho_u0, double alpha, const PdeGrid& grid);

// f_t = a f'' + b f' + c f, explicit, with coefficients refreshed every step
struct LinearCoefficients {
  std::vector<double> a, b, c;
};
using CoefficientField = std::function<void(double t, LinearCoefficients&)>;
ProfileSeries solve_linear_explicit(const Profile& f0, const CoefficientField& coefficients, BoundaryKind left,
                                    BoundaryKind right, const PdeGrid& grid);

// closed-form stationary objects
double rho_infinity(double v, double C, double alpha);
double rho_u_infinity(double u, double alpha);
double omega_infinity(double u, double beta);
// equilibrium change of variables between the line and the half-line
double equilibrium_zeta(double v, double alpha);
double equilibrium_zeta_inverse(double u, double alpha);

enum class StationaryKind { rho_line, rho_u, omega, psi_u, psi_ru, rho_ru };
Profile stationary_profile(StationaryKind kind, const UniformGrid& grid, double shape, double C = 1.0);

// largest explicit step allowed for the psi_u flux scheme on this data
double psi_u_stable_dt(const Profile& psi);

}  // namespace ydl
