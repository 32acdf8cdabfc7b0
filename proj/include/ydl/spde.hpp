#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ydl/core.hpp"
#include "ydl/pde.hpp"
#include "ydl/transforms.hpp"

namespace ydl {

double neumann_heat_kernel(double t, double u, double v);

enum class NoiseSymmetry { plain, even_reflected };

// Space-time white noise on a grid. Draws for a step are regenerated from
// (seed, step), so a field can be replayed in any order.
class NoiseField {
 public:
  NoiseField(const UniformGrid& grid, double dt, NoiseSymmetry symmetry, std::uint64_t seed);

  // independent standard normals for `step`; one per half-line node when reflected
  void draws(std::size_t step, std::vector<double>& z) const;
  // white-noise integral over each node's cell and the time step
  void cell_increments(std::size_t step, std::vector<double>& out) const;
  // draws scaled by 1/sqrt(dt du); reflected copies coincide exactly
  void increments(std::size_t step, std::vector<double>& out) const;
  double cell_width(std::size_t i) const;
  std::size_t independent_nodes() const { return independent_; }

  const UniformGrid& grid() const { return grid_; }
  double dt() const { return dt_; }
  NoiseSymmetry symmetry() const { return symmetry_; }
  std::uint64_t seed() const { return seed_; }

 private:
  UniformGrid grid_;
  double dt_;
  NoiseSymmetry symmetry_;
  std::uint64_t seed_;
  std::size_t independent_;
  std::size_t centre_ = 0;
};

// (A f)_i = [k_{i+1/2}(f_{i+1}-f_i) - k_{i-1/2}(f_i-f_{i-1})] / (m_i h_i du) + c_i f_i
// with h_i the cell width (du/2 at a zero-flux end). Dirichlet ends are held at 0.
struct SpdeCoefficients {
  std::vector<double> conductance;  // n-1 half points
  std::vector<double> mass;         // n nodes
  std::vector<double> potential;    // n nodes
  std::vector<double> sigma;        // n nodes
  BoundarySpec left{BoundaryKind::neumann_zero, 0.0};
  BoundarySpec right{BoundaryKind::dirichlet_farfield, 0.0};
};

// a f'' + b f' + c f rewritten in flux form through s = exp(int b/a)
SpdeCoefficients coefficients_from_drift_diffusion(const UniformGrid& grid, const std::vector<double>& a,
                                                   const std::vector<double>& b, const std::vector<double>& c,
                                                   const std::vector<double>& sigma, BoundarySpec left,
                                                   BoundarySpec right);

using CoefficientSchedule = std::function<void(double t, SpdeCoefficients&)>;
using SpdeObserver = std::function<void(double t, const std::vector<double>& field)>;

// Crank-Nicolson in the whole linear operator with the noise increment added explicitly.
// noise may be null (deterministic run). Observer fires at t = 0, every output_every, and t_end.
void run_linear_spde(const std::vector<double>& psi0, const CoefficientSchedule& schedule, const PdeGrid& grid,
                     const NoiseField* noise, const SpdeObserver& observer);

// Coefficient schedules of the four fluctuation equations. Density series are
// interpolated onto the solver grid at time t.
CoefficientSchedule ru_schedule(const ProfileSeries& rho_r, double beta, const UniformGrid& grid);
CoefficientSchedule u_schedule(const ProfileSeries& rho_u, double alpha, const UniformGrid& grid);
CoefficientSchedule line_schedule(const ProfileSeries& rho, double alpha, const UniformGrid& grid);
CoefficientSchedule phi_bar_schedule(const ProfileSeries& omega, const ProfileSeries& rho_r, double beta,
                                     const UniformGrid& grid);

ProfileSeries solve_spde_ru(const Profile& psi0, const ProfileSeries& rho_r, double beta, const PdeGrid& grid,
                            const NoiseField* noise);
ProfileSeries solve_spde_u(const Profile& psi0, const ProfileSeries& rho_u, double alpha, const PdeGrid& grid,
                           const NoiseField* noise);
ProfileSeries solve_spde_line(const Profile& psi0, const ProfileSeries& rho, double alpha, const PdeGrid& grid,
                              const NoiseField* noise);
ProfileSeries solve_spde_phi_bar(const Profile& phi0, const ProfileSeries& omega, const ProfileSeries& rho_r,
                                 double beta, const PdeGrid& grid, const NoiseField* noise);

// v -> sqrt2 * field(sqrt2 v), on the grid scaled by 1/sqrt2
Profile rotate_line_field(const Profile& psi_bar);
// e^{-beta u/2} phi_bar(u) / (beta omega(u)) on the nodes u >= 0
Profile recover_psi_r(const Profile& phi_bar, const Profile& omega, double beta);
// psi_bar(z^{-1}(u)) / (1 - rho(z^{-1}(u))) with z(v) = int_{-inf}^v (1 - rho)
Profile transform_line_to_u(const Profile& psi_bar, const Profile& rho, const UniformGrid& u_grid,
                            std::optional<double> left_mass = std::nullopt);

// Dense form of the semi-discrete system on the free (non-Dirichlet) nodes:
// dX = A X dt + noise with covariance rate diag(noise_rate).
struct LinearSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd noise_rate;
  std::vector<std::size_t> free_nodes;
};
LinearSystem assemble_system(const SpdeCoefficients& co, const UniformGrid& grid);

// A X + X A^T + diag(q) = 0 through the eigenbasis of A
Eigen::MatrixXd lyapunov_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& q);

// Covariance recursion of the Crank-Nicolson scheme from X0 on the free nodes.
Eigen::MatrixXd propagate_covariance(const Eigen::MatrixXd& X0, const CoefficientSchedule& schedule,
                                     const UniformGrid& grid, double dt, double t_end);

struct NaturalBoundaryReport {
  std::vector<double> u_values;      // 1e-2 ... 1e-6
  std::vector<double> scale_values;  // scale function normalised to 0 at u = 1
  std::vector<double> growth;        // |s(u_{k+1})| / |s(u_k)|
  bool diverging = false;
  double sigma_at_unit_density = 0.0;  // sigma at u = log 2 / alpha
};
NaturalBoundaryReport natural_boundary_check(const std::function<double(double)>& rho_u, double alpha);

}  // namespace ydl
