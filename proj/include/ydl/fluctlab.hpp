#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ydl/core.hpp"
#include "ydl/ensembles.hpp"
#include "ydl/pde.hpp"
#include "ydl/spde.hpp"
#include "ydl/transforms.hpp"

namespace ydl {

enum class FieldKind { psi_u, psi_r, psi_u_rotated, phi, phi_bar };
const char* to_string(FieldKind k);

struct FluctuationSample {
  double t = 0.0;
  Profile field;
  int N = 1;
  FieldKind kind = FieldKind::psi_r;
};

// sqrt(N) (sample - reference) node by node
FluctuationSample fluctuation_field(const Profile& sample, const Profile& reference, int N, FieldKind kind,
                                    double t = 0.0);

// Kahan-Babuska-Neumaier running sum
class CompensatedSum {
 public:
  void add(double x);
  void merge(const CompensatedSum& o);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Moments of probe vectors, up to the fourth mixed moments needed for the
// standard error of the covariance. Values are shifted by `shift` before
// accumulation; stats with different shifts cannot be merged.
class EnsembleStats {
 public:
  EnsembleStats() = default;
  explicit EnsembleStats(std::vector<double> probes, std::vector<double> shift = {});

  void add(const std::vector<double>& values);
  void merge(const EnsembleStats& other);

  std::size_t count() const { return count_; }
  const std::vector<double>& probes() const { return probes_; }
  std::vector<double> mean() const;
  std::vector<double> mean_se() const;
  // unbiased sample covariance
  Eigen::MatrixXd covariance() const;
  // sqrt((mu22 - C^2) / n) entrywise
  Eigen::MatrixXd covariance_se() const;

 private:
  double raw(const std::vector<CompensatedSum>& s, std::size_t i, std::size_t j) const;
  std::size_t dim() const { return probes_.size(); }

  std::vector<double> probes_;
  std::vector<double> shift_;
  std::size_t count_ = 0;
  std::vector<CompensatedSum> s1_;  // d_i
  std::vector<CompensatedSum> s2_;  // d_i d_j
  std::vector<CompensatedSum> s3_;  // d_i^2 d_j
  std::vector<CompensatedSum> s4_;  // d_i^2 d_j^2
};

struct TolerancePolicy {
  double z = 4.0;          // multiples of the Monte-Carlo standard error
  double bias = 0.0;       // absolute allowance
  double relative = 0.0;   // allowance as a fraction of |theory|
  std::string describe() const;
};

struct CovarianceReport {
  std::string claim;
  Statistics kind = Statistics::RU;
  int N = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double t = 0.0;
  std::vector<double> probes;
  Eigen::MatrixXd empirical;
  Eigen::MatrixXd theoretical;
  Eigen::MatrixXd standard_errors;
  Eigen::MatrixXd oracle;  // secondary reference (finite-N or discrete); may be empty
  std::vector<double> mean;
  std::vector<double> mean_se;
  TolerancePolicy policy;
  double max_z_score = 0.0;  // max |empirical - theoretical| / SE
  double max_excess = 0.0;   // max of |diff| - allowance; <= 0 when every entry passes
  bool pass = false;
  std::string tolerance_policy;
};

// Fills the comparison fields of a report from stats and theory.
CovarianceReport compare_covariance(const EnsembleStats& stats, const Eigen::MatrixXd& theory,
                                    const TolerancePolicy& policy);

// sqrt(N) (psi~ - psi) at the probes for one diagram
std::vector<double> static_field_at(const YoungDiagram& p, Statistics s, int N, const std::vector<double>& probes);

struct StaticExperimentConfig {
  Statistics kind = Statistics::RU;
  int N = 100;
  std::size_t M = 20000;
  std::vector<double> probes{0.0, 0.5, 1.0, 2.0};
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double z = 4.0;
  double bias = -1.0;  // < 0: 1.5 / sqrt(N)
};
CovarianceReport run_static_experiment(const StaticExperimentConfig& cfg);

enum class InitialKind { equilibrium, profile };

struct DynamicExperimentConfig {
  Statistics kind = Statistics::RU;
  int N = 100;
  std::size_t M = 2000;
  std::vector<double> t_probes{0.2};
  std::vector<double> space_probes{0.0, 0.5, 1.0, 2.0};
  InitialKind initial = InitialKind::equilibrium;
  // initial slope profile rho_0(u) (particle density for RU, height-difference mean for U)
  std::function<double(double)> rho0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double z = 4.0;
  double bias = -1.0;  // < 0: 2 / sqrt(N)
  // oracle grid
  double du = 0.05;
  double dt = 0.01;
  double domain_end = 12.0;
  double u_min = 0.05;  // U only
  double route_tolerance = 1e-3;
};

struct DynamicReport {
  std::vector<CovarianceReport> per_time;
  std::vector<double> hydro_distance;  // sup over probes of |mean psi~ - psi| per time
  double route_disagreement = 0.0;     // RU profile start: direct vs Hopf-Cole reference
  std::uint64_t jumps = 0;
  bool pass = false;
};
DynamicReport run_dynamic_experiment(const DynamicExperimentConfig& cfg);

// Q = -d/du (1/g) d/du with g = rho(1 - rho) (RU) or rho(1 + rho) (U) at the
// equilibrium slopes. The left end is zero flux; the far end is Dirichlet at
// grid.back() + extension (default 12 / shape). Returns {f_j(u_i)} on grid nodes,
// f_j solving Q f_j = delta_j with a unit-mass discrete delta.
Eigen::MatrixXd green_kernel_solve(Statistics kind, const UniformGrid& grid, double extension = -1.0);

// smallest eigenvalue of the discrete Q in the plain L2 product on the grid,
// with Dirichlet at grid.back(); scale multiplies g
double poincare_constant(Statistics kind, const UniformGrid& grid, double g_scale = 1.0);
// lowest eigenvalue of the Q on the same domain weighted by 1/g (RU) or e^{alpha u} (U):
// the decay rate of the linear fluctuation equation's mean
double relaxation_gap(Statistics kind, const UniformGrid& grid);
// f^T K f / f^T H f for a grid function f (last node treated as 0)
double rayleigh_quotient(Statistics kind, const UniformGrid& grid, const std::vector<double>& f);

struct SpdeInvariantConfig {
  Statistics kind = Statistics::RU;
  UniformGrid grid;  // linear; RU starts at 0, U at u_min > 0
  double dt = 0.01;
  std::size_t M = 2000;
  double t_long = -1.0;  // < 0: log(50) / relaxation_gap
  std::vector<double> probes{0.0, 0.5, 1.0, 2.0};
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double z = 4.0;
  double relative = 0.03;
};
struct SpdeInvariantReport {
  CovarianceReport covariance;  // empirical vs closed-form static covariance
  Eigen::MatrixXd lyapunov;     // discrete stationary covariance at the probes
  Eigen::MatrixXd green;        // Green-kernel matrix at the probes
  double lyapunov_vs_green = 0.0;  // max relative difference
  double t_long = 0.0;
  double gap = 0.0;
};
SpdeInvariantReport spde_invariant_experiment(const SpdeInvariantConfig& cfg);

// equilibrium coefficient schedule for the fluctuation SPDE of this kind
CoefficientSchedule equilibrium_schedule(Statistics kind, const UniformGrid& grid);

struct DecayReport {
  double rate = 0.0;  // fitted exponential rate of the weighted L2 norm
  double gap = 0.0;
  std::vector<double> times;
  std::vector<double> norms;
};
// noise-free run from a bump; rate fitted on the second half of [0, t_end]
DecayReport transient_decay(Statistics kind, const UniformGrid& grid, double dt, double t_end);

// sup |F_a - F_b| of the empirical distribution functions
double ks_statistic(std::vector<double> a, std::vector<double> b);
// two-sample critical value at level 1%
double ks_critical_1pct(std::size_t n, std::size_t m);
double sample_skewness(const std::vector<double>& x);
double sample_excess_kurtosis(const std::vector<double>& x);

struct InvarianceStatistic {
  std::string name;
  double ks = 0.0;
  double critical = 0.0;
  bool pass = false;
};
// Distribution of area, largest part and site-1 height difference at t = 0 versus after
// running the dynamics to t from independent stationary starts.
std::vector<InvarianceStatistic> microscopic_invariance(Statistics kind, int N, std::size_t M, double t,
                                                        std::uint64_t seed, unsigned threads = 1);

struct NoisePairCheck {
  double target = 0.0;     // <phi, Q psi>
  double estimate = 0.0;   // mean of W(phi) W(psi) / dt
  double se = 0.0;
  bool pass = false;
};
// Empirical check of E[W(phi) W(psi)] = dt <phi, Q psi>, Q f(u) = f(u) + f(-u)
NoisePairCheck reflected_noise_check(const NoiseField& noise, const std::function<double(double)>& phi,
                                     const std::function<double(double)>& psi, std::size_t increments,
                                     double z = 5.0);

}  // namespace ydl
