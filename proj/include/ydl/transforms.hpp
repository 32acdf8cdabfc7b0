#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ydl/core.hpp"
#include "ydl/dynamics.hpp"
#include "ydl/ensembles.hpp"

namespace ydl {

enum class DomainKind { half_line_open, half_line_closed, whole_line };

// Grids are uniform in their coordinate. A logarithmic grid is uniform in
// w = log u and is used where a solution is singular at u = 0.
enum class Coordinate { linear, logarithmic };

struct UniformGrid {
  double start = 0.0;
  double step = 1.0;
  std::size_t count = 2;
  Coordinate coordinate = Coordinate::linear;

  static UniformGrid span(double a, double b, double step, Coordinate c = Coordinate::linear);
  // position in the grid coordinate
  double coord(std::size_t i) const { return start + step * static_cast<double>(i); }
  // physical position
  double at(std::size_t i) const;
  double back() const { return at(count - 1); }
  bool operator==(const UniformGrid&) const = default;
};

struct Profile {
  UniformGrid grid;
  std::vector<double> values;
  DomainKind domain = DomainKind::half_line_closed;

  std::size_t size() const { return values.size(); }
  double u(std::size_t i) const { return grid.at(i); }
  // linear interpolation in the grid coordinate; DomainError outside the grid
  double interpolate(double x) const;
  void validate() const;
  bool non_increasing(double tol = 0.0) const;
};

Profile make_profile(const UniformGrid& grid, const std::function<double(double)>& f,
                     DomainKind domain = DomainKind::half_line_closed);

// sup |a - b| over nodes whose position lies in [lo, hi]
double sup_distance(const Profile& a, const Profile& b, double lo = -1e300, double hi = 1e300);

// number of columns exceeding u
double height_function(const YoungDiagram& p, double u);
Profile scaled_height(const YoungDiagram& p, int N, const UniformGrid& grid);

struct ZetaCounts {
  long zminus;  // vacancies at sites <= x
  long zplus;   // particles at sites >= x + 1
};
ZetaCounts zeta_counts(const OccupancyWindow& etabar, long x);

// Rotated boundary in lattice units: position x = u - y, height h = u + y.
long lattice_height(const YoungDiagram& p, long x);
// 2 #{occupied rotated sites >= x} + x
long lattice_height_approx(const YoungDiagram& p, long x);
// real-argument versions; the exact one follows the staircase geometry
double lattice_height_exact(const YoungDiagram& p, double x);
double lattice_height_approx(const YoungDiagram& p, double x);
// height of the 45-degree rotated curve at v, and its particle-count approximation
double rotated_height(const YoungDiagram& p, double v);
double rotated_height_approx(const YoungDiagram& p, double v);
// the same after scaling both axes by 1/N
double rotated_height_scaled(const YoungDiagram& p, int N, double v);
double rotated_height_scaled_approx(const YoungDiagram& p, int N, double v);

// Both lattice curves tabulated at the integers of [lo, hi]; O(1) lookups inside,
// direct evaluation outside. The exact curve is linear between integers, the
// approximation is a count step plus x.
class RotatedCurves {
 public:
  RotatedCurves(const YoungDiagram& p, long lo, long hi);
  double exact(double x) const;
  double approx(double x) const;

 private:
  const YoungDiagram* diagram_;
  long lo_, hi_;
  std::vector<double> exact_;
  std::vector<long> count_;
};

// zeta(x) = eps^{-sum_{y >= x} eta(y)} for x = 1..x_max
std::vector<double> hopf_cole_lattice(const OccupancyWindow& eta, double epsilon, long x_max);
// interpolated field on a grid in u >= 0
Profile hopf_cole_field(const OccupancyWindow& eta, double epsilon, int N, const UniformGrid& grid);
// (1/(-N log eps)) log of the field at u
double hopf_cole_height(double field_value, double epsilon, int N);

struct LatticeField {
  long origin = 0;
  std::vector<double> values;
  long first() const { return origin; }
  long last() const { return origin + static_cast<long>(values.size()) - 1; }
  double at(long x) const { return values.at(static_cast<std::size_t>(x - origin)); }
};
// input zeta[x-1] for x = 1..X; output on sites 2-X..X
LatticeField symmetrize_hopf_cole(const std::vector<double>& zeta, double epsilon);

// v -> int_{-inf}^v (1 - rho) and its inverse, tabulated on the profile grid
class LineChart {
 public:
  // left_mass: integral of 1 - rho left of the grid; estimated from the
  // exponential decay of 1 - rho at the left end when omitted
  explicit LineChart(const Profile& rho, std::optional<double> left_mass = std::nullopt);
  double forward(double v) const;
  double inverse(double u) const;
  double min_u() const { return z_.front(); }
  double max_u() const { return z_.back(); }

 private:
  std::vector<double> v_;
  std::vector<double> z_;
};

// rho(v) = -psi'(G^{-1}(v)) / (1 - psi'(G^{-1}(v))), G(u) = u - psi(u); output on v_grid
Profile phi_u(const Profile& psi, const UniformGrid& v_grid);
// the v-range covered by phi_u for this psi
std::pair<double, double> phi_u_range(const Profile& psi);
// psi(u) = int_{z^{-1}(u)}^inf rho with z(v) = int_{-inf}^v (1 - rho)
Profile phi_u_inverse(const Profile& rho, const UniformGrid& u_grid, std::optional<double> left_mass = std::nullopt);

enum class NormKind { L2_r_line, L2_r_halfline, L2_tilde_r };

struct WeightedNorm {
  double r = 1.0;
  NormKind kind = NormKind::L2_r_line;
};

double norm_weight(const WeightedNorm& w, double u);

struct NormResult {
  double value = 0.0;
  double tail_estimate = 0.0;
  bool coverage_ok = true;  // false: truncated tail above 1e-8 of the integral
};
NormResult weighted_norm(const Profile& f, const WeightedNorm& w);

}  // namespace ydl
