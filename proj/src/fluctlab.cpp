#include "ydl/fluctlab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "tridiagonal.hpp"
#include "ydl/dynamics.hpp"

namespace ydl {

const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::psi_u: return "psi_u";
    case FieldKind::psi_r: return "psi_r";
    case FieldKind::psi_u_rotated: return "psi_u_rotated";
    case FieldKind::phi: return "phi";
    case FieldKind::phi_bar: return "phi_bar";
  }
  return "?";
}

FluctuationSample fluctuation_field(const Profile& sample, const Profile& reference, int N, FieldKind kind, double t) {
  if (N < 1) throw ConfigError("N must be >= 1");
  if (!(sample.grid == reference.grid) || sample.size() != reference.size())
    throw ConfigError("sample and reference live on different grids");
  FluctuationSample out;
  out.t = t;
  out.N = N;
  out.kind = kind;
  out.field = sample;
  const double r = std::sqrt(static_cast<double>(N));
  for (std::size_t i = 0; i < sample.size(); ++i) out.field.values[i] = r * (sample.values[i] - reference.values[i]);
  return out;
}

void CompensatedSum::add(double x) {
  double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x))
    comp_ += (sum_ - t) + x;
  else
    comp_ += (x - t) + sum_;
  sum_ = t;
}

void CompensatedSum::merge(const CompensatedSum& o) {
  add(o.sum_);
  add(o.comp_);
}

EnsembleStats::EnsembleStats(std::vector<double> probes, std::vector<double> shift)
    : probes_(std::move(probes)), shift_(std::move(shift)) {
  if (probes_.empty()) throw ConfigError("at least one probe point is needed");
  if (shift_.empty()) shift_.assign(dim(), 0.0);
  if (shift_.size() != dim()) throw ConfigError("shift does not match the probes");
  s1_.resize(dim());
  s2_.resize(dim() * dim());
  s3_.resize(dim() * dim());
  s4_.resize(dim() * dim());
}

void EnsembleStats::add(const std::vector<double>& values) {
  const std::size_t d = dim();
  if (values.size() != d) throw ConfigError("sample does not match the probes");
  std::vector<double> x(d);
  for (std::size_t i = 0; i < d; ++i) {
    x[i] = values[i] - shift_[i];
    if (!std::isfinite(x[i])) throw DomainError("non-finite fluctuation value");
    s1_[i].add(x[i]);
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double xx = x[i] * x[j];
      s2_[i * d + j].add(xx);
      s3_[i * d + j].add(x[i] * xx);
      s4_[i * d + j].add(xx * xx);
    }
  ++count_;
}

void EnsembleStats::merge(const EnsembleStats& o) {
  if (o.count_ == 0) return;
  if (count_ == 0 && probes_.empty()) {
    *this = o;
    return;
  }
  if (o.probes_ != probes_ || o.shift_ != shift_) throw ConfigError("cannot merge stats over different probes");
  for (std::size_t i = 0; i < s1_.size(); ++i) s1_[i].merge(o.s1_[i]);
  for (std::size_t i = 0; i < s2_.size(); ++i) {
    s2_[i].merge(o.s2_[i]);
    s3_[i].merge(o.s3_[i]);
    s4_[i].merge(o.s4_[i]);
  }
  count_ += o.count_;
}

double EnsembleStats::raw(const std::vector<CompensatedSum>& s, std::size_t i, std::size_t j) const {
  return s[i * dim() + j].value() / static_cast<double>(count_);
}

std::vector<double> EnsembleStats::mean() const {
  if (count_ == 0) throw ConfigError("no samples");
  std::vector<double> m(dim());
  for (std::size_t i = 0; i < dim(); ++i) m[i] = shift_[i] + s1_[i].value() / static_cast<double>(count_);
  return m;
}

std::vector<double> EnsembleStats::mean_se() const {
  Eigen::MatrixXd c = covariance();
  std::vector<double> se(dim());
  for (std::size_t i = 0; i < dim(); ++i)
    se[i] = std::sqrt(std::max(0.0, c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))) /
                      static_cast<double>(count_));
  return se;
}

Eigen::MatrixXd EnsembleStats::covariance() const {
  if (count_ < 2) throw ConfigError("covariance needs at least two samples");
  const double n = static_cast<double>(count_);
  const auto d = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd c(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
      double ai = s1_[ui].value() / n, aj = s1_[uj].value() / n;
      c(i, j) = (raw(s2_, ui, uj) - ai * aj) * n / (n - 1.0);
    }
  return 0.5 * (c + c.transpose());
}

Eigen::MatrixXd EnsembleStats::covariance_se() const {
  if (count_ < 2) throw ConfigError("covariance needs at least two samples");
  const double n = static_cast<double>(count_);
  const auto d = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd se(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
      double a = s1_[ui].value() / n, b = s1_[uj].value() / n;
      double m11 = raw(s2_, ui, uj);
      double mu22 = raw(s4_, ui, uj) - 2.0 * b * raw(s3_, ui, uj) - 2.0 * a * raw(s3_, uj, ui) +
                    b * b * raw(s2_, ui, ui) + a * a * raw(s2_, uj, uj) + 4.0 * a * b * m11 - 3.0 * a * a * b * b;
      double c = m11 - a * b;
      se(i, j) = std::sqrt(std::max(0.0, mu22 - c * c) / n);
    }
  return se;
}

std::string TolerancePolicy::describe() const {
  std::ostringstream os;
  os << "|empirical - theory| <= " << z << " SE";
  if (bias > 0.0) os << " + " << bias;
  if (relative > 0.0) os << " + " << relative << " |theory|";
  return os.str();
}

CovarianceReport compare_covariance(const EnsembleStats& stats, const Eigen::MatrixXd& theory,
                                    const TolerancePolicy& policy) {
  CovarianceReport r;
  r.samples = stats.count();
  r.probes = stats.probes();
  r.empirical = stats.covariance();
  r.standard_errors = stats.covariance_se();
  r.theoretical = theory;
  if (theory.rows() != r.empirical.rows() || theory.cols() != r.empirical.cols())
    throw ConfigError("theory matrix does not match the probes");
  r.mean = stats.mean();
  r.mean_se = stats.mean_se();
  r.policy = policy;
  r.tolerance_policy = policy.describe();
  r.max_z_score = 0.0;
  r.max_excess = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < theory.rows(); ++i)
    for (Eigen::Index j = 0; j < theory.cols(); ++j) {
      double diff = std::abs(r.empirical(i, j) - theory(i, j));
      double se = r.standard_errors(i, j);
      double z = se > 0.0 ? diff / se : (diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      r.max_z_score = std::max(r.max_z_score, z);
      double allowance = policy.z * se + policy.bias + policy.relative * std::abs(theory(i, j));
      r.max_excess = std::max(r.max_excess, diff - allowance);
    }
  r.pass = r.max_excess <= 0.0;
  return r;
}

std::vector<double> static_field_at(const YoungDiagram& p, Statistics s, int N, const std::vector<double>& probes) {
  std::vector<double> out(probes.size());
  const double n = N;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    double u = probes[k];
    out[k] = std::sqrt(n) * (height_function(p, n * u) / n - vershik_curve(s, u).psi);
  }
  return out;
}

namespace {

constexpr std::size_t kChunk = 100;

void check_probes(Statistics s, const std::vector<double>& probes, double lo, double hi) {
  if (probes.empty()) throw ConfigError("empty probe list");
  if (!std::is_sorted(probes.begin(), probes.end())) throw ConfigError("probes must be sorted ascending");
  for (double u : probes) {
    if (s == Statistics::U && !(u > 0.0)) throw ConfigError("U probes must be bounded away from 0");
    if (u < lo || u > hi) throw ConfigError("probe outside the domain");
  }
}

Eigen::MatrixXd matrix_at(const std::vector<double>& probes, const std::function<double(double, double)>& f) {
  const auto d = static_cast<Eigen::Index>(probes.size());
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      m(i, j) = f(probes[static_cast<std::size_t>(i)], probes[static_cast<std::size_t>(j)]);
  return m;
}

// linear interpolation weights of x on a linear grid
std::pair<std::size_t, double> locate(const UniformGrid& g, double x) {
  double s = (x - g.start) / g.step;
  if (s < -1e-9 || s > static_cast<double>(g.count - 1) + 1e-9) throw ConfigError("probe outside the oracle grid");
  s = std::clamp(s, 0.0, static_cast<double>(g.count - 1));
  auto k = static_cast<std::size_t>(std::floor(s));
  if (k >= g.count - 1) k = g.count - 2;
  return {k, s - static_cast<double>(k)};
}

// bilinear interpolation of a nodal matrix (size grid.count) at the probes
Eigen::MatrixXd matrix_on_probes(const Eigen::MatrixXd& X, const UniformGrid& g, const std::vector<double>& probes) {
  return matrix_at(probes, [&](double u, double v) {
    auto [i, a] = locate(g, u);
    auto [j, b] = locate(g, v);
    auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
    return (1 - a) * (1 - b) * X(I, J) + a * (1 - b) * X(I + 1, J) + (1 - a) * b * X(I, J + 1) + a * b * X(I + 1, J + 1);
  });
}

// embed a free-node matrix into the full grid, zeros at Dirichlet nodes
Eigen::MatrixXd embed(const Eigen::MatrixXd& X, const std::vector<std::size_t>& free_nodes, std::size_t n) {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < free_nodes.size(); ++a)
    for (std::size_t b = 0; b < free_nodes.size(); ++b)
      full(static_cast<Eigen::Index>(free_nodes[a]), static_cast<Eigen::Index>(free_nodes[b])) =
          X(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return full;
}

double equilibrium_g(Statistics kind, double u) {
  double r = vershik_curve(kind, u).rho;
  return kind == Statistics::RU ? r * (1.0 - r) : r * (1.0 + r);
}

Profile equilibrium_density(Statistics kind, const UniformGrid& grid) {
  return make_profile(grid, [kind](double u) { return vershik_curve(kind, u).rho; },
                      kind == Statistics::U ? DomainKind::half_line_open : DomainKind::half_line_closed);
}

ProfileSeries single_frame(Profile p) {
  ProfileSeries s;
  s.times.push_back(0.0);
  s.frames.push_back(std::move(p));
  return s;
}

}  // namespace

CovarianceReport run_static_experiment(const StaticExperimentConfig& cfg) {
  if (cfg.N < 1 || cfg.M < 2) throw ConfigError("static experiment needs N >= 1 and M >= 2");
  check_probes(cfg.kind, cfg.probes, 0.0, 1e300);
  const GrandcanonicalParams params = make_params(cfg.kind, cfg.N);
  const GrandcanonicalSampler sampler(params, cfg.kind);
  const std::size_t chunks = (cfg.M + kChunk - 1) / kChunk;
  std::vector<EnsembleStats> parts(chunks, EnsembleStats(cfg.probes));
  parallel_chunks(chunks, cfg.threads, [&](std::size_t c) {
    Rng rng(derive_seed(cfg.seed, c));
    std::size_t end = std::min(cfg.M, (c + 1) * kChunk);
    for (std::size_t k = c * kChunk; k < end; ++k) parts[c].add(static_field_at(sampler.sample(rng), cfg.kind, cfg.N, cfg.probes));
  });
  EnsembleStats total(cfg.probes);
  for (const auto& p : parts) total.merge(p);

  TolerancePolicy policy{cfg.z, cfg.bias < 0.0 ? 1.5 / std::sqrt(static_cast<double>(cfg.N)) : cfg.bias, 0.0};
  Eigen::MatrixXd theory = matrix_at(cfg.probes, [&](double u, double v) { return static_covariance(cfg.kind, u, v); });
  CovarianceReport r = compare_covariance(total, theory, policy);
  r.oracle = matrix_at(cfg.probes, [&](double u, double v) { return finite_n_covariance(params, cfg.kind, u, v); });
  r.claim = std::string("static covariance, ") + to_string(cfg.kind);
  r.kind = cfg.kind;
  r.N = cfg.N;
  r.seed = cfg.seed;
  return r;
}

CoefficientSchedule equilibrium_schedule(Statistics kind, const UniformGrid& grid) {
  auto series = std::make_shared<ProfileSeries>(single_frame(equilibrium_density(kind, grid)));
  CoefficientSchedule inner =
      kind == Statistics::RU ? ru_schedule(*series, kBeta, grid) : u_schedule(*series, kAlpha, grid);
  SpdeCoefficients co;
  inner(0.0, co);
  return [co](double, SpdeCoefficients& out) { out = co; };
}

namespace {

struct RuReference {
  ProfileSeries psi;        // on the reference grid
  ProfileSeries rho_oracle; // on the oracle grid
  double disagreement = 0.0;
};

// psi_0 and the initial covariance integrand on a fine grid, integrated from the right
struct InitialTails {
  UniformGrid grid;
  std::vector<double> psi;       // int_u^inf rho0
  std::vector<double> variance;  // int_u^inf rho0 (1 -+ rho0)
  double at(const std::vector<double>& f, double u) const {
    auto [k, a] = locate(grid, std::min(u, grid.back()));
    return (1 - a) * f[k] + a * f[k + 1];
  }
};

InitialTails initial_tails(Statistics kind, const std::function<double(double)>& rho0, double end) {
  InitialTails t;
  const double h = 1e-3;
  const double far = end + 20.0;
  t.grid = UniformGrid::span(0.0, far, h);
  const std::size_t n = t.grid.count;
  t.psi.assign(n, 0.0);
  t.variance.assign(n, 0.0);
  auto var = [&](double u) {
    double r = rho0(u);
    return kind == Statistics::RU ? r * (1.0 - r) : r * (1.0 + r);
  };
  for (std::size_t i = n - 1; i-- > 0;) {
    double a = t.grid.at(i), b = t.grid.at(i + 1);
    t.psi[i] = t.psi[i + 1] + 0.5 * h * (rho0(a) + rho0(b));
    t.variance[i] = t.variance[i + 1] + 0.5 * h * (var(a) + var(b));
  }
  return t;
}

RuReference ru_reference(const DynamicExperimentConfig& cfg, const InitialTails& tails, const UniformGrid& oracle_grid,
                         double t_max) {
  RuReference ref;
  PdeGrid g;
  g.space = UniformGrid::span(0.0, cfg.domain_end, 0.02);
  g.dt = 0.2 * g.space.step * g.space.step;
  g.t_end = t_max;
  g.output_every = 0.01;
  Profile psi0 = make_profile(g.space, [&](double u) { return tails.at(tails.psi, u); });
  ProfileSeries direct = solve_psi_ru(psi0, kBeta, g, RuRoute::direct);
  ref.psi = solve_psi_ru(psi0, kBeta, g, RuRoute::via_omega);
  for (std::size_t k = 0; k < ref.psi.frames.size(); ++k)
    ref.disagreement = std::max(ref.disagreement, sup_distance(direct.frames[k], ref.psi.frames[k]));
  if (ref.disagreement > cfg.route_tolerance)
    throw InvariantError("reference height PDE routes disagree by " + std::to_string(ref.disagreement));
  // slopes on the oracle grid
  for (std::size_t k = 0; k < ref.psi.frames.size(); ++k) {
    const Profile& f = ref.psi.frames[k];
    const std::size_t n = f.size();
    const double h = f.grid.step;
    Profile rho = f;
    for (std::size_t i = 0; i < n; ++i) {
      double d = i == 0 ? (f.values[1] - f.values[0]) / h
                 : i + 1 == n ? (f.values[n - 1] - f.values[n - 2]) / h
                              : (f.values[i + 1] - f.values[i - 1]) / (2.0 * h);
      rho.values[i] = std::clamp(-d, 0.0, 1.0);
    }
    rho.values[0] = 0.5;
    ref.rho_oracle.times.push_back(ref.psi.times[k]);
    ref.rho_oracle.frames.push_back(make_profile(oracle_grid, [&](double u) { return rho.interpolate(u); }));
  }
  return ref;
}

// Psi-bar on the line from the rotated occupancy, evaluated at the nodes of v_grid
std::vector<double> line_field(const YoungDiagram& p, int N, const UniformGrid& v_grid,
                               const std::vector<double>& rho_tail) {
  int radius = minimal_wasep_radius(p) + 2;
  OccupancyWindow w = rotate_to_wasep(p, radius);
  // tail[k] = particles at sites >= origin + k
  std::vector<long> tail(w.values.size() + 1, 0);
  for (std::size_t k = w.values.size(); k-- > 0;) tail[k] = tail[k + 1] + w.values[k];
  const double n = N;
  std::vector<double> out(v_grid.count);
  for (std::size_t i = 0; i < v_grid.count; ++i) {
    long x = static_cast<long>(std::ceil(n * v_grid.at(i) - 1e-9));
    long count;
    if (x > w.last())
      count = 0;
    else if (x < w.first())
      count = tail[0] + (w.first() - x);
    else
      count = tail[static_cast<std::size_t>(x - w.first())];
    out[i] = std::sqrt(n) * (static_cast<double>(count) / n - rho_tail[i]);
  }
  return out;
}

}  // namespace

DynamicReport run_dynamic_experiment(const DynamicExperimentConfig& cfg) {
  if (cfg.N < 1 || cfg.M < 2) throw ConfigError("dynamic experiment needs N >= 1 and M >= 2");
  if (cfg.t_probes.empty()) throw ConfigError("no probe times");
  for (std::size_t k = 0; k < cfg.t_probes.size(); ++k)
    if (cfg.t_probes[k] < 0.0 || (k > 0 && !(cfg.t_probes[k] > cfg.t_probes[k - 1])))
      throw ConfigError("probe times must be >= 0 and increasing");
  const Statistics kind = cfg.kind;
  const double lo = kind == Statistics::U ? cfg.u_min : 0.0;
  check_probes(kind, cfg.space_probes, lo, cfg.domain_end);
  if (cfg.initial == InitialKind::profile && !cfg.rho0) throw ConfigError("profile start needs rho0");
  if (cfg.initial == InitialKind::profile && kind == Statistics::U)
    throw ConfigError("profile start is available for RU only");

  const GrandcanonicalParams params = make_params(kind, cfg.N);
  const UniformGrid oracle_grid = UniformGrid::span(lo, cfg.domain_end, cfg.du);
  const double t_max = cfg.t_probes.back();
  const double n = cfg.N;
  DynamicReport rep;

  // references: psi at probe times and the slope series driving the oracle
  // psi_ref(k, u): reference height at the k-th probe time
  std::function<double(std::size_t, double)> psi_ref;
  std::vector<Profile> ref_frames;
  ProfileSeries rho_series;
  std::optional<InitialTails> tails;
  RuReference ru_ref;
  if (cfg.initial == InitialKind::equilibrium) {
    psi_ref = [kind](std::size_t, double u) { return vershik_curve(kind, u).psi; };
    rho_series = single_frame(equilibrium_density(kind, oracle_grid));
  } else {
    tails = initial_tails(kind, cfg.rho0, cfg.domain_end);
    ru_ref = ru_reference(cfg, *tails, oracle_grid, std::max(t_max, 0.01));
    rep.route_disagreement = ru_ref.disagreement;
    for (double t : cfg.t_probes) ref_frames.push_back(ru_ref.psi.at(t));
    psi_ref = [&ref_frames](std::size_t k, double u) { return ref_frames[k].interpolate(u); };
    rho_series = ru_ref.rho_oracle;
  }
  CoefficientSchedule base =
      kind == Statistics::RU ? ru_schedule(rho_series, kBeta, oracle_grid) : u_schedule(rho_series, kAlpha, oracle_grid);

  // oracle covariances at the probe times
  SpdeCoefficients co0;
  base(0.0, co0);
  LinearSystem sys0 = assemble_system(co0, oracle_grid);
  std::vector<Eigen::MatrixXd> oracle_at;
  Eigen::MatrixXd X;
  if (cfg.initial == InitialKind::equilibrium) {
    X = lyapunov_solve(sys0.A, sys0.noise_rate);
  } else {
    const auto m = static_cast<Eigen::Index>(sys0.free_nodes.size());
    X.resize(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) {
        double u = oracle_grid.at(sys0.free_nodes[static_cast<std::size_t>(a)]);
        double v = oracle_grid.at(sys0.free_nodes[static_cast<std::size_t>(b)]);
        X(a, b) = tails->at(tails->variance, std::max(u, v));
      }
  }
  double t_prev = 0.0;
  for (double t : cfg.t_probes) {
    if (t > t_prev) {
      double offset = t_prev;
      CoefficientSchedule shifted = [&base, offset](double s, SpdeCoefficients& co) { base(offset + s, co); };
      X = propagate_covariance(X, shifted, oracle_grid, cfg.dt, t - t_prev);
      t_prev = t;
    }
    oracle_at.push_back(matrix_on_probes(embed(X, sys0.free_nodes, oracle_grid.count), oracle_grid, cfg.space_probes));
  }

  // hydrodynamic check grid
  std::vector<double> hydro_u;
  const double hydro_lo = kind == Statistics::U ? std::max(lo, 0.25) : 0.0;
  for (double u = hydro_lo; u <= std::min(4.0, cfg.domain_end) + 1e-12; u += 0.1) hydro_u.push_back(u);

  // U: line representation pieces, fixed at equilibrium
  UniformGrid v_grid;
  std::vector<double> rho_tail;
  Profile rho_line;
  std::vector<std::pair<std::size_t, double>> probe_v;  // v node and interpolation weight per probe
  std::vector<double> probe_scale;
  if (kind == Statistics::U) {
    double v_hi = equilibrium_zeta_inverse(cfg.space_probes.back(), kAlpha) + 1.0;
    v_grid = UniformGrid::span(-12.0, std::max(v_hi, 12.0), 1.0 / n);
    rho_line = stationary_profile(StationaryKind::rho_line, v_grid, kAlpha, 1.0);
    rho_line.domain = DomainKind::whole_line;
    for (std::size_t i = 0; i < v_grid.count; ++i) {
      double e = kAlpha * v_grid.at(i);
      // int_v^inf 1/(1+e^{alpha w}) dw
      rho_tail.push_back(e > 30 ? std::exp(-e) / kAlpha : std::log1p(std::exp(-e)) / kAlpha);
    }
  }

  struct ChunkOut {
    std::vector<EnsembleStats> stats;
    std::vector<std::vector<CompensatedSum>> hydro;
    std::uint64_t jumps = 0;
  };
  const std::size_t chunks = (cfg.M + kChunk - 1) / kChunk;
  std::vector<ChunkOut> parts(chunks);
  const UniformGrid u_probe_grid =
      UniformGrid::span(cfg.space_probes.front(), std::max(cfg.space_probes.back(), cfg.space_probes.front() + 0.05), 0.05);
  parallel_chunks(chunks, cfg.threads, [&](std::size_t c) {
    ChunkOut& out = parts[c];
    out.stats.assign(cfg.t_probes.size(), EnsembleStats(cfg.space_probes));
    out.hydro.assign(cfg.t_probes.size(), std::vector<CompensatedSum>(hydro_u.size()));
    GrandcanonicalSampler sampler(params, kind);
    std::vector<int> diffs;
    std::size_t end = std::min(cfg.M, (c + 1) * kChunk);
    for (std::size_t path = c * kChunk; path < end; ++path) {
      Rng rng(derive_seed(cfg.seed, path));
      YoungDiagram start;
      if (cfg.initial == InitialKind::equilibrium) {
        start = sampler.sample(rng);
      } else {
        int x_max = static_cast<int>(std::ceil(n * cfg.domain_end));
        diffs.assign(static_cast<std::size_t>(x_max), 0);
        for (int x = 1; x <= x_max; ++x) diffs[static_cast<std::size_t>(x - 1)] = uniform01(rng) < cfg.rho0(x / n) ? 1 : 0;
        start = diagram_from_differences(diffs);
      }
      out.jumps += simulate_observed(start, kind, params.epsilon, cfg.N, cfg.t_probes, rng,
                                     [&](std::size_t k, double, const DiagramProcess& proc) {
                                       YoungDiagram p = proc.state();
                                       std::vector<double> f(cfg.space_probes.size());
                                       if (kind == Statistics::RU) {
                                         for (std::size_t j = 0; j < f.size(); ++j) {
                                           double u = cfg.space_probes[j];
                                           f[j] = std::sqrt(n) * (height_function(p, n * u) / n - psi_ref(k, u));
                                         }
                                       } else {
                                         Profile bar;
                                         bar.grid = v_grid;
                                         bar.domain = DomainKind::whole_line;
                                         bar.values = line_field(p, cfg.N, v_grid, rho_tail);
                                         Profile pu = transform_line_to_u(bar, rho_line, u_probe_grid, 0.0);
                                         for (std::size_t j = 0; j < f.size(); ++j) f[j] = pu.interpolate(cfg.space_probes[j]);
                                       }
                                       out.stats[k].add(f);
                                       for (std::size_t j = 0; j < hydro_u.size(); ++j)
                                         out.hydro[k][j].add(height_function(p, n * hydro_u[j]) / n);
                                     });
    }
  });

  rep.pass = true;
  for (std::size_t k = 0; k < cfg.t_probes.size(); ++k) {
    EnsembleStats total(cfg.space_probes);
    std::vector<CompensatedSum> hydro(hydro_u.size());
    for (auto& p : parts) {
      total.merge(p.stats[k]);
      for (std::size_t j = 0; j < hydro.size(); ++j) hydro[j].merge(p.hydro[k][j]);
    }
    TolerancePolicy policy{cfg.z, cfg.bias < 0.0 ? 2.0 / std::sqrt(n) : cfg.bias, 0.0};
    CovarianceReport r = compare_covariance(total, oracle_at[k], policy);
    if (cfg.initial == InitialKind::equilibrium)
      r.oracle = matrix_at(cfg.space_probes, [&](double u, double v) { return static_covariance(kind, u, v); });
    r.claim = std::string("dynamic covariance, ") + to_string(kind);
    r.kind = kind;
    r.N = cfg.N;
    r.seed = cfg.seed;
    r.t = cfg.t_probes[k];
    double d = 0.0;
    for (std::size_t j = 0; j < hydro_u.size(); ++j)
      d = std::max(d, std::abs(hydro[j].value() / static_cast<double>(cfg.M) - psi_ref(k, hydro_u[j])));
    rep.hydro_distance.push_back(d);
    rep.pass = rep.pass && r.pass;
    rep.per_time.push_back(std::move(r));
  }
  for (auto& p : parts) rep.jumps += p.jumps;
  return rep;
}

namespace {

// conductances 1/g at half points of the grid and cell widths
struct Stiffness {
  std::vector<double> k;  // k[i] between nodes i and i+1
  std::vector<double> h;  // cell widths, half at the left end
};

Stiffness stiffness(Statistics kind, const UniformGrid& grid, double g_scale) {
  if (grid.coordinate != Coordinate::linear) throw ConfigError("Q needs a linear grid");
  if (grid.count < 3) throw ConfigError("grid too small");
  if (kind == Statistics::U && !(grid.start > 0.0)) throw ConfigError("U operator needs u_min > 0");
  if (kind == Statistics::RU && grid.start < 0.0) throw ConfigError("RU operator lives on u >= 0");
  Stiffness s;
  s.k.resize(grid.count - 1);
  s.h.assign(grid.count, grid.step);
  s.h[0] = 0.5 * grid.step;
  for (std::size_t i = 0; i + 1 < grid.count; ++i)
    s.k[i] = 1.0 / (g_scale * equilibrium_g(kind, grid.at(i) + 0.5 * grid.step));
  return s;
}

// K over nodes 0..n-2 (last node Dirichlet): diag and off-diagonal
void stiffness_rows(const Stiffness& s, double du, std::vector<double>& diag, std::vector<double>& off) {
  const std::size_t m = s.h.size() - 1;
  diag.assign(m, 0.0);
  off.assign(m > 0 ? m - 1 : 0, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    diag[i] = ((i > 0 ? s.k[i - 1] : 0.0) + s.k[i]) / du;
    if (i + 1 < m) off[i] = -s.k[i] / du;
  }
}

double lowest_weighted(const std::vector<double>& diag, const std::vector<double>& off, const std::vector<double>& w) {
  const auto m = static_cast<Eigen::Index>(diag.size());
  Eigen::VectorXd d(m), e(std::max<Eigen::Index>(m - 1, 0));
  for (Eigen::Index i = 0; i < m; ++i) d(i) = diag[static_cast<std::size_t>(i)] / w[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    e(i) = off[static_cast<std::size_t>(i)] / std::sqrt(w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i + 1)]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw InvariantError("tridiagonal eigen-solve failed");
  double lam = es.eigenvalues().minCoeff();
  if (lam < -1e-8) throw InvariantError("discrete operator has a negative eigenvalue");
  return lam;
}

}  // namespace

Eigen::MatrixXd green_kernel_solve(Statistics kind, const UniformGrid& grid, double extension) {
  const double ext = extension < 0.0 ? 12.0 / shape_constant(kind) : extension;
  UniformGrid big = grid;
  big.count = grid.count + static_cast<std::size_t>(std::ceil(ext / grid.step));
  Stiffness s = stiffness(kind, big, 1.0);
  std::vector<double> diag, off;
  stiffness_rows(s, grid.step, diag, off);
  const std::size_t m = diag.size();
  const auto n = static_cast<Eigen::Index>(grid.count);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> rhs, scratch;
  // without an extension the last grid node is the Dirichlet node
  const auto solved = std::min(n, static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < solved; ++j) {
    rhs.assign(m, 0.0);
    rhs[static_cast<std::size_t>(j)] = 1.0;
    std::vector<double> lower(m, 0.0), upper(m, 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i) {
      upper[i] = off[i];
      lower[i + 1] = off[i];
    }
    try {
      detail::solve_tridiagonal(lower, diag, upper, rhs, scratch);
    } catch (const std::runtime_error&) {
      throw ConfigError("singular discrete operator");
    }
    for (Eigen::Index i = 0; i < solved; ++i) G(i, j) = rhs[static_cast<std::size_t>(i)];
  }
  return 0.5 * (G + G.transpose());
}

double poincare_constant(Statistics kind, const UniformGrid& grid, double g_scale) {
  Stiffness s = stiffness(kind, grid, g_scale);
  std::vector<double> diag, off;
  stiffness_rows(s, grid.step, diag, off);
  std::vector<double> w(s.h.begin(), s.h.end() - 1);
  return lowest_weighted(diag, off, w);
}

double relaxation_gap(Statistics kind, const UniformGrid& grid) {
  Stiffness s = stiffness(kind, grid, 1.0);
  std::vector<double> diag, off;
  stiffness_rows(s, grid.step, diag, off);
  std::vector<double> w(diag.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double u = grid.at(i);
    w[i] = s.h[i] * (kind == Statistics::RU ? 1.0 / equilibrium_g(kind, u) : std::exp(kAlpha * u));
  }
  return lowest_weighted(diag, off, w);
}

double rayleigh_quotient(Statistics kind, const UniformGrid& grid, const std::vector<double>& f) {
  if (f.size() != grid.count) throw ConfigError("function does not match the grid");
  Stiffness s = stiffness(kind, grid, 1.0);
  double num = 0.0, den = 0.0;
  const std::size_t n = grid.count;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double right = i + 2 == n ? 0.0 : f[i + 1];
    num += s.k[i] * (right - f[i]) * (right - f[i]) / grid.step;
    den += s.h[i] * f[i] * f[i];
  }
  return num / den;
}

SpdeInvariantReport spde_invariant_experiment(const SpdeInvariantConfig& cfg) {
  const UniformGrid& grid = cfg.grid;
  check_probes(cfg.kind, cfg.probes, grid.start, grid.back());
  if (cfg.M < 2) throw ConfigError("need at least two paths");
  SpdeInvariantReport rep;
  rep.gap = relaxation_gap(cfg.kind, grid);
  rep.t_long = cfg.t_long > 0.0 ? cfg.t_long : std::log(50.0) / rep.gap;
  const std::size_t steps = static_cast<std::size_t>(std::ceil(rep.t_long / cfg.dt - 1e-9));
  PdeGrid pg;
  pg.space = grid;
  pg.dt = rep.t_long / static_cast<double>(steps);
  pg.t_end = rep.t_long;
  CoefficientSchedule schedule = equilibrium_schedule(cfg.kind, grid);

  const std::size_t chunks = (cfg.M + kChunk - 1) / kChunk;
  std::vector<EnsembleStats> parts(chunks, EnsembleStats(cfg.probes));
  std::vector<std::pair<std::size_t, double>> where;
  for (double u : cfg.probes) where.push_back(locate(grid, u));
  parallel_chunks(chunks, cfg.threads, [&](std::size_t c) {
    std::vector<double> zero(grid.count, 0.0);
    std::size_t end = std::min(cfg.M, (c + 1) * kChunk);
    for (std::size_t path = c * kChunk; path < end; ++path) {
      NoiseField noise(grid, pg.dt, NoiseSymmetry::plain, derive_seed(cfg.seed, path));
      run_linear_spde(zero, schedule, pg, &noise, [&](double t, const std::vector<double>& f) {
        if (t < pg.t_end * (1.0 - 1e-12)) return;
        std::vector<double> v(where.size());
        for (std::size_t j = 0; j < where.size(); ++j) v[j] = (1 - where[j].second) * f[where[j].first] + where[j].second * f[where[j].first + 1];
        parts[c].add(v);
      });
    }
  });
  EnsembleStats total(cfg.probes);
  for (const auto& p : parts) total.merge(p);

  Eigen::MatrixXd theory = matrix_at(cfg.probes, [&](double u, double v) { return static_covariance(cfg.kind, u, v); });
  rep.covariance = compare_covariance(total, theory, TolerancePolicy{cfg.z, 0.0, cfg.relative});
  rep.covariance.claim = std::string("SPDE invariant covariance, ") + to_string(cfg.kind);
  rep.covariance.kind = cfg.kind;
  rep.covariance.seed = cfg.seed;
  rep.covariance.t = rep.t_long;

  SpdeCoefficients co;
  schedule(0.0, co);
  LinearSystem sys = assemble_system(co, grid);
  rep.lyapunov = matrix_on_probes(embed(lyapunov_solve(sys.A, sys.noise_rate), sys.free_nodes, grid.count), grid, cfg.probes);
  rep.green = matrix_on_probes(green_kernel_solve(cfg.kind, grid, 0.0), grid, cfg.probes);
  rep.covariance.oracle = rep.lyapunov;
  for (Eigen::Index i = 0; i < rep.green.rows(); ++i)
    for (Eigen::Index j = 0; j < rep.green.cols(); ++j)
      rep.lyapunov_vs_green =
          std::max(rep.lyapunov_vs_green, std::abs(rep.lyapunov(i, j) - rep.green(i, j)) / std::abs(rep.green(i, j)));
  return rep;
}

DecayReport transient_decay(Statistics kind, const UniformGrid& grid, double dt, double t_end) {
  DecayReport rep;
  rep.gap = relaxation_gap(kind, grid);
  CoefficientSchedule schedule = equilibrium_schedule(kind, grid);
  std::vector<double> f0(grid.count), w(grid.count);
  const double mid = grid.start + 0.25 * (grid.back() - grid.start);
  for (std::size_t i = 0; i < grid.count; ++i) {
    double u = grid.at(i);
    f0[i] = i + 1 == grid.count ? 0.0 : std::exp(-(u - mid) * (u - mid));
    double h = i == 0 || i + 1 == grid.count ? 0.5 * grid.step : grid.step;
    w[i] = h * (kind == Statistics::RU ? 1.0 / equilibrium_g(kind, u) : std::exp(kAlpha * u));
  }
  PdeGrid pg;
  pg.space = grid;
  pg.dt = dt;
  pg.t_end = t_end;
  pg.output_every = t_end / 50.0;
  run_linear_spde(f0, schedule, pg, nullptr, [&](double t, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i] * f[i];
    rep.times.push_back(t);
    rep.norms.push_back(std::sqrt(s));
  });
  double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    if (rep.times[k] < 0.5 * t_end) continue;
    double x = rep.times[k], y = std::log(rep.norms[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    cnt += 1;
  }
  rep.rate = -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  return rep;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("KS needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double x = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

double ks_critical_1pct(std::size_t n, std::size_t m) {
  const double a = static_cast<double>(n), b = static_cast<double>(m);
  return 1.628 * std::sqrt((a + b) / (a * b));
}

namespace {
std::array<double, 3> central_moments(const std::vector<double>& x) {
  if (x.size() < 2) throw ConfigError("need at least two values");
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    double d = v - mean, d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  double n = static_cast<double>(x.size());
  return {m2 / n, m3 / n, m4 / n};
}
}  // namespace

double sample_skewness(const std::vector<double>& x) {
  auto m = central_moments(x);
  return m[1] / std::pow(m[0], 1.5);
}

double sample_excess_kurtosis(const std::vector<double>& x) {
  auto m = central_moments(x);
  return m[2] / (m[0] * m[0]) - 3.0;
}

std::vector<InvarianceStatistic> microscopic_invariance(Statistics kind, int N, std::size_t M, double t,
                                                        std::uint64_t seed, unsigned threads) {
  if (M < 2 || !(t > 0.0)) throw ConfigError("invariance check needs M >= 2 and t > 0");
  const GrandcanonicalParams params = make_params(kind, N);
  const GrandcanonicalSampler sampler(params, kind);
  std::vector<std::array<double, 3>> before(M), after(M);
  auto observe = [](const YoungDiagram& p) {
    double ones = 0;
    for (auto it = p.columns.rbegin(); it != p.columns.rend() && *it == 1; ++it) ones += 1;
    return std::array<double, 3>{static_cast<double>(p.area()), static_cast<double>(p.column(1)), ones};
  };
  const std::size_t chunks = (M + kChunk - 1) / kChunk;
  parallel_chunks(chunks, threads, [&](std::size_t c) {
    std::size_t end = std::min(M, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      Rng ra(derive_seed(seed, 2 * i));
      before[i] = observe(sampler.sample(ra));
      Rng rb(derive_seed(seed, 2 * i + 1));
      YoungDiagram start = sampler.sample(rb);
      simulate_observed(start, kind, params.epsilon, N, {t}, rb,
                        [&](std::size_t, double, const DiagramProcess& p) { after[i] = observe(p.state()); });
    }
  });
  const char* names[3] = {"area", "largest part", "site-1 height difference"};
  std::vector<InvarianceStatistic> out;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> a(M), b(M);
    for (std::size_t i = 0; i < M; ++i) {
      a[i] = before[i][static_cast<std::size_t>(k)];
      b[i] = after[i][static_cast<std::size_t>(k)];
    }
    InvarianceStatistic s;
    s.name = names[k];
    s.ks = ks_statistic(a, b);
    s.critical = ks_critical_1pct(M, M);
    s.pass = s.ks < s.critical;
    out.push_back(s);
  }
  return out;
}

NoisePairCheck reflected_noise_check(const NoiseField& noise, const std::function<double(double)>& phi,
                                     const std::function<double(double)>& psi, std::size_t increments, double z) {
  if (increments < 2) throw ConfigError("need at least two increments");
  const UniformGrid& g = noise.grid();
  std::vector<double> fp(g.count), fq(g.count), inc;
  for (std::size_t i = 0; i < g.count; ++i) {
    fp[i] = phi(g.at(i));
    fq[i] = psi(g.at(i));
  }
  CompensatedSum s1, s2;
  for (std::size_t k = 0; k < increments; ++k) {
    noise.cell_increments(k, inc);
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < g.count; ++i) {
      a += fp[i] * inc[i];
      b += fq[i] * inc[i];
    }
    double x = a * b / noise.dt();
    s1.add(x);
    s2.add(x * x);
  }
  const double n = static_cast<double>(increments);
  NoisePairCheck r;
  r.estimate = s1.value() / n;
  r.se = std::sqrt(std::max(0.0, s2.value() / n - r.estimate * r.estimate) / (n - 1.0));
  // fine trapezoid of phi(u) (psi(u) + psi(-u))
  const std::size_t fine = 20 * (g.count - 1);
  const double a = g.start, b = g.back(), h = (b - a) / static_cast<double>(fine);
  double acc = 0.0;
  for (std::size_t i = 0; i <= fine; ++i) {
    double u = a + h * static_cast<double>(i);
    double w = i == 0 || i == fine ? 0.5 : 1.0;
    acc += w * phi(u) * (psi(u) + psi(-u));
  }
  r.target = acc * h;
  r.pass = std::abs(r.estimate - r.target) <= z * r.se;
  return r;
}

}  // namespace ydl
