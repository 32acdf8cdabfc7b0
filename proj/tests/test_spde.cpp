#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "generators.hpp"
#include "ydl/ensembles.hpp"
#include "ydl/fluctlab.hpp"
#include "ydl/pde.hpp"
#include "ydl/spde.hpp"

using namespace ydl;

namespace {

ProfileSeries frozen(const Profile& p) {
  ProfileSeries s;
  s.times = {0.0, 1e6};
  s.frames = {p, p};
  return s;
}

Profile zeros(const UniformGrid& g) { return make_profile(g, [](double) { return 0.0; }); }

bool all_zero(const ProfileSeries& s) {
  for (const auto& f : s.frames)
    for (double v : f.values)
      if (v != 0.0) return false;
  return true;
}

}  // namespace

TEST_SUITE("spde") {

TEST_CASE("Neumann heat kernel") {
  CHECK(neumann_heat_kernel(0.3, 0.0, 0.0) == doctest::Approx(2.0 / std::sqrt(4 * std::numbers::pi * 0.3)));
  CHECK_THROWS_AS(neumann_heat_kernel(0.0, 1.0, 1.0), DomainError);
  Rng rng(61);
  for (int k = 0; k < 20; ++k) {
    double t = gen::real_in(rng, 0.05, 2.0), u = gen::real_in(rng, 0.0, 3.0), v = gen::real_in(rng, 0.0, 3.0);
    CHECK(neumann_heat_kernel(t, u, v) == doctest::Approx(neumann_heat_kernel(t, v, u)));
    // Simpson over [0, u + 40 sqrt t]
    const int n = 20000;
    const double hi = u + 40.0 * std::sqrt(t), h = hi / n;
    double s = neumann_heat_kernel(t, u, 0.0) + neumann_heat_kernel(t, u, hi);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * neumann_heat_kernel(t, u, i * h);
    CHECK(s * h / 3.0 == doctest::Approx(1.0).epsilon(1e-6));
    const double d = 1e-6;
    CHECK(std::abs(neumann_heat_kernel(t, d, v) - neumann_heat_kernel(t, -d, v)) < 1e-12);
  }
}

TEST_CASE("noise field moments and replay") {
  UniformGrid g = UniformGrid::span(0.0, 5.0, 0.05);
  const double dt = 0.01;
  NoiseField w(g, dt, NoiseSymmetry::plain, 9);
  std::vector<double> a, b;
  w.increments(3, a);
  w.increments(3, b);
  CHECK(a == b);
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  std::size_t n = 0;
  for (std::size_t step = 0; step < 400; ++step) {
    w.increments(step, a);
    for (double x : a) {
      s1 += x;
      s2 += x * x;
      s4 += x * x * x * x;
      ++n;
    }
  }
  const double var = 1.0 / (dt * g.step);
  CHECK(std::abs(s1 / n) < 5.0 * std::sqrt(var / n));
  double m2 = s2 / n;
  CHECK(std::abs(m2 - var) < 5.0 * std::sqrt((s4 / n - m2 * m2) / n));

  UniformGrid sym = UniformGrid::span(-3.0, 3.0, 0.1);
  NoiseField r(sym, dt, NoiseSymmetry::even_reflected, 4);
  r.increments(0, a);
  for (std::size_t i = 0; i < sym.count; ++i) CHECK(a[i] == a[sym.count - 1 - i]);
  CHECK(r.independent_nodes() == (sym.count + 1) / 2);
  CHECK_THROWS_AS(NoiseField(UniformGrid::span(-3.0, 2.0, 0.1), dt, NoiseSymmetry::even_reflected, 1), ConfigError);
}

TEST_CASE("reflected noise covariance on three pairs") {
  NoiseField w(UniformGrid::span(-8.0, 8.0, 0.05), 0.01, NoiseSymmetry::even_reflected, 12);
  using Fn = std::function<double(double)>;
  Fn f1 = [](double u) { return std::exp(-u * u); };
  Fn f2 = [](double u) { return std::exp(-(u - 0.5) * (u - 0.5)); };
  Fn f3 = [](double u) { return std::exp(-2.0 * (u + 1.0) * (u + 1.0)); };
  Fn f4 = [](double u) { return u * std::exp(-u * u / 2.0) + 0.5 * std::exp(-(u - 1) * (u - 1)); };
  for (const auto& [phi, psi] : std::vector<std::pair<Fn, Fn>>{{f1, f1}, {f2, f3}, {f4, f1}}) {
    NoisePairCheck c = reflected_noise_check(w, phi, psi, 10000);
    CHECK(c.se > 0.0);
    CHECK(c.pass);
  }
}

TEST_CASE("zero noise and zero start stay zero") {
  const double dt = 0.01;
  UniformGrid half = UniformGrid::span(0.0, 8.0, 0.05);
  PdeGrid g{half, dt, 0.3, Scheme::semi_implicit, 0.1};
  ProfileSeries rr = frozen(stationary_profile(StationaryKind::rho_ru, half, kBeta));
  CHECK(all_zero(solve_spde_ru(zeros(half), rr, kBeta, g, nullptr)));

  UniformGrid uh = UniformGrid::span(0.05, 8.0, 0.05);
  PdeGrid gu{uh, dt, 0.3, Scheme::semi_implicit, 0.1};
  ProfileSeries ru = frozen(stationary_profile(StationaryKind::rho_u, uh, kAlpha));
  CHECK(all_zero(solve_spde_u(zeros(uh), ru, kAlpha, gu, nullptr)));

  UniformGrid line = UniformGrid::span(-8.0, 8.0, 0.05);
  PdeGrid gl{line, dt, 0.3, Scheme::semi_implicit, 0.1};
  ProfileSeries rl = frozen(stationary_profile(StationaryKind::rho_line, line, kAlpha));
  CHECK(all_zero(solve_spde_line(zeros(line), rl, kAlpha, gl, nullptr)));

  ProfileSeries om = frozen(stationary_profile(StationaryKind::omega, half, kBeta));
  CHECK(all_zero(solve_spde_phi_bar(zeros(line), om, rr, kBeta, gl, nullptr)));

  ProfileSeries bad = frozen(make_profile(uh, [](double) { return -0.1; }));
  CHECK_THROWS_AS(solve_spde_u(zeros(uh), bad, kAlpha, gu, nullptr), DomainError);
}

TEST_CASE("linearity with a shared noise path") {
  UniformGrid half = UniformGrid::span(0.0, 8.0, 0.05);
  PdeGrid g{half, 0.01, 0.3, Scheme::semi_implicit, 0.0};
  ProfileSeries rr = frozen(stationary_profile(StationaryKind::rho_ru, half, kBeta));
  NoiseField w(half, 0.01, NoiseSymmetry::plain, 3);
  Profile f = make_profile(half, [](double u) { return std::exp(-u * u); });
  Profile h = make_profile(half, [](double u) { return u * std::exp(-u); });
  Profile fh = f;
  for (std::size_t i = 0; i < fh.size(); ++i) fh.values[i] += h.values[i];
  Profile a = solve_spde_ru(fh, rr, kBeta, g, &w).final_frame();
  Profile b = solve_spde_ru(f, rr, kBeta, g, &w).final_frame();
  Profile c = solve_spde_ru(h, rr, kBeta, g, nullptr).final_frame();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values[i] == doctest::Approx(b.values[i] + c.values[i]).epsilon(1e-12));
}

TEST_CASE("line equation without noise matches the explicit solver") {
  UniformGrid line = UniformGrid::span(-8.0, 8.0, 0.05);
  const double dt = 0.0005, t = 0.5;
  Profile rho = stationary_profile(StationaryKind::rho_line, line, kAlpha);
  ProfileSeries rl = frozen(rho);
  Profile f0 = make_profile(line, [](double v) { return std::exp(-v * v); }, DomainKind::whole_line);
  PdeGrid g{line, dt, t, Scheme::semi_implicit, 0.0};
  Profile cn = solve_spde_line(f0, rl, kAlpha, g, nullptr).final_frame();
  CoefficientField coeff = [&](double, LinearCoefficients& lc) {
    lc.a.assign(line.count, 1.0);
    lc.c.assign(line.count, 0.0);
    lc.b.resize(line.count);
    for (std::size_t i = 0; i < line.count; ++i) lc.b[i] = kAlpha * (1.0 - 2.0 * rho.values[i]);
  };
  PdeGrid ge{line, dt, t, Scheme::explicit_euler, 0.0};
  Profile ex = solve_linear_explicit(f0, coeff, BoundaryKind::dirichlet_farfield, BoundaryKind::dirichlet_farfield, ge)
                   .final_frame();
  CHECK(sup_distance(cn, ex) < 1e-4);
}

TEST_CASE("symmetrised equation: flat decay and mirror symmetry") {
  UniformGrid line = UniformGrid::span(-6.0, 6.0, 0.05);
  UniformGrid half = UniformGrid::span(0.0, 6.0, 0.05);
  ProfileSeries om = frozen(stationary_profile(StationaryKind::omega, half, kBeta));
  ProfileSeries rr = frozen(stationary_profile(StationaryKind::rho_ru, half, kBeta));
  PdeGrid g{line, 0.01, 1.0, Scheme::semi_implicit, 0.0};
  Profile c0 = make_profile(line, [](double) { return 2.0; }, DomainKind::whole_line);
  Profile c1 = solve_spde_phi_bar(c0, om, rr, kBeta, g, nullptr).final_frame();
  for (double v : c1.values) CHECK(v == doctest::Approx(2.0 * std::exp(-kBeta * kBeta / 4.0)).epsilon(1e-5));

  NoiseField w(line, 0.01, NoiseSymmetry::even_reflected, 5);
  Profile s0 = make_profile(line, [](double u) { return std::exp(-u * u); }, DomainKind::whole_line);
  Profile s1 = solve_spde_phi_bar(s0, om, rr, kBeta, g, &w).final_frame();
  for (std::size_t i = 0; i < line.count; ++i)
    CHECK(s1.values[i] == doctest::Approx(s1.values[line.count - 1 - i]).epsilon(1e-12));

  NoiseField plain(line, 0.01, NoiseSymmetry::plain, 5);
  CHECK_THROWS_AS(solve_spde_phi_bar(s0, om, rr, kBeta, g, &plain), ConfigError);
}

TEST_CASE("half-line RU field and the recovered symmetrised field agree in law") {
  const double du = 0.05, dt = 0.01, t = 0.5;
  UniformGrid half = UniformGrid::span(0.0, 12.0, du);
  UniformGrid line = UniformGrid::span(-12.0, 12.0, du);
  Profile om0 = stationary_profile(StationaryKind::omega, half, kBeta);
  ProfileSeries om = frozen(om0);
  ProfileSeries rr = frozen(stationary_profile(StationaryKind::rho_ru, half, kBeta));
  PdeGrid gh{half, dt, t, Scheme::semi_implicit, 0.0};
  PdeGrid gl{line, dt, t, Scheme::semi_implicit, 0.0};
  const std::vector<double> probes{0.0, 0.5, 1.0, 2.0};
  EnsembleStats direct(probes), recovered(probes);
  for (std::size_t k = 0; k < 2000; ++k) {
    // the same seed gives both fields the same draws on the half-line cells
    NoiseField wh(half, dt, NoiseSymmetry::plain, derive_seed(71, k));
    NoiseField wl(line, dt, NoiseSymmetry::even_reflected, derive_seed(71, k));
    Profile a = solve_spde_ru(zeros(half), rr, kBeta, gh, &wh).final_frame();
    Profile b = recover_psi_r(solve_spde_phi_bar(zeros(line), om, rr, kBeta, gl, &wl).final_frame(), om0, kBeta);
    std::vector<double> va, vb;
    for (double u : probes) {
      va.push_back(a.interpolate(u));
      vb.push_back(b.interpolate(u));
    }
    direct.add(va);
    recovered.add(vb);
  }
  auto ca = direct.covariance(), cb = recovered.covariance();
  for (int i = 0; i < 4; ++i) CHECK(cb(i, i) == doctest::Approx(ca(i, i)).epsilon(0.05));
}

TEST_CASE("Gaussian marginals of the RU field") {
  UniformGrid half = UniformGrid::span(0.0, 8.0, 0.1);
  PdeGrid g{half, 0.01, 0.5, Scheme::semi_implicit, 0.0};
  ProfileSeries rr = frozen(stationary_profile(StationaryKind::rho_ru, half, kBeta));
  const std::size_t M = 5000;
  std::vector<double> x;
  for (std::size_t k = 0; k < M; ++k) {
    NoiseField w(half, 0.01, NoiseSymmetry::plain, derive_seed(72, k));
    x.push_back(solve_spde_ru(zeros(half), rr, kBeta, g, &w).final_frame().interpolate(0.5));
  }
  CHECK(std::abs(sample_skewness(x)) < 5.0 * std::sqrt(6.0 / M));
  CHECK(std::abs(sample_excess_kurtosis(x)) < 5.0 * std::sqrt(24.0 / M));
}

TEST_CASE("Lyapunov solution and covariance propagation") {
  Eigen::MatrixXd A(3, 3);
  A << -2.0, 0.5, 0.0, 0.3, -1.5, 0.2, 0.0, 0.4, -1.0;
  Eigen::VectorXd q(3);
  q << 1.0, 0.5, 2.0;
  Eigen::MatrixXd X = lyapunov_solve(A, q);
  Eigen::MatrixXd res = A * X + X * A.transpose();
  res.diagonal() += q;
  CHECK(res.cwiseAbs().maxCoeff() < 1e-12);

  UniformGrid half = UniformGrid::span(0.0, 6.0, 0.1);
  ProfileSeries rr = frozen(stationary_profile(StationaryKind::rho_ru, half, kBeta));
  CoefficientSchedule sch = ru_schedule(rr, kBeta, half);
  SpdeCoefficients co;
  sch(0.0, co);
  LinearSystem sys = assemble_system(co, half);
  Eigen::MatrixXd L = lyapunov_solve(sys.A, sys.noise_rate);
  Eigen::MatrixXd P = propagate_covariance(Eigen::MatrixXd::Zero(sys.A.rows(), sys.A.cols()), sch, half, 0.05, 60.0);
  CHECK((P - L).norm() / L.norm() < 1e-6);
}

TEST_CASE("line and half-line variance targets are consistent") {
  UniformGrid line = UniformGrid::span(-12.0, 12.0, 0.05);
  ProfileSeries rl = frozen(stationary_profile(StationaryKind::rho_line, line, kAlpha));
  CoefficientSchedule sch = line_schedule(rl, kAlpha, line);
  SpdeCoefficients co;
  sch(0.0, co);
  LinearSystem sys = assemble_system(co, line);
  Eigen::MatrixXd X = lyapunov_solve(sys.A, sys.noise_rate);
  for (double u : {0.25, 0.5, 1.0, 2.0}) {
    double v = equilibrium_zeta_inverse(u, kAlpha);
    // nearest free node
    std::size_t best = 0;
    for (std::size_t k = 0; k < sys.free_nodes.size(); ++k)
      if (std::abs(line.at(sys.free_nodes[k]) - v) < std::abs(line.at(sys.free_nodes[best]) - v)) best = k;
    double vv = line.at(sys.free_nodes[best]);
    double r = rho_infinity(vv, 1.0, kAlpha);
    double var_u = X(best, best) / ((1 - r) * (1 - r));
    CHECK(var_u == doctest::Approx(static_covariance(Statistics::U, equilibrium_zeta(vv, kAlpha), equilibrium_zeta(vv, kAlpha))).epsilon(0.03));
  }
}

TEST_CASE("line to half-line transform") {
  UniformGrid line = UniformGrid::span(-14.0, 14.0, 0.001);
  Profile rho = stationary_profile(StationaryKind::rho_line, line, kAlpha);
  LineChart chart(rho);
  for (double u : {0.1, 0.5, 1.0, 2.0, 5.0}) CHECK(std::abs(chart.inverse(u) - equilibrium_zeta_inverse(u, kAlpha)) < 1e-6);

  UniformGrid ug = UniformGrid::span(0.1, 5.0, 0.1);
  Profile z = transform_line_to_u(make_profile(line, [](double) { return 0.0; }), rho, ug);
  for (double v : z.values) CHECK(v == 0.0);
  Profile f = make_profile(line, [](double v) { return std::exp(-v * v / 4.0); });
  Profile t = transform_line_to_u(f, rho, ug);
  for (std::size_t i = 0; i < ug.count; ++i) {
    double v = equilibrium_zeta_inverse(ug.at(i), kAlpha);
    CHECK(t.values[i] == doctest::Approx(std::exp(-v * v / 4.0) / (1.0 - rho_infinity(v, 1.0, kAlpha))).epsilon(1e-5));
  }
  Profile full = make_profile(line, [](double) { return 1.0; });
  CHECK_THROWS_AS(transform_line_to_u(f, full, ug), DomainError);
}

TEST_CASE("rotated line field") {
  Profile f = make_profile(UniformGrid::span(-4.0, 4.0, 0.1), [](double v) { return std::sin(v); });
  Profile r = rotate_line_field(f);
  const double s = std::numbers::sqrt2;
  for (double v : {-2.0, 0.3, 1.7}) CHECK(r.interpolate(v) == doctest::Approx(s * f.interpolate(s * v)));
}

TEST_CASE("natural boundary of the U equation") {
  NaturalBoundaryReport rep = natural_boundary_check([](double u) { return rho_u_infinity(u, kAlpha); }, kAlpha);
  CHECK(rep.diverging);
  REQUIRE(rep.scale_values.size() == 5);
  for (std::size_t k = 0; k + 1 < rep.scale_values.size(); ++k) CHECK(rep.scale_values[k + 1] < rep.scale_values[k]);
  for (double g : rep.growth) CHECK(g >= 2.0);
  CHECK(rep.sigma_at_unit_density == doctest::Approx(0.5));

  NaturalBoundaryReport bounded = natural_boundary_check([](double) { return 1.0; }, kAlpha);
  CHECK_FALSE(bounded.diverging);
}

}
