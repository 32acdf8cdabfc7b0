#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "ydl/ensembles.hpp"
#include "ydl/pde.hpp"

using namespace ydl;

TEST_SUITE("pde") {

TEST_CASE("closed-form profiles") {
  CHECK(rho_infinity(0.0, 1.0, kAlpha) == doctest::Approx(0.5));
  for (double C : {0.3, 2.0, 7.0})
    for (double v : {-2.0, 0.0, 1.3})
      CHECK(rho_infinity(v, C, kAlpha) == doctest::Approx(rho_infinity(v - std::log(C) / kAlpha, 1.0, kAlpha)));
  for (double u : {0.1, 0.5, 2.0}) {
    double v = equilibrium_zeta_inverse(u, kAlpha);
    CHECK(v == doctest::Approx(std::log(std::expm1(kAlpha * u)) / kAlpha));
    CHECK(equilibrium_zeta(v, kAlpha) == doctest::Approx(u));
    double r = rho_infinity(v, 1.0, kAlpha);
    CHECK(rho_u_infinity(u, kAlpha) == doctest::Approx(r / (1.0 - r)));
  }
  CHECK(omega_infinity(0.0, kBeta) == doctest::Approx(2.0));
}

TEST_CASE("Burgers: equilibrium is stationary") {
  const double du = 0.05;
  PdeGrid g{UniformGrid::span(-10.0, 10.0, du), 0.4 * du * du, 1.0, Scheme::explicit_euler, 0.1};
  for (double C : {1.0, 3.0}) {
    Profile r = stationary_profile(StationaryKind::rho_line, g.space, kAlpha, C);
    CHECK(solve_burgers(r, kAlpha, g).max_deviation(r) < 1e-4);
  }
}

TEST_CASE("Burgers: constants stay constant on a periodic domain") {
  PdeGrid g{UniformGrid::span(0.0, 5.0, 0.05), 0.0008, 0.5, Scheme::explicit_euler, 0.0};
  Profile c = make_profile(g.space, [](double) { return 0.37; }, DomainKind::whole_line);
  ProfileSeries s = solve_burgers(c, kAlpha, g, BurgersBoundary::periodic);
  for (double v : s.final_frame().values) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
}

TEST_CASE("Burgers: comparison and range (property)") {
  Rng rng(51);
  const double du = 0.1;
  PdeGrid g{UniformGrid::span(-10.0, 10.0, du), 0.4 * du * du, 1.0, Scheme::explicit_euler, 0.1};
  for (int k = 0; k < 5; ++k) {
    double c1 = gen::real_in(rng, 0.3, 1.0), c2 = c1 * gen::real_in(rng, 1.0, 3.0);
    gen::Bump b = gen::bump(rng, -3.0, 3.0);
    auto lower = [&](double v) { return rho_infinity(v, c1, kAlpha) * (1.0 - 0.2 * b(v) / b.height); };
    Profile p1 = make_profile(g.space, lower, DomainKind::whole_line);
    Profile p2 = stationary_profile(StationaryKind::rho_line, g.space, kAlpha, c2);
    ProfileSeries s1 = solve_burgers(p1, kAlpha, g), s2 = solve_burgers(p2, kAlpha, g);
    for (std::size_t f = 0; f < s1.frames.size(); ++f)
      for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(s1.frames[f].values[i] <= s2.frames[f].values[i] + 1e-6);
        CHECK(s1.frames[f].values[i] >= 0.0);
        CHECK(s1.frames[f].values[i] <= 1.0);
      }
  }
}

TEST_CASE("Burgers rejects an unstable step") {
  PdeGrid g{UniformGrid::span(-5.0, 5.0, 0.05), 0.01, 0.1, Scheme::explicit_euler, 0.0};
  Profile r = stationary_profile(StationaryKind::rho_line, g.space, kAlpha);
  CHECK_THROWS_AS(solve_burgers(r, kAlpha, g), ConfigError);
}

TEST_CASE("omega equation") {
  PdeGrid g{UniformGrid::span(0.0, 24.0 / kBeta, 0.02), 0.01, 1.0, Scheme::semi_implicit, 0.1};
  Profile w = stationary_profile(StationaryKind::omega, g.space, kBeta);
  ProfileSeries s = solve_omega(w, kBeta, g);
  CHECK(s.max_deviation(w) < 1e-4);

  // a non-stationary start keeps omega >= 1 and the far value 1
  Profile w0 = make_profile(g.space, [](double u) { return 1.0 + 1.5 * std::exp(-kBeta * u) * (1.0 + 0.5 * std::exp(-u)); });
  ProfileSeries t = solve_omega(w0, kBeta, g);
  for (const auto& f : t.frames) {
    for (double v : f.values) CHECK(v >= 1.0 - 1e-12);
    CHECK(f.values.back() == 1.0);
  }
}

TEST_CASE("U height equation keeps the limit curve") {
  PdeGrid g{UniformGrid::span(1e-3, 15.0, 0.02, Coordinate::logarithmic), 0.0, 1.0, Scheme::explicit_euler, 0.1};
  Profile p = stationary_profile(StationaryKind::psi_u, g.space, kAlpha);
  g.dt = psi_u_stable_dt(p);
  CHECK(solve_psi_u(p, kAlpha, g).max_deviation(p) < 1e-4);
}

TEST_CASE("U height equation and Burgers give the same density") {
  UniformGrid ug = UniformGrid::span(1e-3, 15.0, 0.01, Coordinate::logarithmic);
  Profile psi0 = make_profile(ug, [](double u) { return vershik_curve(Statistics::U, u).psi + 0.1 * std::exp(-u); },
                              DomainKind::half_line_open);
  const double t = 0.2;
  PdeGrid gp{ug, psi_u_stable_dt(psi0), t, Scheme::explicit_euler, 0.0};
  Profile psi_t = solve_psi_u(psi0, kAlpha, gp).final_frame();

  auto [vlo, vhi] = phi_u_range(psi0);
  const double dv = 0.02;
  PdeGrid gb{UniformGrid::span(std::ceil(vlo) + 1, std::floor(vhi) - 1, dv), 0.4 * dv * dv, t, Scheme::explicit_euler, 0.0};
  Profile rho0 = phi_u(psi0, gb.space);
  rho0.domain = DomainKind::whole_line;
  Profile rho_t = solve_burgers(rho0, kAlpha, gb).final_frame();

  UniformGrid window = UniformGrid::span(-2.0, 4.0, 0.05);
  Profile via_psi = phi_u(psi_t, window);
  double sup = 0.0;
  for (std::size_t i = 0; i < window.count; ++i) sup = std::max(sup, std::abs(via_psi.values[i] - rho_t.interpolate(window.at(i))));
  CHECK(sup < 1e-2);
}

TEST_CASE("U density equation: stationary, and the slope of the height equation") {
  const double du = 0.01;
  PdeGrid g{UniformGrid::span(0.05, 15.0, du), 0.2 * du * du, 0.5, Scheme::explicit_euler, 0.1};
  Profile r = stationary_profile(StationaryKind::rho_u, g.space, kAlpha);
  CHECK(solve_rho_u(r, kAlpha, g).max_deviation(r, 0.1, 5.0) < 1e-4);

  // consistent perturbed start: rho = -psi'
  auto psi = [](double u) { return vershik_curve(Statistics::U, u).psi + 0.1 * std::exp(-u); };
  auto rho = [](double u) { return vershik_curve(Statistics::U, u).rho + 0.1 * std::exp(-u); };
  const double t = 0.2;
  Profile r0 = make_profile(g.space, rho, DomainKind::half_line_open);
  PdeGrid gr = g;
  gr.t_end = t;
  Profile r_t = solve_rho_u(r0, kAlpha, gr).final_frame();
  UniformGrid lg = UniformGrid::span(0.05, 15.0, 0.01, Coordinate::logarithmic);
  Profile p0 = make_profile(lg, psi, DomainKind::half_line_open);
  PdeGrid gp{lg, psi_u_stable_dt(p0), t, Scheme::explicit_euler, 0.0};
  Profile p_t = solve_psi_u(p0, kAlpha, gp).final_frame();
  double sup = 0.0;
  for (double u = 0.3; u <= 4.0; u += 0.1) {
    const double h = 1e-3;
    double slope = -(p_t.interpolate(u + h) - p_t.interpolate(u - h)) / (2 * h);
    sup = std::max(sup, std::abs(slope - r_t.interpolate(u)));
  }
  CHECK(sup < 1e-2);
}

TEST_CASE("U density equation: ordered data stay ordered") {
  const double du = 0.02;
  PdeGrid g{UniformGrid::span(0.05, 15.0, du), 0.2 * du * du, 0.3, Scheme::explicit_euler, 0.05};
  Profile lo = make_profile(g.space, [](double u) { return 0.8 * rho_u_infinity(u, kAlpha); });
  Profile hi = make_profile(g.space, [](double u) { return 1.3 * rho_u_infinity(u, kAlpha); });
  ProfileSeries a = solve_rho_u(lo, kAlpha, g), b = solve_rho_u(hi, kAlpha, g);
  for (std::size_t f = 0; f < a.frames.size(); ++f)
    for (std::size_t i = 0; i < lo.size(); ++i) {
      CHECK(a.frames[f].values[i] > 0.0);
      CHECK(a.frames[f].values[i] <= b.frames[f].values[i] + 1e-9);
    }
}

TEST_CASE("RU height equation: both routes") {
  const double du = 0.02;
  PdeGrid g{UniformGrid::span(0.0, 20.0, du), 0.4 * du * du, 0.5, Scheme::explicit_euler, 0.05};
  Profile p = stationary_profile(StationaryKind::psi_ru, g.space, kBeta);
  CHECK(solve_psi_ru(p, kBeta, g, RuRoute::direct).max_deviation(p) < 1e-4);
  CHECK(solve_psi_ru(p, kBeta, g, RuRoute::via_omega).max_deviation(p) < 1e-4);

  // perturbation keeping psi'(0) = -1/2 and -1 <= psi' <= 0
  PdeGrid f{UniformGrid::span(0.0, 20.0, 0.02), 0.4 * 0.02 * 0.02, 0.5, Scheme::explicit_euler, 0.05};
  Profile q = make_profile(f.space, [](double u) { return vershik_curve(Statistics::RU, u).psi + 0.05 * u * u * std::exp(-u); });
  ProfileSeries direct = solve_psi_ru(q, kBeta, f, RuRoute::direct);
  ProfileSeries hc = solve_psi_ru(q, kBeta, f, RuRoute::via_omega);
  CHECK(sup_distance(direct.final_frame(), hc.final_frame()) < 1e-3);
  for (const auto& fr : hc.frames) {
    double slope0 = (-3 * fr.values[0] + 4 * fr.values[1] - fr.values[2]) / (2 * f.space.step);
    CHECK(slope0 == doctest::Approx(-0.5).epsilon(2e-2));
  }

  Profile bad = make_profile(f.space, [](double u) { return 2.0 - u; });
  CHECK_THROWS_AS(solve_psi_ru(bad, kBeta, f, RuRoute::direct), DomainError);
}

TEST_CASE("residuals shrink under refinement") {
  auto residual = [](double du) {
    PdeGrid g{UniformGrid::span(-10.0, 10.0, du), 0.4 * du * du, 0.5, Scheme::explicit_euler, 0.05};
    Profile r = stationary_profile(StationaryKind::rho_line, g.space, kAlpha, 1.0);
    return solve_burgers(r, kAlpha, g).max_deviation(r);
  };
  CHECK(residual(0.1) >= 3.0 * residual(0.05));
}

TEST_CASE("series interpolation in time") {
  PdeGrid g{UniformGrid::span(0.0, 24.0 / kBeta, 0.05), 0.01, 0.2, Scheme::semi_implicit, 0.1};
  Profile w = stationary_profile(StationaryKind::omega, g.space, kBeta);
  ProfileSeries s = solve_omega(w, kBeta, g);
  REQUIRE(s.times.size() == 3);
  Profile mid = s.at(0.05);
  for (std::size_t i = 0; i < mid.size(); ++i)
    CHECK(mid.values[i] == doctest::Approx(0.5 * (s.frames[0].values[i] + s.frames[1].values[i])));
}

}
