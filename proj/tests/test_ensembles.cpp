#include <cmath>
#include <vector>

#include "doctest.h"
#include "generators.hpp"
#include "ydl/ensembles.hpp"

using namespace ydl;

TEST_SUITE("ensembles") {

TEST_CASE("diagram validity per statistics") {
  CHECK(YoungDiagram{{3, 1}}.valid(Statistics::U));
  CHECK(YoungDiagram{{3, 1}}.valid(Statistics::RU));
  CHECK(YoungDiagram{{2, 2}}.valid(Statistics::U));
  CHECK_FALSE(YoungDiagram{{2, 2}}.valid(Statistics::RU));
  CHECK_FALSE(YoungDiagram{{1, 2}}.valid(Statistics::U));
  CHECK_FALSE(YoungDiagram{{2, 0}}.valid(Statistics::U));
  const YoungDiagram twin{{2, 2}};
  CHECK_THROWS_AS(twin.validate(Statistics::RU), InvariantError);
  CHECK(YoungDiagram{{4, 2, 1}}.area() == 7);
  CHECK(YoungDiagram{}.area() == 0);
}

TEST_CASE("partition sums near zero epsilon are 1") {
  CHECK(partition_sum(1e-12, Statistics::U) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(partition_sum(1e-12, Statistics::RU) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("partition sums at 1/2 match enumeration") {
  // generating-function sums over all (strict) partitions of n <= 60
  CHECK(partition_sum(0.5, Statistics::U) == doctest::Approx(3.462746619455064).epsilon(1e-12));
  CHECK(partition_sum(0.5, Statistics::RU) == doctest::Approx(2.3842310290313713).epsilon(1e-12));
}

TEST_CASE("partition sum agrees with a small brute-force count") {
  // partitions of n <= 25 by dynamic programming, tail below 0.3^26 * p(26) ~ 1e-11
  const double e = 0.3;
  std::vector<double> p(26, 0.0), q(26, 0.0);
  p[0] = q[0] = 1.0;
  for (int k = 1; k <= 25; ++k) {
    for (int m = k; m <= 25; ++m) p[m] += p[m - k];
    for (int m = 25; m >= k; --m) q[m] += q[m - k];
  }
  double zu = 0.0, zr = 0.0;
  for (int n = 0; n <= 25; ++n) {
    zu += p[n] * std::pow(e, n);
    zr += q[n] * std::pow(e, n);
  }
  CHECK(partition_sum(e, Statistics::U) == doctest::Approx(zu).epsilon(1e-9));
  CHECK(partition_sum(e, Statistics::RU) == doctest::Approx(zr).epsilon(1e-9));
}

TEST_CASE("mean size") {
  CHECK(mean_size(1e-12, Statistics::U) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(mean_size(0.5, Statistics::U) == doctest::Approx(2.744033888759487).epsilon(1e-10));
  CHECK(mean_size(0.5, Statistics::RU) == doctest::Approx(1.6701907046196045).epsilon(1e-10));
  CHECK(mean_size(0.6, Statistics::U) > mean_size(0.5, Statistics::U));
}

TEST_CASE("mean size is increasing (property)") {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    double a = gen::real_in(rng, 0.01, 0.98);
    double b = a + gen::real_in(rng, 1e-4, 0.01);
    for (Statistics s : {Statistics::U, Statistics::RU}) CHECK(mean_size(b, s) > mean_size(a, s));
  }
}

TEST_CASE("calibration") {
  // root of sum x e^x / (1 - e^x) = 100 by bisection on the series
  CHECK(calibrate_epsilon(Statistics::U, 10, 1e-10) == doctest::Approx(0.8817867365553302).epsilon(1e-9));
  for (Statistics s : {Statistics::U, Statistics::RU})
    for (int N : {10, 50, 100, 200}) {
      double e = calibrate_epsilon(s, N);
      CHECK(std::abs(mean_size(e, s) - double(N) * N) <= 1e-6 * N * N * 1.01);
      CHECK(e == doctest::Approx(1.0 - shape_constant(s) / N).epsilon(3.0 * std::log(N) / (double(N) * N)));
    }
}

TEST_CASE("truncation tail") {
  for (Statistics s : {Statistics::U, Statistics::RU}) {
    GrandcanonicalParams p = make_params(s, 100);
    CHECK(tail_mass_bound(p.epsilon, s, p.truncation_x_max) < 1e-9 * 100 * 100);
    CHECK(p.scale_N == 100);
    CHECK(p.shape == doctest::Approx(shape_constant(s)));
  }
}

TEST_CASE("limit curves") {
  CHECK(vershik_curve(Statistics::RU, 0.0).rho == doctest::Approx(0.5));
  const double u0 = std::log(2.0) / kAlpha;
  CHECK(vershik_curve(Statistics::U, u0).psi == doctest::Approx(u0).epsilon(1e-12));
  CHECK(vershik_curve(Statistics::U, u0).rho == doctest::Approx(1.0).epsilon(1e-12));
  for (Statistics s : {Statistics::U, Statistics::RU})
    for (double u : {0.2, 0.7, 1.5, 3.0}) {
      const double h = 1e-5;
      double fd = -(vershik_curve(s, u + h).psi - vershik_curve(s, u - h).psi) / (2 * h);
      CHECK(fd == doctest::Approx(vershik_curve(s, u).rho).epsilon(1e-6));
    }
}

TEST_CASE("static covariance") {
  CHECK(static_covariance(Statistics::RU, 0.0, 0.0) == doctest::Approx(1.0 / (2.0 * kBeta)));
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    double u = gen::real_in(rng, 0.05, 4.0), v = gen::real_in(rng, 0.05, 4.0);
    for (Statistics s : {Statistics::U, Statistics::RU})
      CHECK(static_covariance(s, u, v) == doctest::Approx(static_covariance(s, v, u)));
  }
  // Riemann sum of per-site geometric variances at N = 400
  const int N = 400;
  const double e = calibrate_epsilon(Statistics::U, N);
  for (double u : {0.25, 0.5, 1.0, 2.0}) {
    double sum = 0.0;
    for (int x = static_cast<int>(N * u) + 1; x < 40 * N; ++x) {
      double a = std::pow(e, x);
      sum += a / ((1 - a) * (1 - a));
    }
    CHECK(static_covariance(Statistics::U, u, u) == doctest::Approx(sum / N).epsilon(0.02));
  }
}

TEST_CASE("site moments") {
  CHECK(site_mean(0.5, Statistics::U) == doctest::Approx(1.0));
  CHECK(site_variance(0.5, Statistics::U) == doctest::Approx(2.0));
  CHECK(site_mean(0.5, Statistics::RU) == doctest::Approx(1.0 / 3.0));
  CHECK(site_variance(0.5, Statistics::RU) == doctest::Approx(2.0 / 9.0));
}

TEST_CASE("sampling near zero epsilon gives the empty diagram") {
  for (Statistics s : {Statistics::U, Statistics::RU}) {
    GrandcanonicalSampler sampler(make_params_for_epsilon(s, 1e-9, 1), s);
    Rng rng(3);
    int nonempty = 0;
    for (int k = 0; k < 1000; ++k) nonempty += sampler.sample(rng).length() > 0;
    CHECK(nonempty <= 1);
  }
}

TEST_CASE("samples are valid and their area is the weighted difference sum") {
  for (Statistics s : {Statistics::U, Statistics::RU}) {
    GrandcanonicalSampler sampler(make_params(s, 30), s);
    Rng rng(17);
    std::vector<int> d;
    for (int k = 0; k < 300; ++k) {
      sampler.sample_differences(rng, d);
      YoungDiagram p = diagram_from_differences(d);
      CHECK(p.valid(s));
      long long weighted = 0;
      for (std::size_t x = 0; x < d.size(); ++x) weighted += static_cast<long long>(x + 1) * d[x];
      CHECK(p.area() == weighted);
      if (s == Statistics::RU)
        for (int v : d) CHECK((v == 0 || v == 1));
    }
  }
}

TEST_CASE("mean area matches N^2") {
  const int N = 20;
  const std::size_t M = 100000;
  for (Statistics s : {Statistics::U, Statistics::RU}) {
    GrandcanonicalParams params = make_params(s, N);
    GrandcanonicalSampler sampler(params, s);
    Rng rng(2024);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t k = 0; k < M; ++k) {
      double a = static_cast<double>(sampler.sample(rng).area());
      sum += a;
      sum2 += a * a;
    }
    double mean = sum / M, var = sum2 / M - mean * mean;
    CHECK(std::abs(mean - N * N) < 4.0 * std::sqrt(var / M));
  }
}

TEST_CASE("site differences: variance and independence") {
  const std::size_t M = 100000;
  GrandcanonicalParams params = make_params(Statistics::U, 10);
  GrandcanonicalSampler sampler(params, Statistics::U);
  Rng rng(99);
  std::vector<int> d;
  const int sites[] = {1, 5, 12};
  double s1[3] = {}, s2[3] = {}, s4[3] = {}, cross = 0.0;
  for (std::size_t k = 0; k < M; ++k) {
    sampler.sample_differences(rng, d);
    for (int j = 0; j < 3; ++j) {
      double v = d[sites[j] - 1];
      s1[j] += v;
      s2[j] += v * v;
      s4[j] += v * v * v * v;
    }
    cross += double(d[0]) * d[4];
  }
  for (int j = 0; j < 3; ++j) {
    double a = std::pow(params.epsilon, sites[j]);
    double m = s1[j] / M, var = s2[j] / M - m * m;
    double se = std::sqrt((s4[j] / M - std::pow(s2[j] / M, 2)) / M);
    CHECK(std::abs(var - a / ((1 - a) * (1 - a))) < 5.0 * se);
  }
  double m0 = s1[0] / M, m1 = s1[1] / M;
  double corr = (cross / M - m0 * m1) / std::sqrt((s2[0] / M - m0 * m0) * (s2[1] / M - m1 * m1));
  CHECK(std::abs(corr) < 4.0 / std::sqrt(double(M)));
}

TEST_CASE("finite-N oracle tends to the limit covariance") {
  for (Statistics s : {Statistics::U, Statistics::RU}) {
    GrandcanonicalParams p = make_params(s, 400);
    for (double u : {0.5, 1.0}) {
      CHECK(finite_n_covariance(p, s, u, 2.0) == doctest::Approx(static_covariance(s, u, 2.0)).epsilon(0.03));
      CHECK(finite_n_mean_height(p, s, u) == doctest::Approx(vershik_curve(s, u).psi).epsilon(0.03));
    }
  }
}

}
