#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "fconvex/hot.hpp"
#include "fconvex/numerics.hpp"

using namespace fconvex;
using namespace fconvex::numerics;

TEST(Gauss, RulesIntegratePolynomialsExactly) {
  for (int n : {6, 10, 20}) {
    const auto& r = gauss(n);
    ASSERT_EQ(r.nodes.size(), static_cast<std::size_t>(n));
    for (int deg = 0; deg < 2 * n; ++deg) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.nodes[i], deg);
      const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
      EXPECT_NEAR(s, exact, 1e-14) << "n=" << n << " deg=" << deg;
    }
  }
  EXPECT_THROW(gauss(7), std::invalid_argument);
}

TEST(Gauss, CompositeIntegration) {
  EXPECT_NEAR(integrate([](double x) { return std::exp(x); }, 0.0, 1.0, 4), std::exp(1.0) - 1.0, 1e-14);
  EXPECT_NEAR(integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, 8), 2.0, 1e-14);
}

TEST(LogSpace, AddExp) {
  EXPECT_DOUBLE_EQ(log_add_exp(-kInf, 1.5), 1.5);
  EXPECT_NEAR(log_add_exp(1000.0, 1000.0), 1000.0 + std::log(2.0), 1e-12);
  EXPECT_NEAR(log_add_exp(0.0, std::log(3.0)), std::log(4.0), 1e-15);
}

TEST(Inversion, BracketedAndMonotone) {
  auto cube = [](double x) { return x * x * x; };
  EXPECT_NEAR(invert_bracketed(cube, 8.0, 0.0, 5.0).x, 2.0, 1e-11);
  EXPECT_NEAR(invert_monotone(cube, -27.0, {-kInf, kInf}), -3.0, 1e-11);
  // beyond the range of a bounded-domain function: the endpoint comes back
  EXPECT_DOUBLE_EQ(invert_monotone([](double x) { return x; }, 5.0, {0.0, 1.0}), 1.0);
  EXPECT_TRUE(std::isnan(invert_monotone(cube, kNaN, {-kInf, kInf})));
}

TEST(Derivatives, Stencils) {
  auto f = [](double x) { return std::sin(x); };
  const auto d = central_first(f, 0.3, first_derivative_step(0.3));
  EXPECT_NEAR(d.value, std::cos(0.3), 1e-9);
  EXPECT_LT(std::abs(d.value - std::cos(0.3)), 10 * d.error + 1e-12);
  EXPECT_NEAR(five_point_first(f, 0.3, 1e-3), std::cos(0.3), 1e-12);
  EXPECT_NEAR(five_point_second(f, 0.3, second_derivative_step(0.3)), -std::sin(0.3), 1e-8);
}

TEST(Pchip, InterpolatesNodesAndPreservesMonotonicity) {
  std::vector<double> y{0, 0, 1, 1, 1, 3, 4};
  Pchip p(0.0, 1.0, y);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(p(static_cast<double>(i)), y[i]);
  double prev = -1.0;
  for (double x = 0.0; x <= 6.0; x += 0.01) {
    const double v = p(x);
    EXPECT_GE(v, prev - 1e-15);
    prev = v;
  }
  // flat stretches stay flat
  EXPECT_DOUBLE_EQ(p(3.5), 1.0);
}

TEST(Pchip, CellErrorEstimateCoversSmoothData) {
  const double h = 0.1;
  std::vector<double> y;
  for (int i = 0; i <= 40; ++i) y.push_back(std::exp(std::sin(i * h)));
  Pchip p(0.0, h, y);
  const auto err = p.cell_error_estimates();
  ASSERT_EQ(err.size(), y.size() - 1);
  for (std::size_t k = 0; k < err.size(); ++k) {
    for (double s : {0.25, 0.5, 0.75}) {
      const double x = (static_cast<double>(k) + s) * h;
      EXPECT_LE(std::abs(p(x) - std::exp(std::sin(x))), 2.0 * err[k] + 1e-15) << "cell " << k;
    }
  }
}

TEST(Pchip, KinkIsCovered) {
  // |x| sampled with the kink on a node; the limiter flattens the slope there
  std::vector<double> y;
  for (int i = -8; i <= 8; ++i) y.push_back(std::abs(i * 0.125));
  Pchip p(-1.0, 0.125, y);
  const auto err = p.cell_error_estimates();
  double worst = 0.0;
  for (double x = -0.125; x <= 0.125; x += 0.001) {
    const auto k = static_cast<std::size_t>(std::floor((x + 1.0) / 0.125));
    worst = std::max(worst, std::abs(p(x) - std::abs(x)) / err[std::min(k, err.size() - 1)]);
  }
  EXPECT_LT(worst, 1.25);
}

TEST(Fits, QuadraticAndAffine) {
  std::vector<double> x{0, 1, 2, 3, 4}, y, z;
  for (double v : x) {
    y.push_back(2 * v * v - 3 * v + 1);
    z.push_back(5 * v - 7);
  }
  const auto q = fit_quadratic(x, y);
  EXPECT_NEAR(q[0], 1.0, 1e-12);
  EXPECT_NEAR(q[1], -3.0, 1e-12);
  EXPECT_NEAR(q[2], 2.0, 1e-12);
  const auto a = fit_affine(x, z);
  EXPECT_NEAR(a[0], 5.0, 1e-12);
  EXPECT_NEAR(a[1], -7.0, 1e-12);
}

TEST(ParallelFor, CoversEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, 4);
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(100, [](std::size_t i) {
    if (i == 57) throw std::runtime_error("boom");
  }, 4), std::runtime_error);
}

TEST(Hot, ClosedFormAndLimits) {
  EXPECT_DOUBLE_EQ(hot_h(0.0), 0.5);
  EXPECT_NEAR(hot_h(20.0), 1.0, 1e-12);
  EXPECT_NEAR(hot_h(-20.0), 0.0, 1e-12);
  EXPECT_NEAR(hot_h(2.0), 0.5 * (1.0 + std::erf(1.0)), 1e-15);
  for (double z = -10.0; z <= 10.0; z += 0.25) {
    EXPECT_NEAR(hot_h(z), 0.5 * (1.0 + std::erf(z / 2.0)), 1e-12);
  }
}

TEST(Hot, DefiningIntegralOracle) {
  // h(z) = int_0^inf Gamma_1(z - w, 1) dw by composite Simpson on [0, z + 40]
  auto simpson = [](auto f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
  };
  const double z = 2.0;
  const double ref = simpson(
      [z](double w) { return std::exp(-(z - w) * (z - w) / 4.0) / std::sqrt(4.0 * std::numbers::pi); }, 0.0, z + 40.0,
      20000);
  EXPECT_NEAR(hot_h(z), ref, 1e-12);
}

TEST(Hot, InverseRoundTrip) {
  EXPECT_DOUBLE_EQ(hot_H(0.5), 0.0);
  EXPECT_NEAR(hot_H(0.5 * (1.0 + std::erf(1.0))), 2.0, 1e-12);
  EXPECT_THROW(hot_H(0.0), DomainError);
  EXPECT_THROW(hot_H(1.0), DomainError);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
  for (int i = 0; i < 50; ++i) {
    const double r = u(rng);
    EXPECT_NEAR(hot_h(hot_H(r)), r, 1e-11);
  }
}
