#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "fconvex/certify.hpp"
#include "fconvex/criteria.hpp"
#include "fconvex/heatflow.hpp"

using namespace fconvex;

namespace {

GridFunction line_of(double lo, double hi, double h, auto fn) { return GridFunction::sample(GridSpec::line(lo, hi, h), fn); }

Datum exp_abs(double A) {
  return Datum::line([](double x) { return std::exp(std::abs(x)); }, {std::exp(1.0 / (4.0 * A)), A}, {0.0});
}

Datum abs_datum(double A) {
  return Datum::line([](double x) { return std::abs(x); }, {1.0 / std::sqrt(2.0 * std::exp(1.0) * A), A}, {0.0});
}

std::size_t csv_fields(const std::string& row) {
  std::size_t n = 1;
  bool quoted = false;
  for (char c : row) {
    if (c == '"') quoted = !quoted;
    else if (c == ',' && !quoted) ++n;
  }
  return n;
}

}  // namespace

TEST(CheckFConvex, AbsIsConvex) {
  const auto u = line_of(-2.0, 2.0, 1.0 / 32, [](double x) { return std::abs(x); });
  const auto c = check_F_convex(u, make_power_alpha(1.0));
  EXPECT_EQ(c.status, Certificate::Status::no_violation_found);
  EXPECT_FALSE(c.significant);
  EXPECT_GT(c.triples_checked, 1000u);
  EXPECT_EQ(c.transform, "power(alpha=1)");
}

TEST(CheckFConvex, GaussianIsNotLogConvex) {
  const auto u = line_of(-2.0, 2.0, 1.0 / 32, [](double x) { return std::exp(-x * x); });
  const auto c = check_F_convex(u, make_power_alpha(0.0));
  EXPECT_EQ(c.status, Certificate::Status::violation);
  EXPECT_TRUE(c.significant);
  const auto& w = c.worst;
  EXPECT_DOUBLE_EQ(w.gap, w.lhs - w.rhs);
  // log u = -x^2: the midpoint gap of the triple is (x1 - x0)^2 / 4
  const double d = w.x1[0] - w.x0[0];
  EXPECT_NEAR(w.gap, d * d / 4.0, 1e-12);
  EXPECT_NEAR(0.5 * (w.x0[0] + w.x1[0]), u.grid.x().coord(w.im), 1e-12);
}

TEST(CheckFConvex, EvolvedExpAbsIsLogConvex) {
  const auto u = heat_evolve_free(exp_abs(0.25), 0.25, GridSpec::line(-4.0, 4.0, 1.0 / 64));
  const auto c = check_F_convex(u, make_power_alpha(0.0));
  EXPECT_EQ(c.status, Certificate::Status::no_violation_found) << summary(c);
  EXPECT_DOUBLE_EQ(c.worst.t, 0.25);
}

TEST(CheckFConvex, Lambdas) {
  const auto u = line_of(-1.0, 1.0, 1.0 / 16, [](double x) { return x * x; });
  SamplingPlan plan;
  plan.lambdas = {0.25, 1.0 / 3.0, 0.5, 0.75};
  EXPECT_FALSE(check_F_convex(u, make_power_alpha(1.0), plan).significant);
  plan.lambdas = {0.3};
  EXPECT_THROW(check_F_convex(u, make_power_alpha(1.0), plan), std::invalid_argument);
  plan.lambdas = {1.0};
  EXPECT_THROW(check_F_convex(u, make_power_alpha(1.0), plan), std::invalid_argument);
}

TEST(CheckFConvex, DomainErrors) {
  const auto u = line_of(-1.0, 1.0, 0.25, [](double x) { return x; });
  EXPECT_THROW(check_F_convex(u, make_power_alpha(0.0)), DomainError);
  // a value a rounding error below 0 is clamped onto the endpoint
  auto v = line_of(-1.0, 1.0, 0.25, [](double x) { return x * x; });
  v.values[4] = -1e-17;
  EXPECT_NO_THROW(check_F_convex(v, make_power_alpha(0.0)));
}

TEST(CheckFConvex, OppositeInfinitiesAreSkipped) {
  // H_1 maps 0 to -inf and 1 to +inf
  GridFunction u(GridSpec::line(0.0, 2.0, 1.0));
  u.values = {0.0, 0.5, 1.0};
  const auto c = check_F_convex(u, make_hot(1.0));
  EXPECT_EQ(c.triples_skipped, 1u);
  EXPECT_FALSE(c.significant);
}

TEST(CheckFConvex, TwoDimensional) {
  const auto g = GridSpec::rect(-1.0, 1.0, -1.0, 1.0, 0.125);
  const auto bowl = GridFunction::sample(g, [](double x, double y) { return x * x + y * y; });
  EXPECT_EQ(check_F_convex(bowl, make_power_alpha(1.0)).status, Certificate::Status::no_violation_found);
  // convex along rows and columns, concave along the diagonal x = y
  const auto saddle = GridFunction::sample(g, [](double x, double y) { return -x * y; });
  const auto c = check_F_convex(saddle, make_affine(1.0, 0.0));
  EXPECT_TRUE(c.significant);
  EXPECT_NEAR((c.worst.x1[0] - c.worst.x0[0]), (c.worst.x1[1] - c.worst.x0[1]), 1e-12);
}

TEST(CheckFConvex, RandomPlanIsDeterministic) {
  const auto u = line_of(-2.0, 2.0, 1.0 / 32, [](double x) { return std::exp(-x * x); });
  const auto plan = SamplingPlan::random_plan(11, 5000);
  const auto a = check_F_convex(u, make_power_alpha(0.0), plan);
  const auto b = check_F_convex(u, make_power_alpha(0.0), plan);
  EXPECT_TRUE(a.significant);
  EXPECT_EQ(a.worst.gap, b.worst.gap);
  EXPECT_EQ(a.worst.i0, b.worst.i0);
  EXPECT_EQ(to_csv_row(a), to_csv_row(b));
  const auto v = line_of(-2.0, 2.0, 1.0 / 32, [](double x) { return std::cosh(x); });
  EXPECT_FALSE(check_F_convex(v, make_power_alpha(0.0), plan).significant);
}

TEST(CheckFConvex, ThreadCountDoesNotChangeTheResult) {
  const auto u = line_of(-3.0, 3.0, 1.0 / 32, [](double x) { return std::exp(-x * x) + 0.1 * std::sin(5 * x); });
  SamplingPlan one;
  one.threads = 1;
  SamplingPlan many;
  many.threads = 7;
  const auto F = make_affine(1.0, 0.0);
  EXPECT_EQ(to_csv_row(check_F_convex(u, F, one)), to_csv_row(check_F_convex(u, F, many)));
}

TEST(QuasiConvex, Examples) {
  EXPECT_TRUE(check_quasi_convex(line_of(-2.0, 2.0, 0.05, [](double x) { return x * x; })).quasi_convex);
  const auto r = check_quasi_convex(line_of(0.0, 4.0 * std::numbers::pi, 0.05, [](double x) { return std::sin(x); }));
  EXPECT_FALSE(r.quasi_convex);
  EXPECT_GT(r.excess, 0.0);
  EXPECT_LT(r.i0, r.im);
  EXPECT_LT(r.im, r.i1);
  const auto u = heat_evolve_free(abs_datum(0.25), 0.1, GridSpec::line(-4.0, 4.0, 1.0 / 64));
  EXPECT_TRUE(check_quasi_convex(u).quasi_convex);
}

TEST(QuasiConvex, TwoDimensional) {
  const auto g = GridSpec::rect(-2.0, 2.0, -2.0, 2.0, 0.125);
  EXPECT_TRUE(check_quasi_convex(GridFunction::sample(g, [](double x, double y) { return std::sqrt(x * x + 4 * y * y); }))
                  .quasi_convex);
  // two wells: the low sublevel sets are disconnected
  const auto wells = GridFunction::sample(g, [](double x, double y) {
    return std::min((x - 1) * (x - 1), (x + 1) * (x + 1)) + y * y;
  });
  EXPECT_FALSE(check_quasi_convex(wells).quasi_convex);
}

TEST(Counterexample, PowerTwo) {
  const auto F = make_power_alpha(2.0);
  const auto phi = counterexample_datum(F, 1.0);
  for (double xi : {-3.0, -1.0, -0.2, 0.0, 0.4, 2.5}) {
    EXPECT_NEAR(phi(xi), std::sqrt(2.0 * std::abs(xi) + 1.0), 1e-13) << xi;
  }
  ASSERT_EQ(phi.kinks_x.size(), 1u);
  EXPECT_DOUBLE_EQ(phi.kinks_x[0], 0.0);
  const auto u = GridFunction::sample(GridSpec::line(-4.0, 4.0, 1.0 / 32), [&](double x) { return phi(x); });
  EXPECT_EQ(check_F_convex(u, F).status, Certificate::Status::no_violation_found);
  // the stored growth bound holds
  for (double x = -20.0; x <= 20.0; x += 0.5) {
    EXPECT_LE(phi(x), phi.growth.a * std::exp(phi.growth.A * x * x));
  }
}

TEST(Counterexample, Log) {
  const auto F = make_power_alpha(0.0);
  const auto phi = counterexample_datum(F, 1.0);
  for (double xi : {-3.0, -0.5, 0.0, 1.5}) EXPECT_NEAR(phi(xi), std::exp(std::abs(xi)), 1e-12 * std::exp(std::abs(xi)));
  const auto u = GridFunction::sample(GridSpec::line(-4.0, 4.0, 1.0 / 32), [&](double x) { return phi(x); });
  EXPECT_EQ(check_F_convex(u, F).status, Certificate::Status::no_violation_found);
  EXPECT_DOUBLE_EQ(phi.growth.A, 0.25);
}

TEST(Counterexample, ShiftedApexAndPlane) {
  const auto F = make_power_alpha(0.5);
  const double z0 = F(2.0);
  const auto phi = counterexample_datum(F, 2.0);
  EXPECT_NEAR(phi(z0), 2.0, 1e-13);
  EXPECT_NEAR(phi(z0 - 0.3), phi(z0 + 0.3), 1e-13);
  const auto p2 = counterexample_datum(F, 2.0, {3.0, 4.0}, 2);
  EXPECT_NEAR(p2(0.6 * z0, 0.8 * z0), 2.0, 1e-13);
  EXPECT_NEAR(p2(0.6 * z0 + 0.8, 0.8 * z0 - 0.6), 2.0, 1e-13);
}

TEST(Counterexample, Rejections) {
  const auto F = make_power_alpha(1.0);
  EXPECT_THROW(counterexample_datum(F, 0.0), DomainError);
  EXPECT_THROW(counterexample_datum(make_power_alpha(0.0), 0.0), DomainError);
  EXPECT_THROW(counterexample_datum(F, 1.0, {1.0, 0.0}, 1), std::invalid_argument);
  EXPECT_THROW(counterexample_datum(F, 1.0, {0.0, 0.0}, 2), std::invalid_argument);
  EXPECT_THROW(counterexample_datum(F, 1.0, {1.0}, 3), std::invalid_argument);
}

TEST(Hunt, PowerTwoViolates) {
  const auto F = make_power_alpha(2.0);
  const auto rep = hunt_violation(F, counterexample_datum(F, 1.0), {0.01, 0.05, 0.1}, {-4.0, 4.0});
  ASSERT_TRUE(rep.t_violation.has_value());
  EXPECT_TRUE(rep.certificate.significant);
  EXPECT_GT(rep.certificate.worst.gap, 10.0 * rep.certificate.noise_floor);
  EXPECT_GE(rep.history.size(), 2u);
  EXPECT_GE(std::min(rep.certificate.worst.x0[0], rep.certificate.worst.x1[0]), -4.0);
  EXPECT_LE(std::max(rep.certificate.worst.x0[0], rep.certificate.worst.x1[0]), 4.0);
  // the flow bends each linear branch of F(phi) = |xi| concave
  EXPECT_EQ(rep.t_violation, 0.01);
}

TEST(Hunt, PreservedCasesFindNothing) {
  const auto rep0 = hunt_violation(make_power_alpha(0.0), exp_abs(0.25), {0.01, 0.05, 0.1}, {-4.0, 4.0});
  EXPECT_FALSE(rep0.t_violation.has_value());
  EXPECT_FALSE(rep0.certificate.significant);
  const auto rep1 = hunt_violation(make_power_alpha(1.0), abs_datum(0.25), {0.01, 0.05, 0.1}, {-4.0, 4.0});
  EXPECT_FALSE(rep1.t_violation.has_value());
  EXPECT_FALSE(rep1.certificate.significant);
}

TEST(Hunt, Rejections) {
  const auto F = make_power_alpha(1.0);
  EXPECT_THROW(hunt_violation(F, abs_datum(0.25), {}, {-1, 1}), std::invalid_argument);
  EXPECT_THROW(hunt_violation(F, abs_datum(0.25), {0.1}, {1, 1}), std::invalid_argument);
  EXPECT_THROW(hunt_violation(F, abs_datum(0.25), {1.0}, {-1, 1}), ExistenceWindowError);
}

TEST(Envelope, ConvexDataAreFixed) {
  const auto v = line_of(-1.0, 1.0, 1.0 / 32, [](double x) { return std::cosh(2 * x); });
  for (double lam : {0.5, 0.25, 2.0 / 3.0}) {
    const auto e = envelope_U_lambda(v, lam);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_DOUBLE_EQ(e.values.values[i], v.values[i]);
  }
}

TEST(Envelope, NegativeAbs) {
  const auto v = line_of(-1.0, 1.0, 1.0 / 16, [](double x) { return -std::abs(x); });
  const auto e = envelope_U_lambda(v, 0.5);
  // brute force over symmetric pairs x0 = -x1 around 0
  double oracle = kInf;
  const std::size_t mid = v.size() / 2;
  for (std::size_t m = 0; m <= mid; ++m) oracle = std::min(oracle, 0.5 * (v.values[mid - m] + v.values[mid + m]));
  EXPECT_DOUBLE_EQ(oracle, -1.0);
  EXPECT_DOUBLE_EQ(e.values.values[mid], oracle);
  EXPECT_EQ(e.arg_m[mid], static_cast<long long>(mid));
  EXPECT_TRUE(e.flagged[mid]);
}

TEST(Envelope, CounterexampleInFCoordinates) {
  const auto F = make_power_alpha(2.0);
  const auto phi = counterexample_datum(F, 1.0);
  const auto v = line_of(-3.0, 3.0, 1.0 / 16, [&](double x) { return F(phi(x)); });
  const auto e = envelope_U_lambda(v, 0.5);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(e.values.values[i], v.values[i], 1e-14);
}

TEST(Envelope, OutsideProxyAndRejections) {
  const auto v = line_of(-1.0, 1.0, 0.25, [](double x) { return x * x; });
  EnvelopeOptions o;
  o.outside_lower = -100.0;
  const auto e = envelope_U_lambda(v, 0.5, o);
  EXPECT_GT(e.flagged_count, 0u);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LE(e.values.values[i], v.values[i]);
  EXPECT_THROW(envelope_U_lambda(v, 0.3), std::invalid_argument);
  auto bad = v;
  bad.values[2] = kInf;
  EXPECT_THROW(envelope_U_lambda(bad, 0.5), std::invalid_argument);
  EXPECT_THROW(envelope_U_lambda(GridFunction::sample(GridSpec::rect(0, 1, 0, 1, 0.5), [](double x, double y) { return x + y; }), 0.5),
               std::invalid_argument);
}

TEST(Comparison, PreservedPairsHold) {
  const auto r1 = check_comparison_313(make_power_alpha(1.0), abs_datum(0.25), 0.5, 0.1);
  EXPECT_FALSE(r1.inconclusive) << r1.note;
  EXPECT_TRUE(r1.holds) << r1.max_positive_gap << " vs " << r1.noise_floor;
  EXPECT_GT(r1.nodes_checked, 0u);
  const auto r0 = check_comparison_313(make_power_alpha(0.0), exp_abs(0.25), 0.5, 0.1);
  EXPECT_FALSE(r0.inconclusive) << r0.note;
  EXPECT_TRUE(r0.holds) << r0.max_positive_gap << " vs " << r0.noise_floor;
}

TEST(Comparison, AffineDatumHasNoGap) {
  const Datum lin = Datum::line([](double x) { return 2.0 * x + 1.0; }, {3.0, 0.25});
  const auto r = check_comparison_313(make_affine(1.0, 0.0), lin, 0.5, 0.1);
  EXPECT_TRUE(r.holds);
  EXPECT_FALSE(r.inconclusive);
  EXPECT_LE(r.max_positive_gap, 1e-9);
}

TEST(Serialization, CertificateCsvAndSummary) {
  const auto u = line_of(-2.0, 2.0, 1.0 / 32, [](double x) { return std::exp(-x * x); });
  const auto c = check_F_convex(u, make_relabeled(make_power_alpha(0.0), 2.0, 1.0));
  const auto row = to_csv_row(c);
  EXPECT_EQ(csv_fields(row), csv_fields(certificate_csv_header()));
  EXPECT_NE(row.find(",violation,true,"), std::string::npos);
  const auto s = summary(c);
  EXPECT_NE(s.find("status         violation (significant)"), std::string::npos);
  EXPECT_NE(s.find("noise floor"), std::string::npos);
}
