#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fconvex/grid.hpp"

using namespace fconvex;

TEST(Axis, CoveringHitsBothEnds) {
  const auto a = Axis::covering(-1.0, 2.0, 0.3);
  EXPECT_EQ(a.n, 11u);
  EXPECT_DOUBLE_EQ(a.lo, -1.0);
  EXPECT_NEAR(a.hi(), 2.0, 1e-14);
  EXPECT_LE(a.h, 0.3);
  const auto b = Axis::covering(0.0, 1.0, 0.3);
  EXPECT_EQ(b.n, 5u);
  EXPECT_DOUBLE_EQ(b.h, 0.25);
  EXPECT_THROW(Axis::covering(1.0, 1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(Axis::covering(0.0, 1.0, 0.0), std::invalid_argument);
}

TEST(GridFunction, SampleLayout) {
  const auto g = GridSpec::rect(0.0, 1.0, 0.0, 2.0, 0.5);
  EXPECT_EQ(g.size(), 3u * 5u);
  const auto u = GridFunction::sample(g, [](double x, double y) { return 10 * x + y; });
  EXPECT_DOUBLE_EQ(u.at(2, 3), 11.5);
  EXPECT_DOUBLE_EQ(u.values[2 * 5 + 3], 11.5);
  EXPECT_DOUBLE_EQ(u.radius2(2 * 5 + 3), 1.0 + 2.25);
  EXPECT_THROW(GridFunction::sample(g, [](double x) { return x; }), std::invalid_argument);
  EXPECT_THROW(GridFunction::sample(GridSpec::line(0, 1, 0.5), [](double x, double y) { return x + y; }),
               std::invalid_argument);
}

TEST(GridFunction, GrowthBound) {
  auto u = GridFunction::sample(GridSpec::line(-3.0, 3.0, 0.1), [](double x) { return std::exp(0.5 * x * x) * 2.0; });
  u.growth_A = 0.5;
  u.growth_a = u.fitted_growth_a(0.5);
  EXPECT_NEAR(u.growth_a, 2.0, 1e-12);
  EXPECT_TRUE(u.growth_certified());
  u.growth_A = 0.25;
  EXPECT_FALSE(u.growth_certified());
}

TEST(Serialization, CsvRoundTrip1D) {
  auto u = GridFunction::sample(GridSpec::line(-2.0, 2.0, 0.125), [](double x) { return std::sin(x) / 3.0; });
  u.errors[3] = 1e-13;
  u.growth_A = 0.1;
  u.growth_a = 0.7;
  u.metadata["flow.t"] = "0.25";
  std::stringstream ss;
  write_csv(ss, u);
  const auto v = read_csv(ss);
  ASSERT_EQ(v.size(), u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    EXPECT_EQ(v.values[i], u.values[i]);
    EXPECT_EQ(v.errors[i], u.errors[i]);
  }
  EXPECT_EQ(v.growth_A, 0.1);
  EXPECT_EQ(v.growth_a, 0.7);
  EXPECT_EQ(v.metadata.at("flow.t"), "0.25");
  EXPECT_NEAR(v.grid.x().h, 0.125, 1e-15);
}

TEST(Serialization, CsvRoundTrip2D) {
  const auto u = GridFunction::sample(GridSpec::rect(-1.0, 1.0, 0.0, 1.5, 0.5),
                                      [](double x, double y) { return x * x - y; });
  std::stringstream ss;
  write_csv(ss, u);
  const auto v = read_csv(ss);
  ASSERT_EQ(v.dim(), 2);
  EXPECT_EQ(v.grid.x().n, 5u);
  EXPECT_EQ(v.grid.y().n, 4u);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_EQ(v.values[i], u.values[i]);
}

TEST(Serialization, PlainTable) {
  std::istringstream is("x,value\n0,1\n0.5,2\n1,4\n");
  const auto u = read_csv(is);
  EXPECT_EQ(u.size(), 3u);
  EXPECT_DOUBLE_EQ(u.values[2], 4.0);
  EXPECT_DOUBLE_EQ(u.growth_a, 4.0);
  std::istringstream bad("0,1\n0.5,2\n1.2,4\n");
  EXPECT_THROW(read_csv(bad), std::runtime_error);
  std::istringstream tiny("0,1\n");
  EXPECT_THROW(read_csv(tiny), std::runtime_error);
}

TEST(Serialization, BinaryRoundTrip) {
  auto u = GridFunction::sample(GridSpec::rect(-1.0, 1.0, -1.0, 1.0, 0.25),
                                [](double x, double y) { return std::exp(x) * std::cos(y); });
  u.errors[7] = 2e-12;
  u.growth_A = 0.3;
  u.growth_a = 5.0;
  std::stringstream ss;
  write_binary(ss, u);
  const auto v = read_binary(ss);
  EXPECT_EQ(v.values, u.values);
  EXPECT_EQ(v.errors, u.errors);
  EXPECT_EQ(v.growth_A, u.growth_A);
  EXPECT_EQ(v.growth_a, u.growth_a);
  EXPECT_EQ(v.grid.y().n, u.grid.y().n);

  std::stringstream junk("XXXXsomething");
  EXPECT_THROW(read_binary(junk), std::runtime_error);
  std::stringstream cut;
  write_binary(cut, u);
  std::stringstream truncated(cut.str().substr(0, 30));
  EXPECT_THROW(read_binary(truncated), std::runtime_error);
}

TEST(DomainSpec, Validate) {
  EXPECT_NO_THROW(DomainSpec::free_space(2).validate());
  EXPECT_THROW(DomainSpec::free_space(3).validate(), std::invalid_argument);
  EXPECT_NO_THROW(DomainSpec::interval(0.0, 1.0, 2.0).validate());
  EXPECT_THROW(DomainSpec::interval(1.0, 1.0, 0.0).validate(), std::invalid_argument);
  EXPECT_THROW(DomainSpec::interval(0.0, 1.0, kInf).validate(), std::invalid_argument);
  EXPECT_THROW(DomainSpec::half_line(-kInf, 0.0).validate(), std::invalid_argument);
  EXPECT_THROW(DomainSpec::rectangle({0.0, 1.0}, {2.0, 1.0}, 0.0).validate(), std::invalid_argument);
  EXPECT_STREQ(to_string(DomainSpec::Kind::rectangle), "rectangle");
}
