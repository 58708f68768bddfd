// Randomized properties. Each generator is seeded, so failures replay exactly.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fconvex/fconvex.hpp"

using namespace fconvex;

namespace {

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin() { return integer(0, 1) == 1; }

  /// Sum of kinks, a quadratic and a line: convex on the whole line.
  std::function<double(double)> convex_fn() {
    std::vector<std::pair<double, double>> kinks;
    for (int k = integer(0, 3); k > 0; --k) kinks.emplace_back(uniform(-2, 2), uniform(0.1, 2.0));
    const double q = uniform(0.0, 1.0), b = uniform(-1, 1), c = uniform(-1, 1);
    return [=](double x) {
      double s = q * x * x + b * x + c;
      for (auto [at, w] : kinks) s += w * std::abs(x - at);
      return s;
    };
  }

  /// A convex function, sometimes with a wiggle large enough to break convexity somewhere.
  std::function<double(double)> maybe_convex_fn() {
    auto f = convex_fn();
    if (coin()) return f;
    const double amp = uniform(0.05, 0.5), freq = uniform(2.0, 6.0), phase = uniform(0, 6.28);
    return [=](double x) { return f(x) + amp * std::sin(freq * x + phase); };
  }

  /// Integer values, so every midpoint average is exact in floating point.
  std::vector<double> integer_sequence(std::size_t n, bool convex) {
    std::vector<double> v(n);
    if (convex) {
      std::vector<int> slopes(n - 1);
      for (auto& s : slopes) s = 2 * integer(-6, 6);
      std::sort(slopes.begin(), slopes.end());
      v[0] = integer(-20, 20);
      for (std::size_t i = 1; i < n; ++i) v[i] = v[i - 1] + slopes[i - 1];
    } else {
      for (auto& x : v) x = integer(-20, 20);
    }
    return v;
  }
};

double min_second_difference(const GridFunction& u) {
  double m = kInf;
  for (std::size_t i = 1; i + 1 < u.size(); ++i) m = std::min(m, u.values[i - 1] - 2 * u.values[i] + u.values[i + 1]);
  return m;
}

bool certificate_invariants(const Certificate& c) {
  if (c.status == Certificate::Status::violation && !(c.worst.gap > 0.0)) return false;
  if (c.significant && c.status != Certificate::Status::violation) return false;
  return true;
}

}  // namespace

TEST(Property, PowerOneMatchesRawSecondDifferences) {
  Gen gen(101);
  const auto F = make_power_alpha(1.0);
  int decided = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto f = gen.maybe_convex_fn();
    const double shift = 20.0;  // keep values inside [0, inf)
    const auto u = GridFunction::sample(GridSpec::line(-3.0, 3.0, 1.0 / 16), [&](double x) { return f(x) + shift; });
    const double d2 = min_second_difference(u);
    if (d2 < 0.0 && d2 > -1e-6) continue;  // too close to call for either codepath
    ++decided;
    const auto c = check_F_convex(u, F);
    EXPECT_TRUE(certificate_invariants(c));
    EXPECT_EQ(c.significant, d2 < 0.0) << "trial " << trial << " d2=" << d2 << " gap=" << c.worst.gap;
  }
  EXPECT_GT(decided, 150);
}

TEST(Property, RelabelingKeepsVerdictsAndScalesGaps) {
  Gen gen(202);
  const auto F = make_power_alpha(0.0);
  for (int trial = 0; trial < 60; ++trial) {
    auto f = gen.maybe_convex_fn();
    const auto u = GridFunction::sample(GridSpec::line(-2.0, 2.0, 1.0 / 16), [&](double x) { return std::exp(f(x)); });
    const double A = gen.uniform(0.1, 10.0), B = gen.uniform(-5.0, 5.0);
    const auto G = make_relabeled(F, A, B);
    const auto c = check_F_convex(u, F);
    const auto d = check_F_convex(u, G);
    EXPECT_EQ(c.significant, d.significant) << trial;
    if (!d.significant) continue;
    const auto& w = d.worst;
    const double own = F(u.values[w.im]) - 0.5 * (F(u.values[w.i0]) + F(u.values[w.i1]));
    EXPECT_NEAR(w.gap, A * own, 1e-9 * std::max(1.0, std::abs(w.gap))) << trial;
  }
}

TEST(Property, Hierarchy) {
  Gen gen(303);
  const auto P0 = make_power_alpha(0.0), P05 = make_power_alpha(0.5), P1 = make_power_alpha(1.0);
  int log_convex = 0;
  for (int trial = 0; trial < 80; ++trial) {
    std::function<double(double)> f;
    switch (trial % 3) {
      case 0: {
        auto g = gen.convex_fn();
        f = [g](double x) { return std::exp(g(x)); };
        break;
      }
      case 1: {
        auto g = gen.convex_fn();
        f = [g](double x) { return g(x) + 30.0; };
        break;
      }
      default: {
        auto g = gen.maybe_convex_fn();
        f = [g](double x) { return std::exp(0.5 * g(x)) + 0.1; };
      }
    }
    const auto u = GridFunction::sample(GridSpec::line(-2.0, 2.0, 1.0 / 16), f);
    const bool in0 = !check_F_convex(u, P0).significant;
    const bool in05 = !check_F_convex(u, P05).significant;
    const bool in1 = !check_F_convex(u, P1).significant;
    if (in0) {
      ++log_convex;
      EXPECT_TRUE(in05) << trial;
      EXPECT_TRUE(in1) << trial;
    }
    if (in05) {
      EXPECT_TRUE(in1) << trial;
    }
    if (in0 || in05 || in1) {
      EXPECT_TRUE(check_quasi_convex(u).quasi_convex) << trial;
    }
  }
  EXPECT_GT(log_convex, 20);
}

TEST(Property, EnvelopeBelowDataWithEqualityIffMidpointConvex) {
  Gen gen(404);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = static_cast<std::size_t>(gen.integer(5, 40));
    GridFunction v(GridSpec{{Axis{0.0, 0.5, n}}});
    v.values = gen.integer_sequence(n, gen.coin());
    bool midpoint_convex = true;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t m = 1; m <= std::min(i, n - 1 - i); ++m)
        if (v.values[i - m] + v.values[i + m] < 2.0 * v.values[i]) midpoint_convex = false;
    const auto e = envelope_U_lambda(v, 0.5);
    bool equal = true;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_LE(e.values.values[i], v.values[i]);
      if (e.values.values[i] != v.values[i]) equal = false;
    }
    EXPECT_EQ(equal, midpoint_convex) << "trial " << trial;
  }
}

TEST(Property, HeatFlowPreservesConstants) {
  Gen gen(505);
  for (int trial = 0; trial < 10; ++trial) {
    const double c = gen.uniform(-100.0, 100.0), t = gen.uniform(0.001, 5.0);
    const auto u = heat_evolve_free(Datum::line([c](double) { return c; }, {std::abs(c), 0.0}), t,
                                    GridSpec::line(-3.0, 3.0, 0.5));
    for (double v : u.values) EXPECT_NEAR(v, c, 1e-10 * std::max(1.0, std::abs(c)));
  }
}

TEST(Property, HeatFlowIsMonotone) {
  Gen gen(606);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = gen.uniform(-1, 1), b = gen.uniform(0.5, 4), w = gen.uniform(0, 1), at = gen.uniform(-1, 1);
    auto lo = [=](double x) { return a * std::sin(b * x); };
    auto hi = [=](double x) { return lo(x) + w * std::max(0.0, 1.0 - std::abs(x - at)); };
    const double t = gen.uniform(0.01, 1.0);
    const auto g = GridSpec::line(-3.0, 3.0, 0.125);
    const auto u1 = heat_evolve_free(Datum::line(lo, {std::abs(a), 0.0}), t, g);
    const auto u2 = heat_evolve_free(Datum::line(hi, {std::abs(a) + w, 0.0}, {at - 1, at, at + 1}), t, g);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LE(u1.values[i], u2.values[i] + 1e-10);
  }
}

TEST(Property, Semigroup) {
  Gen gen(707);
  for (int trial = 0; trial < 4; ++trial) {
    const double a = gen.uniform(0.2, 1.0), b = gen.uniform(0.5, 2.0), c = gen.uniform(-1, 1);
    const double A = gen.uniform(0.05, 0.2);
    const double s = gen.uniform(0.05, 0.3), t = gen.uniform(0.05, 0.3);
    ASSERT_LT(4.0 * A * (s + t), 0.95);
    auto f = [=](double x) { return a * std::cos(b * x) + c * std::exp(0.5 * A * x * x); };
    const Datum phi = Datum::line(f, {a + std::abs(c), A});
    const auto mid = heat_evolve_free(phi, s, GridSpec::line(-14.0, 14.0, 1.0 / 64));
    const auto out = GridSpec::line(-2.0, 2.0, 0.125);
    const auto two = heat_evolve_free(mid, t, out);
    const auto one = heat_evolve_free(phi, s + t, out);
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_LE(std::abs(two.values[i] - one.values[i]), 3.0 * (two.errors[i] + one.errors[i]))
          << "trial " << trial << " x=" << out.x().coord(i);
    }
  }
}

TEST(Property, DirichletMaximumPrinciple) {
  Gen gen(808);
  for (int trial = 0; trial < 12; ++trial) {
    const double lo = gen.uniform(-2, 0), hi = lo + gen.uniform(0.5, 3);
    const double ell = gen.uniform(-2, 2);
    const double a = gen.uniform(-2, 2), b = gen.uniform(1, 8), c = gen.uniform(-1, 1);
    auto f = [=](double x) { return a * std::sin(b * x) + c; };
    const auto g = GridSpec::line(lo, hi, (hi - lo) / 64);
    const DomainSpec dom = trial % 2 ? DomainSpec::interval(lo, hi, ell) : DomainSpec::half_line(lo, ell);
    const auto u = heat_evolve_dirichlet(Datum::line(f, {std::abs(a) + std::abs(c), 0.0}), dom, gen.uniform(0.001, 2.0), g);
    // a sin(bx) + c ranges over [c - |a|, c + |a|] on the half line
    double fmin = c - std::abs(a), fmax = c + std::abs(a);
    if (dom.kind == DomainSpec::Kind::interval) {
      fmin = kInf;
      fmax = -kInf;
      for (int k = 0; k <= 1 << 16; ++k) {
        const double v = f(lo + (hi - lo) * k / double(1 << 16));
        fmin = std::min(fmin, v);
        fmax = std::max(fmax, v);
      }
      // sampling at spacing (hi-lo)/2^16 misses the extremes by at most |a| (b dx)^2 / 8
      const double slack = std::abs(a) * std::pow(b * (hi - lo) / 65536.0, 2) / 8.0;
      fmin -= slack;
      fmax += slack;
    }
    for (double v : u.values) {
      EXPECT_GE(v, std::min(fmin, ell) - 1e-10) << trial;
      EXPECT_LE(v, std::max(fmax, ell) + 1e-10) << trial;
    }
  }
}

TEST(Property, PowerHuntDichotomy) {
  for (double alpha : {0.5, 1.0, 1.25, 1.5, 2.0}) {
    const auto F = make_power_alpha(alpha);
    const auto rep = hunt_violation(F, counterexample_datum(F, 1.0), {0.01, 0.05, 0.1, 0.2}, {-4.0, 4.0});
    EXPECT_EQ(rep.t_violation.has_value(), alpha > 1.0) << "alpha=" << alpha;
    EXPECT_EQ(rep.certificate.significant, alpha > 1.0) << "alpha=" << alpha;
    EXPECT_TRUE(certificate_invariants(rep.certificate));
  }
}

TEST(Property, DirichletPreservesHotAndNeglogConvexity) {
  Gen gen(909);
  const auto H = make_hot(1.0);
  const auto L = make_neglog(0.0, 1.0);
  const auto dom = DomainSpec::interval(0.0, 1.0, 1.0);
  const auto g = GridSpec::line(0.0, 1.0, 1.0 / 128);
  for (int trial = 0; trial < 4; ++trial) {
    const double c = gen.uniform(0.1, 0.5), t = gen.uniform(0.005, 0.2);
    // psi >= 0 keeps the neglog datum inside [0, 1)
    const double d_hot = gen.uniform(-3.0, 0.0), d_log = gen.uniform(-4.0 * c, 0.0);
    auto psi = [c](double x, double d) { return c * (1.0 / x + 1.0 / (1.0 - x)) + d; };
    const Datum hot = Datum::line(
        [=](double x) { return x <= 0.0 || x >= 1.0 ? 1.0 : hot_h(psi(x, d_hot)); }, {1.0, 0.0});
    const Datum nlg = Datum::line(
        [=](double x) { return x <= 0.0 || x >= 1.0 ? 1.0 : 1.0 - std::exp(-psi(x, d_log)); }, {1.0, 0.0});
    const auto ch = check_F_convex(heat_evolve_dirichlet(hot, dom, t, g), H);
    EXPECT_FALSE(ch.significant) << "hot trial " << trial << " gap " << ch.worst.gap << " noise " << ch.noise_floor;
    const auto cl = check_F_convex(heat_evolve_dirichlet(nlg, dom, t, g), L);
    EXPECT_FALSE(cl.significant) << "neglog trial " << trial << " gap " << cl.worst.gap << " noise " << cl.noise_floor;
  }
}
