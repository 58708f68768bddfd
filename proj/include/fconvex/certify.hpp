#pragma once

/**
 * @file certify.hpp
 * @brief Sampled F-convexity and quasi-convexity checks on grid functions,
 * V-shaped counterexample data, violation hunting under the heat flow, and
 * the lambda-envelope comparison check.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fconvex/criteria.hpp"
#include "fconvex/ftransform.hpp"
#include "fconvex/grid.hpp"
#include "fconvex/heatflow.hpp"
#include "fconvex/numerics.hpp"

namespace fconvex {

/// One instance of F(u((1-l)x0 + l x1)) <= (1-l)F(u(x0)) + l F(u(x1)).
struct MidpointSample {
  std::array<double, 2> x0{kNaN, kNaN};
  std::array<double, 2> x1{kNaN, kNaN};
  double lambda = 0.5;
  double lhs = -kInf;
  double rhs = 0.0;
  double gap = -kInf;
  /// node indices of x0, the interior point and x1
  std::size_t i0 = 0, im = 0, i1 = 0;
  double t = kNaN;
};

/// Which triples to test.
struct SamplingPlan {
  enum class Kind { grid_triples, random };
  Kind kind = Kind::grid_triples;
  /// each must be p/q with q <= 8
  std::vector<double> lambdas{0.5};
  std::size_t samples = 200000;
  std::uint64_t seed = 1;
  double significance_factor = 10.0;
  /// longest stride (in nodes) for grid triples; 0 means unlimited
  std::size_t max_stride = 0;
  /// relative slack before values outside F's domain are an error
  double domain_tolerance = 1e-9;
  unsigned threads = 0;

  static SamplingPlan random_plan(std::uint64_t seed, std::size_t samples = 200000) {
    SamplingPlan p;
    p.kind = Kind::random;
    p.lambdas = {0.25, 0.5, 0.75};
    p.samples = samples;
    p.seed = seed;
    return p;
  }
};

struct Certificate {
  enum class Status { no_violation_found, violation };
  Status status = Status::no_violation_found;
  MidpointSample worst;
  /// propagated value noise of the worst triple
  double noise_floor = 0.0;
  bool significant = false;
  double significance_factor = 10.0;
  std::size_t triples_checked = 0;
  std::size_t triples_skipped = 0;
  std::string transform;
  std::string note;

  [[nodiscard]] bool ok() const { return !significant; }
};

inline const char* to_string(Certificate::Status s) {
  return s == Certificate::Status::violation ? "violation" : "no_violation_found";
}

namespace detail {

struct Rational {
  int p;
  int q;
};

inline Rational to_rational(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0, 1)");
  for (int q = 2; q <= 8; ++q) {
    const int p = static_cast<int>(std::lround(lambda * q));
    if (p > 0 && p < q && std::abs(lambda - static_cast<double>(p) / q) < 1e-12) {
      const int g = std::gcd(p, q);
      return {p / g, q / g};
    }
  }
  throw std::invalid_argument("lambda must be p/q with q <= 8, got " + detail::fmt(lambda));
}

/// Per-node transformed values with the information needed to bound their noise.
struct NodeValues {
  std::vector<double> v;
  std::vector<double> noise;
  /// F at the low and high ends of each value's uncertainty interval
  std::vector<double> v_lo;
  std::vector<double> v_hi;
};

inline double value_noise_rel(const FTransform& F) { return composition_noise(F, F); }

inline NodeValues transform_values(const GridFunction& u, const FTransform& F, double tol_rel) {
  const auto& dom = F.domain();
  const double crel = value_noise_rel(F);
  NodeValues nv;
  const std::size_t n = u.size();
  nv.v.resize(n);
  nv.noise.resize(n);
  nv.v_lo.resize(n);
  nv.v_hi.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    double r = u.values[k];
    const double e = (u.errors.empty() ? 0.0 : u.errors[k]) + 2.0 * kEps * std::abs(r);
    if (!std::isfinite(r)) throw DomainError("check_F_convex: non-finite value at node " + std::to_string(k));
    if (r < dom.lo) {
      if (r < dom.lo - e - tol_rel * std::max(1.0, std::abs(dom.lo))) {
        throw DomainError("check_F_convex: value " + detail::fmt(r) + " below the domain of " + F.label());
      }
      r = dom.lo;
    }
    if (r > dom.hi) {
      if (r > dom.hi + e + tol_rel * std::max(1.0, std::abs(dom.hi))) {
        throw DomainError("check_F_convex: value " + detail::fmt(r) + " above the domain of " + F.label());
      }
      r = dom.hi;
    }
    const double v = F(r);
    nv.v[k] = v;
    nv.v_lo[k] = F(std::max(dom.lo, r - e));
    nv.v_hi[k] = F(std::min(dom.hi, r + e));
    if (std::isfinite(v)) {
      const bool interior = r > dom.lo && r < dom.hi;
      const double d = interior ? std::abs(F.deriv(r)) : kInf;
      double nz = std::isfinite(d) ? d * e : kInf;
      if (!std::isfinite(nz)) nz = std::max(std::abs(nv.v_hi[k] - v), std::abs(v - nv.v_lo[k]));
      nv.noise[k] = nz + crel * (1.0 + std::abs(v));
    } else {
      nv.noise[k] = kInf;
    }
  }
  return nv;
}

/// Ordering used to pick the reported triple: violations by significance ratio, otherwise by gap.
struct Candidate {
  MidpointSample s;
  double noise = 0.0;
  bool valid = false;
};

inline bool better(const Candidate& a, const Candidate& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  const bool pa = a.s.gap > 0.0, pb = b.s.gap > 0.0;
  if (pa != pb) return pa;
  const double ka = pa ? (a.noise > 0.0 ? a.s.gap / a.noise : kInf) : a.s.gap;
  const double kb = pb ? (b.noise > 0.0 ? b.s.gap / b.noise : kInf) : b.s.gap;
  if (ka != kb) return ka > kb;
  return std::tie(a.s.i0, a.s.im, a.s.i1) < std::tie(b.s.i0, b.s.im, b.s.i1);
}

struct TripleTally {
  Candidate best;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

inline void evaluate_triple(const NodeValues& nv, std::size_t i0, std::size_t im, std::size_t i1, double lambda,
                            TripleTally& tally) {
  const double v0 = nv.v[i0], vm = nv.v[im], v1 = nv.v[i1];
  if ((v0 == kInf && v1 == -kInf) || (v0 == -kInf && v1 == kInf)) {
    ++tally.skipped;
    return;
  }
  const double rhs = (1.0 - lambda) * v0 + lambda * v1;
  Candidate c;
  c.valid = true;
  c.s.i0 = i0;
  c.s.im = im;
  c.s.i1 = i1;
  c.s.lambda = lambda;
  c.s.lhs = vm;
  c.s.rhs = rhs;
  if (std::isfinite(vm) && std::isfinite(rhs)) {
    c.s.gap = vm - rhs;
    c.noise = nv.noise[im] + (1.0 - lambda) * nv.noise[i0] + lambda * nv.noise[i1] +
              4.0 * kEps * (std::abs(vm) + std::abs(rhs));
  } else if (vm == -kInf || rhs == kInf) {
    // satisfied at an endpoint convention
    ++tally.checked;
    return;
  } else {
    // vm = +inf or rhs = -inf: a violation only if no value inside the error bars repairs it
    const double lo = nv.v_lo[im];
    const double a = nv.v_hi[i0], b = nv.v_hi[i1];
    if ((a == kInf && b == -kInf) || (a == -kInf && b == kInf)) {
      ++tally.skipped;
      return;
    }
    const double hi = (1.0 - lambda) * a + lambda * b;
    if (!(lo > hi)) {
      ++tally.skipped;
      return;
    }
    c.s.gap = vm - rhs;
    c.noise = 0.0;
  }
  ++tally.checked;
  if (better(c, tally.best)) tally.best = c;
}

inline void merge(TripleTally& into, const TripleTally& other) {
  into.checked += other.checked;
  into.skipped += other.skipped;
  if (better(other.best, into.best)) into.best = other.best;
}

inline std::array<double, 2> node_point(const GridSpec& g, std::size_t k) {
  if (g.dim() == 1) return {g.x().coord(k), 0.0};
  const std::size_t ny = g.y().n;
  return {g.x().coord(k / ny), g.y().coord(k % ny)};
}

inline Certificate finish(const TripleTally& tally, const GridFunction& u, const FTransform& F, double factor) {
  Certificate c;
  c.transform = F.label();
  c.significance_factor = factor;
  c.triples_checked = tally.checked;
  c.triples_skipped = tally.skipped;
  if (tally.best.valid) {
    c.worst = tally.best.s;
    c.worst.x0 = node_point(u.grid, c.worst.i0);
    c.worst.x1 = node_point(u.grid, c.worst.i1);
    c.noise_floor = tally.best.noise;
  }
  if (auto it = u.metadata.find("flow.t"); it != u.metadata.end()) c.worst.t = std::stod(it->second);
  // a positive gap inside the noise is not resolved as a violation
  c.status = c.worst.gap > c.noise_floor ? Certificate::Status::violation : Certificate::Status::no_violation_found;
  c.significant = c.status == Certificate::Status::violation && c.worst.gap > factor * c.noise_floor;
  c.note = "grid-exact rational lambda; for continuous u midpoint convexity on all scales gives convexity";
  return c;
}

}  // namespace detail

/**
 * Tests the F-convexity inequality on the triples of `plan`. Values slightly
 * outside F's domain (within their error) are clamped to the endpoint. Pairs
 * whose F-values are opposite infinities are skipped.
 */
inline Certificate check_F_convex(const GridFunction& u, const FTransform& F, const SamplingPlan& plan = {}) {
  if (u.size() == 0) throw std::invalid_argument("check_F_convex: empty grid");
  const auto nv = detail::transform_values(u, F, plan.domain_tolerance);
  std::vector<detail::Rational> lams;
  for (double l : plan.lambdas) lams.push_back(detail::to_rational(l));
  const unsigned threads = plan.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : plan.threads;
  detail::TripleTally total;

  if (plan.kind == SamplingPlan::Kind::grid_triples) {
    // lines through the grid: one in 1D; rows, columns and both diagonals in 2D
    struct Line {
      std::vector<std::size_t> idx;
    };
    std::vector<Line> lines;
    if (u.dim() == 1) {
      Line l;
      l.idx.resize(u.size());
      std::iota(l.idx.begin(), l.idx.end(), 0);
      lines.push_back(std::move(l));
    } else {
      const auto nx = static_cast<std::ptrdiff_t>(u.grid.x().n);
      const auto ny = static_cast<std::ptrdiff_t>(u.grid.y().n);
      auto id = [ny](std::ptrdiff_t i, std::ptrdiff_t j) { return static_cast<std::size_t>(i * ny + j); };
      for (std::ptrdiff_t i = 0; i < nx; ++i) {
        Line l;
        for (std::ptrdiff_t j = 0; j < ny; ++j) l.idx.push_back(id(i, j));
        lines.push_back(std::move(l));
      }
      for (std::ptrdiff_t j = 0; j < ny; ++j) {
        Line l;
        for (std::ptrdiff_t i = 0; i < nx; ++i) l.idx.push_back(id(i, j));
        lines.push_back(std::move(l));
      }
      for (std::ptrdiff_t s = -(ny - 1); s < nx; ++s) {
        Line d, a;
        for (std::ptrdiff_t i = 0; i < nx; ++i) {
          const std::ptrdiff_t j = i - s;
          if (j >= 0 && j < ny) d.idx.push_back(id(i, j));
        }
        for (std::ptrdiff_t i = 0; i < nx; ++i) {
          const std::ptrdiff_t j = s + (nx - 1) - i;
          if (j >= 0 && j < ny) a.idx.push_back(id(i, j));
        }
        if (d.idx.size() >= 3) lines.push_back(std::move(d));
        if (a.idx.size() >= 3) lines.push_back(std::move(a));
      }
    }
    // work items: (line, first index) pairs, reduced deterministically
    std::vector<std::pair<std::size_t, std::size_t>> items;
    for (std::size_t L = 0; L < lines.size(); ++L)
      for (std::size_t a = 0; a < lines[L].idx.size(); ++a) items.emplace_back(L, a);
    const std::size_t blocks = std::min<std::size_t>(threads * 4, std::max<std::size_t>(items.size(), 1));
    std::vector<detail::TripleTally> partial(blocks);
    numerics::parallel_for(blocks, [&](std::size_t b) {
      const std::size_t lo = items.size() * b / blocks, hi = items.size() * (b + 1) / blocks;
      for (std::size_t it = lo; it < hi; ++it) {
        const auto& idx = lines[items[it].first].idx;
        const std::size_t a = items[it].second;
        for (const auto& r : lams) {
          const double lambda = static_cast<double>(r.p) / r.q;
          for (std::size_t k = 1;; ++k) {
            if (plan.max_stride && k > plan.max_stride) break;
            const std::size_t last = a + static_cast<std::size_t>(r.q) * k;
            if (last >= idx.size()) break;
            detail::evaluate_triple(nv, idx[a], idx[a + static_cast<std::size_t>(r.p) * k], idx[last], lambda,
                                    partial[b]);
          }
        }
      }
    }, threads);
    for (const auto& p : partial) detail::merge(total, p);
  } else {
    std::mt19937_64 rng(plan.seed);
    const std::size_t nx = u.grid.x().n;
    const std::size_t ny = u.dim() == 2 ? u.grid.y().n : 1;
    std::uniform_int_distribution<std::size_t> pick_l(0, lams.size() - 1);
    for (std::size_t s = 0; s < plan.samples; ++s) {
      const auto r = lams[pick_l(rng)];
      const double lambda = static_cast<double>(r.p) / r.q;
      const auto q = static_cast<std::size_t>(r.q), p = static_cast<std::size_t>(r.p);
      if (nx <= q && ny <= q) break;
      // endpoints differ by multiples of q on each axis so the interior point is a node
      std::uniform_int_distribution<std::size_t> ux(0, nx - 1), uy(0, ny - 1);
      const std::size_t ax = ux(rng), ay = uy(rng);
      const std::size_t kxmax = (nx - 1) / q, kymax = (ny - 1) / q;
      std::uniform_int_distribution<std::size_t> kx(0, kxmax), ky(0, kymax);
      std::size_t bx = ax % q + q * kx(rng);
      std::size_t by = ay % q + q * ky(rng);
      if (bx >= nx) bx -= q;
      if (by >= ny) by -= q;
      if (bx == ax && by == ay) continue;
      auto mid = [&](std::size_t a, std::size_t b) {
        return a <= b ? a + (b - a) / q * p : a - (a - b) / q * p;
      };
      const std::size_t mx = mid(ax, bx), my = mid(ay, by);
      detail::evaluate_triple(nv, ax * ny + ay, mx * ny + my, bx * ny + by, lambda, total);
    }
  }
  return detail::finish(total, u, F, plan.significance_factor);
}

// ---------------------------------------------------------------------------
// quasi-convexity

struct QuasiConvexReport {
  bool quasi_convex = true;
  /// amount by which the offending node exceeds the sublevel value (<= 0 when none)
  double excess = -kInf;
  /// 1D: a violating triple (i0 < im < i1 with u(im) above both ends)
  std::size_t i0 = 0, im = 0, i1 = 0;
  /// 2D: level at which the offending node sits inside the sublevel hull
  double level = kNaN;
  std::array<double, 2> point{kNaN, kNaN};
};

namespace detail {

inline double cross(const std::array<double, 2>& o, const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

/// Counter-clockwise convex hull (Andrew's monotone chain).
inline std::vector<std::array<double, 2>> convex_hull(std::vector<std::array<double, 2>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<std::array<double, 2>> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

/// Signed distance from p to the boundary of a CCW hull, positive inside.
inline double inside_depth(const std::vector<std::array<double, 2>>& hull, const std::array<double, 2>& p) {
  if (hull.size() < 3) return -kInf;
  double depth = kInf;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
    depth = std::min(depth, cross(a, b, p) / len);
  }
  return depth;
}

}  // namespace detail

/**
 * 1D: every sublevel set of the samples is an index interval. 2D: at 32
 * levels, no node lying more than one cell inside the convex hull of the
 * sublevel set is above the level. Node errors widen the tolerance.
 */
inline QuasiConvexReport check_quasi_convex(const GridFunction& u) {
  QuasiConvexReport rep;
  const std::size_t n = u.size();
  auto err = [&](std::size_t k) { return (u.errors.empty() ? 0.0 : u.errors[k]) + 4.0 * kEps * std::abs(u.values[k]); };
  if (u.dim() == 1) {
    if (n < 3) return rep;
    std::vector<std::size_t> pre(n), suf(n);
    pre[0] = 0;
    for (std::size_t k = 1; k < n; ++k) pre[k] = u.values[k] < u.values[pre[k - 1]] ? k : pre[k - 1];
    suf[n - 1] = n - 1;
    for (std::size_t k = n - 1; k-- > 0;) suf[k] = u.values[k] <= u.values[suf[k + 1]] ? k : suf[k + 1];
    for (std::size_t m = 1; m + 1 < n; ++m) {
      const std::size_t a = pre[m - 1], b = suf[m + 1];
      const double ex = u.values[m] - std::max(u.values[a], u.values[b]);
      const double tol = err(m) + std::max(err(a), err(b));
      if (ex > rep.excess || (ex > tol && rep.quasi_convex)) {
        if (ex > tol) rep.quasi_convex = false;
        if (ex > rep.excess) {
          rep.excess = ex;
          rep.i0 = a;
          rep.im = m;
          rep.i1 = b;
          rep.point = {u.grid.x().coord(m), 0.0};
        }
      }
    }
    return rep;
  }
  const double lo = *std::min_element(u.values.begin(), u.values.end());
  const double hi = *std::max_element(u.values.begin(), u.values.end());
  const double cell = std::hypot(u.grid.x().h, u.grid.y().h);
  for (int l = 1; l <= 32; ++l) {
    const double c = lo + (hi - lo) * l / 33.0;
    std::vector<std::array<double, 2>> pts;
    for (std::size_t k = 0; k < n; ++k)
      if (u.values[k] <= c) pts.push_back(detail::node_point(u.grid, k));
    const auto hull = detail::convex_hull(pts);
    for (std::size_t k = 0; k < n; ++k) {
      const double ex = u.values[k] - c;
      if (ex <= err(k)) continue;
      const auto p = detail::node_point(u.grid, k);
      if (detail::inside_depth(hull, p) > cell) {
        rep.quasi_convex = false;
        if (ex > rep.excess) {
          rep.excess = ex;
          rep.im = k;
          rep.level = c;
          rep.point = p;
        }
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// counterexample data

/**
 * V-shape in F-coordinates: phi(x) = f_F(xi) for xi >= F(r0) and
 * f_F(2F(r0) - xi) otherwise, xi = <x, direction>. F(phi) = F(r0) + |xi - F(r0)|
 * is convex, so phi is F-convex. The growth exponent is 1.1 A* (or
 * `growth_A` when given; 0.25 when A* = 0) and the constant is the sampled
 * sup of |phi| e^{-A xi^2} with a 1% margin.
 */
inline Datum counterexample_datum(const FTransform& F, double r0, std::vector<double> direction = {1.0}, int dim = 1,
                                  std::optional<double> growth_A = std::nullopt) {
  const auto& dom = F.domain();
  if (!(r0 > dom.lo && r0 < dom.hi)) throw DomainError("counterexample_datum: r0 must be interior to the domain");
  const double z0 = F(r0);
  if (!std::isfinite(z0)) throw DomainError("counterexample_datum: F(r0) must be finite");
  if (dim != 1 && dim != 2) throw std::invalid_argument("counterexample_datum: dim must be 1 or 2");
  if (direction.size() != static_cast<std::size_t>(dim)) {
    throw std::invalid_argument("counterexample_datum: direction must have dim components");
  }
  const double norm = dim == 1 ? std::abs(direction[0]) : std::hypot(direction[0], direction[1]);
  if (!(norm > 0.0)) throw std::invalid_argument("counterexample_datum: zero direction");
  for (auto& d : direction) d /= norm;

  double A = 0.0;
  if (growth_A) {
    A = *growth_A;
  } else {
    const auto est = estimate_A_star(F);
    if (!std::isfinite(est.value)) {
      throw DomainError("counterexample_datum: f_F grows faster than any Gaussian; no evolving data exist");
    }
    A = est.value > 0.0 ? 1.1 * est.value : 0.25;
  }
  if (!(A >= 0.0)) throw std::invalid_argument("counterexample_datum: growth_A must be nonnegative");

  auto profile = [F, z0](double xi) { return F.inverse(xi >= z0 ? xi : 2.0 * z0 - xi); };
  // sup of log|phi| - A xi^2, widening until the ratio decays at the ends
  auto log_ratio = [&](double xi) {
    return F.log_abs_inverse(xi >= z0 ? xi : 2.0 * z0 - xi) - A * xi * xi;
  };
  double best = -kInf;
  double L = 8.0 + std::abs(z0);
  for (int round = 0; round < 8; ++round, L *= 2.0) {
    const int n = 20001;
    double edge = -kInf, inner = -kInf;
    for (int i = 0; i < n; ++i) {
      const double xi = -L + 2.0 * L * i / (n - 1);
      const double v = log_ratio(xi);
      if (std::isnan(v)) continue;
      best = std::max(best, v);
      const double d = std::abs(xi) / L;
      if (d > 0.95) edge = std::max(edge, v);
      else if (d < 0.5) inner = std::max(inner, v);
    }
    if (A == 0.0 || edge < inner - 1.0) break;
  }
  if (!std::isfinite(best)) throw DomainError("counterexample_datum: could not bound the datum's growth");
  const double a = 1.01 * std::exp(best);

  Datum d;
  d.dim = dim;
  d.growth = {a, A};
  d.label = "counterexample(" + F.label() + ",r0=" + detail::fmt(r0) + ")";
  if (dim == 1) {
    const double s = direction[0];
    d.f1 = [profile, s](double x) { return profile(s * x); };
    d.kinks_x = {z0 / s};
  } else {
    const double dx = direction[0], dy = direction[1];
    d.f2 = [profile, dx, dy](double x, double y) { return profile(dx * x + dy * y); };
    if (std::abs(dy) < 1e-15) d.kinks_x = {z0 / dx};
    if (std::abs(dx) < 1e-15) d.kinks_y = {z0 / dy};
  }
  return d;
}

// ---------------------------------------------------------------------------
// violation hunting

struct HuntOptions {
  double h0 = 1.0 / 64.0;
  /// refinement doublings beyond h0
  int refine = 2;
  /// relative agreement of the worst gap between consecutive levels
  double gap_agreement = 0.25;
  SamplingPlan plan;
  FlowOptions flow;
};

struct HuntStep {
  double t = kNaN;
  double h = kNaN;
  Certificate cert;
};

struct HuntReport {
  /// earliest time with a significant, refinement-stable violation
  std::optional<double> t_violation;
  /// certificate at t_violation, or the last certificate computed
  Certificate certificate;
  bool stable = true;
  std::vector<HuntStep> history;
  std::string note;
};

/**
 * For each time (ascending), evolves phi on `window` at spacings h0, h0/2, ...
 * and checks F-convexity until two consecutive levels agree: both
 * significant with worst gaps within `gap_agreement`, or both not.
 */
inline HuntReport hunt_violation(const FTransform& F, const Datum& phi, std::vector<double> times, Interval window,
                                 const HuntOptions& opts = {}) {
  if (times.empty()) throw std::invalid_argument("hunt_violation: no times given");
  if (!(window.hi > window.lo)) throw std::invalid_argument("hunt_violation: empty window");
  std::sort(times.begin(), times.end());
  for (double t : times) detail::check_window(phi.growth.A, t, opts.flow.margin);
  HuntReport rep;
  for (double t : times) {
    std::optional<Certificate> prev;
    bool settled = false;
    for (int k = 0; k <= opts.refine; ++k) {
      const double h = opts.h0 / std::pow(2.0, k);
      const GridSpec g = phi.dim == 1 ? GridSpec::line(window.lo, window.hi, h)
                                      : GridSpec::rect(window.lo, window.hi, window.lo, window.hi, h);
      const auto u = heat_evolve_free(phi, t, g, opts.flow);
      auto cert = check_F_convex(u, F, opts.plan);
      cert.worst.t = t;
      rep.history.push_back({t, h, cert});
      if (prev) {
        const bool agree =
            prev->significant == cert.significant &&
            (!cert.significant ||
             std::abs(cert.worst.gap - prev->worst.gap) <= opts.gap_agreement * std::abs(cert.worst.gap));
        if (agree) {
          settled = true;
          rep.certificate = cert;
          break;
        }
      }
      prev = cert;
    }
    if (!settled) {
      rep.stable = false;
      rep.certificate = *prev;
      rep.certificate.note += "; verdict not stable under refinement";
      continue;
    }
    if (rep.certificate.significant) {
      rep.t_violation = t;
      return rep;
    }
  }
  if (!rep.stable) {
    rep.note = "some times did not settle under refinement";
    // an unstable significant verdict is not reported as a violation
    if (rep.certificate.significant) rep.certificate.significant = false;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// lambda-envelope and the comparison check

struct EnvelopeOptions {
  /// lower bound for v outside the window; nullopt restricts to decompositions inside it
  std::optional<double> outside_lower;
};

struct Envelope {
  GridFunction values;
  /// minimizing m (x0 = x - m p h, x1 = x + m (q - p) h)
  std::vector<long long> arg_m;
  /// node's infimum came from a decomposition leaving the window, or (without a
  /// proxy) from the widest decomposition that still fits in it
  std::vector<bool> flagged;
  std::size_t flagged_count = 0;
};

/**
 * inf over grid decompositions x = (1-l)x0 + l x1 of (1-l)v(x0) + l v(x1),
 * brute force, for l = p/q. Decompositions with one end outside the window
 * use `outside_lower` there and flag the node when they attain the infimum.
 * Without a proxy only decompositions inside the window count, and a node is
 * flagged when its infimum sits on the window edge.
 */
inline Envelope envelope_U_lambda(const GridFunction& v, double lambda, const EnvelopeOptions& opts = {}) {
  if (v.dim() != 1) throw std::invalid_argument("envelope_U_lambda: only 1D grids are supported");
  const auto r = detail::to_rational(lambda);
  for (double x : v.values)
    if (!std::isfinite(x)) throw std::invalid_argument("envelope_U_lambda: values must be finite");
  const auto n = static_cast<long long>(v.size());
  const long long p = r.p, q = r.q;
  const double lam = static_cast<double>(p) / static_cast<double>(q);
  Envelope env;
  env.values = v;
  env.values.metadata["envelope.lambda"] = std::to_string(p) + "/" + std::to_string(q);
  env.arg_m.assign(v.size(), 0);
  env.flagged.assign(v.size(), false);
  numerics::parallel_for(v.size(), [&](std::size_t ii) {
    const auto i = static_cast<long long>(ii);
    double best = v.values[ii];
    long long best_m = 0;
    bool flag = false;
    for (int sign : {1, -1}) {
      long long widest = 0;
      for (long long m = 1;; ++m) {
        const long long a = i - sign * m * p;
        const long long b = i + sign * m * (q - p);
        const bool ain = a >= 0 && a < n, bin = b >= 0 && b < n;
        if (!ain && !bin) break;
        double val;
        bool outside = false;
        if (ain && bin) {
          val = (1.0 - lam) * v.values[static_cast<std::size_t>(a)] + lam * v.values[static_cast<std::size_t>(b)];
          widest = m;
        } else if (opts.outside_lower) {
          const double va = ain ? v.values[static_cast<std::size_t>(a)] : *opts.outside_lower;
          const double vb = bin ? v.values[static_cast<std::size_t>(b)] : *opts.outside_lower;
          val = (1.0 - lam) * va + lam * vb;
          outside = true;
        } else {
          continue;
        }
        if (val < best) {
          best = val;
          best_m = sign * m;
          flag = outside;
        }
      }
      if (!opts.outside_lower && best_m == sign * widest && widest > 0) flag = true;
    }
    env.values.values[ii] = best;
    env.arg_m[ii] = best_m;
    env.flagged[ii] = flag;
  }, 0);
  env.flagged_count = static_cast<std::size_t>(std::count(env.flagged.begin(), env.flagged.end(), true));
  env.values.metadata["envelope.flagged"] = std::to_string(env.flagged_count);
  return env;
}

struct ComparisonOptions {
  double h = 1.0 / 64.0;
  Interval inner{-2.0, 2.0};
  /// extra half-width of the window over which RHS decompositions range
  double decomposition_margin = 3.0;
  double eps = 1e-3;
  double tolerance_factor = 3.0;
  FlowOptions flow;
};

struct ComparisonReport {
  bool holds = true;
  bool inconclusive = false;
  double max_positive_gap = 0.0;
  /// combined noise at the node with the largest gap-to-noise ratio
  double noise_floor = 0.0;
  double worst_x = kNaN;
  double worst_ratio = -kInf;
  std::size_t nodes_checked = 0;
  double flagged_fraction = 0.0;
  std::string note;
};

/**
 * Evolves W0 = F^{-1}(U_lambda[F(phi + eps|x|^2)]) and checks, at inner nodes,
 * e^{t Delta}W0 <= F^{-1}((1-l)F(u_eps(x0)) + l F(u_eps(x1))) for all grid
 * decompositions, u_eps = e^{t Delta}phi + eps(|x|^2 + 2t). Each node's gap
 * must stay within `tolerance_factor` times its combined noise.
 */
inline ComparisonReport check_comparison_313(const FTransform& F, const Datum& phi, double lambda, double t,
                                             const ComparisonOptions& opts = {}) {
  if (phi.dim != 1) throw std::invalid_argument("check_comparison_313: 1D data only");
  detail::check_window(phi.growth.A, t, opts.flow.margin);
  const Datum lifted = epsilon_quadratic_lift(phi, opts.eps);
  detail::check_window(lifted.growth.A, t, opts.flow.margin);
  const double h = opts.h;
  const Interval mid{opts.inner.lo - opts.decomposition_margin, opts.inner.hi + opts.decomposition_margin};
  const double reach = detail::truncation(lifted.growth.a, lifted.growth.A, t,
                                          std::max(std::abs(opts.inner.lo), std::abs(opts.inner.hi)), 1,
                                          opts.flow.eps_tail).R;
  const Interval ext{opts.inner.lo - reach - 1.0, opts.inner.hi + reach + 1.0};
  const GridSpec g_in = GridSpec::line(opts.inner.lo, opts.inner.hi, h);
  const GridSpec g_mid = GridSpec::line(mid.lo, mid.hi, h);
  const GridSpec g_ext = GridSpec::line(ext.lo, ext.hi, h);

  // initial envelope in F-coordinates
  GridFunction v0 = GridFunction::sample(g_ext, [&](double x) { return F(lifted(x)); });
  for (double x : v0.values)
    if (!std::isfinite(x)) throw DomainError("check_comparison_313: F(phi) must be finite on the window");
  // restricting to the window can only raise W0, so the check stays sound
  const auto U0 = envelope_U_lambda(v0, lambda);
  GridFunction W0(g_ext);
  for (std::size_t k = 0; k < W0.size(); ++k) W0.values[k] = F.inverse(U0.values.values[k]);
  W0.growth_A = lifted.growth.A;
  W0.growth_a = std::max(lifted.growth.a, 1.01 * W0.fitted_growth_a(lifted.growth.A));

  ComparisonReport rep;
  // flagged nodes within kernel reach of the inner window
  std::size_t near = 0, near_flagged = 0;
  for (std::size_t k = 0; k < W0.size(); ++k) {
    const double x = g_ext.x().coord(k);
    if (x >= opts.inner.lo - reach && x <= opts.inner.hi + reach) {
      ++near;
      if (U0.flagged[k]) ++near_flagged;
    }
  }
  rep.flagged_fraction = near ? static_cast<double>(near_flagged) / static_cast<double>(near) : 0.0;
  if (rep.flagged_fraction > 0.5) {
    rep.inconclusive = true;
    rep.note = "boundary-flagged envelope nodes dominate";
    return rep;
  }

  Datum w0 = Datum::from_grid(W0);
  const auto lhs = heat_evolve_free(w0, t, g_in, opts.flow);
  auto u = heat_evolve_free(phi, t, g_mid, opts.flow);
  u = lifted_evolution_identity(u, opts.eps, t, 1);
  const auto nv = detail::transform_values(u, F, 1e-9);
  GridFunction vt(g_mid);
  vt.values = nv.v;
  for (double x : vt.values)
    if (!std::isfinite(x)) throw DomainError("check_comparison_313: F(u) must be finite on the window");
  const auto Ut = envelope_U_lambda(vt, lambda);
  const auto rr = detail::to_rational(lambda);
  const double lam = static_cast<double>(rr.p) / rr.q;
  const auto offset = static_cast<long long>(std::llround((opts.inner.lo - mid.lo) / h));

  for (std::size_t i = 0; i < g_in.x().n; ++i) {
    const auto j = static_cast<std::size_t>(static_cast<long long>(i) + offset);
    const double rhs_v = Ut.values.values[j];
    const double rhs = F.inverse(rhs_v);
    const long long m = Ut.arg_m[j];
    const auto a = static_cast<std::size_t>(static_cast<long long>(j) - m * rr.p);
    const auto b = static_cast<std::size_t>(static_cast<long long>(j) + m * (rr.q - rr.p));
    const double vnoise = m == 0 ? nv.noise[j] : (1.0 - lam) * nv.noise[a] + lam * nv.noise[b];
    const double dF = std::abs(F.deriv(rhs));
    const double rhs_noise = vnoise / dF + 4.0 * kEps * std::abs(rhs);
    const double noise = lhs.errors[i] + rhs_noise;
    const double gap = lhs.values[i] - rhs;
    ++rep.nodes_checked;
    rep.max_positive_gap = std::max(rep.max_positive_gap, gap);
    const double ratio = noise > 0.0 ? gap / noise : (gap > 0.0 ? kInf : -kInf);
    if (ratio > rep.worst_ratio) {
      rep.worst_ratio = ratio;
      rep.noise_floor = noise;
      rep.worst_x = g_in.x().coord(i);
    }
    if (gap > opts.tolerance_factor * noise) rep.holds = false;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// serialization

inline std::string certificate_csv_header() {
  return "transform,t,status,significant,gap,noise_floor,lhs,rhs,lambda,x0,y0,x1,y1,triples_checked,triples_skipped";
}

inline std::string to_csv_row(const Certificate& c) {
  std::ostringstream os;
  const auto& w = c.worst;
  os << detail::csv_quote(c.transform) << ',' << detail::fmt(w.t) << ',' << to_string(c.status) << ','
     << (c.significant ? "true" : "false") << ',' << detail::fmt(w.gap) << ',' << detail::fmt(c.noise_floor) << ',' << detail::fmt(w.lhs)
     << ',' << detail::fmt(w.rhs) << ',' << detail::fmt(w.lambda) << ',' << detail::fmt(w.x0[0]) << ',' << detail::fmt(w.x0[1]) << ','
     << detail::fmt(w.x1[0]) << ',' << detail::fmt(w.x1[1]) << ',' << c.triples_checked << ',' << c.triples_skipped;
  return os.str();
}

inline std::string summary(const Certificate& c) {
  std::ostringstream os;
  const auto& w = c.worst;
  os << "transform      " << c.transform << '\n'
     << "t              " << detail::fmt(w.t) << '\n'
     << "status         " << to_string(c.status) << (c.significant ? " (significant)" : "") << '\n'
     << "worst gap      " << detail::fmt(w.gap) << " at lambda=" << detail::fmt(w.lambda) << " x0=(" << detail::fmt(w.x0[0]) << ","
     << detail::fmt(w.x0[1]) << ") x1=(" << detail::fmt(w.x1[0]) << "," << detail::fmt(w.x1[1]) << ")\n"
     << "noise floor    " << detail::fmt(c.noise_floor) << " (factor " << detail::fmt(c.significance_factor) << ")\n"
     << "triples        " << c.triples_checked << " checked, " << c.triples_skipped << " skipped\n"
     << "note           " << c.note << '\n';
  return os.str();
}

}  // namespace fconvex
