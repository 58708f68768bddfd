#pragma once

/**
 * @file criteria.hpp
 * @brief Numerical tests of the preservation criteria for an FTransform.
 *
 * Everything here reports evidence rather than proof: integrability and
 * growth questions can come back `inconclusive`.
 */

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fconvex/ftransform.hpp"
#include "fconvex/numerics.hpp"

namespace fconvex {

// ---------------------------------------------------------------------------
// g_F

/// g_F(z) together with an absolute error estimate.
struct GEstimate {
  double value = kNaN;
  double error = kInf;
  bool closed_form = false;
};

inline GEstimate g_estimate(const FTransform& F, double z) {
  const Interval& J = F.image();
  if (!J.interior(z)) throw DomainError("g_of: z lies outside J_F");
  if (auto g = F.closed_form_g(z)) {
    return {*g, 8.0 * kEps * std::max(1.0, std::abs(*g)), true};
  }
  const double h = numerics::first_derivative_step(z);
  if (!J.interior(z - 2.0 * h) || !J.interior(z + 2.0 * h)) {
    throw DomainError("g_of: z is within two difference steps of the boundary of J_F");
  }
  auto lf = [&F](double s) { return F.log_inverse_deriv(s); };
  const auto d = numerics::central_first(lf, z, h);
  return {d.value, d.error, false};
}

/// g_F(z) = (log f_F')'(z).
inline double g_of(const FTransform& F, double z) { return g_estimate(F, z).value; }

// ---------------------------------------------------------------------------
// sampling helpers

/// Uniform grid of n points on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return v;
}

/// A compact window inside J_F used when no grid is supplied.
inline Interval default_window(const FTransform& F) {
  const Interval& J = F.image();
  const bool lo_f = std::isfinite(J.lo);
  const bool hi_f = std::isfinite(J.hi);
  if (lo_f && hi_f) {
    const double pad = 0.01 * J.length();
    return {J.lo + pad, J.hi - pad};
  }
  if (lo_f) return {J.lo + 0.01, J.lo + 10.0};
  if (hi_f) return {J.hi - 10.0, J.hi - 0.01};
  return {-10.0, 10.0};
}

inline std::vector<double> default_z_grid(const FTransform& F, std::size_t n = 201) {
  const Interval w = default_window(F);
  return linspace(w.lo, w.hi, n);
}

/**
 * Limit of F at the upper end of its domain, from a geometric approach
 * sequence. Increments that shrink geometrically are summed as a geometric
 * tail; otherwise the limit is reported as +inf.
 */
inline double sampled_limit_at_sup(const FTransform& F) {
  const Interval& D = F.domain();
  std::vector<double> r;
  if (std::isfinite(D.hi)) {
    const double w = std::isfinite(D.lo) ? D.hi - D.lo : 1.0;
    for (int k = 1; k <= 14; ++k) r.push_back(D.hi - w * std::pow(10.0, -k));
  } else {
    const double base = std::isfinite(D.lo) ? std::max(D.lo, 0.0) : 0.0;
    for (int k = 0; k <= 15; ++k) r.push_back(base + std::pow(10.0, k));
  }
  std::vector<double> v;
  for (double x : r) v.push_back(F(x));
  if (!std::isfinite(v.back())) return v.back();
  const std::size_t n = v.size();
  const double d1 = v[n - 2] - v[n - 3];
  const double d2 = v[n - 1] - v[n - 2];
  if (d2 <= 0.0) return v.back();
  if (d1 > 0.0 && d2 / d1 < 0.5) {
    const double rho = d2 / d1;
    return v.back() + d2 * rho / (1.0 - rho);
  }
  return kInf;
}

// ---------------------------------------------------------------------------
// admissibility

struct AdmissibilityReport {
  bool admissible = false;
  bool strictly_increasing = false;
  bool continuous = false;
  bool endpoint_limit_ok = false;
  double limit_at_sup = kNaN;
  /// sup F < inf: only constant data can be F-convex on the half line.
  bool trivial_class = false;
  std::optional<double> first_violation;
  std::string reason;
};

namespace detail {

inline std::vector<double> admissibility_samples(const Interval& D, std::size_t n) {
  std::vector<double> r;
  if (D.bounded()) {
    for (std::size_t i = 1; i + 1 < n + 2; ++i) {
      r.push_back(D.lo + D.length() * static_cast<double>(i) / static_cast<double>(n + 1));
    }
  } else if (std::isfinite(D.lo)) {
    // log-spaced offsets 1e-6 .. 1e6
    for (std::size_t i = 0; i < n; ++i) {
      const double e = -6.0 + 12.0 * static_cast<double>(i) / static_cast<double>(n - 1);
      r.push_back(D.lo + std::pow(10.0, e));
    }
  } else if (std::isfinite(D.hi)) {
    for (std::size_t i = 0; i < n; ++i) {
      const double e = 6.0 - 12.0 * static_cast<double>(i) / static_cast<double>(n - 1);
      r.push_back(D.hi - std::pow(10.0, e));
    }
  } else {
    // sinh-spaced points in [-200, 200]
    for (std::size_t i = 0; i < n; ++i) {
      const double s = -6.0 + 12.0 * static_cast<double>(i) / static_cast<double>(n - 1);
      r.push_back(std::sinh(s));
    }
  }
  return r;
}

}  // namespace detail

/**
 * Sampled admissibility: strict increase, absence of jumps between adjacent
 * samples (every gap is bisected towards its steepest half and must shrink), and agreement of
 * F at a finite lower endpoint with its one-sided limit.
 */
inline AdmissibilityReport check_admissible(const FTransform& F, std::size_t n_samples = 400) {
  if (n_samples < 3) throw std::invalid_argument("check_admissible: need at least 3 samples");
  AdmissibilityReport rep;
  const Interval& D = F.domain();
  const auto r = detail::admissibility_samples(D, n_samples);
  std::vector<double> v(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) v[i] = F(r[i]);

  rep.strictly_increasing = true;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    // saturation at +-inf (overflow or an infinite endpoint value) is not a violation
    if (std::isinf(v[i]) && v[i] == v[i + 1]) continue;
    if (!(v[i + 1] > v[i])) {
      rep.strictly_increasing = false;
      rep.first_violation = r[i + 1];
      rep.reason = "F is not strictly increasing";
      break;
    }
  }

  rep.continuous = true;
  if (rep.strictly_increasing) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      double a = r[i];
      double b = r[i + 1];
      double fa = v[i];
      double fb = v[i + 1];
      const double scale = std::max({1.0, std::abs(fa), std::abs(fb)});
      for (int it = 0; it < 60 && b - a > 1e-13 * std::max(1.0, std::abs(a)); ++it) {
        const double m = 0.5 * (a + b);
        const double fm = F(m);
        if (fm - fa > fb - fm) {
          b = m;
          fb = fm;
        } else {
          a = m;
          fa = fm;
        }
      }
      if (std::isfinite(fa) && std::isfinite(fb) && fb - fa > 1e-6 * scale) {
        rep.continuous = false;
        rep.first_violation = a;
        rep.reason = "F jumps near the reported sample";
        break;
      }
    }
  }

  rep.endpoint_limit_ok = true;
  if (std::isfinite(D.lo)) {
    // Approach the endpoint geometrically until the offset underflows; the
    // distances to F(lo) must keep shrinking.
    const double at = F(D.lo);
    const double w = std::isfinite(D.hi) ? D.length() : 1.0;
    std::vector<double> dist;
    std::vector<double> vals;
    for (double d = 1e-2 * w; D.lo + d > D.lo; d *= 1e-4) {
      vals.push_back(F(D.lo + d));
      dist.push_back(std::abs(vals.back() - at));
    }
    if (at == -kInf) {
      for (std::size_t i = 1; i < vals.size(); ++i) {
        if (!(vals[i] <= vals[i - 1])) rep.endpoint_limit_ok = false;
      }
    } else if (dist.size() >= 2) {
      const double scale = std::max(1.0, std::abs(at));
      const bool shrinking = dist.back() < 0.5 * dist.front() || dist.back() <= 1e-9 * scale;
      rep.endpoint_limit_ok = shrinking && dist.back() <= 0.1 * scale;
    }
    if (!rep.endpoint_limit_ok && rep.reason.empty()) {
      rep.reason = "F at the lower endpoint differs from its one-sided limit";
      rep.first_violation = D.lo;
    }
  }

  rep.limit_at_sup = sampled_limit_at_sup(F);
  rep.admissible = rep.strictly_increasing && rep.continuous && rep.endpoint_limit_ok;
  rep.trivial_class = rep.admissible && F.domain_kind() != DomainKind::bounded_above &&
                      std::isfinite(rep.limit_at_sup);
  return rep;
}

// ---------------------------------------------------------------------------
// Gaussian-weighted growth of f_F

enum class Integrability { finite, divergent, inconclusive };

inline const char* to_string(Integrability v) {
  switch (v) {
    case Integrability::finite: return "finite";
    case Integrability::divergent: return "divergent";
    case Integrability::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ConditionFReport {
  Integrability result = Integrability::inconclusive;
  double z_start = kNaN;
  std::vector<double> z_max;
  /// log of the integral over each successive schedule segment.
  std::vector<double> log_increments;
  std::vector<double> increment_ratios;
};

namespace detail {

/// log of the integral of e^{-A z^2}|f_F(z)| over [a, b].
inline double log_weighted_integral(const FTransform& F, double A, double a, double b) {
  const double zm = std::max(std::abs(a), std::abs(b));
  const double per_unit = 4.0 * (1.0 + 2.0 * A * zm);
  const int panels = std::clamp(static_cast<int>(std::ceil((b - a) * per_unit)), 8, 40000);
  return numerics::log_integrate_exp(
      [&F, A](double z) { return -A * z * z + F.log_abs_inverse(z); }, a, b, panels, 10);
}

}  // namespace detail

/**
 * Tail test for int_{F(1)}^{Z} e^{-A z^2} f_F(z) dz over the schedule of Z.
 * Finite when successive increments shrink at least geometrically (ratio
 * < 1/2), divergent when they grow.
 */
inline ConditionFReport check_condition_F(const FTransform& F, double A,
                                          std::vector<double> z_max_schedule = {8, 16, 32, 64}) {
  if (!(A > 0.0)) throw std::invalid_argument("check_condition_F: A must be positive");
  ConditionFReport rep;
  const Interval& J = F.image();
  const double z1 = F(1.0);
  if (!std::isfinite(z1) || z1 < J.lo || z1 > J.hi) {
    throw DomainError("check_condition_F: F(1) is not in the closure of J_F");
  }
  rep.z_start = z1;
  if (std::isfinite(J.hi)) return rep;  // condition is vacuous, nothing to test
  std::sort(z_max_schedule.begin(), z_max_schedule.end());
  double prev = z1;
  for (double Z : z_max_schedule) {
    if (!(Z > prev)) continue;
    rep.z_max.push_back(Z);
    rep.log_increments.push_back(detail::log_weighted_integral(F, A, prev, Z));
    prev = Z;
  }
  const auto& L = rep.log_increments;
  for (std::size_t i = 1; i < L.size(); ++i) rep.increment_ratios.push_back(std::exp(L[i] - L[i - 1]));
  if (rep.increment_ratios.empty()) return rep;
  const double last = rep.increment_ratios.back();
  if (L.back() == kInf) {
    rep.result = Integrability::divergent;
  } else if (last < 0.5) {
    rep.result = Integrability::finite;
  } else if (last > 1.0) {
    bool growing = true;
    for (std::size_t i = 1; i < rep.increment_ratios.size(); ++i) {
      growing = growing && rep.increment_ratios[i] >= rep.increment_ratios[i - 1] * 0.999;
    }
    rep.result = growing || last > 10.0 ? Integrability::divergent : Integrability::inconclusive;
  }
  return rep;
}

/// Leading quadratic coefficient of log|f_F| on the upper tail.
struct AStarEstimate {
  /// inf-compatible estimate: 0 for sub-quadratic growth, NaN when inconclusive.
  double value = kNaN;
  bool conclusive = false;
  bool super_quadratic = false;
  double c_small = kNaN;  ///< fit on [Z/4, Z/2]
  double c_large = kNaN;  ///< fit on [Z/2, Z]
};

inline AStarEstimate estimate_A_star(const FTransform& F, double Z = 64.0, std::size_t n = 65) {
  AStarEstimate est;
  const Interval& J = F.image();
  if (std::isfinite(J.hi)) {
    est.value = 0.0;
    est.conclusive = true;
    return est;
  }
  const double shift = std::isfinite(J.lo) ? std::max(J.lo, 0.0) : 0.0;
  auto fit = [&F, n](double a, double b) {
    const auto x = linspace(a, b, n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = F.log_abs_inverse(x[i]);
    return numerics::fit_quadratic(x, y)[2];
  };
  est.c_small = fit(shift + Z / 4.0, shift + Z / 2.0);
  est.c_large = fit(shift + Z / 2.0, shift + Z);
  if (!std::isfinite(est.c_small) || !std::isfinite(est.c_large)) return est;
  if (est.c_small <= 1e-3 && est.c_large <= 1e-3) {
    est.value = 0.0;
    est.conclusive = true;
    return est;
  }
  const double hi = std::max(est.c_small, est.c_large);
  const double lo = std::min(est.c_small, est.c_large);
  if (lo > 0.0 && (hi - lo) <= 0.2 * hi) {
    est.value = est.c_large;
    est.conclusive = true;
  } else if (est.c_large > 1.2 * est.c_small && est.c_large > 0.0) {
    est.super_quadratic = true;
  }
  return est;
}

// ---------------------------------------------------------------------------
// the g_F convexity criterion

struct Condition14Report {
  bool fprime_positive = false;
  bool g_convex = false;
  double min_fprime = kNaN;
  /// most negative second difference of g_F relative to its tolerance
  double worst_z = kNaN;
  double worst_second_difference = kNaN;
  double tolerance_at_worst = kNaN;
};

/**
 * F' > 0 (sampled through f_F' being finite and positive) and convexity of
 * g_F by second differences, each compared with 100x the propagated error
 * of the three g_F values.
 */
inline Condition14Report check_condition_14(const FTransform& F, const std::vector<double>& z_grid) {
  if (z_grid.size() < 5) throw std::invalid_argument("check_condition_14: need at least 5 points");
  const Interval& J = F.image();
  for (double z : z_grid) {
    if (!J.interior(z)) throw DomainError("check_condition_14: grid leaves J_F");
  }
  Condition14Report rep;
  std::vector<GEstimate> g(z_grid.size());
  rep.min_fprime = kInf;
  rep.fprime_positive = true;
  for (std::size_t i = 0; i < z_grid.size(); ++i) {
    g[i] = g_estimate(F, z_grid[i]);
    const double lfp = F.log_inverse_deriv(z_grid[i]);
    const double fp = std::exp(lfp);
    rep.min_fprime = std::min(rep.min_fprime, fp);
    if (!(std::isfinite(lfp) && fp > 0.0 && std::isfinite(g[i].value))) rep.fprime_positive = false;
  }
  rep.g_convex = true;
  double worst = kInf;
  for (std::size_t i = 1; i + 1 < z_grid.size(); ++i) {
    const double ha = z_grid[i] - z_grid[i - 1];
    const double hb = z_grid[i + 1] - z_grid[i];
    // non-uniform second divided difference, scaled to a uniform-grid second difference
    const double d2 = 2.0 * ((g[i + 1].value - g[i].value) / hb - (g[i].value - g[i - 1].value) / ha) /
                      (ha + hb) * ha * hb;
    const double tol = 100.0 * (g[i - 1].error + 2.0 * g[i].error + g[i + 1].error);
    const double score = d2 + tol;
    if (score < worst) {
      worst = score;
      rep.worst_z = z_grid[i];
      rep.worst_second_difference = d2;
      rep.tolerance_at_worst = tol;
    }
    if (d2 < -tol) rep.g_convex = false;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// comparison of two transforms

enum class Strength { F1_weaker, F1_stronger, equivalent, neither };

inline const char* to_string(Strength s) {
  switch (s) {
    case Strength::F1_weaker: return "F1_weaker";
    case Strength::F1_stronger: return "F1_stronger";
    case Strength::equivalent: return "equivalent";
    case Strength::neither: return "neither";
  }
  return "?";
}

struct StrengthReport {
  Strength verdict = Strength::neither;
  double fit_A = kNaN;
  double fit_B = kNaN;
  /// largest relative residual left after discounting f_F2's own round-trip error
  double fit_residual = kNaN;
  bool forward_convex = false;   ///< F1 o f_F2 convex on the grid
  bool backward_convex = false;  ///< F2 o f_F1 convex on the image grid
  double forward_worst_z = kNaN;
  double forward_worst_second_difference = kNaN;
  double backward_worst_w = kNaN;
  double backward_worst_second_difference = kNaN;
};

namespace detail {

struct ConvexScan {
  bool convex = true;
  double worst_x = kNaN;
  double worst_d2 = kInf;
};

/// Second differences of y on a uniform x grid against a relative value-noise budget.
inline ConvexScan scan_convex(const std::vector<double>& x, const std::vector<double>& y,
                              double rel_noise) {
  ConvexScan s;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const double d2 = y[i - 1] - 2.0 * y[i] + y[i + 1];
    const double scale = std::max({1.0, std::abs(y[i - 1]), std::abs(y[i]), std::abs(y[i + 1])});
    const double tol = 400.0 * rel_noise * scale;
    if (d2 < s.worst_d2) {
      s.worst_d2 = d2;
      s.worst_x = x[i];
    }
    if (d2 < -tol) s.convex = false;
  }
  return s;
}

/// Value noise assumed for compositions; inversion accuracy dominates.
inline double composition_noise(const FTransform& a, const FTransform& b) {
  auto noisy = [](const FTransform& F) {
    return F.tag().family == Family::g_constructed || F.tag().family == Family::hot ||
           !F.model().inverse;
  };
  return noisy(a) || noisy(b) ? 1e-11 : 64.0 * kEps;
}

}  // namespace detail

/// Least-squares fit F1 = A F2 + B over points r = f_F2(z); equivalence when A > 0 and residuals vanish.
inline StrengthReport affine_relation(const FTransform& F1, const FTransform& F2,
                                      const std::vector<double>& z_grid) {
  StrengthReport rep;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> round_trip;
  for (double z : z_grid) {
    const double r = F2.inverse(z);
    if (!F1.domain().contains(r)) throw DomainError("compare_strength: f_F2 leaves the domain of F1");
    x.push_back(z);
    y.push_back(F1(r));
    const double back = F2(r);
    round_trip.push_back(std::isfinite(back) ? std::abs(back - z) : kInf);
  }
  // fit on the points where f_F2 is known to full precision
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (round_trip[i] <= 1e-12 * std::max(1.0, std::abs(x[i])) && std::isfinite(y[i])) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  }
  const auto ab = xs.size() >= 5 ? numerics::fit_affine(xs, ys) : numerics::fit_affine(x, y);
  rep.fit_A = ab[0];
  rep.fit_B = ab[1];
  double res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double scale = std::max(1.0, std::abs(y[i]));
    const double excess = std::abs(y[i] - (ab[0] * x[i] + ab[1])) - 4.0 * std::abs(ab[0]) * round_trip[i];
    res = std::max(res, std::max(excess, 0.0) / scale);
  }
  rep.fit_residual = res;
  return rep;
}

/**
 * Which of the two classes contains the other: F1 o f_F2 convex means every
 * F2-convex function is F1-convex (F1 is the weaker notion).
 */
inline StrengthReport compare_strength(const FTransform& F1, const FTransform& F2,
                                       const std::vector<double>& z_grid) {
  if (z_grid.size() < 5) throw std::invalid_argument("compare_strength: need at least 5 points");
  for (double z : z_grid) {
    if (!F2.image().interior(z)) throw DomainError("compare_strength: grid leaves J_F2");
  }
  StrengthReport rep = affine_relation(F1, F2, z_grid);
  const double noise = detail::composition_noise(F1, F2);
  const bool equivalent = rep.fit_A > 0.0 && rep.fit_residual <= 1e3 * noise;

  const auto zs = linspace(z_grid.front(), z_grid.back(), z_grid.size());
  std::vector<double> fw(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) fw[i] = F1(F2.inverse(zs[i]));
  const auto sf = detail::scan_convex(zs, fw, noise);
  rep.forward_convex = sf.convex;
  rep.forward_worst_z = sf.worst_x;
  rep.forward_worst_second_difference = sf.worst_d2;

  double wlo = kInf;
  double whi = -kInf;
  for (double v : fw) {
    if (std::isfinite(v)) {
      wlo = std::min(wlo, v);
      whi = std::max(whi, v);
    }
  }
  const auto ws = linspace(wlo, whi, zs.size());
  std::vector<double> bw(ws.size());
  for (std::size_t i = 0; i < ws.size(); ++i) bw[i] = F2(F1.inverse(ws[i]));
  const auto sb = detail::scan_convex(ws, bw, noise);
  rep.backward_convex = sb.convex;
  rep.backward_worst_w = sb.worst_x;
  rep.backward_worst_second_difference = sb.worst_d2;

  if (equivalent) rep.verdict = Strength::equivalent;
  else if (rep.forward_convex) rep.verdict = Strength::F1_weaker;
  else if (rep.backward_convex) rep.verdict = Strength::F1_stronger;
  else rep.verdict = Strength::neither;
  return rep;
}

// ---------------------------------------------------------------------------
// shape consequences of preservation with sub-Gaussian f_F

struct ConsequenceReport {
  bool f_convex = false;
  bool log_f_concave = false;
  double worst_f_second_difference = kNaN;
  double worst_log_f_second_difference = kNaN;
};

/// f_F convex and log f_F concave on the grid, tolerances from value noise.
inline ConsequenceReport check_preservation_consequences(const FTransform& F,
                                                         const std::vector<double>& z_grid) {
  ConsequenceReport rep;
  std::vector<double> f(z_grid.size());
  std::vector<double> lf(z_grid.size());
  std::vector<double> neg(z_grid.size());
  for (std::size_t i = 0; i < z_grid.size(); ++i) {
    if (!F.image().interior(z_grid[i])) throw DomainError("check_preservation_consequences: grid leaves J_F");
    f[i] = F.inverse(z_grid[i]);
    lf[i] = F.log_abs_inverse(z_grid[i]);
    neg[i] = -lf[i];
  }
  const double noise = F.model().inverse ? 64.0 * kEps : 1e-11;
  const auto a = detail::scan_convex(z_grid, f, noise);
  const auto b = detail::scan_convex(z_grid, neg, noise);
  rep.f_convex = a.convex;
  rep.log_f_concave = b.convex;
  rep.worst_f_second_difference = a.worst_d2;
  rep.worst_log_f_second_difference = -b.worst_d2;
  return rep;
}

// ---------------------------------------------------------------------------
// classification

enum class Verdict { preserved, only_trivially_preserved, not_preserved, trivial, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::preserved: return "preserved";
    case Verdict::only_trivially_preserved: return "only_trivially_preserved";
    case Verdict::not_preserved: return "not_preserved";
    case Verdict::trivial: return "trivial";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ClassReport {
  std::string label;
  DomainKind kind = DomainKind::half_line_nonneg;
  bool admissible = false;
  double limit_at_sup = kNaN;
  bool cond_13_divergent = false;
  /// inf if (F) fails, 0 if (F') holds, NaN if undecided
  double cond_F_A_star = kNaN;
  Integrability cond_F = Integrability::inconclusive;
  bool cond_14_Fprime_pos = false;
  bool cond_14_gF_convex = false;
  /// whole line only: Gaussian integrability of |f_F| over all of J_F for every A
  std::optional<bool> two_sided_sub_gaussian;
  std::optional<bool> affine;
  Verdict verdict = Verdict::inconclusive;
  std::string theorem_basis;
  std::string notes;
};

namespace detail {

/// Gaussian integrability of |f_F| near a finite lower end of J_F (f_F -> -inf there).
inline Integrability lower_end_integrability(const FTransform& F) {
  const double lo = F.image().lo;
  std::vector<double> inc;
  double prev = lo + 1.0;
  for (int k = 1; k <= 8; ++k) {
    const double a = lo + std::pow(10.0, -2.0 * k);
    const double v = numerics::integrate([&F](double z) { return std::abs(F.inverse(z)); }, a, prev, 16, 10);
    inc.push_back(v);
    prev = a;
  }
  const double r1 = inc[inc.size() - 1] / inc[inc.size() - 2];
  if (r1 < 0.5) return Integrability::finite;
  if (r1 > 1.0) return Integrability::divergent;
  return Integrability::inconclusive;
}

/// A* for the lower tail of J_F = R (growth of |f_F(z)| as z -> -inf).
inline AStarEstimate lower_tail_A_star(const FTransform& F) {
  FTransform::Model m;
  m.kind = DomainKind::whole_line;
  m.domain = {-kInf, kInf};
  m.image = {-kInf, kInf};
  m.eval = [F](double r) { return -F(-r); };
  m.inverse = [F](double z) { return -F.inverse(-z); };
  m.log_abs_inverse = [F](double z) { return F.log_abs_inverse(-z); };
  return estimate_A_star(FTransform(std::move(m)));
}

inline bool is_affine(const FTransform& F) {
  const Interval& D = F.domain();
  const double lo = std::isfinite(D.lo) ? D.lo : -10.0;
  const double hi = std::isfinite(D.hi) ? D.hi : 10.0;
  const auto r = linspace(lo, hi, 101);
  std::vector<double> y(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) y[i] = F(r[i]);
  const auto ab = numerics::fit_affine(r, y);
  double res = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    res = std::max(res, std::abs(y[i] - ab[0] * r[i] - ab[1]) / std::max(1.0, std::abs(y[i])));
  }
  return ab[0] > 0.0 && res <= 1e-9;
}

inline void apply_g_criterion(const FTransform& F, ClassReport& rep) {
  const auto c14 = check_condition_14(F, default_z_grid(F));
  rep.cond_14_Fprime_pos = c14.fprime_positive;
  rep.cond_14_gF_convex = c14.g_convex;
  if (!c14.g_convex) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "g_F second difference %.3g (tol %.3g) at z=%.6g",
                  c14.worst_second_difference, c14.tolerance_at_worst, c14.worst_z);
    rep.notes = buf;
  }
}

}  // namespace detail

/**
 * Route on the domain shape and apply the matching criterion. The `trivial`
 * verdict is never produced: a bounded-above F is reported as
 * only_trivially_preserved with the triviality recorded in theorem_basis.
 */
inline ClassReport classify(const FTransform& F) {
  ClassReport rep;
  rep.label = F.label();
  rep.kind = F.domain_kind();
  const auto adm = check_admissible(F);
  rep.admissible = adm.admissible;
  rep.limit_at_sup = F.image().hi;
  if (!adm.admissible) {
    rep.verdict = Verdict::inconclusive;
    rep.theorem_basis = "not admissible: " + adm.reason;
    return rep;
  }

  if (rep.kind == DomainKind::bounded_above) {
    detail::apply_g_criterion(F, rep);
    const bool blows_up = rep.limit_at_sup == kInf && std::isinf(adm.limit_at_sup);
    rep.verdict = blows_up && rep.cond_14_Fprime_pos && rep.cond_14_gF_convex ? Verdict::preserved
                                                                              : Verdict::not_preserved;
    rep.theorem_basis = blows_up ? "dirichlet: F(l-)=inf, F'>0, g_F convex on F(int I)"
                                 : "dirichlet: F stays finite at the boundary value";
    return rep;
  }

  if (std::isfinite(rep.limit_at_sup)) {
    rep.verdict = Verdict::only_trivially_preserved;
    rep.cond_F_A_star = kInf;
    rep.theorem_basis = "sup F < inf: F-convex data are constant";
    return rep;
  }

  const auto est = estimate_A_star(F);
  if (rep.kind == DomainKind::whole_line) {
    bool lower_ok = false;
    bool lower_known = true;
    if (std::isfinite(F.image().lo)) {
      const auto li = detail::lower_end_integrability(F);
      lower_ok = li == Integrability::finite;
      lower_known = li != Integrability::inconclusive;
    } else {
      const auto lest = detail::lower_tail_A_star(F);
      lower_ok = lest.conclusive && lest.value == 0.0;
      lower_known = lest.conclusive || lest.super_quadratic;
    }
    const bool upper_ok = est.conclusive && est.value == 0.0;
    const bool upper_known = est.conclusive || est.super_quadratic;
    if (upper_known && lower_known) {
      rep.two_sided_sub_gaussian = upper_ok && lower_ok;
      if (*rep.two_sided_sub_gaussian) {
        rep.cond_F_A_star = 0.0;
        rep.cond_F = Integrability::finite;
        detail::apply_g_criterion(F, rep);
        rep.affine = detail::is_affine(F);
        rep.verdict = *rep.affine ? Verdict::preserved : Verdict::not_preserved;
        rep.theorem_basis = "whole line, f_F sub-Gaussian at both ends: preserved iff F affine";
        return rep;
      }
    }
  }

  rep.cond_F_A_star = est.conclusive ? est.value : (est.super_quadratic ? kInf : kNaN);
  const double A_test = est.conclusive ? 2.0 * est.value + 0.5 : 50.0;
  const auto cf = check_condition_F(F, A_test);
  rep.cond_F = cf.result;
  const std::string where = rep.kind == DomainKind::whole_line ? "whole line, " : "";

  if (cf.result == Integrability::divergent && !est.conclusive) {
    rep.cond_13_divergent = true;
    rep.cond_F_A_star = kInf;
    rep.verdict = Verdict::only_trivially_preserved;
    rep.theorem_basis = where + "f_F outgrows every Gaussian: no nontrivial evolving data";
    return rep;
  }
  if (cf.result != Integrability::finite) {
    rep.verdict = Verdict::inconclusive;
    rep.theorem_basis = where + "Gaussian integrability of f_F undecided";
    return rep;
  }
  detail::apply_g_criterion(F, rep);
  rep.verdict = rep.cond_14_Fprime_pos && rep.cond_14_gF_convex ? Verdict::preserved
                                                                : Verdict::not_preserved;
  rep.theorem_basis = where + "f_F Gaussian-integrable: preserved iff F'>0 and g_F convex";
  return rep;
}

// ---------------------------------------------------------------------------
// serialization

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

inline std::string opt_bool(const std::optional<bool>& b) {
  if (!b) return "na";
  return *b ? "true" : "false";
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// One `key=value` per line.
inline std::string to_key_value(const ClassReport& r) {
  std::ostringstream os;
  os << "transform=" << r.label << "\n"
     << "domain_kind=" << to_string(r.kind) << "\n"
     << "admissible=" << (r.admissible ? "true" : "false") << "\n"
     << "limit_at_sup=" << detail::fmt(r.limit_at_sup) << "\n"
     << "cond_13_divergent=" << (r.cond_13_divergent ? "true" : "false") << "\n"
     << "cond_F_A_star=" << detail::fmt(r.cond_F_A_star) << "\n"
     << "cond_F=" << to_string(r.cond_F) << "\n"
     << "cond_14_Fprime_pos=" << (r.cond_14_Fprime_pos ? "true" : "false") << "\n"
     << "cond_14_gF_convex=" << (r.cond_14_gF_convex ? "true" : "false") << "\n"
     << "two_sided_sub_gaussian=" << detail::opt_bool(r.two_sided_sub_gaussian) << "\n"
     << "affine=" << detail::opt_bool(r.affine) << "\n"
     << "verdict=" << to_string(r.verdict) << "\n"
     << "theorem_basis=" << r.theorem_basis << "\n"
     << "notes=" << r.notes << "\n";
  return os.str();
}

inline std::string class_report_csv_header() {
  return "transform,domain_kind,admissible,limit_at_sup,cond_13_divergent,cond_F_A_star,cond_F,"
         "cond_14_Fprime_pos,cond_14_gF_convex,two_sided_sub_gaussian,affine,verdict,theorem_basis";
}

inline std::string to_csv_row(const ClassReport& r) {
  std::ostringstream os;
  os << detail::csv_quote(r.label) << ',' << to_string(r.kind) << ','
     << (r.admissible ? "true" : "false") << ',' << detail::fmt(r.limit_at_sup) << ','
     << (r.cond_13_divergent ? "true" : "false") << ',' << detail::fmt(r.cond_F_A_star) << ','
     << to_string(r.cond_F) << ',' << (r.cond_14_Fprime_pos ? "true" : "false") << ','
     << (r.cond_14_gF_convex ? "true" : "false") << ',' << detail::opt_bool(r.two_sided_sub_gaussian) << ','
     << detail::opt_bool(r.affine) << ',' << to_string(r.verdict) << ','
     << detail::csv_quote(r.theorem_basis);
  return os.str();
}

}  // namespace fconvex
