#pragma once

/**
 * @file numerics.hpp
 * @brief Small numerical kernels shared by every fconvex module.
 *
 * Gauss-Legendre rules, monotone root bracketing/inversion, log-space
 * accumulation, finite-difference stencils, and a shape-preserving cubic
 * interpolant (Fritsch-Carlson PCHIP). Extended reals are plain IEEE
 * infinities; the conventions e^{-inf}=0, log 0=-inf, -inf+b=-inf hold
 * natively.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fconvex {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kEps = std::numeric_limits<double>::epsilon();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Thrown when an argument lies outside the domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Closed or open real interval with possibly infinite endpoints.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  [[nodiscard]] bool contains(double x) const { return x >= lo && x <= hi; }
  [[nodiscard]] bool interior(double x) const { return x > lo && x < hi; }
  [[nodiscard]] double length() const { return hi - lo; }
  [[nodiscard]] bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
};

namespace numerics {

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussRule make_gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[static_cast<std::size_t>(i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

/// Cached rules. Order 10 is the working rule, order 6 the comparison rule
/// used for a posteriori error estimates.
inline const GaussRule& gauss(int n) {
  static const GaussRule g6 = make_gauss_legendre(6);
  static const GaussRule g10 = make_gauss_legendre(10);
  static const GaussRule g20 = make_gauss_legendre(20);
  switch (n) {
    case 6: return g6;
    case 10: return g10;
    case 20: return g20;
    default: throw std::invalid_argument("unsupported Gauss-Legendre order " + std::to_string(n));
  }
}

/// Integral of fn over [a, b] with `panels` equal panels of an order-n rule.
template <typename Fn>
double integrate(Fn&& fn, double a, double b, int panels = 1, int order = 10) {
  const auto& rule = gauss(order);
  const double w = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * w;
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      acc += rule.weights[i] * fn(mid + 0.5 * w * rule.nodes[i]);
    }
    sum += 0.5 * w * acc;
  }
  return sum;
}

/// log(e^a + e^b) without overflow; either argument may be -inf.
inline double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// log of the integral of exp(log_fn) over [a, b], computed in log space.
template <typename LogFn>
double log_integrate_exp(LogFn&& log_fn, double a, double b, int panels = 1, int order = 10) {
  if (!(b > a)) return -kInf;
  const auto& rule = gauss(order);
  const double w = (b - a) / panels;
  std::vector<double> logs;
  std::vector<double> wts;
  logs.reserve(static_cast<std::size_t>(panels) * rule.nodes.size());
  double mx = -kInf;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * w;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double v = log_fn(mid + 0.5 * w * rule.nodes[i]);
      logs.push_back(v);
      wts.push_back(0.5 * w * rule.weights[i]);
      mx = std::max(mx, v);
    }
  }
  if (mx == -kInf) return -kInf;
  if (mx == kInf) return kInf;
  double s = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) s += wts[i] * std::exp(logs[i] - mx);
  return mx + std::log(s);
}

/// Outcome of a monotone inversion.
struct InversionResult {
  double x = kNaN;
  int iterations = 0;
};

/**
 * Solve fn(x) = target for increasing fn on [lo, hi] (finite bracket with
 * fn(lo) <= target <= fn(hi)). Bisection down to width 1e-12*(1+|x|), then
 * at most four Newton polishing steps when a derivative is supplied.
 */
template <typename Fn>
InversionResult invert_bracketed(Fn&& fn, double target, double lo, double hi,
                                 const std::function<double(double)>& deriv = {}) {
  InversionResult res;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= 1e-12 * (1.0 + std::abs(mid))) break;
    if (mid <= lo || mid >= hi) break;
    const double v = fn(mid);
    if (v < target) lo = mid;
    else hi = mid;
    res.iterations = it + 1;
  }
  double x = 0.5 * (lo + hi);
  if (deriv) {
    double resid = std::abs(fn(x) - target);
    for (int k = 0; k < 4 && resid > 0.0; ++k) {
      const double d = deriv(x);
      if (!(std::isfinite(d) && d > 0.0)) break;
      const double xn = x - (fn(x) - target) / d;
      if (!(xn >= lo - (hi - lo) && xn <= hi + (hi - lo))) break;
      const double rn = std::abs(fn(xn) - target);
      if (!(rn < resid)) break;
      x = xn;
      resid = rn;
    }
  }
  res.x = x;
  return res;
}

/**
 * Solve fn(x) = target for increasing fn on `domain`, expanding a finite
 * bracket outward from `guess` by doubling steps when the domain is
 * unbounded. Returns the domain endpoint when the target is beyond the range.
 */
template <typename Fn>
double invert_monotone(Fn&& fn, double target, Interval domain, double guess = 0.0,
                       const std::function<double(double)>& deriv = {}) {
  if (std::isnan(target)) return kNaN;
  double lo = domain.lo;
  double hi = domain.hi;
  guess = std::clamp(guess, std::isfinite(lo) ? lo : -1e300, std::isfinite(hi) ? hi : 1e300);
  if (!std::isfinite(lo)) {
    double step = 1.0;
    lo = std::isfinite(hi) ? std::min(guess, hi) - step : guess - step;
    for (int k = 0; k < 2100 && fn(lo) > target; ++k) {
      step *= 2.0;
      lo -= step;
      if (!std::isfinite(lo)) return -kInf;
    }
  } else if (fn(lo) >= target) {
    return lo;
  }
  if (!std::isfinite(hi)) {
    double step = 1.0;
    hi = std::max(guess, lo) + step;
    for (int k = 0; k < 2100 && fn(hi) < target; ++k) {
      step *= 2.0;
      hi += step;
      if (!std::isfinite(hi)) return kInf;
    }
  } else if (fn(hi) <= target) {
    return hi;
  }
  return invert_bracketed(fn, target, lo, hi, deriv).x;
}

/// Central first derivative with error estimate from a step-doubling comparison.
struct Derivative {
  double value = kNaN;
  double error = kInf;
};

/// Step used by first-derivative stencils: max(1e-5, 1e-5|z|).
inline double first_derivative_step(double z) { return std::max(1e-5, 1e-5 * std::abs(z)); }

/// Step used by five-point second-derivative stencils, near eps^{1/6} scaled to z.
inline double second_derivative_step(double z) { return 2e-3 * std::max(1.0, std::abs(z)); }

template <typename Fn>
Derivative central_first(Fn&& fn, double z, double h) {
  const double d1 = (fn(z + h) - fn(z - h)) / (2.0 * h);
  const double d2 = (fn(z + 2.0 * h) - fn(z - 2.0 * h)) / (4.0 * h);
  const double scale = std::max({std::abs(fn(z + h)), std::abs(fn(z - h)), 1e-300});
  return {d1, std::abs(d1 - d2) / 3.0 + 4.0 * kEps * scale / h};
}

/// Five-point first derivative, O(h^4).
template <typename Fn>
double five_point_first(Fn&& fn, double z, double h) {
  return (-fn(z + 2 * h) + 8 * fn(z + h) - 8 * fn(z - h) + fn(z - 2 * h)) / (12 * h);
}

/// Five-point second derivative, O(h^4).
template <typename Fn>
double five_point_second(Fn&& fn, double z, double h) {
  return (-fn(z + 2 * h) + 16 * fn(z + h) - 30 * fn(z) + 16 * fn(z - h) - fn(z - 2 * h)) /
         (12 * h * h);
}

/**
 * Fritsch-Carlson monotone piecewise cubic Hermite interpolant on a uniform
 * grid. Preserves monotonicity of the data in every cell.
 */
class Pchip {
 public:
  Pchip() = default;
  Pchip(double x0, double h, std::vector<double> y) : x0_(x0), h_(h), y_(std::move(y)) {
    const std::size_t n = y_.size();
    if (n < 2) throw std::invalid_argument("Pchip needs at least two samples");
    d_.assign(n, 0.0);
    limited_.assign(n, false);
    std::vector<double> del(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) del[i] = (y_[i + 1] - y_[i]) / h_;
    if (n == 2) {
      d_[0] = d_[1] = del[0];
      return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (del[i - 1] * del[i] <= 0.0) {
        d_[i] = 0.0;
        limited_[i] = del[i - 1] != 0.0 || del[i] != 0.0;
      } else {
        d_[i] = 2.0 / (1.0 / del[i - 1] + 1.0 / del[i]);
      }
    }
    d_[0] = end_slope(del[0], del[1]);
    d_[n - 1] = end_slope(del[n - 2], del[n - 3]);
    // harmonic-mean slopes far from the arithmetic mean flag a kink as well
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double am = 0.5 * (del[i - 1] + del[i]);
      if (std::abs(am - d_[i]) > 0.25 * std::max(std::abs(del[i - 1]), std::abs(del[i]))) limited_[i] = true;
    }
  }

  [[nodiscard]] double operator()(double x) const {
    const std::size_t n = y_.size();
    double s = (x - x0_) / h_;
    auto i = static_cast<std::ptrdiff_t>(std::floor(s));
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 2);
    const auto k = static_cast<std::size_t>(i);
    const double u = s - static_cast<double>(i);
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * y_[k] + h10 * h_ * d_[k] + h01 * y_[k + 1] + h11 * h_ * d_[k + 1];
  }

  /**
   * Cell-wise a posteriori error estimate: the largest |pchip - Lagrange|
   * over five interior points of the cell (cubic through the four nearest
   * nodes, one-sided quadratic at the ends), plus |pchip - linear| in cells
   * touching a limited slope (kinks and extrema, where both may be wrong in
   * the same way).
   */
  [[nodiscard]] std::vector<double> cell_error_estimates() const {
    const std::size_t n = y_.size();
    std::vector<double> err(n > 1 ? n - 1 : 0, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      std::size_t j = k;
      std::size_t m = 2;
      if (n >= 4 && k >= 1 && k + 2 < n) {
        j = k - 1;
        m = 4;
      } else if (n >= 3) {
        j = k == 0 ? 0 : n - 3;
        m = 3;
      }
      double worst = 0.0;
      for (double u : {0.25, 1.0 / 3.0, 0.5, 2.0 / 3.0, 0.75}) {
        const double s = static_cast<double>(k) + u;
        double lag = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
          double w = 1.0;
          for (std::size_t b = 0; b < m; ++b) {
            if (b != a) w *= (s - static_cast<double>(j + b)) / static_cast<double>(static_cast<std::ptrdiff_t>(a) - static_cast<std::ptrdiff_t>(b));
          }
          lag += w * y_[j + a];
        }
        worst = std::max(worst, std::abs((*this)(x0_ + s * h_) - lag));
      }
      err[k] = worst + 4.0 * kEps * std::max(std::abs(y_[k]), std::abs(y_[k + 1]));
      if (limited_[k] || limited_[k + 1]) {
        err[k] += std::abs((*this)(x0_ + (static_cast<double>(k) + 0.5) * h_) - 0.5 * (y_[k] + y_[k + 1]));
      }
    }
    return err;
  }

 private:
  static double end_slope(double d0, double d1) {
    double d = (3.0 * d0 - d1) / 2.0;
    if (d * d0 <= 0.0) d = 0.0;
    else if (d0 * d1 <= 0.0 && std::abs(d) > std::abs(3.0 * d0)) d = 3.0 * d0;
    return d;
  }

  double x0_ = 0.0;
  double h_ = 1.0;
  std::vector<double> y_;
  std::vector<double> d_;
  std::vector<bool> limited_;
};

/// Least-squares fit y ~ c0 + c1 x + c2 x^2 (normal equations, centred).
inline std::array<double, 3> fit_quadratic(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double xm = 0.0;
  for (double v : x) xm += v;
  xm /= static_cast<double>(n);
  double m[3][4] = {};
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x[i] - xm;
    const double p[3] = {1.0, u, u * u};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += p[r] * p[c];
      m[r][3] += p[r] * y[i];
    }
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    for (int k = 0; k < 4; ++k) std::swap(m[c][k], m[piv][k]);
    for (int r = 0; r < 3; ++r) {
      if (r == c || m[c][c] == 0.0) continue;
      const double f = m[r][c] / m[c][c];
      for (int k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
    }
  }
  const double b0 = m[0][3] / m[0][0];
  const double b1 = m[1][3] / m[1][1];
  const double b2 = m[2][3] / m[2][2];
  // un-centre: b0 + b1 (x - xm) + b2 (x - xm)^2
  return {b0 - b1 * xm + b2 * xm * xm, b1 - 2.0 * b2 * xm, b2};
}

/// Least-squares fit y ~ a x + b. Returns {a, b}.
inline std::array<double, 2> fit_affine(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double xm = sx / static_cast<double>(n);
  const double ym = sy / static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
  }
  const double a = sxy / sxx;
  return {a, ym - a * xm};
}

/**
 * Run body(i) for i in [0, n) over `threads` contiguous blocks. Each index
 * is computed independently, so the result does not depend on the split.
 */
template <typename Body>
void parallel_for(std::size_t n, Body&& body, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, &failures, t, b, e] {
      try {
        for (std::size_t i = b; i < e; ++i) body(i);
      } catch (...) {
        failures[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace numerics
}  // namespace fconvex
