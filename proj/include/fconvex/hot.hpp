#pragma once

// Hot-convexity kernel: h = e^{Delta}(indicator of [0, inf)) on the line,
// and its inverse H.

#include <cmath>
#include <numbers>

#include "fconvex/numerics.hpp"

namespace fconvex {

/// h(z) = (1/2)(1 + erf(z/2)), written through erfc to keep relative accuracy for z << 0.
inline double hot_h(double z) {
  if (z == kInf) return 1.0;
  if (z == -kInf) return 0.0;
  return 0.5 * std::erfc(-0.5 * z);
}

/// h'(z) = e^{-z^2/4} / (2 sqrt(pi)).
inline double hot_h_prime(double z) {
  return std::exp(-0.25 * z * z) / (2.0 * std::sqrt(std::numbers::pi));
}

namespace detail {

/// log(erfc(x)), valid also where erfc underflows.
inline double log_erfc(double x) {
  if (x < 25.0) return std::log(std::erfc(x));
  const double x2 = x * x;
  const double series = 1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2);
  return -x2 - std::log(x * std::sqrt(std::numbers::pi)) + std::log(series);
}

}  // namespace detail

/// log h(z).
inline double hot_log_h(double z) {
  if (z == -kInf) return -kInf;
  if (z > 0.0) return std::log1p(-0.5 * std::erfc(0.5 * z));
  return std::log(0.5) + detail::log_erfc(-0.5 * z);
}

/// Inverse of hot_h on (0, 1); absolute accuracy about 1e-12 in z.
inline double hot_H(double r) {
  if (!(r > 0.0 && r < 1.0)) {
    throw DomainError("hot_H: argument must lie in the open interval (0,1)");
  }
  if (r == 0.5) return 0.0;
  // erfc form is well conditioned on the lower tail, so solve there and reflect.
  const bool upper = r > 0.5;
  const double target = upper ? 1.0 - r : r;
  auto fn = [](double z) { return hot_h(z); };
  const std::function<double(double)> d = hot_h_prime;
  const double z = numerics::invert_bracketed(fn, target, -80.0, 0.0, d).x;
  if (!upper) return z;
  // For r > 1/2 the complement 1-r loses digits; polish against r directly.
  double w = -z;
  for (int k = 0; k < 3; ++k) {
    const double dp = hot_h_prime(w);
    if (!(dp > 0.0)) break;
    const double step = (hot_h(w) - r) / dp;
    if (!std::isfinite(step)) break;
    w -= step;
  }
  return w;
}

}  // namespace fconvex
