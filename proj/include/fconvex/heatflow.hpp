#pragma once

/**
 * @file heatflow.hpp
 * @brief Heat semigroup by Gaussian-kernel quadrature: free space in one and
 * two dimensions, and Dirichlet problems on a half line, an interval and a
 * rectangle (method of images, with a sine-series fallback).
 *
 * Every evolved value carries an absolute error estimate: the difference of
 * a 10-point and a 6-point Gauss-Legendre evaluation on each panel, the
 * closed-form truncation bound, a roundoff term, and (for sampled data)
 * the interpolation error pushed through the kernel.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fconvex/grid.hpp"
#include "fconvex/hot.hpp"
#include "fconvex/numerics.hpp"

namespace fconvex {

/// The requested time leaves the window where the convolution is known to converge.
class ExistenceWindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gamma_n(x, t) = (4 pi t)^{-n/2} exp(-|x|^2 / 4t).
inline double gauss_kernel(std::span<const double> x, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("gauss_kernel: t must be positive");
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  const double n = static_cast<double>(x.size());
  return std::pow(4.0 * std::numbers::pi * t, -0.5 * n) * std::exp(-r2 / (4.0 * t));
}

inline double gauss_kernel(double x, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("gauss_kernel: t must be positive");
  return std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * std::numbers::pi * t);
}

/// Sufficient existence window 1/(4A) for data bounded by a e^{A|x|^2}.
inline double maximal_time_hint(double growth_A) {
  if (growth_A < 0.0) throw std::invalid_argument("maximal_time_hint: growth_A must be nonnegative");
  return growth_A == 0.0 ? kInf : 1.0 / (4.0 * growth_A);
}

/// |phi(x)| <= a e^{A|x|^2}.
struct GrowthBound {
  double a = 1.0;
  double A = 0.0;
};

/**
 * Initial datum for an evolution: a callable in one or two variables with
 * its growth bound, the lines where it is not smooth (quadrature panels are
 * split there), the region where it can be evaluated, and optionally a
 * local evaluation-error bound (for interpolated data).
 */
struct Datum {
  int dim = 1;
  std::function<double(double)> f1;
  std::function<double(double, double)> f2;
  GrowthBound growth;
  std::vector<double> kinks_x;
  std::vector<double> kinks_y;
  Interval cover_x{-kInf, kInf};
  Interval cover_y{-kInf, kInf};
  std::function<double(double)> error1;
  std::function<double(double, double)> error2;
  /// uniform node spacing of sampled data (panels are aligned to its cells)
  double cell = 0.0;
  double cell_origin_x = 0.0;
  double cell_origin_y = 0.0;
  std::string label;

  static Datum line(std::function<double(double)> f, GrowthBound g, std::vector<double> kinks = {},
                    std::string label = {}) {
    Datum d;
    d.dim = 1;
    d.f1 = std::move(f);
    d.growth = g;
    d.kinks_x = std::move(kinks);
    std::sort(d.kinks_x.begin(), d.kinks_x.end());
    d.label = std::move(label);
    return d;
  }

  static Datum plane(std::function<double(double, double)> f, GrowthBound g,
                     std::vector<double> kinks_x = {}, std::vector<double> kinks_y = {},
                     std::string label = {}) {
    Datum d;
    d.dim = 2;
    d.f2 = std::move(f);
    d.growth = g;
    d.kinks_x = std::move(kinks_x);
    d.kinks_y = std::move(kinks_y);
    std::sort(d.kinks_x.begin(), d.kinks_x.end());
    std::sort(d.kinks_y.begin(), d.kinks_y.end());
    d.label = std::move(label);
    return d;
  }

  /**
   * Interpolated grid data: monotone cubic (1D) or bilinear (2D) between
   * nodes, defined only on the grid extent. The growth bound is the grid's.
   */
  static Datum from_grid(const GridFunction& u) {
    Datum d;
    d.dim = u.dim();
    d.growth = {std::isfinite(u.growth_a) ? u.growth_a : u.fitted_growth_a(u.growth_A), u.growth_A};
    d.label = "grid";
    const Axis ax = u.grid.x();
    d.cover_x = {ax.lo, ax.hi()};
    d.cell = ax.h;
    d.cell_origin_x = ax.lo;
    if (d.dim == 1) {
      auto p = std::make_shared<numerics::Pchip>(ax.lo, ax.h, u.values);
      auto cell_err = std::make_shared<std::vector<double>>(p->cell_error_estimates());
      auto node_err = std::make_shared<std::vector<double>>(u.errors);
      d.f1 = [p](double x) { return (*p)(x); };
      d.error1 = [cell_err, node_err, ax](double x) {
        auto k = static_cast<std::ptrdiff_t>(std::floor((x - ax.lo) / ax.h));
        k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(cell_err->size()) - 1);
        const auto i = static_cast<std::size_t>(k);
        return (*cell_err)[i] + std::max((*node_err)[i], (*node_err)[i + 1]);
      };
      return d;
    }
    const Axis ay = u.grid.y();
    d.cover_y = {ay.lo, ay.hi()};
    d.cell_origin_y = ay.lo;
    if (std::abs(ax.h - ay.h) > 1e-12 * ax.h) throw std::invalid_argument("Datum::from_grid: 2D data need square cells");
    auto vals = std::make_shared<std::vector<double>>(u.values);
    auto errs = std::make_shared<std::vector<double>>(u.errors);
    auto locate = [ax, ay](double x, double y) {
      auto i = static_cast<std::ptrdiff_t>(std::floor((x - ax.lo) / ax.h));
      auto j = static_cast<std::ptrdiff_t>(std::floor((y - ay.lo) / ay.h));
      i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(ax.n) - 2);
      j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(ay.n) - 2);
      return std::pair<std::size_t, std::size_t>{static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
    };
    d.f2 = [vals, ax, ay, locate](double x, double y) {
      const auto [i, j] = locate(x, y);
      const double s = (x - ax.coord(i)) / ax.h;
      const double r = (y - ay.coord(j)) / ay.h;
      const auto& v = *vals;
      const std::size_t ny = ay.n;
      return (1 - s) * (1 - r) * v[i * ny + j] + s * (1 - r) * v[(i + 1) * ny + j] +
             (1 - s) * r * v[i * ny + j + 1] + s * r * v[(i + 1) * ny + j + 1];
    };
    // bilinear error ~ (h^2/8)(|u_xx| + |u_yy|), second differences taken at the cell corners
    d.error2 = [vals, errs, ax, ay, locate](double x, double y) {
      const auto [i, j] = locate(x, y);
      const auto& v = *vals;
      const std::size_t ny = ay.n;
      auto at = [&](std::size_t a, std::size_t b) { return v[a * ny + b]; };
      double curv = 0.0;
      for (std::size_t a = i; a <= i + 1; ++a) {
        for (std::size_t b = j; b <= j + 1; ++b) {
          if (a >= 1 && a + 1 < ax.n) curv = std::max(curv, std::abs(at(a - 1, b) - 2 * at(a, b) + at(a + 1, b)));
          if (b >= 1 && b + 1 < ay.n) curv = std::max(curv, std::abs(at(a, b - 1) - 2 * at(a, b) + at(a, b + 1)));
        }
      }
      const auto& e = *errs;
      const double node = std::max({e[i * ny + j], e[(i + 1) * ny + j], e[i * ny + j + 1], e[(i + 1) * ny + j + 1]});
      return 0.25 * curv + node;
    };
    return d;
  }

  [[nodiscard]] double operator()(double x) const { return f1(x); }
  [[nodiscard]] double operator()(double x, double y) const { return f2(x, y); }
};

/// Quadrature and safety parameters shared by the evolution routines.
struct FlowOptions {
  double eps_tail = 1e-10;
  double margin = 0.05;
  /// upper bound on panel width; the default scales with sqrt(t)
  double max_panel = kInf;
  /// images are abandoned for the sine series beyond this many terms
  int max_image_terms = 200;
  bool force_series = false;
  double image_cutoff = 1e-14;
  unsigned threads = 0;
};

namespace detail {

struct Panel {
  double a;
  double b;
};

/// Panels covering [lo, hi], split at `breaks`, none wider than `width`.
inline std::vector<Panel> make_panels(double lo, double hi, const std::vector<double>& breaks, double width) {
  std::vector<double> pts{lo};
  for (double b : breaks) {
    if (b > lo && b < hi) pts.push_back(b);
  }
  pts.push_back(hi);
  std::vector<Panel> out;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double len = pts[i + 1] - pts[i];
    if (!(len > 0.0)) continue;
    const int k = std::max(1, static_cast<int>(std::ceil(len / width - 1e-9)));
    for (int j = 0; j < k; ++j) {
      out.push_back({pts[i] + len * j / k, j + 1 == k ? pts[i + 1] : pts[i] + len * (j + 1) / k});
    }
  }
  return out;
}

/// Panel breakpoints inside [lo, hi]: kinks plus cell boundaries of sampled data.
inline std::vector<double> breakpoints(double lo, double hi, const std::vector<double>& kinks,
                                       double cell, double origin) {
  std::vector<double> br;
  for (double k : kinks) {
    if (k > lo && k < hi) br.push_back(k);
  }
  if (cell > 0.0) {
    auto k0 = static_cast<long long>(std::ceil((lo - origin) / cell));
    for (long long k = k0;; ++k) {
      const double x = origin + cell * static_cast<double>(k);
      if (x >= hi) break;
      if (x > lo) br.push_back(x);
    }
    std::sort(br.begin(), br.end());
  }
  return br;
}

/**
 * Truncation half-width for output point at radius |x|: integrand is bounded
 * by a Gaussian in s = y - x centred at m = A|x|/beta with total mass M, so
 * the tail beyond |s| > R is at most M erfc(sqrt(beta)(R - m)).
 */
struct Truncation {
  double R;
  double tail;
};

inline Truncation truncation(double a, double A, double t, double xnorm, int n, double eps) {
  const double beta = 1.0 / (4.0 * t) - A;
  const double m = A * xnorm / beta;
  const double logM = std::log(a) + A * xnorm * xnorm * (1.0 + A / beta) +
                      0.5 * n * (std::log(std::numbers::pi / beta) - std::log(4.0 * std::numbers::pi * t));
  // the 2D square window loses at most a factor 2 relative to the 1D bound
  const double logM_eff = logM + (n == 2 ? std::log(2.0) : 0.0);
  const double need = std::max(0.0, logM_eff - std::log(eps));
  const double R = m + std::sqrt(need / beta) + 1e-3 * std::sqrt(t);
  const double tail = std::exp(logM_eff) * std::erfc(std::sqrt(beta) * (R - m));
  return {R, tail};
}

inline void check_window(double A, double t, double margin) {
  if (!(t > 0.0)) throw std::invalid_argument("heat flow: t must be positive");
  if (4.0 * A * t >= 1.0 - margin) {
    throw ExistenceWindowError("heat flow: 4At = " + std::to_string(4.0 * A * t) +
                               " is outside the existence window (needs < " +
                               std::to_string(1.0 - margin) + ")");
  }
}

struct NodeResult {
  double value = 0.0;
  double error = 0.0;
  double tail = 0.0;
};

inline NodeResult evolve_point_1d(const Datum& phi, double t, double x, double panel_width, double eps) {
  const auto tr = truncation(phi.growth.a, phi.growth.A, t, std::abs(x), 1, eps);
  double lo = x - tr.R;
  double hi = x + tr.R;
  if (lo < phi.cover_x.lo - 1e-12 || hi > phi.cover_x.hi + 1e-12) {
    throw DomainError("heat flow: datum does not cover the integration window [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "] at x = " + std::to_string(x));
  }
  lo = std::max(lo, phi.cover_x.lo);
  hi = std::min(hi, phi.cover_x.hi);
  const auto panels = make_panels(lo, hi, breakpoints(lo, hi, phi.kinks_x, phi.cell, phi.cell_origin_x), panel_width);
  const auto& g10 = numerics::gauss(10);
  const auto& g6 = numerics::gauss(6);
  const double c = 1.0 / std::sqrt(4.0 * std::numbers::pi * t);
  const double inv4t = 1.0 / (4.0 * t);
  NodeResult r;
  double abs_sum = 0.0;
  double interp = 0.0;
  for (const auto& p : panels) {
    const double mid = 0.5 * (p.a + p.b);
    const double half = 0.5 * (p.b - p.a);
    double s10 = 0.0;
    for (std::size_t i = 0; i < g10.nodes.size(); ++i) {
      const double y = mid + half * g10.nodes[i];
      const double w = half * g10.weights[i] * c * std::exp(-(x - y) * (x - y) * inv4t);
      const double v = w * phi.f1(y);
      s10 += v;
      abs_sum += std::abs(v);
      if (phi.error1) interp += w * phi.error1(y);
    }
    double s6 = 0.0;
    for (std::size_t i = 0; i < g6.nodes.size(); ++i) {
      const double y = mid + half * g6.nodes[i];
      s6 += half * g6.weights[i] * c * std::exp(-(x - y) * (x - y) * inv4t) * phi.f1(y);
    }
    r.value += s10;
    r.error += std::abs(s10 - s6);
  }
  r.tail = tr.tail;
  r.error += tr.tail + 16.0 * kEps * abs_sum + interp;
  return r;
}

inline NodeResult evolve_point_2d(const Datum& phi, double t, double x, double y, double panel_width, double eps) {
  const auto tr = truncation(phi.growth.a, phi.growth.A, t, std::hypot(x, y), 2, eps);
  double xl = x - tr.R, xh = x + tr.R, yl = y - tr.R, yh = y + tr.R;
  if (xl < phi.cover_x.lo - 1e-12 || xh > phi.cover_x.hi + 1e-12 || yl < phi.cover_y.lo - 1e-12 ||
      yh > phi.cover_y.hi + 1e-12) {
    throw DomainError("heat flow: datum does not cover the integration window around (" + std::to_string(x) +
                      ", " + std::to_string(y) + ")");
  }
  xl = std::max(xl, phi.cover_x.lo);
  xh = std::min(xh, phi.cover_x.hi);
  yl = std::max(yl, phi.cover_y.lo);
  yh = std::min(yh, phi.cover_y.hi);
  const auto px = make_panels(xl, xh, breakpoints(xl, xh, phi.kinks_x, phi.cell, phi.cell_origin_x), panel_width);
  const auto py = make_panels(yl, yh, breakpoints(yl, yh, phi.kinks_y, phi.cell, phi.cell_origin_y), panel_width);
  const double c = 1.0 / (4.0 * std::numbers::pi * t);
  const double inv4t = 1.0 / (4.0 * t);
  NodeResult r;
  double abs_sum = 0.0;
  double interp = 0.0;
  auto panel_sum = [&](const Panel& a, const Panel& b, const numerics::GaussRule& rule, bool track) {
    const double ma = 0.5 * (a.a + a.b), ha = 0.5 * (a.b - a.a);
    const double mb = 0.5 * (b.a + b.b), hb = 0.5 * (b.b - b.a);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double yx = ma + ha * rule.nodes[i];
      const double kx = ha * rule.weights[i] * std::exp(-(x - yx) * (x - yx) * inv4t);
      for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        const double yy = mb + hb * rule.nodes[j];
        const double w = c * kx * hb * rule.weights[j] * std::exp(-(y - yy) * (y - yy) * inv4t);
        const double v = w * phi.f2(yx, yy);
        s += v;
        if (track) {
          abs_sum += std::abs(v);
          if (phi.error2) interp += w * phi.error2(yx, yy);
        }
      }
    }
    return s;
  };
  for (const auto& a : px) {
    for (const auto& b : py) {
      const double s10 = panel_sum(a, b, numerics::gauss(10), true);
      const double s6 = panel_sum(a, b, numerics::gauss(6), false);
      r.value += s10;
      r.error += std::abs(s10 - s6);
    }
  }
  r.tail = tr.tail;
  r.error += tr.tail + 16.0 * kEps * abs_sum + interp;
  return r;
}

inline std::string fmt_meta(double v) { return fmt17(v); }

}  // namespace detail

/**
 * u(., t) = e^{t Delta} phi on `out`, by truncated Gauss-Legendre quadrature
 * of the convolution. Requires 4At < 1 - margin for the datum's growth
 * exponent A. The result's growth bound is A/(1-4At), a/(1-4At)^{n/2}.
 */
inline GridFunction heat_evolve_free(const Datum& phi, double t, const GridSpec& out,
                                     const FlowOptions& opts = {}) {
  if (phi.dim != out.dim()) throw std::invalid_argument("heat_evolve_free: datum and grid dimensions differ");
  detail::check_window(phi.growth.A, t, opts.margin);
  GridFunction u(out);
  const double sq = std::sqrt(t);
  const double width = std::min(phi.dim == 1 ? 0.5 * sq : sq, opts.max_panel);
  std::vector<double> tails(out.size(), 0.0);
  if (phi.dim == 1) {
    numerics::parallel_for(out.size(), [&](std::size_t i) {
      const auto r = detail::evolve_point_1d(phi, t, out.x().coord(i), width, opts.eps_tail);
      u.values[i] = r.value;
      u.errors[i] = r.error;
      tails[i] = r.tail;
    }, opts.threads);
  } else {
    const std::size_t ny = out.y().n;
    numerics::parallel_for(out.size(), [&](std::size_t k) {
      const auto r = detail::evolve_point_2d(phi, t, out.x().coord(k / ny), out.y().coord(k % ny), width, opts.eps_tail);
      u.values[k] = r.value;
      u.errors[k] = r.error;
      tails[k] = r.tail;
    }, opts.threads);
  }
  const double s = 1.0 - 4.0 * phi.growth.A * t;
  u.growth_A = phi.growth.A / s;
  u.growth_a = phi.growth.a / std::pow(s, 0.5 * phi.dim);
  u.metadata["flow.t"] = detail::fmt_meta(t);
  u.metadata["flow.eps_tail"] = detail::fmt_meta(opts.eps_tail);
  u.metadata["flow.tail_bound"] = detail::fmt_meta(*std::max_element(tails.begin(), tails.end()));
  u.metadata["flow.max_error"] = detail::fmt_meta(*std::max_element(u.errors.begin(), u.errors.end()));
  u.metadata["datum.growth_A"] = detail::fmt_meta(phi.growth.A);
  u.metadata["datum.growth_a"] = detail::fmt_meta(phi.growth.a);
  if (!phi.label.empty()) u.metadata["datum"] = phi.label;
  return u;
}

/// Grid input: interpolated datum, evaluated on `out` (which must stay away from the grid edge).
inline GridFunction heat_evolve_free(const GridFunction& phi, double t, const GridSpec& out,
                                     const FlowOptions& opts = {}) {
  return heat_evolve_free(Datum::from_grid(phi), t, out, opts);
}

// ---------------------------------------------------------------------------
// Dirichlet problems

namespace detail {

/// 1D Dirichlet heat kernel on an interval or half line, zero boundary data.
class DirichletKernel1D {
 public:
  DirichletKernel1D(double a, double b, double t, const FlowOptions& opts) : a_(a), b_(b), t_(t) {
    c_ = 1.0 / std::sqrt(4.0 * std::numbers::pi * t);
    // distance beyond which a single Gaussian term is below the cutoff
    reach_ = std::sqrt(4.0 * t * std::max(0.0, std::log(c_ / opts.image_cutoff)));
    if (std::isfinite(b)) {
      L_ = b - a;
      terms_ = static_cast<int>(std::ceil(reach_ / (2.0 * L_))) + 1;
      series_ = opts.force_series || 2 * terms_ + 1 > opts.max_image_terms;
      if (series_) {
        // keep modes while exp(-(n pi/L)^2 t) exceeds 1e-17
        const double nmax = L_ / std::numbers::pi * std::sqrt(std::log(1e17) / t);
        modes_ = std::max(1, static_cast<int>(std::ceil(nmax)));
      }
    }
  }

  [[nodiscard]] bool series() const { return series_; }
  [[nodiscard]] int terms() const { return series_ ? modes_ : (std::isfinite(b_) ? 2 * terms_ + 1 : 1); }
  [[nodiscard]] double reach() const { return reach_; }

  [[nodiscard]] double operator()(double x, double y) const {
    const double X = x - a_;
    const double Y = y - a_;
    const double inv4t = 1.0 / (4.0 * t_);
    auto g = [&](double d) { return c_ * std::exp(-d * d * inv4t); };
    if (!std::isfinite(b_)) return g(X - Y) - g(X + Y);
    if (series_) {
      double s = 0.0;
      const double k = std::numbers::pi / L_;
      for (int n = 1; n <= modes_; ++n) {
        s += std::exp(-k * k * n * n * t_) * std::sin(n * k * X) * std::sin(n * k * Y);
      }
      return 2.0 / L_ * s;
    }
    double s = 0.0;
    for (int k = -terms_; k <= terms_; ++k) {
      const double sh = 2.0 * k * L_;
      s += g(X - Y + sh) - g(X + Y + sh);
    }
    return s;
  }

 private:
  double a_, b_, t_;
  double c_ = 0.0;
  double reach_ = 0.0;
  double L_ = kInf;
  int terms_ = 0;
  int modes_ = 0;
  bool series_ = false;
};

struct QuadNodes {
  std::vector<double> y;
  std::vector<double> w;
  std::vector<std::size_t> panel;
};

inline QuadNodes panel_nodes(const std::vector<Panel>& panels, int order) {
  QuadNodes q;
  const auto& rule = numerics::gauss(order);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double mid = 0.5 * (panels[p].a + panels[p].b);
    const double half = 0.5 * (panels[p].b - panels[p].a);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      q.y.push_back(mid + half * rule.nodes[i]);
      q.w.push_back(half * rule.weights[i]);
      q.panel.push_back(p);
    }
  }
  return q;
}

}  // namespace detail

/**
 * Dirichlet heat flow with constant boundary value l: evolves
 * w0 = l - phi with zero boundary data and returns l - w. The datum must be
 * bounded (growth exponent 0).
 */
inline GridFunction heat_evolve_dirichlet(const Datum& phi, const DomainSpec& dom, double t, const GridSpec& out,
                                          const FlowOptions& opts = {}) {
  dom.validate();
  if (dom.kind == DomainSpec::Kind::free_space) {
    throw std::invalid_argument("heat_evolve_dirichlet: free space has no boundary; use heat_evolve_free");
  }
  if (!(t > 0.0)) throw std::invalid_argument("heat_evolve_dirichlet: t must be positive");
  if (phi.growth.A != 0.0 || !std::isfinite(phi.growth.a)) {
    throw std::invalid_argument("heat_evolve_dirichlet: data must be bounded");
  }
  const int dim = dom.kind == DomainSpec::Kind::rectangle ? 2 : 1;
  if (phi.dim != dim || out.dim() != dim) throw std::invalid_argument("heat_evolve_dirichlet: dimension mismatch");
  const double ell = dom.ell;
  const double width = std::min(0.5 * std::sqrt(t), opts.max_panel);
  GridFunction u(out);
  u.metadata["flow.t"] = detail::fmt_meta(t);
  u.metadata["domain"] = to_string(dom.kind);
  u.metadata["domain.ell"] = detail::fmt_meta(ell);

  if (dim == 1) {
    const double a = dom.xb.lo;
    const double b = dom.kind == DomainSpec::Kind::half_line ? kInf : dom.xb.hi;
    const detail::DirichletKernel1D K(a, b, t, opts);
    u.metadata["dirichlet.method"] = K.series() ? "series" : "images";
    u.metadata["dirichlet.terms"] = std::to_string(K.terms());
    const auto& g10 = numerics::gauss(10);
    const auto& g6 = numerics::gauss(6);
    numerics::parallel_for(out.size(), [&](std::size_t i) {
      const double x = out.x().coord(i);
      if (x < a || x > b) throw DomainError("heat_evolve_dirichlet: output node outside the domain");
      double lo = a;
      double hi = b;
      if (!std::isfinite(b)) {
        lo = std::max(a, x - K.reach());
        hi = x + K.reach();
      }
      if (lo < phi.cover_x.lo - 1e-12 || hi > phi.cover_x.hi + 1e-12) {
        throw DomainError("heat_evolve_dirichlet: datum does not cover the integration window");
      }
      const auto panels = detail::make_panels(
          lo, hi, detail::breakpoints(lo, hi, phi.kinks_x, phi.cell, phi.cell_origin_x), width);
      double val = 0.0, err = 0.0, abs_sum = 0.0, interp = 0.0;
      for (const auto& p : panels) {
        const double mid = 0.5 * (p.a + p.b), half = 0.5 * (p.b - p.a);
        double s10 = 0.0;
        for (std::size_t k = 0; k < g10.nodes.size(); ++k) {
          const double y = mid + half * g10.nodes[k];
          const double w = half * g10.weights[k] * K(x, y);
          const double py = phi.f1(y);
          s10 += w * (ell - py);
          abs_sum += std::abs(w) * (std::abs(ell) + std::abs(py));
          if (phi.error1) interp += std::abs(w) * phi.error1(y);
        }
        double s6 = 0.0;
        for (std::size_t k = 0; k < g6.nodes.size(); ++k) {
          const double y = mid + half * g6.nodes[k];
          s6 += half * g6.weights[k] * K(x, y) * (ell - phi.f1(y));
        }
        val += s10;
        err += std::abs(s10 - s6);
      }
      const double sup = phi.growth.a + std::abs(ell);
      const double trunc = opts.image_cutoff * sup * (hi - lo) * K.terms();
      u.values[i] = ell - val;
      u.errors[i] = err + trunc + 16.0 * kEps * (abs_sum + std::abs(ell)) + interp;
    }, opts.threads);
    u.metadata["flow.max_error"] = detail::fmt_meta(*std::max_element(u.errors.begin(), u.errors.end()));
    return u;
  }

  // rectangle: tensor product of 1D kernels, contracted one axis at a time
  const detail::DirichletKernel1D Kx(dom.xb.lo, dom.xb.hi, t, opts);
  const detail::DirichletKernel1D Ky(dom.yb.lo, dom.yb.hi, t, opts);
  u.metadata["dirichlet.method"] = std::string(Kx.series() ? "series" : "images") + "," + (Ky.series() ? "series" : "images");
  const auto pxs = detail::make_panels(dom.xb.lo, dom.xb.hi,
                                       detail::breakpoints(dom.xb.lo, dom.xb.hi, phi.kinks_x, phi.cell, phi.cell_origin_x), width);
  const auto pys = detail::make_panels(dom.yb.lo, dom.yb.hi,
                                       detail::breakpoints(dom.yb.lo, dom.yb.hi, phi.kinks_y, phi.cell, phi.cell_origin_y), width);
  if (dom.xb.lo < phi.cover_x.lo - 1e-12 || dom.xb.hi > phi.cover_x.hi + 1e-12 ||
      dom.yb.lo < phi.cover_y.lo - 1e-12 || dom.yb.hi > phi.cover_y.hi + 1e-12) {
    throw DomainError("heat_evolve_dirichlet: datum does not cover the rectangle");
  }
  const std::size_t nx = out.x().n, ny = out.y().n;
  auto contract = [&](int order, std::vector<double>& result, std::vector<double>* abs_out, std::vector<double>* interp_out) {
    const auto qx = detail::panel_nodes(pxs, order);
    const auto qy = detail::panel_nodes(pys, order);
    std::vector<double> w0(qx.y.size() * qy.y.size());
    std::vector<double> e0(interp_out ? w0.size() : 0);
    std::vector<double> mag(abs_out ? w0.size() : 0);
    for (std::size_t p = 0; p < qx.y.size(); ++p) {
      for (std::size_t r = 0; r < qy.y.size(); ++r) {
        const double pv = phi.f2(qx.y[p], qy.y[r]);
        w0[p * qy.y.size() + r] = ell - pv;
        if (abs_out) mag[p * qy.y.size() + r] = std::abs(ell) + std::abs(pv);
        if (interp_out && phi.error2) e0[p * qy.y.size() + r] = phi.error2(qx.y[p], qy.y[r]);
      }
    }
    std::vector<double> kx(nx * qx.y.size()), ky(ny * qy.y.size());
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t p = 0; p < qx.y.size(); ++p) kx[i * qx.y.size() + p] = qx.w[p] * Kx(out.x().coord(i), qx.y[p]);
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t r = 0; r < qy.y.size(); ++r) ky[j * qy.y.size() + r] = qy.w[r] * Ky(out.y().coord(j), qy.y[r]);
    // T[p][j] = sum_r ky[j][r] w0[p][r]
    std::vector<double> T(qx.y.size() * ny, 0.0), Ta, Te;
    if (abs_out) Ta.assign(T.size(), 0.0);
    if (interp_out) Te.assign(T.size(), 0.0);
    for (std::size_t p = 0; p < qx.y.size(); ++p) {
      for (std::size_t j = 0; j < ny; ++j) {
        double s = 0.0, sa = 0.0, se = 0.0;
        for (std::size_t r = 0; r < qy.y.size(); ++r) {
          const double kv = ky[j * qy.y.size() + r];
          const double v = kv * w0[p * qy.y.size() + r];
          s += v;
          if (abs_out) sa += std::abs(kv) * mag[p * qy.y.size() + r];
          if (interp_out && !e0.empty()) se += std::abs(kv) * e0[p * qy.y.size() + r];
        }
        T[p * ny + j] = s;
        if (abs_out) Ta[p * ny + j] = sa;
        if (interp_out) Te[p * ny + j] = se;
      }
    }
    result.assign(nx * ny, 0.0);
    if (abs_out) abs_out->assign(nx * ny, 0.0);
    if (interp_out) interp_out->assign(nx * ny, 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        double s = 0.0, sa = 0.0, se = 0.0;
        for (std::size_t p = 0; p < qx.y.size(); ++p) {
          const double kv = kx[i * qx.y.size() + p];
          s += kv * T[p * ny + j];
          if (abs_out) sa += std::abs(kv) * Ta[p * ny + j];
          if (interp_out) se += std::abs(kv) * Te[p * ny + j];
        }
        result[i * ny + j] = s;
        if (abs_out) (*abs_out)[i * ny + j] = sa;
        if (interp_out) (*interp_out)[i * ny + j] = se;
      }
    }
  };
  std::vector<double> r10, r6, abs10, interp10;
  contract(10, r10, &abs10, &interp10);
  contract(6, r6, nullptr, nullptr);
  const double sup = phi.growth.a + std::abs(ell);
  const double trunc = opts.image_cutoff * sup * dom.xb.length() * dom.yb.length() * Kx.terms() * Ky.terms();
  for (std::size_t k = 0; k < nx * ny; ++k) {
    u.values[k] = ell - r10[k];
    u.errors[k] = std::abs(r10[k] - r6[k]) + trunc + 16.0 * kEps * (abs10[k] + std::abs(ell)) + interp10[k];
  }
  u.metadata["flow.max_error"] = detail::fmt_meta(*std::max_element(u.errors.begin(), u.errors.end()));
  return u;
}

/// Grid input on its own grid; the grid's growth exponent must be 0.
inline GridFunction heat_evolve_dirichlet(const GridFunction& phi, const DomainSpec& dom, double t,
                                          const FlowOptions& opts = {}) {
  Datum d = Datum::from_grid(phi);
  d.growth = {0.0, 0.0};
  for (std::size_t k = 0; k < phi.size(); ++k) d.growth.a = std::max(d.growth.a, std::abs(phi.values[k]));
  if (phi.growth_A != 0.0) throw std::invalid_argument("heat_evolve_dirichlet: data must be bounded");
  return heat_evolve_dirichlet(d, dom, t, phi.grid, opts);
}

// ---------------------------------------------------------------------------
// quadratic lift

/// phi + eps |x|^2, node by node (errors and growth carried along).
inline GridFunction epsilon_quadratic_lift(const GridFunction& phi, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("epsilon_quadratic_lift: eps must be nonnegative");
  GridFunction out = phi;
  for (std::size_t k = 0; k < out.size(); ++k) out.values[k] += eps * out.radius2(k);
  if (eps > 0.0) {
    out.growth_A = std::max(phi.growth_A, 1e-12);
    out.growth_a = out.fitted_growth_a(out.growth_A);
  }
  out.metadata["lift.eps"] = detail::fmt_meta(eps);
  return out;
}

/// u + eps(|x|^2 + 2nt): the exact evolution of the lifted datum.
inline GridFunction lifted_evolution_identity(const GridFunction& u, double eps, double t, int n) {
  GridFunction out = u;
  for (std::size_t k = 0; k < out.size(); ++k) out.values[k] += eps * (out.radius2(k) + 2.0 * n * t);
  out.metadata["lift.eps"] = detail::fmt_meta(eps);
  return out;
}

/// The lifted datum phi + eps|x|^2 as a callable datum with an updated growth bound.
inline Datum epsilon_quadratic_lift(const Datum& phi, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("epsilon_quadratic_lift: eps must be nonnegative");
  Datum d = phi;
  if (eps == 0.0) return d;
  // eps|x|^2 <= (eps/(e delta)) e^{delta |x|^2}; take delta = A (or a small exponent for bounded data)
  const double delta = phi.growth.A > 0.0 ? phi.growth.A : 1e-3;
  d.growth = {phi.growth.a + eps / (std::exp(1.0) * delta), std::max(phi.growth.A, delta)};
  if (phi.dim == 1) {
    auto f = phi.f1;
    d.f1 = [f, eps](double x) { return f(x) + eps * x * x; };
  } else {
    auto f = phi.f2;
    d.f2 = [f, eps](double x, double y) { return f(x, y) + eps * (x * x + y * y); };
  }
  return d;
}

}  // namespace fconvex
