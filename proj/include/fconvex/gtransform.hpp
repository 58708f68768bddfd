#pragma once

/**
 * @file gtransform.hpp
 * @brief Transforms reconstructed from a prescribed g = (log f')'.
 *
 * Given a convex piecewise-linear g, an anchor z0, f(z0) and f'(z0) > 0,
 *
 *     f(z) = f(z0) + f'(z0) * int_{z0}^{z} exp( int_{z0}^{s} g ) ds,
 *
 * and F = f^{-1}. The inner integral G is a piecewise quadratic known in
 * closed form. The outer integral is tabulated in log space at panel nodes
 * (Gauss-Legendre, panels aligned with the breakpoints of g), with panel
 * width halved until the tabulated values stop changing to 1e-10 relative.
 * Between nodes f is completed by exact local quadrature, so f is monotone
 * by construction.
 */

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fconvex/ftransform.hpp"
#include "fconvex/numerics.hpp"

namespace fconvex {

/// Convex piecewise-linear g, given by breakpoints and two extension slopes.
class GSpec {
 public:
  GSpec() = default;

  /// `points` are (z, g(z)); missing extension slopes continue the end segments.
  GSpec(std::vector<std::pair<double, double>> points, std::optional<double> left_slope = {},
        std::optional<double> right_slope = {})
      : pts_(std::move(points)) {
    if (pts_.empty()) throw std::invalid_argument("GSpec: at least one breakpoint is required");
    std::sort(pts_.begin(), pts_.end());
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      if (!(pts_[i].first > pts_[i - 1].first)) {
        throw std::invalid_argument("GSpec: breakpoints must have distinct z");
      }
    }
    const std::size_t n = pts_.size();
    left_ = left_slope.value_or(n >= 2 ? segment_slope(0) : 0.0);
    right_ = right_slope.value_or(n >= 2 ? segment_slope(n - 2) : 0.0);
    prim_.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
      const double d = pts_[i].first - pts_[i - 1].first;
      prim_[i] = prim_[i - 1] + 0.5 * d * (pts_[i].second + pts_[i - 1].second);
    }
  }

  /// Constant g.
  static GSpec constant(double c) { return GSpec({{0.0, c}}, 0.0, 0.0); }

  [[nodiscard]] double operator()(double z) const {
    const std::size_t n = pts_.size();
    if (z <= pts_.front().first) return pts_.front().second + left_ * (z - pts_.front().first);
    if (z >= pts_.back().first) return pts_.back().second + right_ * (z - pts_.back().first);
    const std::size_t i = segment_of(z);
    (void)n;
    return pts_[i].second + segment_slope(i) * (z - pts_[i].first);
  }

  /// P(z) = int_{z_first}^{z} g, closed form.
  [[nodiscard]] double primitive(double z) const {
    const double z0 = pts_.front().first;
    if (z <= z0) {
      const double d = z - z0;
      return pts_.front().second * d + 0.5 * left_ * d * d;
    }
    if (z >= pts_.back().first) {
      const double d = z - pts_.back().first;
      return prim_.back() + pts_.back().second * d + 0.5 * right_ * d * d;
    }
    const std::size_t i = segment_of(z);
    const double d = z - pts_[i].first;
    return prim_[i] + pts_[i].second * d + 0.5 * segment_slope(i) * d * d;
  }

  /// Slopes non-decreasing across all pieces, extensions included.
  [[nodiscard]] bool is_convex() const {
    double prev = left_;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      const double s = segment_slope(i);
      if (s < prev) return false;
      prev = s;
    }
    return right_ >= prev;
  }

  [[nodiscard]] const std::vector<std::pair<double, double>>& breakpoints() const { return pts_; }
  [[nodiscard]] double left_slope() const { return left_; }
  [[nodiscard]] double right_slope() const { return right_; }

 private:
  [[nodiscard]] double segment_slope(std::size_t i) const {
    return (pts_[i + 1].second - pts_[i].second) / (pts_[i + 1].first - pts_[i].first);
  }
  [[nodiscard]] std::size_t segment_of(double z) const {
    auto it = std::upper_bound(pts_.begin(), pts_.end(), z,
                               [](double v, const auto& p) { return v < p.first; });
    return static_cast<std::size_t>(std::distance(pts_.begin(), it)) - 1;
  }

  std::vector<std::pair<double, double>> pts_;
  std::vector<double> prim_;
  double left_ = 0.0;
  double right_ = 0.0;
};

namespace detail {

/// Tabulated reconstruction of f from g. Immutable after construction.
class GConstruction {
 public:
  GConstruction(GSpec g, double base_z, double base_value, double base_slope)
      : g_(std::move(g)), z0_(base_z), f0_(base_value), s0_(base_slope) {
    if (!(base_slope > 0.0) || !std::isfinite(base_slope)) {
      throw std::invalid_argument("make_from_g: base_slope must be positive; f would not be increasing");
    }
    if (!(base_value >= 0.0) || !std::isfinite(base_value)) {
      throw std::invalid_argument("make_from_g: base_value must be finite and nonnegative");
    }
    if (!g_.is_convex()) throw std::invalid_argument("make_from_g: g must be convex");
    log_s0_ = std::log(s0_);
    p0_ = g_.primitive(z0_);

    double w = 0.5;
    build(w);
    for (int level = 0; level < 8; ++level) {
      std::vector<double> before = probe_values();
      GConstruction finer = *this;
      finer.build(w * 0.5);
      std::vector<double> after = finer.probe_values();
      double change = 0.0;
      for (std::size_t i = 0; i < before.size(); ++i) {
        if (std::isfinite(before[i]) && std::isfinite(after[i])) {
          change = std::max(change, std::abs(after[i] - before[i]));
        }
      }
      *this = std::move(finer);
      w *= 0.5;
      if (change < 1e-10) break;
    }
    panel_width_ = w;
  }

  /// G(z) = int_{z0}^{z} g.
  [[nodiscard]] double G(double z) const { return g_.primitive(z) - p0_; }
  [[nodiscard]] double log_fprime(double z) const { return log_s0_ + G(z); }
  [[nodiscard]] double fprime(double z) const { return std::exp(log_fprime(z)); }

  /// J_F lower end (f = 0 there), possibly -inf.
  [[nodiscard]] double j_lo() const { return j_lo_; }
  [[nodiscard]] double table_hi() const { return right_nodes_.back(); }
  [[nodiscard]] double panel_width() const { return panel_width_; }

  /// f(z) on J_F; 0 at and below the lower end.
  [[nodiscard]] double f(double z) const {
    if (z <= j_lo_) return 0.0;
    if (z >= z0_) return std::exp(log_f_right(z));
    return f_left(z);
  }

  /// log f(z) (finite wherever f > 0, even past double overflow).
  [[nodiscard]] double log_f(double z) const {
    if (z <= j_lo_) return -kInf;
    if (z >= z0_) return log_f_right(z);
    return std::log(f_left(z));
  }

  /// F(r) = f^{-1}(r) for r >= 0.
  [[nodiscard]] double F(double r) const {
    if (std::isnan(r) || r < 0.0) return kNaN;
    if (r == 0.0) return j_lo_;
    if (r == kInf) return kInf;
    if (r >= f0_) {
      const double target = std::log(r);
      auto fn = [this](double z) { return log_f_right(z); };
      const std::function<double(double)> d = [this](double z) {
        return std::exp(log_fprime(z) - log_f_right(z));
      };
      return numerics::invert_monotone(fn, target, Interval{z0_, kInf}, z0_ + 1.0, d);
    }
    auto fn = [this](double z) { return f_left(z); };
    const std::function<double(double)> d = [this](double z) { return fprime(z); };
    return numerics::invert_monotone(fn, r, Interval{j_lo_, z0_}, z0_ - 1.0, d);
  }

 private:
  [[nodiscard]] double log_panel(double a, double b) const {
    return numerics::log_integrate_exp([this](double s) { return G(s); }, a, b, 1, 10);
  }

  [[nodiscard]] double local_width(double z, double w) const {
    const double gmax = std::max({1.0, std::abs(g_(z)), std::abs(g_(z + w)), std::abs(g_(z - w))});
    return w / gmax;
  }

  /// log of int_{z0}^{z} e^G for z >= z0.
  [[nodiscard]] double log_integral_right(double z) const {
    if (z <= z0_) return -kInf;
    const double zh = right_nodes_.back();
    if (z <= zh) {
      auto it = std::upper_bound(right_nodes_.begin(), right_nodes_.end(), z);
      const std::size_t k = static_cast<std::size_t>(std::distance(right_nodes_.begin(), it)) - 1;
      return numerics::log_add_exp(right_log_[k], log_panel(right_nodes_[k], z));
    }
    const double base = right_log_.back();
    const double gr = g_(zh);
    if (g_.right_slope() == 0.0) {
      // g is constant = gr beyond zh.
      const double d = z - zh;
      double lt;
      if (gr == 0.0) lt = std::log(d);
      else if (gr * d > 30.0) lt = gr * d + std::log1p(-std::exp(-gr * d)) - std::log(gr);
      else lt = std::log(std::expm1(gr * d) / gr);
      return numerics::log_add_exp(base, G(zh) + lt);
    }
    const int panels = static_cast<int>(std::ceil((z - zh) / local_width(z, panel_width_)));
    return numerics::log_add_exp(
        base, numerics::log_integrate_exp([this](double s) { return G(s); }, zh, z,
                                          std::clamp(panels, 1, 2000000), 10));
  }

  [[nodiscard]] double log_f_right(double z) const {
    const double li = log_s0_ + log_integral_right(z);
    return f0_ > 0.0 ? numerics::log_add_exp(std::log(f0_), li) : li;
  }

  /// f(z) for z < z0 (may be evaluated down to the root).
  [[nodiscard]] double f_left(double z) const {
    if (z >= z0_) return f0_;
    const double zl = left_nodes_.back();
    if (z >= zl) {
      // left_nodes_ descend from z0
      auto it = std::lower_bound(left_nodes_.begin(), left_nodes_.end(), z,
                                 [](double node, double v) { return node > v; });
      std::size_t k = static_cast<std::size_t>(std::distance(left_nodes_.begin(), it));
      if (k > 0) --k;
      const double part = numerics::log_add_exp(left_log_[k], log_panel(z, left_nodes_[k]));
      return f0_ - s0_ * std::exp(part);
    }
    if (left_closed_tail_) {
      const double fl = f0_ - s0_ * std::exp(left_log_.back());
      const double eg = std::exp(G(zl));
      const double g0 = g_(zl);
      const double d = z - zl;
      const double tail = g0 == 0.0 ? -d : -std::expm1(g0 * d) / g0;
      return fl - s0_ * eg * tail;
    }
    const int panels = static_cast<int>(std::ceil((zl - z) / local_width(z, panel_width_)));
    const double part = numerics::log_add_exp(
        left_log_.back(), numerics::log_integrate_exp([this](double s) { return G(s); }, z, zl,
                                                      std::clamp(panels, 1, 2000000), 10));
    return f0_ - s0_ * std::exp(part);
  }

  void build(double w) {
    const auto& bps = g_.breakpoints();
    // right side
    right_nodes_.assign(1, z0_);
    right_log_.assign(1, -kInf);
    const double last_bp = bps.back().first;
    const double g_last = bps.back().second;
    const double right_slope = g_.right_slope();
    if (right_slope < 0.0 || (right_slope == 0.0 && g_last < 0.0)) {
      throw std::invalid_argument(
          "make_from_g: f is bounded above, so F is not admissible on [0,inf)");
    }
    const double stop_fixed = std::max(last_bp, z0_) + 1.0;
    const double stop_grow = z0_ + 128.0;
    for (std::size_t guard = 0; guard < 4000000; ++guard) {
      const double z = right_nodes_.back();
      const bool done = right_slope > 0.0 ? (z >= stop_grow && z >= stop_fixed) : z >= stop_fixed;
      if (done) break;
      double next = z + local_width(z, w);
      for (const auto& bp : bps) {
        if (bp.first > z && bp.first < next) {
          next = bp.first;
          break;
        }
      }
      right_log_.push_back(numerics::log_add_exp(right_log_.back(), log_panel(z, next)));
      right_nodes_.push_back(next);
    }

    // left side
    left_nodes_.assign(1, z0_);
    left_log_.assign(1, -kInf);
    left_closed_tail_ = false;
    j_lo_ = kNaN;
    if (f0_ == 0.0) {
      j_lo_ = z0_;
      return;
    }
    const double first_bp = bps.front().first;
    const double g_first = bps.front().second;
    const double left_slope = g_.left_slope();
    for (std::size_t guard = 0; guard < 4000000; ++guard) {
      const double z = left_nodes_.back();
      const double fz = f0_ - s0_ * std::exp(left_log_.back());
      if (left_slope == 0.0 && z <= first_bp - 1.0) {
        // g constant = g_first to the left: closed-form tail.
        left_closed_tail_ = true;
        const double eg = s0_ * std::exp(G(z));
        if (g_first <= 0.0) {
          j_lo_ = g_first == 0.0 ? z - fz / eg : z + std::log1p(-g_first * fz / eg) / g_first;
        } else {
          const double limit = fz - eg / g_first;
          if (std::abs(limit) <= 1e-12 * f0_) j_lo_ = -kInf;
          else if (limit > 0.0) throw_bounded_below();
          else j_lo_ = z + std::log1p(-g_first * fz / eg) / g_first;
        }
        return;
      }
      double next = z - local_width(z, w);
      for (auto it = bps.rbegin(); it != bps.rend(); ++it) {
        if (it->first < z && it->first > next) {
          next = it->first;
          break;
        }
      }
      const double lp = log_panel(next, z);
      const double acc = numerics::log_add_exp(left_log_.back(), lp);
      const double fn = f0_ - s0_ * std::exp(acc);
      if (fn <= 0.0) {
        // root inside [next, z]
        auto fz_fn = [this, z, &fz](double y) {
          return fz - s0_ * std::exp(log_panel(y, z));
        };
        double a = next;
        double b = z;
        for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
          const double m = 0.5 * (a + b);
          if (fz_fn(m) > 0.0) b = m;
          else a = m;
        }
        j_lo_ = 0.5 * (a + b);
        return;
      }
      left_log_.push_back(acc);
      left_nodes_.push_back(next);
      if (s0_ * std::exp(lp) < 1e-18 * f0_ && next < first_bp - 1.0 && left_slope < 0.0) {
        // integrand negligible: f has converged to its limit at -inf
        if (fn <= 1e-12 * f0_) {
          j_lo_ = -kInf;
          return;
        }
        throw_bounded_below();
      }
    }
    throw std::runtime_error("make_from_g: left tabulation did not terminate");
  }

  [[noreturn]] static void throw_bounded_below() {
    throw std::invalid_argument(
        "make_from_g: f stays bounded away from 0 at -inf, so F is not admissible on [0,inf)");
  }

  /// log-scale probes of the tabulation; differences are relative changes.
  [[nodiscard]] std::vector<double> probe_values() const {
    // Probe positions depend only on g and the anchor, never on the table.
    std::vector<double> out;
    const double span = g_.right_slope() > 0.0 ? 64.0 : std::max(g_.breakpoints().back().first - z0_, 0.0) + 1.0;
    for (int k = 1; k <= 16; ++k) out.push_back(log_integral_right(z0_ + span * k / 16.0));
    for (int k = 1; k <= 8; ++k) {
      const double z = z0_ - 0.5 * k;
      if (z > j_lo_ + 1e-3) out.push_back(std::log(std::max(f_left(z), 1e-300)));
    }
    return out;
  }

  GSpec g_;
  double z0_;
  double f0_;
  double s0_;
  double log_s0_ = 0.0;
  double p0_ = 0.0;
  double j_lo_ = kNaN;
  double panel_width_ = 0.5;
  bool left_closed_tail_ = false;
  std::vector<double> right_nodes_;
  std::vector<double> right_log_;
  std::vector<double> left_nodes_;
  std::vector<double> left_log_;
};

}  // namespace detail

/**
 * F = f^{-1} with f rebuilt from g (see file comment). The result is
 * tagged g_constructed and deliberately carries no closed-form g, so g_of
 * recovers g from f numerically.
 */
inline FTransform make_from_g(const GSpec& g, double base_z, double base_value, double base_slope) {
  auto c = std::make_shared<const detail::GConstruction>(g, base_z, base_value, base_slope);
  FTransform::Model m;
  m.kind = DomainKind::half_line_nonneg;
  m.domain = {0.0, kInf};
  m.image = {c->j_lo(), kInf};
  m.tag = {Family::g_constructed, base_z, base_value, "from_g"};
  m.eval = [c](double r) { return c->F(r); };
  m.inverse = [c](double z) { return c->f(z); };
  m.inverse_deriv = [c](double z) { return c->fprime(z); };
  m.log_inverse_deriv = [c](double z) { return c->log_fprime(z); };
  m.log_abs_inverse = [c](double z) { return c->log_f(z); };
  m.deriv = [c](double r) { return 1.0 / c->fprime(c->F(r)); };
  return FTransform(std::move(m));
}

/// g(z) = |z - 1| - 1, the generator used for the non-(F') counterexample family.
inline GSpec remark_generator() { return GSpec({{1.0, -1.0}}, -1.0, 1.0); }

}  // namespace fconvex
