#pragma once

/**
 * @file ftransform.hpp
 * @brief Admissible transforms F and their inverses f_F.
 *
 * An FTransform is an immutable value (shared implementation) describing a
 * strictly increasing F on one of three domain shapes:
 *
 *   - half_line_nonneg: F on [0, inf), J_F = F((0, inf))
 *   - whole_line:       F on R,        J_F = F(R)
 *   - bounded_above:    F on [a, l] or (a, l] with F(l) = inf, J_F = F(int I)
 *
 * Each family supplies closed forms where they exist; anything missing
 * falls back to monotone inversion or finite differences.
 */

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "fconvex/hot.hpp"
#include "fconvex/numerics.hpp"

namespace fconvex {

enum class DomainKind { half_line_nonneg, whole_line, bounded_above };

inline const char* to_string(DomainKind k) {
  switch (k) {
    case DomainKind::half_line_nonneg: return "half_line_nonneg";
    case DomainKind::whole_line: return "whole_line";
    case DomainKind::bounded_above: return "bounded_above";
  }
  return "?";
}

enum class Family { power_alpha, log, affine, hot, neglog, g_constructed, custom };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::power_alpha: return "power_alpha";
    case Family::log: return "log";
    case Family::affine: return "affine";
    case Family::hot: return "hot";
    case Family::neglog: return "neglog";
    case Family::g_constructed: return "g_constructed";
    case Family::custom: return "custom";
  }
  return "?";
}

/// Family plus its parameters (alpha; A,B; a; a,l).
struct KindTag {
  Family family = Family::custom;
  double p1 = kNaN;
  double p2 = kNaN;
  std::string label;
};

class FTransform {
 public:
  using Fn = std::function<double(double)>;

  /// Raw description. Only `eval`, `kind`, `domain` and `image` are mandatory.
  struct Model {
    DomainKind kind = DomainKind::half_line_nonneg;
    Interval domain{0.0, kInf};
    Interval image{-kInf, kInf};
    KindTag tag;
    Fn eval;
    Fn inverse;
    Fn deriv;
    Fn inverse_deriv;
    Fn log_inverse_deriv;
    Fn log_abs_inverse;
    Fn g;
  };

  explicit FTransform(Model m) : m_(std::make_shared<Model>(std::move(m))) {
    if (!m_->eval) throw std::invalid_argument("FTransform: eval is required");
  }

  /// F(r), honouring the extended-real endpoint conventions.
  [[nodiscard]] double operator()(double r) const { return m_->eval(r); }
  [[nodiscard]] double eval(double r) const { return m_->eval(r); }

  /// f_F(z) on J_F; endpoints map to the domain endpoints.
  [[nodiscard]] double inverse(double z) const {
    if (m_->inverse) return m_->inverse(z);
    if (z <= m_->image.lo) return m_->domain.lo;
    if (z >= m_->image.hi) return m_->domain.hi;
    const auto& dom = m_->domain;
    double guess = 0.0;
    if (dom.bounded()) guess = 0.5 * (dom.lo + dom.hi);
    else if (std::isfinite(dom.lo)) guess = dom.lo + 1.0;
    else if (std::isfinite(dom.hi)) guess = dom.hi - 1.0;
    return numerics::invert_monotone(m_->eval, z, dom, guess);
  }

  /// F'(r) on the domain interior.
  [[nodiscard]] double deriv(double r) const {
    if (m_->deriv) return m_->deriv(r);
    if (m_->inverse_deriv) return 1.0 / m_->inverse_deriv(m_->eval(r));
    const auto& dom = m_->domain;
    double h = numerics::first_derivative_step(r);
    h = std::min({h, 0.5 * (r - dom.lo), 0.5 * (dom.hi - r)});
    return (m_->eval(r + h) - m_->eval(r - h)) / (2.0 * h);
  }

  /// f_F'(z) on J_F.
  [[nodiscard]] double inverse_deriv(double z) const {
    if (m_->inverse_deriv) return m_->inverse_deriv(z);
    return 1.0 / deriv(inverse(z));
  }

  /// log f_F'(z).
  [[nodiscard]] double log_inverse_deriv(double z) const {
    if (m_->log_inverse_deriv) return m_->log_inverse_deriv(z);
    return std::log(inverse_deriv(z));
  }

  /// log |f_F(z)|, finite even where f_F itself overflows (when the family allows).
  [[nodiscard]] double log_abs_inverse(double z) const {
    if (m_->log_abs_inverse) return m_->log_abs_inverse(z);
    return std::log(std::abs(inverse(z)));
  }

  /// g_F(z) = (log f_F')'(z) when the family has it in closed form.
  [[nodiscard]] std::optional<double> closed_form_g(double z) const {
    if (m_->g) return m_->g(z);
    return std::nullopt;
  }

  [[nodiscard]] bool has_closed_form_inverse_deriv() const {
    return static_cast<bool>(m_->inverse_deriv) || static_cast<bool>(m_->log_inverse_deriv);
  }

  [[nodiscard]] DomainKind domain_kind() const { return m_->kind; }
  [[nodiscard]] const Interval& domain() const { return m_->domain; }
  /// J_F, stored as endpoints.
  [[nodiscard]] const Interval& image() const { return m_->image; }
  [[nodiscard]] const KindTag& tag() const { return m_->tag; }
  [[nodiscard]] const std::string& label() const { return m_->tag.label; }
  [[nodiscard]] const Model& model() const { return *m_; }

 private:
  std::shared_ptr<const Model> m_;
};

namespace detail {

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace detail

/// Phi_alpha(r) = (r^alpha - 1)/alpha (alpha != 0), log r (alpha = 0), on [0, inf).
inline FTransform make_power_alpha(double alpha) {
  if (!std::isfinite(alpha)) throw std::invalid_argument("make_power_alpha: alpha must be finite");
  FTransform::Model m;
  m.kind = DomainKind::half_line_nonneg;
  m.domain = {0.0, kInf};
  m.tag = {Family::power_alpha, alpha, kNaN, "power(alpha=" + detail::num(alpha) + ")"};
  if (alpha == 0.0) {
    m.image = {-kInf, kInf};
    m.eval = [](double r) { return r <= 0.0 ? -kInf : std::log(r); };
    m.inverse = [](double z) { return std::exp(z); };
    m.deriv = [](double r) { return 1.0 / r; };
    m.inverse_deriv = [](double z) { return std::exp(z); };
    m.log_inverse_deriv = [](double z) { return z; };
    m.log_abs_inverse = [](double z) { return z; };
    m.g = [](double) { return 1.0; };
    return FTransform(std::move(m));
  }
  const double a = alpha;
  if (a > 0) m.image = {-1.0 / a, kInf};
  else m.image = {-kInf, -1.0 / a};
  m.eval = [a](double r) {
    if (r <= 0.0) return a > 0 ? -1.0 / a : -kInf;
    if (r == kInf) return a > 0 ? kInf : -1.0 / a;
    return std::expm1(a * std::log(r)) / a;
  };
  m.inverse = [a](double z) {
    const double base = a * z + 1.0;
    if (base <= 0.0) return a > 0 ? 0.0 : kInf;
    return std::exp(std::log1p(a * z) / a);
  };
  m.deriv = [a](double r) { return std::pow(r, a - 1.0); };
  m.inverse_deriv = [a](double z) { return std::pow(a * z + 1.0, 1.0 / a - 1.0); };
  m.log_inverse_deriv = [a](double z) { return (1.0 / a - 1.0) * std::log1p(a * z); };
  m.log_abs_inverse = [a](double z) { return std::log1p(a * z) / a; };
  m.g = [a](double z) { return (1.0 - a) / (a * z + 1.0); };
  return FTransform(std::move(m));
}

/// log r on [0, inf): the alpha = 0 member, tagged as `log`.
inline FTransform make_log() {
  auto m = make_power_alpha(0.0).model();
  m.tag = {Family::log, kNaN, kNaN, "log"};
  return FTransform(std::move(m));
}

/// F(r) = A r + B with A > 0, on R (default) or on [0, inf).
inline FTransform make_affine(double A, double B, DomainKind kind = DomainKind::whole_line) {
  if (!(A > 0.0) || !std::isfinite(A) || !std::isfinite(B)) {
    throw std::invalid_argument("make_affine: need finite A > 0 and finite B");
  }
  if (kind == DomainKind::bounded_above) {
    throw std::invalid_argument("make_affine: an affine map cannot reach +inf at a finite endpoint");
  }
  FTransform::Model m;
  m.kind = kind;
  m.domain = kind == DomainKind::whole_line ? Interval{-kInf, kInf} : Interval{0.0, kInf};
  m.image = kind == DomainKind::whole_line ? Interval{-kInf, kInf} : Interval{B, kInf};
  m.tag = {Family::affine, A, B, "affine(A=" + detail::num(A) + ",B=" + detail::num(B) + ")"};
  m.eval = [A, B](double r) { return A * r + B; };
  m.inverse = [A, B](double z) { return (z - B) / A; };
  m.deriv = [A](double) { return A; };
  m.inverse_deriv = [A](double) { return 1.0 / A; };
  m.log_inverse_deriv = [A](double) { return -std::log(A); };
  m.g = [](double) { return 0.0; };
  return FTransform(std::move(m));
}

/// A*F + B with A > 0: the same convexity class as F.
inline FTransform make_relabeled(const FTransform& F, double A, double B) {
  if (!(A > 0.0) || !std::isfinite(A) || !std::isfinite(B)) {
    throw std::invalid_argument("make_relabeled: need finite A > 0 and finite B");
  }
  FTransform::Model m;
  m.kind = F.domain_kind();
  m.domain = F.domain();
  m.image = {A * F.image().lo + B, A * F.image().hi + B};
  m.tag = {Family::custom, A, B,
           detail::num(A) + "*" + F.label() + "+" + detail::num(B)};
  m.eval = [F, A, B](double r) { return A * F(r) + B; };
  m.inverse = [F, A, B](double z) { return F.inverse((z - B) / A); };
  m.deriv = [F, A](double r) { return A * F.deriv(r); };
  m.inverse_deriv = [F, A, B](double z) { return F.inverse_deriv((z - B) / A) / A; };
  m.log_inverse_deriv = [F, A, B](double z) {
    return F.log_inverse_deriv((z - B) / A) - std::log(A);
  };
  m.log_abs_inverse = [F, A, B](double z) { return F.log_abs_inverse((z - B) / A); };
  if (F.model().g) {
    m.g = [F, A, B](double z) { return *F.closed_form_g((z - B) / A) / A; };
  }
  return FTransform(std::move(m));
}

/**
 * Hot transform H_a on [0, a]: H(r/a) with H the inverse of hot_h, +inf at
 * r = a. For a = inf this is log r on [0, inf).
 */
inline FTransform make_hot(double a) {
  if (!(a > 0.0)) throw std::invalid_argument("make_hot: a must be positive");
  if (a == kInf) {
    auto m = make_power_alpha(0.0).model();
    m.tag = {Family::hot, kInf, kNaN, "hot(a=inf)"};
    return FTransform(std::move(m));
  }
  FTransform::Model m;
  m.kind = DomainKind::bounded_above;
  m.domain = {0.0, a};
  m.image = {-kInf, kInf};
  m.tag = {Family::hot, a, kNaN, "hot(a=" + detail::num(a) + ")"};
  m.eval = [a](double r) {
    if (r <= 0.0) return -kInf;
    if (r >= a) return kInf;
    return hot_H(r / a);
  };
  m.inverse = [a](double z) { return a * hot_h(z); };
  m.deriv = [a](double r) { return 1.0 / (a * hot_h_prime(hot_H(r / a))); };
  m.inverse_deriv = [a](double z) { return a * hot_h_prime(z); };
  const double log_norm = std::log(2.0 * std::sqrt(std::numbers::pi));
  m.log_inverse_deriv = [a, log_norm](double z) { return std::log(a) - 0.25 * z * z - log_norm; };
  m.log_abs_inverse = [a](double z) { return std::log(a) + hot_log_h(z); };
  m.g = [](double z) { return -0.5 * z; };
  return FTransform(std::move(m));
}

/// Phi_{l-a}(r) = -log(l - r) on [a, l), +inf at r = l.
inline FTransform make_neglog(double a, double ell) {
  if (!(a < ell) || !std::isfinite(ell)) {
    throw std::invalid_argument("make_neglog: need a < ell with ell finite");
  }
  FTransform::Model m;
  m.kind = DomainKind::bounded_above;
  m.domain = {a, ell};
  m.image = {std::isfinite(a) ? -std::log(ell - a) : -kInf, kInf};
  m.tag = {Family::neglog, a, ell, "neglog(a=" + detail::num(a) + ",ell=" + detail::num(ell) + ")"};
  m.eval = [ell](double r) {
    if (r >= ell) return kInf;
    return -std::log(ell - r);
  };
  m.inverse = [ell](double z) { return ell - std::exp(-z); };
  m.deriv = [ell](double r) { return 1.0 / (ell - r); };
  m.inverse_deriv = [](double z) { return std::exp(-z); };
  m.log_inverse_deriv = [](double z) { return -z; };
  m.g = [](double) { return -1.0; };
  return FTransform(std::move(m));
}

/// F(r) = e^r on the whole line; f_F = log on (0, inf).
inline FTransform make_exponential() {
  FTransform::Model m;
  m.kind = DomainKind::whole_line;
  m.domain = {-kInf, kInf};
  m.image = {0.0, kInf};
  m.tag = {Family::custom, kNaN, kNaN, "exp"};
  m.eval = [](double r) { return std::exp(r); };
  m.inverse = [](double z) { return z <= 0.0 ? -kInf : std::log(z); };
  m.deriv = [](double r) { return std::exp(r); };
  m.inverse_deriv = [](double z) { return 1.0 / z; };
  m.log_inverse_deriv = [](double z) { return -std::log(z); };
  m.log_abs_inverse = [](double z) { return std::log(std::abs(std::log(z))); };
  m.g = [](double z) { return -1.0 / z; };
  return FTransform(std::move(m));
}

/**
 * Black-box transform given only by `eval`. `eval` must return the limits at
 * infinite domain endpoints. The image defaults to (eval(lo), eval(hi)).
 */
inline FTransform make_custom(std::string label, DomainKind kind, Interval domain,
                              FTransform::Fn eval, std::optional<Interval> image = std::nullopt,
                              FTransform::Fn inverse = {}) {
  FTransform::Model m;
  m.kind = kind;
  m.domain = domain;
  if (image) {
    m.image = *image;
  } else {
    const double a = eval(domain.lo);
    double b = eval(domain.hi);
    if (kind == DomainKind::bounded_above) {
      // F(l) = inf by convention; J_F ends at the left limit, estimated by a
      // geometric approach sequence.
      double prev = eval(domain.hi - 0.1 * (domain.hi - domain.lo));
      double inc = kNaN;
      b = prev;
      for (int k = 2; k <= 14; ++k) {
        const double v = eval(domain.hi - std::pow(10.0, -k) * (domain.hi - domain.lo));
        const double d = v - prev;
        if (std::isfinite(inc) && inc > 0 && d / inc >= 0.5) {
          b = kInf;
          break;
        }
        inc = d;
        prev = v;
        b = v;
      }
    }
    m.image = {std::min(a, b), std::max(a, b)};
  }
  m.tag = {Family::custom, kNaN, kNaN, std::move(label)};
  m.eval = std::move(eval);
  m.inverse = std::move(inverse);
  return FTransform(std::move(m));
}

}  // namespace fconvex
