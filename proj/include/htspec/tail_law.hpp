#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>

#include "htspec/quadrature.hpp"

namespace htspec {

/// L(t) = c.
struct ConstantSV {
  double c = 1.0;
};

/// L(t) = c * ln(e + t)^beta.
struct LogPowerSV {
  double c = 1.0;
  double beta = 0.0;
};

using SlowlyVarying = std::variant<ConstantSV, LogPowerSV>;

/// Raised when the second moment of a law diverges (alpha <= 2).
class InfiniteVarianceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Symmetric law with two-sided tail P(|x| > t) = min(1, L(t) t^-alpha) for
/// t >= support_min and 1 below it. With `standardize` the variable is divided
/// by sqrt(E x^2) so that its variance is one; every query below (tail,
/// quantile, sampling) then refers to the rescaled variable.
class TailLaw {
 public:
  explicit TailLaw(double alpha, SlowlyVarying sv = ConstantSV{}, double support_min = 1.0,
                   bool standardize = false);

  static TailLaw pareto(double alpha, bool standardize = false) {
    return TailLaw(alpha, ConstantSV{}, 1.0, standardize);
  }

  double alpha() const noexcept { return alpha_; }
  const SlowlyVarying& slowly_varying() const noexcept { return sv_; }
  double support_min() const noexcept { return support_min_; }
  bool standardized() const noexcept { return standardize_; }
  /// Divisor applied to raw draws: sqrt(E x^2) when standardized, else 1.
  double scale() const noexcept { return scale_; }

  /// L(t) at raw scale.
  double slowly_varying_at(double t) const noexcept {
    if (const auto* k = std::get_if<ConstantSV>(&sv_)) return k->c;
    const auto& lp = std::get<LogPowerSV>(sv_);
    return lp.c * std::pow(std::log(std::numbers::e + t), lp.beta);
  }

  /// Tail of the raw (unstandardized) variable.
  double raw_tail(double t) const noexcept {
    if (t < support_min_) return 1.0;
    return std::min(1.0, slowly_varying_at(t) * std::pow(t, -alpha_));
  }

  /// Smallest t >= support_min with raw_tail(t) <= u.
  double raw_quantile(double u) const;

  /// E x^2 of the raw variable; throws InfiniteVarianceError for alpha <= 2.
  double raw_second_moment() const;

  std::string describe() const;

 private:
  double alpha_;
  SlowlyVarying sv_;
  double support_min_;
  bool standardize_;
  double inv_alpha_;
  double scale_ = 1.0;
};

inline TailLaw::TailLaw(double alpha, SlowlyVarying sv, double support_min, bool standardize)
    : alpha_(alpha), sv_(sv), support_min_(support_min), standardize_(standardize) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("tail exponent alpha must be positive");
  if (!(support_min > 0.0) || !std::isfinite(support_min))
    throw std::invalid_argument("support_min must be positive");
  if (const auto* k = std::get_if<ConstantSV>(&sv_)) {
    if (!(k->c > 0.0) || !std::isfinite(k->c)) throw std::invalid_argument("slowly varying constant c must be positive");
  } else {
    const auto& lp = std::get<LogPowerSV>(sv_);
    if (!(lp.c > 0.0) || !std::isfinite(lp.c)) throw std::invalid_argument("slowly varying constant c must be positive");
    if (!std::isfinite(lp.beta)) throw std::invalid_argument("log-power exponent beta must be finite");
    // ln(e+t)^beta t^-alpha is nonincreasing on t > 0 whenever beta <= alpha.
    if (lp.beta > alpha) throw std::invalid_argument("log-power exponent beta must not exceed alpha");
  }
  inv_alpha_ = 1.0 / alpha_;
  if (standardize_) {
    if (alpha_ <= 2.0) throw InfiniteVarianceError("standardization requires alpha > 2 (variance is infinite)");
    scale_ = std::sqrt(raw_second_moment());
  }
}

inline double TailLaw::raw_quantile(double u) const {
  if (!(u > 0.0) || !(u <= 1.0)) throw std::domain_error("quantile level must lie in (0, 1]");
  if (const auto* k = std::get_if<ConstantSV>(&sv_)) {
    return std::max(support_min_, std::pow(k->c / u, inv_alpha_));
  }
  auto excess = [&](double t) { return slowly_varying_at(t) * std::pow(t, -alpha_) > u; };
  double lo = support_min_;
  if (!excess(lo)) return lo;
  double hi = 2.0 * lo;
  while (excess(hi)) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw std::domain_error("quantile bracket overflow");
  }
  // Bisect down to adjacent doubles; the invariant excess(lo) && !excess(hi) holds throughout.
  for (int it = 0; it < 2200; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    (excess(mid) ? lo : hi) = mid;
  }
  return hi;
}

inline double TailLaw::raw_second_moment() const {
  if (alpha_ <= 2.0) throw InfiniteVarianceError("infinite variance: alpha <= 2");
  const double t0 = raw_quantile(1.0);
  if (const auto* k = std::get_if<ConstantSV>(&sv_)) {
    return t0 * t0 + 2.0 * k->c * std::pow(t0, 2.0 - alpha_) / (alpha_ - 2.0);
  }
  const auto& lp = std::get<LogPowerSV>(sv_);
  const double log_t0 = std::log(t0);
  // Substitute t = t0 e^s; integrand 2 t^2 L(t) t^-alpha evaluated in log space.
  auto integrand = [&](double s) {
    const double log_t = log_t0 + s;
    const double log_e_plus_t = log_t + std::log1p(std::numbers::e * std::exp(-log_t));
    return 2.0 * lp.c * std::exp(lp.beta * std::log(log_e_plus_t) + (2.0 - alpha_) * log_t);
  };
  double total = 0.0;
  double a = 0.0;
  double width = 1.0;
  for (int chunk = 0; chunk < 200; ++chunk) {
    const double crude = width / 6.0 * (integrand(a) + 4.0 * integrand(a + 0.5 * width) + integrand(a + width));
    const double est = quad::adaptive_simpson(integrand, a, a + width, 1e-13 * (total + std::abs(crude)) + 1e-300);
    total += est;
    a += width;
    width *= 2.0;
    if (chunk > 2 && est < 1e-15 * total) break;
  }
  return t0 * t0 + total;
}

inline std::string TailLaw::describe() const {
  std::string s = "alpha=" + std::to_string(alpha_);
  if (const auto* k = std::get_if<ConstantSV>(&sv_)) {
    s += " L=constant(" + std::to_string(k->c) + ")";
  } else {
    const auto& lp = std::get<LogPowerSV>(sv_);
    s += " L=logpower(" + std::to_string(lp.c) + "," + std::to_string(lp.beta) + ")";
  }
  s += " support_min=" + std::to_string(support_min_);
  if (standardize_) s += " standardized";
  return s;
}

/// P(|x| > t) on the law's output scale.
inline double tail(const TailLaw& law, double t) {
  if (!std::isfinite(t)) throw std::domain_error("tail evaluated at non-finite t");
  if (t <= 0.0) return 1.0;
  return law.raw_tail(t * law.scale());
}

/// Smallest t with tail(law, t) <= u, on the law's output scale.
inline double quantile_abs(const TailLaw& law, double u) { return law.raw_quantile(u) / law.scale(); }

/// E x^2 of the law before any standardization.
inline double variance_unstandardized(const TailLaw& law) { return law.raw_second_moment(); }

/// One symmetric draw: random sign times quantile_abs of a uniform on (0, 1].
template <class Stream>
double sample_entry(const TailLaw& law, Stream& stream) {
  const bool negative = (stream() >> 63) != 0;
  const double u = static_cast<double>((stream() >> 11) + 1) * 0x1.0p-53;
  const double magnitude = quantile_abs(law, u);
  return negative ? -magnitude : magnitude;
}

}  // namespace htspec
