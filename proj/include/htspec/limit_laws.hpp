#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "htspec/quadrature.hpp"
#include "htspec/tail_law.hpp"

namespace htspec {

struct RegimeParams {
  double alpha = 1.0;
  double mu = 1.0;
  double rho = 1.0;
  std::size_t n = 1;
  std::size_t p = 1;
};

inline std::size_t rows_for(std::size_t n, double rho) {
  return static_cast<std::size_t>(std::llround(rho * static_cast<double>(n)));
}

inline RegimeParams make_regime(double alpha, double mu, double rho, std::size_t n) {
  RegimeParams r{alpha, mu, rho, n, rows_for(n, rho)};
  if (r.p == 0) throw std::invalid_argument("p = round(rho n) must be at least 1");
  return r;
}

namespace detail {
inline double normalization(const TailLaw& law, double target) {
  if (!(target > 0.0) || target > 1.0) throw std::domain_error("normalization target must lie in (0, 1]");
  return quantile_abs(law, target);
}
}  // namespace detail

/// c_np = inf{t : G(t) <= 1/(p n^mu)}, on the law's output scale.
inline double c_np(const TailLaw& law, std::size_t n, std::size_t p, double mu) {
  return detail::normalization(law, 1.0 / (static_cast<double>(p) * std::pow(static_cast<double>(n), mu)));
}

/// c_n = inf{t : G(t) <= 2/((n+1) n^mu)}.
inline double c_n(const TailLaw& law, std::size_t n, double mu) {
  const double nn = static_cast<double>(n);
  return detail::normalization(law, 2.0 / ((nn + 1.0) * std::pow(nn, mu)));
}

inline double frechet_cdf(double t, double a) {
  if (!(a > 0.0)) throw std::domain_error("Frechet shape must be positive");
  if (t <= 0.0) return 0.0;
  return std::exp(-std::pow(t, -a));
}

enum class IntensityKind { Covariance, Hermitian };

/// Expected number of limiting points in (x, inf): x^(-alpha/2) for the
/// covariance process, x^(-alpha) for the Hermitian one.
inline double pp_mean_count(double x, double alpha, IntensityKind kind) {
  if (!(x > 0.0)) throw std::domain_error("pp_mean_count needs x > 0");
  return std::pow(x, kind == IntensityKind::Covariance ? -alpha / 2.0 : -alpha);
}

namespace detail {
inline void require_rho(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::domain_error("rho must lie in (0, 1]");
}
}  // namespace detail

inline std::pair<double, double> mp_edges(double rho) {
  detail::require_rho(rho);
  const double s = std::sqrt(rho);
  return {(1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s)};
}

inline double mp_density(double x, double rho) {
  const auto [lo, hi] = mp_edges(rho);
  if (x <= lo || x >= hi || x <= 0.0) return 0.0;
  return std::sqrt((hi - x) * (x - lo)) / (2.0 * std::numbers::pi * rho * x);
}

/// MP distribution function by adaptive Simpson after the substitution
/// x = lo + h (1 - cos t), h = (hi - lo)/2, which removes the square-root
/// endpoint behaviour (and the 1/x factor when rho = 1).
inline double mp_cdf(double x, double rho) {
  const auto [lo, hi] = mp_edges(rho);
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  const double h = 0.5 * (hi - lo);
  const double theta = std::acos(std::clamp(1.0 - (x - lo) / h, -1.0, 1.0));
  const auto integrand = [&](double t) {
    if (lo == 0.0) return (1.0 + std::cos(t)) / std::numbers::pi;
    const double s = std::sin(t);
    return h * h * s * s / (2.0 * std::numbers::pi * rho * (lo + h * (1.0 - std::cos(t))));
  };
  return std::clamp(quad::adaptive_simpson(integrand, 0.0, theta, 1e-12), 0.0, 1.0);
}

enum class Regime { Poissonian, Edge, Critical };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Poissonian: return "poissonian";
    case Regime::Edge: return "edge";
    case Regime::Critical: return "critical";
  }
  return "?";
}

/// Threshold 2(1 + 1/mu); infinite for mu = 0.
inline double regime_threshold(double mu) {
  return mu == 0.0 ? std::numeric_limits<double>::infinity() : 2.0 * (1.0 + 1.0 / mu);
}

inline Regime classify_regime(double alpha, double mu) {
  if (!(alpha > 0.0)) throw std::domain_error("alpha must be positive");
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::domain_error("mu must lie in [0, 1]");
  if (mu == 0.0) return Regime::Poissonian;
  const double tau = regime_threshold(mu);
  if (std::abs(alpha - tau) <= 1e-12 * tau) return Regime::Critical;
  return alpha < tau ? Regime::Poissonian : Regime::Edge;
}

}  // namespace htspec
