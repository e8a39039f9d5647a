#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace htspec {

namespace detail {

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline void require_unit(std::span<const double> v) {
  if (std::abs(std::sqrt(squared_norm(v)) - 1.0) > 1e-10) throw std::invalid_argument("vector is not a unit vector");
}

/// Coordinates ordered by decreasing |v_j|, ties by index.
inline std::vector<std::size_t> magnitude_order(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(v[a]) > std::abs(v[b]); });
  return order;
}

}  // namespace detail

/// m(L): the largest squared mass carried by any L coordinates, L = 1..L_max.
/// The maximizing sets are prefixes of `order`.
struct LocalizationProfile {
  std::vector<double> mass_curve;
  std::vector<std::size_t> order;
  double ipr = 0.0;  ///< sum |v_j|^4, reported as a diagnostic only

  std::span<const std::size_t> best_support(std::size_t L) const {
    return std::span<const std::size_t>(order).first(std::min(L, order.size()));
  }

  nlohmann::json to_json() const { return {{"mass_curve", mass_curve}, {"ipr", ipr}}; }
};

inline double inverse_participation_ratio(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x * x * x;
  return s;
}

/// Profile up to L_max (default: the full dimension).
inline LocalizationProfile localization_profile(std::span<const double> v, std::size_t l_max = 0) {
  LocalizationProfile p;
  p.order = detail::magnitude_order(v);
  if (l_max == 0 || l_max > v.size()) l_max = v.size();
  p.mass_curve.reserve(l_max);
  double acc = 0.0;
  for (std::size_t l = 0; l < l_max; ++l) {
    acc += v[p.order[l]] * v[p.order[l]];
    p.mass_curve.push_back(acc);
  }
  p.ipr = inverse_participation_ratio(v);
  return p;
}

/// Squared mass of the L largest coordinates.
inline double top_mass(std::span<const double> v, std::size_t L) {
  if (L > v.size()) throw std::domain_error("localization size L exceeds the dimension");
  std::vector<double> sq(v.size());
  std::transform(v.begin(), v.end(), sq.begin(), [](double x) { return x * x; });
  std::nth_element(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(L), sq.end(), std::greater<>());
  return std::accumulate(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(L), 0.0);
}

/// (L, eta)-localization: some L coordinates carry squared mass > 1 - eta.
inline bool is_localized(std::span<const double> v, std::size_t L, double eta) {
  if (L == 0 || L > v.size()) throw std::domain_error("localization size L must lie in [1, dim]");
  if (!(eta > 0.0 && eta <= 1.0)) throw std::domain_error("eta must lie in (0, 1]");
  detail::require_unit(v);
  return top_mass(v, L) > 1.0 - eta;
}

/// min over s in {+1, -1} of ||v - s e_i||.
inline double distance_to_basis_vector(std::span<const double> v, std::size_t i) {
  if (i >= v.size()) throw std::out_of_range("basis index out of range");
  return std::sqrt(std::max(0.0, detail::squared_norm(v) - 2.0 * std::abs(v[i]) + 1.0));
}

/// Distance, up to global sign, to the pair vector (e_i + e^{i theta} e_j)/sqrt(2)
/// specialized to real entries: theta = 0 gives (e_i + e_j)/sqrt(2) and
/// theta = pi gives (e_i - e_j)/sqrt(2).
inline double distance_to_pair_vector(std::span<const double> v, std::size_t i, std::size_t j, double theta) {
  if (i == j) throw std::domain_error("pair vector needs distinct indices");
  if (i >= v.size() || j >= v.size()) throw std::out_of_range("pair index out of range");
  const double sign = std::cos(theta) >= 0.0 ? 1.0 : -1.0;
  const double overlap = (v[i] + sign * v[j]) / std::numbers::sqrt2;
  return std::sqrt(std::max(0.0, detail::squared_norm(v) - 2.0 * std::abs(overlap) + 1.0));
}

/// Smaller of the two pair distances (theta = 0 and theta = pi).
inline double best_pair_distance(std::span<const double> v, std::size_t i, std::size_t j) {
  return std::min(distance_to_pair_vector(v, i, j, 0.0), distance_to_pair_vector(v, i, j, std::numbers::pi));
}

}  // namespace htspec
