#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "htspec/limit_laws.hpp"
#include "htspec/sparse_matrix.hpp"

namespace htspec {

class Ecdf {
 public:
  explicit Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw std::invalid_argument("empirical CDF of an empty sample");
    std::sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  std::size_t size() const noexcept { return sorted_.size(); }
  const std::vector<double>& sorted_samples() const noexcept { return sorted_; }

 private:
  std::vector<double> sorted_;
};

/// Two-sided Kolmogorov-Smirnov distance between the sample and `cdf`.
template <class Cdf>
double ks_statistic(std::span<const double> samples, const Cdf& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic needs at least one sample");
  std::vector<double> x(samples.begin(), samples.end());
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("ks_statistic: non-finite sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(static_cast<double>(i) / n - f)});
  }
  return d;
}

/// Sup distance to a step CDF. The generic formula above assumes a
/// continuous CDF; here both step functions are compared at every jump.
inline double ks_statistic(std::span<const double> samples, const Ecdf& ref) {
  const Ecdf mine(std::vector<double>(samples.begin(), samples.end()));
  std::vector<double> jumps = mine.sorted_samples();
  jumps.insert(jumps.end(), ref.sorted_samples().begin(), ref.sorted_samples().end());
  double d = 0.0;
  for (double x : jumps) d = std::max(d, std::abs(mine(x) - ref(x)));
  return d;
}

/// Asymptotic 95% critical value of the one-sample KS statistic.
inline double ks_critical_95(std::size_t n) { return 1.95 / std::sqrt(static_cast<double>(n)); }

// ---------------------------------------------------------------------------
// Poisson counts

inline std::size_t count_above(std::span<const double> points, double x) {
  return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [x](double v) { return v > x; }));
}

struct PoissonCountResult {
  double threshold = 0.0;
  double observed_mean = 0.0;
  double observed_variance = 0.0;
  double expected = 0.0;
  double z_score = 0.0;  ///< (mean - expected) / sqrt(expected / replicates)
};

/// Counts above each threshold per replicate, compared with the limiting
/// Poisson mean (which is also its variance).
inline std::vector<PoissonCountResult> poisson_count_test(const std::vector<std::vector<double>>& replicate_points,
                                                          std::span<const double> thresholds, double alpha,
                                                          IntensityKind kind) {
  if (thresholds.empty()) throw std::invalid_argument("poisson_count_test needs thresholds");
  if (replicate_points.empty()) throw std::invalid_argument("poisson_count_test needs replicates");
  const double reps = static_cast<double>(replicate_points.size());
  std::vector<PoissonCountResult> out;
  for (double x : thresholds) {
    PoissonCountResult r;
    r.threshold = x;
    r.expected = pp_mean_count(x, alpha, kind);
    double s = 0.0, s2 = 0.0;
    for (const auto& pts : replicate_points) {
      const double c = static_cast<double>(count_above(pts, x));
      s += c;
      s2 += c * c;
    }
    r.observed_mean = s / reps;
    r.observed_variance = reps > 1 ? (s2 - reps * r.observed_mean * r.observed_mean) / (reps - 1.0) : 0.0;
    r.z_score = (r.observed_mean - r.expected) / std::sqrt(r.expected / reps);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Empirical spectral distribution

struct EsdHistogram {
  std::vector<double> values;  ///< normalized eigenvalues
  std::vector<double> edges;   ///< bins + 1 edges over [0, 1.5 lambda_+]
  std::vector<std::size_t> counts;
  double ks_to_mp = 0.0;

  void write_csv(std::ostream& os) const {
    os << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < counts.size(); ++b) os << edges[b] << ',' << edges[b + 1] << ',' << counts[b] << '\n';
  }
};

/// Histogram of spectrum/scale over [0, 1.5 lambda_+(rho)], plus its KS
/// distance to MP(rho). Values outside the range are clamped into the end bins.
inline EsdHistogram esd(std::span<const double> spectrum, double scale, std::size_t bins, double rho) {
  if (!(scale > 0.0)) throw std::invalid_argument("esd scale must be positive");
  if (bins == 0) throw std::invalid_argument("esd needs at least one bin");
  if (spectrum.empty()) throw std::invalid_argument("esd of an empty spectrum");
  EsdHistogram h;
  const double top = 1.5 * mp_edges(rho).second;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = top * static_cast<double>(b) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  h.values.reserve(spectrum.size());
  for (double l : spectrum) {
    const double v = l / scale;
    h.values.push_back(v);
    const double pos = std::floor(v / top * static_cast<double>(bins));
    const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[b];
  }
  h.ks_to_mp = ks_statistic(h.values, [rho](double x) { return mp_cdf(x, rho); });
  return h;
}

// ---------------------------------------------------------------------------
// Sparsity and collision events

/// |mean(counts)/m - prob| <= eta * prob.
inline bool concentration_check(std::span<const std::size_t> counts, std::size_t m, double prob, double eta) {
  if (counts.empty() || !(static_cast<double>(m) * prob > 0.0))
    throw std::invalid_argument("concentration_check needs counts and m * prob > 0");
  double s = 0.0;
  for (std::size_t c : counts) s += static_cast<double>(c);
  const double mean = s / static_cast<double>(counts.size());
  return std::abs(mean / static_cast<double>(m) - prob) <= eta * prob;
}

struct CollisionScan {
  std::size_t row_collisions = 0;
  std::size_t col_collisions = 0;
};

/// Rows (columns) holding at least two entries with |m| > threshold.
inline CollisionScan large_entry_collision_scan(const SparseMatrix& m, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("collision threshold must be positive");
  const auto rows = filtered_row_counts(m, threshold);
  const auto cols = filtered_col_counts(m, threshold);
  CollisionScan s;
  for (std::size_t c : rows) s.row_collisions += c >= 2;
  for (std::size_t c : cols) s.col_collisions += c >= 2;
  return s;
}

// ---------------------------------------------------------------------------
// Test records

struct TestRecord {
  std::string name;
  double observed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool pass = false;

  nlohmann::json to_json() const {
    return {{"name", name}, {"observed", observed}, {"expected", expected}, {"tolerance", tolerance}, {"pass", pass}};
  }
};

}  // namespace htspec
