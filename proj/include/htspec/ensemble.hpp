#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <variant>
#include <vector>

#include "htspec/rng.hpp"
#include "htspec/sparse_matrix.hpp"
#include "htspec/tail_law.hpp"

namespace htspec {

/// Each position is nonzero independently with probability n^(mu-1).
struct BernoulliMask {};
/// Positions with |i - j| <= halfwidth.
struct BandMask {
  std::size_t halfwidth = 1;
};
/// Exactly `count` nonzeros per row at random distinct columns.
struct FixedCountMask {
  std::size_t count = 1;
};

struct SparsitySpec {
  std::variant<BernoulliMask, BandMask, FixedCountMask> kind = BernoulliMask{};
  double mu = 1.0;  ///< sparsity exponent; also drives the normalizations

  static SparsitySpec bernoulli(double mu) { return {BernoulliMask{}, mu}; }
  static SparsitySpec band(std::size_t halfwidth, double mu) { return {BandMask{halfwidth}, mu}; }
  static SparsitySpec fixed_count(std::size_t count, double mu) { return {FixedCountMask{count}, mu}; }
};

struct RectangularShape {
  std::size_t n = 1;
  double rho = 1.0;
};

struct HermitianShape {
  std::size_t n = 1;
};

using Shape = std::variant<RectangularShape, HermitianShape>;

/// Full recipe for one random matrix draw. Equal specs give bit-identical matrices.
struct EnsembleSpec {
  Shape shape = RectangularShape{};
  TailLaw law = TailLaw::pareto(2.0);
  SparsitySpec sparsity = SparsitySpec::bernoulli(1.0);
  std::uint64_t seed = 0;

  bool hermitian() const noexcept { return std::holds_alternative<HermitianShape>(shape); }

  std::size_t n() const noexcept {
    return std::visit([](const auto& s) { return s.n; }, shape);
  }

  /// p = round(rho n) for rectangular shapes, n otherwise.
  std::size_t rows() const noexcept {
    if (const auto* r = std::get_if<RectangularShape>(&shape))
      return static_cast<std::size_t>(std::llround(r->rho * static_cast<double>(r->n)));
    return n();
  }

  std::size_t cols() const noexcept { return n(); }

  double rho() const noexcept {
    if (const auto* r = std::get_if<RectangularShape>(&shape)) return r->rho;
    return 1.0;
  }

  void validate() const {
    if (n() == 0) throw std::domain_error("matrix dimension n must be positive");
    if (const auto* r = std::get_if<RectangularShape>(&shape)) {
      if (!(r->rho > 0.0 && r->rho <= 1.0)) throw std::domain_error("aspect ratio rho must lie in (0, 1]");
      if (rows() < 1 || rows() > n()) throw std::domain_error("row count p = round(rho n) must lie in [1, n]");
    }
    if (!(sparsity.mu >= 0.0 && sparsity.mu <= 1.0)) throw std::domain_error("sparsity exponent mu must lie in [0, 1]");
    if (const auto* b = std::get_if<BandMask>(&sparsity.kind); b && b->halfwidth == 0)
      throw std::domain_error("band halfwidth must be positive");
    if (const auto* f = std::get_if<FixedCountMask>(&sparsity.kind)) {
      if (hermitian()) throw std::domain_error("fixed-count rows are only defined for rectangular shapes");
      if (f->count == 0 || f->count > n()) throw std::domain_error("fixed row count must lie in [1, n]");
    }
  }
};

/// Bernoulli success probability n^(mu - 1).
inline double mask_probability(std::size_t n, double mu) {
  return std::pow(static_cast<double>(n), mu - 1.0);
}

namespace detail {

inline double draw_value(const TailLaw& law, std::uint64_t value_row_key, std::size_t j) {
  IndexStream s(stream_entry_key(value_row_key, j));
  return sample_entry(law, s);
}

/// Floyd's algorithm for `count` distinct columns out of n, in ascending order.
inline std::vector<std::size_t> sample_columns(std::uint64_t key, std::size_t n, std::size_t count) {
  IndexStream s(key);
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(count * 2);
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = static_cast<std::size_t>(s.uniform() * static_cast<double>(j + 1));
    const std::size_t pick = std::min(t, j);
    if (!chosen.insert(pick).second) chosen.insert(j);
  }
  std::vector<std::size_t> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Draws the matrix. Every position owns its mask stream and value stream,
/// derived from (seed, i, j), so the result does not depend on traversal
/// order and the mask is unaffected by the choice of law.
inline SparseMatrix sample_matrix(const EnsembleSpec& spec) {
  spec.validate();
  const std::size_t p = spec.rows();
  const std::size_t n = spec.cols();
  const bool herm = spec.hermitian();
  const double q = mask_probability(n, spec.sparsity.mu);

  std::vector<std::size_t> offsets(p + 1, 0);
  std::vector<std::size_t> indices;
  std::vector<double> values;
  std::vector<Triplet> upper;  // Hermitian path

  for (std::size_t i = 0; i < p; ++i) {
    const std::uint64_t mask_key = stream_row_key(spec.seed, StreamTag::Mask, i);
    const std::uint64_t value_key = stream_row_key(spec.seed, StreamTag::Value, i);
    const std::size_t j0 = herm ? i : 0;
    auto emit = [&](std::size_t j) {
      const double v = detail::draw_value(spec.law, value_key, j);
      if (herm) {
        upper.push_back({i, j, v});
      } else {
        indices.push_back(j);
        values.push_back(v);
      }
    };
    std::visit(
        [&](const auto& kind) {
          using K = std::decay_t<decltype(kind)>;
          if constexpr (std::is_same_v<K, BernoulliMask>) {
            for (std::size_t j = j0; j < n; ++j) {
              if (q >= 1.0) {
                emit(j);
                continue;
              }
              IndexStream ms(stream_entry_key(mask_key, j));
              if (ms.uniform() < q) emit(j);
            }
          } else if constexpr (std::is_same_v<K, BandMask>) {
            const std::size_t lo = std::max(j0, i >= kind.halfwidth ? i - kind.halfwidth : std::size_t{0});
            const std::size_t hi = std::min(n - 1, i + kind.halfwidth);
            for (std::size_t j = lo; j <= hi && j < n; ++j) emit(j);
          } else {
            for (std::size_t j : detail::sample_columns(mask_key, n, kind.count)) emit(j);
          }
        },
        spec.sparsity.kind);
    offsets[i + 1] = indices.size();
  }
  if (herm) return SparseMatrix::from_triplets(n, n, std::move(upper), true);
  return SparseMatrix::from_csr(p, n, std::move(offsets), std::move(indices), std::move(values));
}

}  // namespace htspec
