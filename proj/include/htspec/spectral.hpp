#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "htspec/dense_eigen.hpp"
#include "htspec/lanczos.hpp"
#include "htspec/localization.hpp"
#include "htspec/rng.hpp"
#include "htspec/sparse_matrix.hpp"
#include "htspec/spectral_result.hpp"

namespace htspec {

// ---------------------------------------------------------------------------
// Elementary bounds on lambda_1(M M^T)

/// max_i sum_j m_ij^2 = max_i (M M^T)_ii, a Rayleigh-quotient lower bound on
/// lambda_1(Sigma) that dominates |m_{i1 j1}|^2.
inline double rayleigh_lower_bound(const SparseMatrix& m) {
  const auto s = row_square_sums(m);
  return s.empty() ? 0.0 : *std::max_element(s.begin(), s.end());
}

/// ||M||_inf ||M||_1, an upper bound on lambda_1(Sigma).
inline double norm_upper_bound(const SparseMatrix& m) {
  const auto n = norms(m);
  return n.inf_norm * n.one_norm;
}

/// Eigenvalues of M M^T in descending order, clipped at zero.
inline std::vector<double> gram_eigenvalues(const SparseMatrix& m) {
  auto ev = eigvals_dense_symmetric(gram_dense(m));
  for (double& x : ev) x = std::max(x, 0.0);
  return ev;
}

// ---------------------------------------------------------------------------
// Cauchy interlacing

enum class InterlacingMode { HermitianMinor, RowDeletion, ColDeletion };

struct InterlacingReport {
  bool holds = true;
  double max_violation = 0.0;  ///< largest amount by which an inequality fails
  std::size_t comparisons = 0;
};

/// Checks parent[l] >= minor[l] >= parent[l+1] on descending value lists
/// (eigenvalues for a Hermitian minor, singular values or Gram eigenvalues
/// for row/column deletion). A principal minor or a deleted row loses one
/// value; a deleted column of a p x n matrix with p < n keeps p values. With
/// `partial`, both lists may be truncated top-k lists.
inline InterlacingReport check_interlacing(std::span<const double> parent, std::span<const double> minor,
                                           InterlacingMode mode, double rel_tol = 1e-9, bool partial = false) {
  if (!partial) {
    const bool ok = mode == InterlacingMode::ColDeletion ? minor.size() == parent.size()
                                                         : minor.size() + 1 == parent.size();
    if (!ok) throw std::invalid_argument("interlacing: spectrum sizes do not match the deletion mode");
  }
  InterlacingReport r;
  double scale = 0.0;
  for (double x : parent) scale = std::max(scale, std::abs(x));
  for (double x : minor) scale = std::max(scale, std::abs(x));
  for (std::size_t l = 0; l < minor.size() && l < parent.size(); ++l) {
    r.max_violation = std::max(r.max_violation, minor[l] - parent[l]);
    ++r.comparisons;
    if (l + 1 < parent.size()) {
      r.max_violation = std::max(r.max_violation, parent[l + 1] - minor[l]);
      ++r.comparisons;
    }
  }
  r.holds = r.max_violation <= rel_tol * std::max(scale, std::numeric_limits<double>::min());
  return r;
}

/// Hermitian case: spectrum of A against its principal minor without index `drop`.
inline InterlacingReport check_hermitian_minor(const DenseMatrix& a, std::size_t drop, double rel_tol = 1e-9) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < a.rows(); ++i)
    if (i != drop) keep.push_back(i);
  const auto parent = eigvals_dense_symmetric(a);
  const auto minor = eigvals_dense_symmetric(a.principal_submatrix(keep));
  return check_interlacing(parent, minor, InterlacingMode::HermitianMinor, rel_tol);
}

inline std::vector<double> singular_values(const SparseMatrix& m) {
  auto ev = gram_eigenvalues(m);
  for (double& x : ev) x = std::sqrt(x);
  return ev;
}

/// Singular values of M against M with row `r` removed, compared through
/// their squares: sqrt would inflate roundoff of tiny Gram eigenvalues.
inline InterlacingReport check_row_deletion(const SparseMatrix& m, std::size_t r, double rel_tol = 1e-9) {
  return check_interlacing(gram_eigenvalues(m), gram_eigenvalues(delete_row(m, r)), InterlacingMode::RowDeletion,
                           rel_tol);
}

/// Singular values of M (p < n) against M with column `c` removed, squared as above.
inline InterlacingReport check_col_deletion(const SparseMatrix& m, std::size_t c, double rel_tol = 1e-9) {
  if (m.rows() >= m.cols()) throw std::invalid_argument("column deletion interlacing needs p < n");
  return check_interlacing(gram_eigenvalues(m), gram_eigenvalues(delete_col(m, c)), InterlacingMode::ColDeletion,
                           rel_tol);
}

// ---------------------------------------------------------------------------
// Eigen-perturbation

struct PerturbationCheck {
  double zeta = 0.0;                  ///< <v, A v>
  double epsilon = 0.0;               ///< ||(A - zeta) v||
  double nearest_eig_distance = 0.0;  ///< min_l |lambda_l - zeta|
  bool part_a_holds = false;
  bool part_b_evaluated = false;
  double part_b_lhs = 0.0;  ///< ||v_eps - P_v v_eps||
  double part_b_rhs = 0.0;  ///< 2 eps / (d - eps)
  bool part_b_holds = true;
};

/// Evaluates both parts of the eigen-perturbation bound for the operator
/// `apply` given its complete spectrum. Part (b) is only attempted when
/// exactly one eigenvalue lies in the closed ball of radius eps around zeta,
/// all others are farther than eps, and eigenvectors are available.
template <class Apply>
PerturbationCheck perturbation_check(const Apply& apply, std::span<const double> v, const SpectralResult& spectrum) {
  detail::require_unit(v);
  if (!spectrum.complete) throw std::invalid_argument("perturbation check needs a complete spectrum");
  const auto av = apply(v);
  PerturbationCheck c;
  c.zeta = detail::dot(v, av);
  double e2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) e2 += (av[i] - c.zeta * v[i]) * (av[i] - c.zeta * v[i]);
  c.epsilon = std::sqrt(e2);
  double scale = 1.0;
  for (double x : spectrum.eigenvalues) scale = std::max(scale, std::abs(x));
  const double slack = 1e-9 * scale;
  c.nearest_eig_distance = std::numeric_limits<double>::infinity();
  std::size_t inside = 0, inside_idx = 0;
  double others = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < spectrum.eigenvalues.size(); ++l) {
    const double dist = std::abs(spectrum.eigenvalues[l] - c.zeta);
    c.nearest_eig_distance = std::min(c.nearest_eig_distance, dist);
    if (dist <= c.epsilon) {
      ++inside;
      inside_idx = l;
    }
  }
  c.part_a_holds = c.nearest_eig_distance <= c.epsilon + slack;
  if (inside == 1 && !spectrum.eigenvectors.empty()) {
    for (std::size_t l = 0; l < spectrum.eigenvalues.size(); ++l)
      if (l != inside_idx) others = std::min(others, std::abs(spectrum.eigenvalues[l] - c.zeta));
    if (others > c.epsilon) {
      const auto& ve = spectrum.eigenvectors[inside_idx];
      const double proj = detail::dot(v, ve);
      double lhs2 = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) lhs2 += (ve[i] - proj * v[i]) * (ve[i] - proj * v[i]);
      c.part_b_evaluated = true;
      c.part_b_lhs = std::sqrt(lhs2);
      c.part_b_rhs = std::isfinite(others) ? 2.0 * c.epsilon / (others - c.epsilon)
                                           : std::numeric_limits<double>::infinity();
      c.part_b_holds = c.part_b_lhs <= c.part_b_rhs + 1e-9;
    }
  }
  return c;
}

inline PerturbationCheck perturbation_check(const DenseMatrix& a, std::span<const double> v,
                                            const SpectralResult& spectrum) {
  return perturbation_check([&](std::span<const double> x) { return a.apply(x); }, v, spectrum);
}

// ---------------------------------------------------------------------------
// Residual of the l-th basis vector

struct ResidualVector {
  std::vector<double> r;
  double norm = 0.0;
  RankedEntry entry;
};

/// r_l = Sigma e_{i_l} - |m_{i_l j_l}|^2 e_{i_l}, computed with gram_matvec.
inline ResidualVector residual_vector(const SparseMatrix& m, std::size_t l) {
  if (l == 0) throw std::invalid_argument("residual rank l is 1-based");
  const auto top = top_entries(m, l);
  if (top.entries.size() < l) throw std::invalid_argument("residual rank exceeds the number of entries");
  ResidualVector out;
  out.entry = top.entries[l - 1];
  std::vector<double> e(m.rows(), 0.0);
  e[out.entry.i] = 1.0;
  out.r = gram_matvec(m, e);
  out.r[out.entry.i] -= out.entry.magnitude * out.entry.magnitude;
  out.norm = std::sqrt(detail::squared_norm(out.r));
  return out;
}

// ---------------------------------------------------------------------------
// Principal sub-matrix spectral radius and the localization bound

struct SubradiusResult {
  double value = 0.0;
  bool exact = true;  ///< false: lower bound from sampled subsets
  std::size_t subsets = 0;
};

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

namespace detail {
inline double spectral_radius(const DenseMatrix& s) {
  if (s.rows() == 1) return std::abs(s(0, 0));
  const auto ev = eigvals_dense_symmetric(s);
  return std::max(std::abs(ev.front()), std::abs(ev.back()));
}
}  // namespace detail

inline constexpr double kMaxExactSubsets = 1e6;

/// rho_L(A): the largest spectral radius over L x L principal sub-matrices,
/// by exhaustive enumeration.
inline SubradiusResult principal_subradius_exact(const DenseMatrix& a, std::size_t L) {
  const std::size_t n = a.rows();
  if (L == 0 || L > n) throw std::invalid_argument("sub-matrix size L must lie in [1, dim]");
  if (binomial(n, L) > kMaxExactSubsets) throw std::invalid_argument("exact sub-radius enumeration exceeds 1e6 subsets");
  SubradiusResult r;
  std::vector<std::size_t> idx(L);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    r.value = std::max(r.value, detail::spectral_radius(a.principal_submatrix(idx)));
    ++r.subsets;
    std::size_t pos = L;
    while (pos > 0 && idx[pos - 1] == n - L + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t q = pos; q < L; ++q) idx[q] = idx[q - 1] + 1;
  }
  return r;
}

/// Lower bound on rho_L(A) from `trials` random subsets.
inline SubradiusResult principal_subradius_sampled(const DenseMatrix& a, std::size_t L, std::size_t trials,
                                                   std::uint64_t seed) {
  const std::size_t n = a.rows();
  if (L == 0 || L > n) throw std::invalid_argument("sub-matrix size L must lie in [1, dim]");
  IndexStream s(seed, StreamTag::Instance, 5, 0);
  SubradiusResult r;
  r.exact = false;
  std::vector<std::size_t> perm(n);
  for (std::size_t t = 0; t < trials; ++t) {
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t q = 0; q < L; ++q) {
      const std::size_t pick = q + static_cast<std::size_t>(s.uniform() * static_cast<double>(n - q));
      std::swap(perm[q], perm[std::min(pick, n - 1)]);
    }
    std::vector<std::size_t> idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(L));
    std::sort(idx.begin(), idx.end());
    r.value = std::max(r.value, detail::spectral_radius(a.principal_submatrix(idx)));
    ++r.subsets;
  }
  return r;
}

struct LocalizationBound {
  double lhs = 0.0;  ///< |lambda|
  double rhs = 0.0;  ///< (rho_L + sqrt(eta) ||H||) / sqrt(1 - eta)
  bool holds = false;
  bool preconditions_met = false;
  std::string message;
};

/// Checks |lambda| <= (rho_L(H) + sqrt(eta) ||H||) / sqrt(1 - eta) for an
/// (L, eta)-localized unit eigenvector v of H. ||H|| is the largest computed
/// eigenvalue magnitude. Failed preconditions are reported, not asserted.
inline LocalizationBound localization_bound_check(const DenseMatrix& h, double lambda, std::span<const double> v,
                                                  std::size_t L, double eta) {
  LocalizationBound b;
  b.lhs = std::abs(lambda);
  const auto hv = h.apply(v);
  double res = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) res += (hv[i] - lambda * v[i]) * (hv[i] - lambda * v[i]);
  if (std::sqrt(res) > 1e-8 * std::max(1.0, std::abs(lambda))) {
    b.message = "(lambda, v) is not an eigenpair within 1e-8";
    return b;
  }
  if (!is_localized(v, L, eta)) {
    b.message = "v is not (L, eta)-localized";
    return b;
  }
  b.preconditions_met = true;
  const auto ev = eigvals_dense_symmetric(h);
  const double hnorm = std::max(std::abs(ev.front()), std::abs(ev.back()));
  const double rho_l = principal_subradius_exact(h, L).value;
  b.rhs = eta >= 1.0 ? std::numeric_limits<double>::infinity()
                     : (rho_l + std::sqrt(eta) * hnorm) / std::sqrt(1.0 - eta);
  b.holds = b.lhs <= b.rhs * (1.0 + 1e-9) + 1e-12;
  return b;
}

}  // namespace htspec
