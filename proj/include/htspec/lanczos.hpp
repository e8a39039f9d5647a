#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "htspec/dense_eigen.hpp"
#include "htspec/rng.hpp"
#include "htspec/sparse_matrix.hpp"
#include "htspec/spectral_result.hpp"

namespace htspec {

struct LanczosOptions {
  std::size_t k = 1;
  double tol = 1e-10;
  std::size_t max_iter = 0;  ///< Krylov basis cap; 0 means 10 k + 400
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxTopK = 50;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Two passes of classical Gram-Schmidt against the whole basis.
inline void orthogonalize(std::vector<double>& w, const std::vector<std::vector<double>>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : basis) {
      const double c = dot(q, w);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * q[i];
    }
  }
}

inline std::vector<double> random_vector(IndexStream& s, std::size_t dim) {
  std::vector<double> v(dim);
  for (double& x : v) x = 2.0 * s.uniform() - 1.0;
  return v;
}

}  // namespace detail

/// Top-k eigenpairs (largest algebraic eigenvalues) of the symmetric operator
/// `apply` on R^dim by Lanczos with full reorthogonalization. When the Krylov
/// space becomes invariant before dim is reached, the iteration continues
/// from a fresh random vector orthogonal to the basis (counted as a restart),
/// which also resolves repeated eigenvalues. A Ritz pair is accepted once its
/// residual estimate is below max(tol |theta|, 64 eps ||T||). Hitting the basis
/// cap first returns the current Ritz pairs with `converged == false`.
template <class Apply>
SpectralResult lanczos_top(const Apply& apply, std::size_t dim, const LanczosOptions& opt) {
  if (opt.k == 0 || opt.k > kMaxTopK) throw std::invalid_argument("top-k must lie in [1, 50]");
  if (opt.k > dim) throw std::invalid_argument("top-k exceeds the operator dimension");
  if (!(opt.tol >= 1e-12)) throw std::invalid_argument("Lanczos tolerance must be at least 1e-12");
  const std::size_t k = opt.k;
  const std::size_t cap = std::min(dim, opt.max_iter ? opt.max_iter : 10 * k + 400);
  const double eps = std::numeric_limits<double>::epsilon();

  IndexStream stream(opt.seed, StreamTag::Solver);
  std::vector<std::vector<double>> basis;
  std::vector<double> alpha, beta;
  std::size_t restarts = 0;
  double anorm = 0.0;

  auto start = detail::random_vector(stream, dim);
  const double start_norm = detail::norm2(start);
  for (double& x : start) x /= start_norm;
  basis.push_back(std::move(start));

  auto ritz_converged = [&](const std::vector<double>& theta, const std::vector<double>& last, double b,
                            std::vector<std::size_t>& order) {
    order.resize(theta.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return theta[x] > theta[y]; });
    bool ok = theta.size() >= k;
    for (std::size_t l = 0; l < std::min(k, theta.size()); ++l) {
      const std::size_t idx = order[l];
      const double est = std::abs(b * last[idx]);
      if (est > std::max(opt.tol * std::abs(theta[idx]), 64.0 * eps * anorm)) ok = false;
    }
    return ok;
  };

  bool converged = false;
  std::size_t next_check = k;
  double last_beta = 0.0;
  while (true) {
    const std::size_t j = basis.size() - 1;
    std::vector<double> w = apply(std::span<const double>(basis[j]));
    const double a = detail::dot(basis[j], w);
    alpha.push_back(a);
    for (std::size_t i = 0; i < dim; ++i) w[i] -= a * basis[j][i];
    if (j > 0 && beta[j - 1] != 0.0)
      for (std::size_t i = 0; i < dim; ++i) w[i] -= beta[j - 1] * basis[j - 1][i];
    detail::orthogonalize(w, basis);
    const double b = detail::norm2(w);
    anorm = std::max(anorm, std::abs(a) + b + (j > 0 ? beta[j - 1] : 0.0));
    last_beta = b;
    const std::size_t size = basis.size();
    if (size == dim) {
      converged = true;
      last_beta = 0.0;
      break;
    }
    const bool breakdown = b <= 1e-13 * anorm || b == 0.0;
    if (!breakdown && size >= next_check) {
      std::vector<double> theta = alpha;
      std::vector<double> last(size, 0.0);
      last[size - 1] = 1.0;
      detail::tridiagonal_ql(theta, beta, last.data(), 30 * size, 1);
      std::vector<std::size_t> order;
      if (ritz_converged(theta, last, b, order)) {
        converged = true;
        break;
      }
      next_check = size + std::max<std::size_t>(5, size / 8);
    }
    if (size >= cap) break;
    if (breakdown) {
      auto fresh = detail::random_vector(stream, dim);
      detail::orthogonalize(fresh, basis);
      const double nf = detail::norm2(fresh);
      if (nf <= 1e-10) {
        converged = true;
        last_beta = 0.0;
        break;
      }
      for (double& x : fresh) x /= nf;
      beta.push_back(0.0);
      basis.push_back(std::move(fresh));
      ++restarts;
    } else {
      for (double& x : w) x /= b;
      beta.push_back(b);
      basis.push_back(std::move(w));
    }
  }

  const std::size_t m = basis.size();
  SpectralResult t = eig_tridiagonal(alpha, std::vector<double>(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(m - 1)), true);
  SpectralResult r;
  r.solver = SolverKind::Lanczos;
  r.iterations = m;
  r.restarts = restarts;
  r.complete = m == dim && k == dim;
  bool all_ok = true;
  const std::size_t take = std::min(k, m);
  for (std::size_t l = 0; l < take; ++l) {
    const auto& s = t.eigenvectors[l];
    std::vector<double> y(dim, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double c = s[i];
      if (c == 0.0) continue;
      for (std::size_t q = 0; q < dim; ++q) y[q] += c * basis[i][q];
    }
    const double ny = detail::norm2(y);
    for (double& x : y) x /= ny;
    fix_sign(y);
    const double theta = t.eigenvalues[l];
    const auto ay = apply(std::span<const double>(y));
    double res = 0.0;
    for (std::size_t q = 0; q < dim; ++q) res += (ay[q] - theta * y[q]) * (ay[q] - theta * y[q]);
    res = std::sqrt(res);
    if (!converged && std::abs(last_beta * s[m - 1]) > std::max(opt.tol * std::abs(theta), 64.0 * eps * anorm))
      all_ok = false;
    r.eigenvalues.push_back(theta);
    r.residual_norms.push_back(res);
    r.eigenvectors.push_back(std::move(y));
  }
  r.converged = (converged || all_ok) && take == k;
  return r;
}

/// Top-k eigenpairs of Sigma = M M^T for rectangular M (via gram_matvec), or
/// of M itself when M is symmetric.
inline SpectralResult top_eigs(const SparseMatrix& m, std::size_t k, double tol = 1e-10, std::uint64_t seed = 0,
                               std::size_t max_iter = 0) {
  LanczosOptions opt{k, tol, max_iter, seed};
  if (m.symmetric()) {
    return lanczos_top([&](std::span<const double> v) { return matvec(m, v); }, m.rows(), opt);
  }
  return lanczos_top([&](std::span<const double> v) { return gram_matvec(m, v); }, m.rows(), opt);
}

/// Top-k eigenpairs of a dense symmetric matrix through the same Krylov path.
inline SpectralResult top_eigs(const DenseMatrix& a, std::size_t k, double tol = 1e-10, std::uint64_t seed = 0,
                               std::size_t max_iter = 0) {
  LanczosOptions opt{k, tol, max_iter, seed};
  return lanczos_top([&](std::span<const double> v) { return a.apply(v); }, a.rows(), opt);
}

}  // namespace htspec
