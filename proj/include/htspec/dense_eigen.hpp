#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "htspec/sparse_matrix.hpp"
#include "htspec/spectral_result.hpp"

namespace htspec {

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultDenseLimit = 2048;

namespace detail {

/// Implicit-shift QL on a symmetric tridiagonal matrix (diagonal d, coupling
/// e[i] between i and i+1, e.size() == d.size() - 1). On return d holds the
/// eigenvalues in no particular order. When `z` is non-null it is an
/// n x zcols row-major array whose rows are rotated along: starting from the
/// identity, row k ends up as the k-th eigenvector; starting from the last
/// unit column (zcols == 1), entry k ends up as its last component.
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double> e, double* z, std::size_t max_sweeps,
                           std::size_t zcols = 0) {
  const std::size_t n = d.size();
  if (n == 0) return;
  if (zcols == 0) zcols = n;
  e.resize(n, 0.0);
  e[n - 1] = 0.0;
  const double eps = std::ldexp(1.0, -52);
  double f = 0.0;
  double tst1 = 0.0;
  std::size_t sweeps = 0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n - 1 && std::abs(e[m]) > eps * tst1) ++m;
    if (m > l) {
      do {
        if (++sweeps > max_sweeps) throw ConvergenceError("tridiagonal QL did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;
        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          if (z) {
            double* zi = z + ii * zcols;
            double* zi1 = z + (ii + 1) * zcols;
            for (std::size_t k = 0; k < zcols; ++k) {
              const double t = zi1[k];
              zi1[k] = s * zi[k] + c * t;
              zi[k] = c * zi[k] - s * t;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

/// Householder reduction of the symmetric matrix held in `vt` (row-major n x n)
/// to tridiagonal form. The algorithm works on the lower triangle of V; vt
/// stores V transposed so the inner loops run along contiguous memory. With
/// `accumulate`, vt ends up holding the orthogonal transform with its rows
/// being the columns of V.
inline void householder_tridiagonalize(std::vector<double>& vt, std::size_t n, std::vector<double>& d,
                                       std::vector<double>& e, bool accumulate) {
  auto V = [&](std::size_t r, std::size_t c) -> double& { return vt[c * n + r]; };
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) d[j] = V(n - 1, j);
  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        const double* colj = &vt[j * n];  // V(k, j) for k = 0..n-1
        for (std::size_t k = j + 1; k + 1 <= i; ++k) {
          g += colj[k] * d[k];
          e[k] += colj[k] * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        double* colj = &vt[j * n];
        for (std::size_t k = j; k + 1 <= i; ++k) colj[k] -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }
  if (!accumulate) {
    for (std::size_t i = 0; i < n; ++i) d[i] = V(i, i);
    e[0] = 0.0;
    return;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    const double* coli1 = &vt[(i + 1) * n];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = coli1[k] / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double* colj = &vt[j * n];
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += coli1[k] * colj[k];
        for (std::size_t k = 0; k <= i; ++k) colj[k] -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

inline void check_symmetric(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("matrix is not square");
  double scale = 0.0;
  for (double x : a.data()) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * std::max(scale, 1.0))
        throw std::invalid_argument("matrix is not symmetric");
}

}  // namespace detail

/// Eigenpairs of a symmetric tridiagonal matrix, sorted descending. Vectors
/// are returned when `with_vectors` is set.
inline SpectralResult eig_tridiagonal(std::vector<double> diag, std::vector<double> off, bool with_vectors) {
  const std::size_t n = diag.size();
  if (off.size() + 1 != n && !(n == 0 && off.empty())) throw std::invalid_argument("tridiagonal: size mismatch");
  std::vector<double> z;
  if (with_vectors) {
    z.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
  }
  detail::tridiagonal_ql(diag, off, with_vectors ? z.data() : nullptr, 30 * std::max<std::size_t>(n, 1));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return diag[a] > diag[b]; });
  SpectralResult r;
  r.solver = SolverKind::Dense;
  r.complete = true;
  for (std::size_t k : order) {
    r.eigenvalues.push_back(diag[k]);
    if (with_vectors) r.eigenvectors.emplace_back(z.begin() + static_cast<std::ptrdiff_t>(k * n),
                                                  z.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
  }
  return r;
}

/// Full spectrum of a dense symmetric matrix: Householder tridiagonalization
/// followed by implicit-shift QL. Eigenvalues descending; with `with_vectors`
/// the eigenvectors are orthonormal, sign-normalized, and residual norms are
/// filled in.
inline SpectralResult eig_dense_symmetric(const DenseMatrix& a, bool with_vectors = true,
                                          std::size_t dense_limit = kDefaultDenseLimit) {
  detail::check_symmetric(a);
  const std::size_t n = a.rows();
  if (n > dense_limit) throw std::invalid_argument("matrix exceeds the dense solver limit");
  SpectralResult r;
  r.solver = SolverKind::Dense;
  r.complete = true;
  if (n == 0) return r;
  std::vector<double> vt = a.data();  // symmetric, so its transpose is itself
  std::vector<double> d, e;
  detail::householder_tridiagonalize(vt, n, d, e, with_vectors);
  std::vector<double> off(e.begin() + 1, e.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (with_vectors) {
    // Rows of vt are the Householder basis vectors; rotate them along.
    detail::tridiagonal_ql(d, off, vt.data(), 30 * n);
  } else {
    detail::tridiagonal_ql(d, off, nullptr, 30 * n);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });
  for (std::size_t k : order) {
    r.eigenvalues.push_back(d[k]);
    if (with_vectors) {
      std::vector<double> v(vt.begin() + static_cast<std::ptrdiff_t>(k * n),
                            vt.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
      fix_sign(v);
      const auto av = a.apply(v);
      double res = 0.0;
      for (std::size_t i = 0; i < n; ++i) res += (av[i] - d[k] * v[i]) * (av[i] - d[k] * v[i]);
      r.residual_norms.push_back(std::sqrt(res));
      r.eigenvectors.push_back(std::move(v));
    }
  }
  return r;
}

/// Eigenvalues only, descending.
inline std::vector<double> eigvals_dense_symmetric(const DenseMatrix& a, std::size_t dense_limit = kDefaultDenseLimit) {
  return eig_dense_symmetric(a, false, dense_limit).eigenvalues;
}

}  // namespace htspec
