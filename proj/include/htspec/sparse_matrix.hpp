#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace htspec {

struct Triplet {
  std::size_t i;
  std::size_t j;
  double value;
};

/// Row-major dense matrix; used for oracle paths and small spectra.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }
  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  std::vector<double> apply(std::span<const double> v) const {
    if (v.size() != cols_) throw std::invalid_argument("dense apply: dimension mismatch");
    std::vector<double> out(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      const double* r = data_.data() + i * cols_;
      for (std::size_t j = 0; j < cols_; ++j) s += r[j] * v[j];
      out[i] = s;
    }
    return out;
  }

  DenseMatrix principal_submatrix(std::span<const std::size_t> idx) const {
    DenseMatrix s(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b) s(a, b) = (*this)(idx[a], idx[b]);
    return s;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Compressed sparse-row matrix. Column indices are strictly increasing
/// within a row and every stored value is finite and nonzero. Symmetric
/// matrices store both triangles.
class SparseMatrix {
 public:
  SparseMatrix() : offsets_(1, 0) {}

  /// Builds from triplets. With `symmetric`, triplets must satisfy i <= j and
  /// are mirrored below the diagonal. Zero values are dropped; duplicates and
  /// non-finite values are rejected.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets,
                                    bool symmetric = false) {
    if (symmetric && rows != cols) throw std::invalid_argument("symmetric matrix must be square");
    std::vector<Triplet> all;
    all.reserve(symmetric ? 2 * triplets.size() : triplets.size());
    for (const auto& t : triplets) {
      if (t.i >= rows || t.j >= cols) throw std::out_of_range("triplet index out of range");
      if (!std::isfinite(t.value)) throw std::invalid_argument("non-finite matrix entry");
      if (t.value == 0.0) continue;
      if (symmetric) {
        if (t.i > t.j) throw std::invalid_argument("symmetric triplets must satisfy i <= j");
        if (t.i != t.j) all.push_back({t.j, t.i, t.value});
      }
      all.push_back(t);
    }
    std::sort(all.begin(), all.end(), [](const Triplet& a, const Triplet& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.symmetric_ = symmetric;
    m.offsets_.assign(rows + 1, 0);
    m.indices_.reserve(all.size());
    m.values_.reserve(all.size());
    for (std::size_t k = 0; k < all.size(); ++k) {
      if (k > 0 && all[k].i == all[k - 1].i && all[k].j == all[k - 1].j)
        throw std::invalid_argument("duplicate matrix entry");
      ++m.offsets_[all[k].i + 1];
      m.indices_.push_back(all[k].j);
      m.values_.push_back(all[k].value);
    }
    for (std::size_t i = 0; i < rows; ++i) m.offsets_[i + 1] += m.offsets_[i];
    return m;
  }

  /// Takes already-validated CSR arrays (sorted, unique, finite, nonzero).
  static SparseMatrix from_csr(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
                               std::vector<std::size_t> indices, std::vector<double> values,
                               bool symmetric = false) {
    if (offsets.size() != rows + 1 || indices.size() != values.size() || offsets.back() != values.size())
      throw std::invalid_argument("inconsistent CSR arrays");
    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.symmetric_ = symmetric;
    m.offsets_ = std::move(offsets);
    m.indices_ = std::move(indices);
    m.values_ = std::move(values);
    return m;
  }

  static SparseMatrix from_dense(const DenseMatrix& d, bool symmetric = false) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = symmetric ? i : 0; j < d.cols(); ++j)
        if (d(i, j) != 0.0) t.push_back({i, j, d(i, j)});
    return from_triplets(d.rows(), d.cols(), std::move(t), symmetric);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  bool symmetric() const noexcept { return symmetric_; }
  const std::vector<std::size_t>& row_offsets() const noexcept { return offsets_; }
  const std::vector<std::size_t>& col_indices() const noexcept { return indices_; }
  const std::vector<double>& values() const noexcept { return values_; }

  std::span<const std::size_t> row_indices(std::size_t i) const noexcept {
    return {indices_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::span<const double> row_values(std::size_t i) const noexcept {
    return {values_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  double at(std::size_t i, std::size_t j) const {
    if (i >= rows_ || j >= cols_) throw std::out_of_range("matrix index out of range");
    const auto idx = row_indices(i);
    const auto it = std::lower_bound(idx.begin(), idx.end(), j);
    if (it == idx.end() || *it != j) return 0.0;
    return values_[offsets_[i] + static_cast<std::size_t>(it - idx.begin())];
  }

  /// Stored entries counted once per unordered pair for symmetric matrices.
  std::size_t logical_entry_count() const noexcept {
    if (!symmetric_) return nnz();
    std::size_t diag = 0;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j : row_indices(i))
        if (j == i) ++diag;
    return (nnz() - diag) / 2 + diag;
  }

  /// Calls f(i, j, value) for every logical entry (i <= j when symmetric).
  template <class F>
  void for_each_entry(F&& f) const {
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
        if (symmetric_ && indices_[k] < i) continue;
        f(i, indices_[k], values_[k]);
      }
    }
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> t;
    t.reserve(nnz());
    for_each_entry([&](std::size_t i, std::size_t j, double v) { t.push_back({i, j, v}); });
    return t;
  }

  SparseMatrix transpose() const {
    if (symmetric_) return *this;
    std::vector<std::size_t> off(cols_ + 1, 0);
    for (std::size_t j : indices_) ++off[j + 1];
    for (std::size_t j = 0; j < cols_; ++j) off[j + 1] += off[j];
    std::vector<std::size_t> idx(nnz());
    std::vector<double> val(nnz());
    std::vector<std::size_t> cursor(off.begin(), off.end() - 1);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
        const std::size_t dst = cursor[indices_[k]]++;
        idx[dst] = i;
        val[dst] = values_[k];
      }
    }
    return from_csr(cols_, rows_, std::move(off), std::move(idx), std::move(val));
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) d(i, indices_[k]) = values_[k];
    return d;
  }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  bool symmetric_ = false;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> indices_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Products

inline std::vector<double> matvec(const SparseMatrix& m, std::span<const double> v) {
  if (v.size() != m.cols()) throw std::invalid_argument("matvec: dimension mismatch");
  std::vector<double> out(m.rows(), 0.0);
  const auto& off = m.row_offsets();
  const auto& idx = m.col_indices();
  const auto& val = m.values();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = off[i]; k < off[i + 1]; ++k) s += val[k] * v[idx[k]];
    out[i] = s;
  }
  return out;
}

/// M^T v.
inline std::vector<double> matvec_transpose(const SparseMatrix& m, std::span<const double> v) {
  if (v.size() != m.rows()) throw std::invalid_argument("matvec_transpose: dimension mismatch");
  std::vector<double> out(m.cols(), 0.0);
  const auto& off = m.row_offsets();
  const auto& idx = m.col_indices();
  const auto& val = m.values();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    for (std::size_t k = off[i]; k < off[i + 1]; ++k) out[idx[k]] += val[k] * vi;
  }
  return out;
}

/// M (M^T v) without forming the (generally dense) Gram matrix.
inline std::vector<double> gram_matvec(const SparseMatrix& m, std::span<const double> v) {
  if (v.size() != m.rows()) throw std::invalid_argument("gram_matvec: dimension mismatch");
  const auto w = matvec_transpose(m, v);
  return matvec(m, w);
}

/// Explicit M M^T, accumulated column by column over the sparsity pattern.
inline DenseMatrix gram_dense(const SparseMatrix& m) {
  const SparseMatrix t = m.transpose();
  const std::size_t p = m.rows();
  DenseMatrix g(p, p);
  for (std::size_t c = 0; c < t.rows(); ++c) {
    const auto idx = t.row_indices(c);
    const auto val = t.row_values(c);
    for (std::size_t a = 0; a < idx.size(); ++a) {
      const double va = val[a];
      double* grow = g.row(idx[a]).data();
      for (std::size_t b = a; b < idx.size(); ++b) grow[idx[b]] += va * val[b];
    }
  }
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = a + 1; b < p; ++b) g(b, a) = g(a, b);
  return g;
}

// ---------------------------------------------------------------------------
// Norms, counts and row statistics

struct MatrixNorms {
  double inf_norm = 0.0;  ///< max absolute row sum
  double one_norm = 0.0;  ///< max absolute column sum
};

inline MatrixNorms norms(const SparseMatrix& m) {
  MatrixNorms n;
  std::vector<double> col(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    const auto idx = m.row_indices(i);
    const auto val = m.row_values(i);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      s += std::abs(val[k]);
      col[idx[k]] += std::abs(val[k]);
    }
    n.inf_norm = std::max(n.inf_norm, s);
  }
  for (double c : col) n.one_norm = std::max(n.one_norm, c);
  return n;
}

/// Per-row sum of squared entries; row i of the result equals (M M^T)_{ii}.
inline std::vector<double> row_square_sums(const SparseMatrix& m) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double v : m.row_values(i)) out[i] += v * v;
  return out;
}

/// S_i = sum_j |m_ij| 1{lo < |m_ij| <= hi}.
inline std::vector<double> filtered_row_sums(const SparseMatrix& m, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("filtered sums need lo < hi");
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double v : m.row_values(i)) {
      const double a = std::abs(v);
      if (a > lo && a <= hi) out[i] += a;
    }
  return out;
}

/// Column analogue of filtered_row_sums.
inline std::vector<double> filtered_col_sums(const SparseMatrix& m, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("filtered sums need lo < hi");
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto idx = m.row_indices(i);
    const auto val = m.row_values(i);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double a = std::abs(val[k]);
      if (a > lo && a <= hi) out[idx[k]] += a;
    }
  }
  return out;
}

inline std::vector<std::size_t> row_counts(const SparseMatrix& m) {
  std::vector<std::size_t> c(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) c[i] = m.row_offsets()[i + 1] - m.row_offsets()[i];
  return c;
}

inline std::vector<std::size_t> col_counts(const SparseMatrix& m) {
  std::vector<std::size_t> c(m.cols(), 0);
  for (std::size_t j : m.col_indices()) ++c[j];
  return c;
}

/// Per-row number of entries with |m_ij| > threshold.
inline std::vector<std::size_t> filtered_row_counts(const SparseMatrix& m, double threshold) {
  std::vector<std::size_t> c(m.rows(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double v : m.row_values(i)) c[i] += std::abs(v) > threshold;
  return c;
}

inline std::vector<std::size_t> filtered_col_counts(const SparseMatrix& m, double threshold) {
  std::vector<std::size_t> c(m.cols(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto idx = m.row_indices(i);
    const auto val = m.row_values(i);
    for (std::size_t k = 0; k < idx.size(); ++k) c[idx[k]] += std::abs(val[k]) > threshold;
  }
  return c;
}

struct NonzeroCounts {
  std::size_t max_row = 0;  ///< L
  std::size_t max_col = 0;  ///< L-tilde
};

inline NonzeroCounts row_nonzero_counts(const SparseMatrix& m) {
  NonzeroCounts n;
  for (std::size_t c : row_counts(m)) n.max_row = std::max(n.max_row, c);
  for (std::size_t c : col_counts(m)) n.max_col = std::max(n.max_col, c);
  return n;
}

// ---------------------------------------------------------------------------
// Entry ranking

struct RankedEntry {
  std::size_t rank = 0;  ///< 1-based
  std::size_t i = 0;
  std::size_t j = 0;
  double magnitude = 0.0;
  double theta = 0.0;  ///< argument of the entry: 0 or pi
};

struct TopEntries {
  std::vector<RankedEntry> entries;
  bool truncated = false;  ///< fewer than k entries were available
};

/// The k largest entries in absolute value (upper triangle only when
/// symmetric), ties broken by (i, j) ascending.
inline TopEntries top_entries(const SparseMatrix& m, std::size_t k) {
  std::vector<RankedEntry> all;
  all.reserve(m.nnz());
  m.for_each_entry([&](std::size_t i, std::size_t j, double v) {
    all.push_back({0, i, j, std::abs(v), v < 0.0 ? std::numbers::pi : 0.0});
  });
  auto before = [](const RankedEntry& a, const RankedEntry& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  };
  TopEntries out;
  out.truncated = k > all.size();
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), before);
  all.resize(take);
  for (std::size_t l = 0; l < take; ++l) all[l].rank = l + 1;
  out.entries = std::move(all);
  return out;
}

inline double max_abs_entry(const SparseMatrix& m) {
  double mx = 0.0;
  for (double v : m.values()) mx = std::max(mx, std::abs(v));
  return mx;
}

// ---------------------------------------------------------------------------
// Truncation split and minors

struct TruncationSplit {
  SparseMatrix kept;       ///< entries with |m| <= level (M-hat)
  SparseMatrix remainder;  ///< entries with |m| > level (M-prime)
};

/// Splits M = M_hat + M_prime at `level`. A nonzero `truncated_mean` recenters
/// M_hat over the whole mask support by subtracting it; the symmetric laws in
/// this library have truncated mean zero, so the default leaves values intact.
inline TruncationSplit truncate_split(const SparseMatrix& m, double level, double truncated_mean = 0.0) {
  if (!(level > 0.0)) throw std::invalid_argument("truncation level must be positive");
  std::vector<Triplet> lo, hi;
  m.for_each_entry([&](std::size_t i, std::size_t j, double v) {
    if (std::abs(v) <= level) {
      lo.push_back({i, j, v - truncated_mean});
    } else {
      hi.push_back({i, j, v});
      if (truncated_mean != 0.0) lo.push_back({i, j, -truncated_mean});
    }
  });
  return {SparseMatrix::from_triplets(m.rows(), m.cols(), std::move(lo), m.symmetric()),
          SparseMatrix::from_triplets(m.rows(), m.cols(), std::move(hi), m.symmetric())};
}

/// Rectangular minor with row `r` removed.
inline SparseMatrix delete_row(const SparseMatrix& m, std::size_t r) {
  if (r >= m.rows()) throw std::out_of_range("delete_row: index out of range");
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (i == r) continue;
    const auto idx = m.row_indices(i);
    const auto val = m.row_values(i);
    for (std::size_t k = 0; k < idx.size(); ++k) t.push_back({i < r ? i : i - 1, idx[k], val[k]});
  }
  return SparseMatrix::from_triplets(m.rows() - 1, m.cols(), std::move(t));
}

/// Rectangular minor with column `c` removed.
inline SparseMatrix delete_col(const SparseMatrix& m, std::size_t c) {
  if (c >= m.cols()) throw std::out_of_range("delete_col: index out of range");
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto idx = m.row_indices(i);
    const auto val = m.row_values(i);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] == c) continue;
      t.push_back({i, idx[k] < c ? idx[k] : idx[k] - 1, val[k]});
    }
  }
  return SparseMatrix::from_triplets(m.rows(), m.cols() - 1, std::move(t));
}

// ---------------------------------------------------------------------------
// CSV exchange: optional "# rows=R cols=C symmetric=S" line, header
// "i,j,value", then one nonzero per line in row-major order, 0-based.
// Symmetric matrices list only i <= j.

inline void write_csv(std::ostream& os, const SparseMatrix& m) {
  os << "# rows=" << m.rows() << " cols=" << m.cols() << " symmetric=" << (m.symmetric() ? 1 : 0) << '\n';
  os << "i,j,value\n";
  char buf[64];
  m.for_each_entry([&](std::size_t i, std::size_t j, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << i << ',' << j << ',' << buf << '\n';
  });
}

inline void write_csv(const std::string& path, const SparseMatrix& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(f, m);
}

/// Reads the CSV format above. Without a shape comment, dimensions are the
/// smallest that hold every listed index and `symmetric_hint` decides symmetry.
inline SparseMatrix read_csv(std::istream& is, bool symmetric_hint = false) {
  std::string line;
  std::size_t rows = 0, cols = 0;
  bool have_shape = false;
  bool symmetric = symmetric_hint;
  bool have_header = false;
  std::vector<Triplet> t;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      int sym = 0;
      if (std::sscanf(line.c_str(), "# rows=%zu cols=%zu symmetric=%d", &rows, &cols, &sym) == 3) {
        have_shape = true;
        symmetric = sym != 0;
      }
      continue;
    }
    if (!have_header) {
      if (line != "i,j,value") throw std::runtime_error("csv: expected header 'i,j,value'");
      have_header = true;
      continue;
    }
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw std::runtime_error("csv: malformed line " + std::to_string(line_no));
    try {
      t.push_back({std::stoull(a), std::stoull(b), std::stod(c)});
    } catch (const std::exception&) {
      throw std::runtime_error("csv: malformed line " + std::to_string(line_no));
    }
  }
  if (!have_header) throw std::runtime_error("csv: missing header 'i,j,value'");
  if (!have_shape) {
    for (const auto& x : t) {
      rows = std::max(rows, x.i + 1);
      cols = std::max(cols, x.j + 1);
    }
    if (symmetric) rows = cols = std::max(rows, cols);
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(t), symmetric);
}

inline SparseMatrix read_csv(const std::string& path, bool symmetric_hint = false) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return read_csv(f, symmetric_hint);
}

}  // namespace htspec
