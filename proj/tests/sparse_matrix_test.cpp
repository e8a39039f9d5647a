#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "htspec/sparse_matrix.hpp"
#include "oracles.hpp"

using namespace htspec;

namespace {

SparseMatrix from_oracle(const oracle::Mat& a) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j)
      if (a[i][j] != 0.0) t.push_back({i, j, a[i][j]});
  return SparseMatrix::from_triplets(a.size(), a[0].size(), t);
}

std::vector<double> random_vector(std::mt19937_64& g, std::size_t n) {
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (double& x : v) x = z(g);
  return v;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / std::max(den, 1e-300);
}

}  // namespace

TEST(Matvec, DiagonalExample) {
  const auto m = SparseMatrix::from_triplets(2, 2, {{0, 0, 3.0}, {1, 1, 5.0}});
  EXPECT_EQ(matvec(m, std::vector<double>{1.0, 1.0}), (std::vector<double>{3.0, 5.0}));
}

TEST(Matvec, ZeroMatrix) {
  const auto m = SparseMatrix::from_triplets(3, 4, {});
  EXPECT_EQ(matvec(m, std::vector<double>{1, 2, 3, 4}), std::vector<double>(3, 0.0));
}

TEST(Matvec, MatchesDenseOracle) {
  std::mt19937_64 g(1);
  const auto a = oracle::random_matrix(g, 20, 30);
  const auto v = random_vector(g, 30);
  EXPECT_LE(rel_err(matvec(from_oracle(a), v), oracle::apply(a, v)), 1e-12);
}

TEST(Matvec, DimensionMismatchThrows) {
  const auto m = SparseMatrix::from_triplets(2, 3, {});
  EXPECT_THROW(matvec(m, std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(gram_matvec(m, std::vector<double>{1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST(GramMatvec, ScalarCase) {
  const auto m = SparseMatrix::from_triplets(1, 1, {{0, 0, 2.0}});
  EXPECT_EQ(gram_matvec(m, std::vector<double>{1.0}), std::vector<double>{4.0});
}

TEST(GramMatvec, DisjointRowsGiveDiagonalGram) {
  const auto m = SparseMatrix::from_triplets(2, 4, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 2, 3.0}, {1, 3, -1.0}});
  EXPECT_EQ(gram_matvec(m, std::vector<double>{1.0, 0.0}), (std::vector<double>{5.0, 0.0}));
}

TEST(GramMatvec, MatchesFormedGram) {
  std::mt19937_64 g(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = oracle::random_matrix(g, 15, 25, 0.3);
    const auto v = random_vector(g, 15);
    const auto sigma = oracle::multiply(a, oracle::transpose(a));
    EXPECT_LE(rel_err(gram_matvec(from_oracle(a), v), oracle::apply(sigma, v)), 1e-12);
    const auto gd = gram_dense(from_oracle(a));
    for (std::size_t i = 0; i < 15; ++i)
      for (std::size_t j = 0; j < 15; ++j) EXPECT_NEAR(gd(i, j), sigma[i][j], 1e-10 * std::abs(sigma[i][i]) + 1e-12);
  }
}

TEST(Norms, HandExample) {
  const auto m = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, -2.0}, {1, 1, 3.0}});
  const auto n = norms(m);
  EXPECT_EQ(n.inf_norm, 3.0);
  EXPECT_EQ(n.one_norm, 5.0);
}

TEST(Norms, ZeroMatrix) {
  const auto n = norms(SparseMatrix::from_triplets(3, 3, {}));
  EXPECT_EQ(n.inf_norm, 0.0);
  EXPECT_EQ(n.one_norm, 0.0);
}

TEST(Norms, TransposeSwaps) {
  std::mt19937_64 g(3);
  const auto m = from_oracle(oracle::random_matrix(g, 17, 23));
  const auto a = norms(m);
  const auto b = norms(m.transpose());
  EXPECT_DOUBLE_EQ(a.inf_norm, b.one_norm);
  EXPECT_DOUBLE_EQ(a.one_norm, b.inf_norm);
}

TEST(TopEntries, NegativeEntryHasThetaPi) {
  const auto m = SparseMatrix::from_triplets(3, 4, {{0, 1, -5.0}, {2, 3, 4.0}});
  const auto top = top_entries(m, 1);
  ASSERT_EQ(top.entries.size(), 1u);
  const auto& e = top.entries[0];
  EXPECT_EQ(e.rank, 1u);
  EXPECT_EQ(e.i, 0u);
  EXPECT_EQ(e.j, 1u);
  EXPECT_EQ(e.magnitude, 5.0);
  EXPECT_DOUBLE_EQ(e.theta, std::numbers::pi);
  EXPECT_FALSE(top.truncated);
}

TEST(TopEntries, TiesAreLexicographic) {
  const auto m = SparseMatrix::from_triplets(3, 3, {{2, 0, 1.0}, {0, 2, -1.0}, {1, 1, 1.0}, {0, 1, 1.0}});
  const auto top = top_entries(m, 4);
  std::vector<std::pair<std::size_t, std::size_t>> got;
  for (const auto& e : top.entries) got.emplace_back(e.i, e.j);
  EXPECT_EQ(got, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {0, 2}, {1, 1}, {2, 0}}));
}

TEST(TopEntries, MatchesFullSort) {
  std::mt19937_64 g(4);
  const auto a = oracle::random_matrix(g, 30, 40);
  std::vector<std::tuple<double, std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 40; ++j)
      if (a[i][j] != 0.0) all.emplace_back(-std::abs(a[i][j]), i, j);
  std::sort(all.begin(), all.end());
  const auto top = top_entries(from_oracle(a), 10);
  for (std::size_t l = 0; l < 10; ++l) {
    EXPECT_EQ(top.entries[l].magnitude, -std::get<0>(all[l]));
    EXPECT_EQ(top.entries[l].i, std::get<1>(all[l]));
    EXPECT_EQ(top.entries[l].j, std::get<2>(all[l]));
  }
}

TEST(TopEntries, TooManyRequestedIsFlagged) {
  const auto m = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}});
  const auto top = top_entries(m, 3);
  EXPECT_TRUE(top.truncated);
  EXPECT_EQ(top.entries.size(), 1u);
}

TEST(TopEntries, SymmetricRanksUpperTriangleOnly) {
  const auto m = SparseMatrix::from_triplets(3, 3, {{0, 2, 7.0}, {1, 1, 2.0}}, true);
  const auto top = top_entries(m, 5);
  ASSERT_EQ(top.entries.size(), 2u);
  EXPECT_EQ(top.entries[0].i, 0u);
  EXPECT_EQ(top.entries[0].j, 2u);
}

TEST(TruncateSplit, SmallExample) {
  const auto m = SparseMatrix::from_triplets(1, 2, {{0, 0, 1.0}, {0, 1, 10.0}});
  const auto s = truncate_split(m, 5.0);
  EXPECT_EQ(s.kept.nnz(), 1u);
  EXPECT_EQ(s.kept.at(0, 0), 1.0);
  EXPECT_EQ(s.remainder.nnz(), 1u);
  EXPECT_EQ(s.remainder.at(0, 1), 10.0);
}

TEST(TruncateSplit, LevelAboveMaxLeavesRemainderEmpty) {
  std::mt19937_64 g(5);
  const auto m = from_oracle(oracle::random_matrix(g, 10, 12));
  EXPECT_EQ(truncate_split(m, max_abs_entry(m)).remainder.nnz(), 0u);
}

TEST(TruncateSplit, PartitionIsExact) {
  std::mt19937_64 g(6);
  const auto a = oracle::random_matrix(g, 25, 30);
  const auto m = from_oracle(a);
  const auto s = truncate_split(m, 1.7);
  EXPECT_EQ(s.kept.nnz() + s.remainder.nnz(), m.nnz());
  for (std::size_t i = 0; i < 25; ++i)
    for (std::size_t j = 0; j < 30; ++j) {
      const double x = s.kept.at(i, j), y = s.remainder.at(i, j);
      EXPECT_TRUE(x == 0.0 || y == 0.0);
      EXPECT_EQ(x + y, a[i][j]);
    }
}

TEST(TruncateSplit, RecenteringFillsMaskSupport) {
  const auto m = SparseMatrix::from_triplets(1, 3, {{0, 0, 1.0}, {0, 2, 10.0}});
  const auto s = truncate_split(m, 5.0, 0.25);
  EXPECT_EQ(s.kept.at(0, 0), 0.75);
  EXPECT_EQ(s.kept.at(0, 1), 0.0);
  EXPECT_EQ(s.kept.at(0, 2), -0.25);
}

TEST(FilteredSums, SingleRow) {
  const auto m = SparseMatrix::from_triplets(1, 3, {{0, 0, 1.0}, {0, 1, 2.0}, {0, 2, -3.0}});
  EXPECT_EQ(filtered_row_sums(m, 1.5, 3.0)[0], 5.0);
}

TEST(FilteredSums, WideWindowGivesAbsoluteRowSums) {
  std::mt19937_64 g(7);
  const auto a = oracle::random_matrix(g, 12, 9);
  const auto m = from_oracle(a);
  const auto s = filtered_row_sums(m, 0.0, max_abs_entry(m) + 1.0);
  for (std::size_t i = 0; i < 12; ++i) {
    double r = 0.0;
    for (double x : a[i]) r += std::abs(x);
    EXPECT_NEAR(s[i], r, 1e-12 * r);
  }
}

TEST(FilteredSums, MatchDenseFilter) {
  std::mt19937_64 g(8);
  const auto a = oracle::random_matrix(g, 14, 19);
  const auto m = from_oracle(a);
  const auto rs = filtered_row_sums(m, 1.2, 3.0);
  const auto cs = filtered_col_sums(m, 1.2, 3.0);
  std::vector<double> r(14, 0.0), c(19, 0.0);
  for (std::size_t i = 0; i < 14; ++i)
    for (std::size_t j = 0; j < 19; ++j)
      if (std::abs(a[i][j]) > 1.2 && std::abs(a[i][j]) <= 3.0) {
        r[i] += std::abs(a[i][j]);
        c[j] += std::abs(a[i][j]);
      }
  for (std::size_t i = 0; i < 14; ++i) EXPECT_NEAR(rs[i], r[i], 1e-12);
  for (std::size_t j = 0; j < 19; ++j) EXPECT_NEAR(cs[j], c[j], 1e-12);
  EXPECT_THROW(filtered_row_sums(m, 2.0, 1.0), std::invalid_argument);
}

TEST(NonzeroCounts, DenseMatrix) {
  oracle::Mat a(6, std::vector<double>(9, 1.0));
  const auto c = row_nonzero_counts(from_oracle(a));
  EXPECT_EQ(c.max_row, 9u);
  EXPECT_EQ(c.max_col, 6u);
}

TEST(Construction, RejectsBadTriplets) {
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), std::invalid_argument);
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{0, 0, NAN}}), std::invalid_argument);
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), std::out_of_range);
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{1, 0, 1.0}}, true), std::invalid_argument);
}

TEST(Construction, SymmetricMirrors) {
  const auto m = SparseMatrix::from_triplets(3, 3, {{0, 1, 2.0}, {2, 2, 1.0}}, true);
  EXPECT_EQ(m.at(1, 0), 2.0);
  EXPECT_EQ(m.nnz(), 3u);
  EXPECT_EQ(m.logical_entry_count(), 2u);
}

TEST(Csv, RoundTripsExactly) {
  std::mt19937_64 g(9);
  const auto m = from_oracle(oracle::random_matrix(g, 7, 11));
  std::stringstream ss;
  write_csv(ss, m);
  EXPECT_EQ(read_csv(ss), m);
}

TEST(Csv, SymmetricStoresUpperTriangle) {
  const auto m = SparseMatrix::from_triplets(3, 3, {{0, 1, 2.5}, {1, 2, -1.0}}, true);
  std::stringstream ss;
  write_csv(ss, m);
  const std::string text = ss.str();
  EXPECT_NE(text.find("i,j,value\n0,1,2.5\n1,2,-1\n"), std::string::npos);
  EXPECT_EQ(read_csv(ss), m);
}

TEST(Csv, HeaderOnlyFormatInfersShape) {
  std::stringstream ss("i,j,value\n0,0,1\n2,4,-3\n");
  const auto m = read_csv(ss);
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 5u);
  EXPECT_EQ(m.at(2, 4), -3.0);
}

TEST(Csv, MissingHeaderIsAnError) {
  std::stringstream ss("0,0,1\n");
  EXPECT_THROW(read_csv(ss), std::runtime_error);
}

TEST(Minors, DeleteRowAndColumn) {
  const auto m = SparseMatrix::from_triplets(3, 3, {{0, 0, 1.0}, {1, 1, 2.0}, {2, 2, 3.0}, {2, 0, 4.0}});
  const auto r = delete_row(m, 1);
  EXPECT_EQ(r.rows(), 2u);
  EXPECT_EQ(r.at(1, 0), 4.0);
  const auto c = delete_col(m, 0);
  EXPECT_EQ(c.cols(), 2u);
  EXPECT_EQ(c.at(2, 1), 3.0);
}
