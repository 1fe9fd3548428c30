#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "lcrwmd/kernels.hpp"
#include "lcrwmd/synthetic.hpp"
#include "lcrwmd/topk.hpp"
#include "oracles.hpp"

using namespace lcrwmd;

namespace {

MatrixF random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  synthetic::Rng rng(seed);
  return synthetic::random_embeddings(r, c, rng).matrix();
}

}  // namespace

TEST(PairwiseEuclidean, ThreeFourFive) {
  const MatrixF A(1, 2, std::vector<float>{0, 0});
  const MatrixF B(1, 2, std::vector<float>{3, 4});
  EXPECT_FLOAT_EQ(pairwise_euclidean(A, B)(0, 0), 5.0f);
}

TEST(PairwiseEuclidean, SelfHasExactlyZeroDiagonal) {
  const MatrixF A = random_matrix(40, 7, 3);
  const DistanceBlock d = pairwise_euclidean(A, A);
  for (std::size_t i = 0; i < A.rows(); ++i) EXPECT_EQ(d(i, i), 0.0f);
}

TEST(PairwiseEuclidean, MatchesNaiveOracle) {
  const MatrixF A = random_matrix(8, 4, 11), B = random_matrix(6, 4, 12);
  const DistanceBlock d = pairwise_euclidean(A, B);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(d(i, j), oracle::euclid(A.row(i), B.row(j)), 1e-4);
}

TEST(PairwiseEuclidean, TransposeSymmetryIsBitwise) {
  const MatrixF A = random_matrix(33, 9, 5), B = random_matrix(21, 9, 6);
  EXPECT_EQ(pairwise_euclidean(A, B).values, pairwise_euclidean(B, A).values.transposed());
}

TEST(PairwiseEuclidean, IndependentOfBlockSize) {
  const MatrixF A = random_matrix(70, 13, 7), B = random_matrix(45, 13, 8);
  const MatrixF ref = pairwise_euclidean(A, B).values;
  for (std::size_t block : {1u, 3u, 16u, 64u, 1000u}) EXPECT_EQ(pairwise_euclidean(A, B, block).values, ref);
}

TEST(PairwiseEuclidean, DimensionMismatchThrows) {
  EXPECT_THROW(pairwise_euclidean(MatrixF(2, 3), MatrixF(2, 4)), DimensionError);
}

TEST(Minima, Inspection) {
  const MatrixF b(2, 2, std::vector<float>{1, 2, 0, 5});
  EXPECT_EQ(row_min(b), (std::vector<float>{1, 0}));
  EXPECT_EQ(col_min(b), (std::vector<float>{0, 2}));
  const MatrixF one(1, 3, std::vector<float>{4, -1, 2});
  EXPECT_EQ(row_min(one), (std::vector<float>{-1}));
}

TEST(Minima, MatchScalarScan) {
  const MatrixF b = random_matrix(100, 37, 21);
  const auto rm = row_min(b);
  const auto cm = col_min(b);
  for (std::size_t r = 0; r < 100; ++r) {
    float m = b(r, 0);
    for (std::size_t c = 1; c < 37; ++c) m = b(r, c) < m ? b(r, c) : m;
    EXPECT_EQ(rm[r], m);
  }
  for (std::size_t c = 0; c < 37; ++c) {
    float m = b(0, c);
    for (std::size_t r = 1; r < 100; ++r) m = b(r, c) < m ? b(r, c) : m;
    EXPECT_EQ(cm[c], m);
  }
}

TEST(Minima, SegmentedAgreesWithPerSegmentMinima) {
  const MatrixF b = random_matrix(10, 6, 4);
  const std::vector<std::uint64_t> rows{0, 3, 4, 10}, cols{0, 2, 6};
  const MatrixF sc = segmented_col_min(b, rows);
  const MatrixF sr = segmented_row_min(b, cols);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t c = 0; c < 6; ++c) {
      float m = std::numeric_limits<float>::infinity();
      for (auto r = rows[s]; r < rows[s + 1]; ++r) m = std::min(m, b(r, c));
      EXPECT_EQ(sc(s, c), m);
    }
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t s = 0; s < 2; ++s) {
      float m = std::numeric_limits<float>::infinity();
      for (auto c = cols[s]; c < cols[s + 1]; ++c) m = std::min(m, b(r, c));
      EXPECT_EQ(sr(r, s), m);
    }
}

TEST(Minima, EmptySegmentThrows) {
  const MatrixF b(4, 2);
  const std::vector<std::uint64_t> seg{0, 2, 2, 4};
  EXPECT_THROW(segmented_col_min(b, seg), InvalidArgument);
  EXPECT_THROW(row_min(MatrixF{}), InvalidArgument);
}

TEST(Spmv, SelectorRow) {
  HistogramSet X(5);
  X.push_back(Histogram({2}, {1.0f}));
  const std::vector<float> z{5, 6, 7, 8, 9};
  EXPECT_EQ(spmv(X, z), (std::vector<float>{7.0f}));
}

TEST(Spmv, OnesVectorGivesOnes) {
  synthetic::Rng rng(9);
  const HistogramSet X = synthetic::random_set(50, 20, 1, 10, rng);
  const std::vector<float> ones(20, 1.0f);
  for (float x : spmv(X, ones)) EXPECT_NEAR(x, 1.0f, 1e-6);
}

TEST(Spmv, MatchesDenseOracle) {
  synthetic::Rng rng(10);
  const HistogramSet X = synthetic::random_set(50, 20, 1, 12, rng);
  std::normal_distribution<float> nd;
  std::vector<float> z(20);
  for (float& x : z) x = nd(rng);
  const auto got = spmv(X, z);
  const auto D = oracle::dense(X);
  for (std::size_t i = 0; i < 50; ++i) {
    double s = 0.0;
    for (std::size_t p = 0; p < 20; ++p) s += D[i][p] * z[p];
    EXPECT_NEAR(got[i], s, 1e-6);
  }
}

TEST(Spmv, Linearity) {
  synthetic::Rng rng(14);
  const HistogramSet X = synthetic::random_set(40, 30, 2, 15, rng);
  std::uniform_real_distribution<float> u(0.5f, 2.0f);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> z1(30), z2(30), mix(30);
    const float alpha = u(rng);
    for (std::size_t p = 0; p < 30; ++p) {
      z1[p] = u(rng);
      z2[p] = u(rng);
      mix[p] = alpha * z1[p] + z2[p];
    }
    const auto a = spmv(X, z1), b = spmv(X, z2), c = spmv(X, mix);
    for (std::size_t i = 0; i < 40; ++i) {
      const double expect = alpha * a[i] + b[i];
      EXPECT_LE(std::abs(c[i] - expect), 1e-5 * std::abs(expect));
    }
  }
}

TEST(Spmm, ColumnsMatchSpmvBitwise) {
  synthetic::Rng rng(15);
  const HistogramSet X = synthetic::random_set(30, 25, 1, 9, rng);
  const MatrixF Z = random_matrix(25, 5, 16);
  const MatrixF out = spmm(X, Z);
  for (std::size_t c = 0; c < 5; ++c) {
    std::vector<float> col(25);
    for (std::size_t p = 0; p < 25; ++p) col[p] = Z(p, c);
    const auto v = spmv(X, col);
    for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(out(i, c), v[i]);
  }
  EXPECT_THROW(spmm(X, MatrixF(24, 2)), DimensionError);
  EXPECT_THROW(spmv(X, std::vector<float>(3)), DimensionError);
}

TEST(Centroids, OneWordAndMidpoint) {
  const EmbeddingMatrix E(3, 2, {0, 0, 1, 0, 0, 2});
  HistogramSet X(3);
  X.push_back(Histogram({2}, {1.0f}));
  X.push_back(Histogram({0, 1}, {0.5f, 0.5f}));
  const MatrixF c = centroids(X, E);
  EXPECT_EQ(c(0, 0), 0.0f);
  EXPECT_EQ(c(0, 1), 2.0f);
  EXPECT_EQ(c(1, 0), 0.5f);
  EXPECT_EQ(c(1, 1), 0.0f);
}

TEST(Centroids, MatchesDenseProduct) {
  synthetic::Rng rng(17);
  const EmbeddingMatrix E = synthetic::random_embeddings(40, 6, rng);
  const HistogramSet X = synthetic::random_set(25, 40, 1, 10, rng);
  const MatrixF c = centroids(X, E);
  const auto D = oracle::dense(X);
  for (std::size_t i = 0; i < 25; ++i)
    for (std::size_t k = 0; k < 6; ++k) {
      double s = 0.0;
      for (std::size_t p = 0; p < 40; ++p) s += D[i][p] * E.row(static_cast<WordId>(p))[k];
      EXPECT_NEAR(c(i, k), s, 1e-6);
    }
}

TEST(TopK, SelectSmallest) {
  const std::vector<float> d{3, 1, 2};
  const TopKResult r = topk_select(d, 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0], (Neighbor{1.0f, 1}));
  EXPECT_EQ(r[1], (Neighbor{2.0f, 2}));
}

TEST(TopK, TieBreaksOnSmallerId) {
  const TopKResult r = topk_select({{1.0f, 7}, {1.0f, 3}}, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].id, 3u);
}

TEST(TopK, FewerCandidatesThanK) {
  EXPECT_EQ(topk_select(std::vector<float>{2, 1}, 5).size(), 2u);
  EXPECT_THROW(topk_select(std::vector<float>{1}, 0), InvalidArgument);
}

TEST(TopK, MatchesFullSortAndIgnoresPermutation) {
  synthetic::Rng rng(23);
  std::uniform_int_distribution<int> coarse(0, 500);  // plenty of ties
  std::vector<Neighbor> c(10000);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = {static_cast<float>(coarse(rng)) / 10.0f, static_cast<DocId>(i)};
  std::vector<Neighbor> sorted = c;
  std::ranges::sort(sorted, closer);
  sorted.resize(128);
  EXPECT_EQ(topk_select(c, 128), sorted);
  std::shuffle(c.begin(), c.end(), rng);
  EXPECT_EQ(topk_select(c, 128), sorted);
}

TEST(TopK, MergeEqualsSelectOnConcatenation) {
  synthetic::Rng rng(29);
  std::uniform_real_distribution<float> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Neighbor> all;
    std::vector<TopKResult> shards;
    DocId id = 0;
    for (int s = 0; s < 4; ++s) {
      std::vector<Neighbor> part;
      const int sz = trial % 7 + s * 3;
      for (int i = 0; i < sz; ++i) part.push_back({std::round(u(rng) * 20) / 20, id++});
      all.insert(all.end(), part.begin(), part.end());
      shards.push_back(part.empty() ? TopKResult{} : topk_select(part, 6));
    }
    const auto expect = all.empty() ? TopKResult{} : topk_select(all, 6);
    EXPECT_EQ(topk_merge(shards, 6), expect);
    // Associativity and commutativity.
    const auto left = topk_merge(topk_merge(shards[0], shards[1], 6), shards[2], 6);
    const auto right = topk_merge(shards[0], topk_merge(shards[1], shards[2], 6), 6);
    EXPECT_EQ(left, right);
    EXPECT_EQ(topk_merge(shards[2], shards[0], 6), topk_merge(shards[0], shards[2], 6));
  }
}

TEST(TopK, MergeWithEmptyTruncates) {
  const TopKResult a = topk_select(std::vector<float>{5, 1, 3, 2}, 4);
  const TopKResult merged = topk_merge(a, TopKResult{}, 2);
  EXPECT_EQ(merged, TopKResult(a.begin(), a.begin() + 2));
}
