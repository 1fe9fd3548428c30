#pragma once

// Dense and sparse compute primitives shared by every distance method.
//
// Numerical contract: every dot product, norm and sparse row reduction is
// accumulated in double precision in a fixed order (ascending coordinate or
// ascending word id) and rounded to float once at the end. Two code paths
// that reduce the same operands therefore produce bitwise identical floats,
// regardless of tiling or threading.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "lcrwmd/corpus.hpp"
#include "lcrwmd/error.hpp"
#include "lcrwmd/matrix.hpp"

namespace lcrwmd {

inline constexpr std::size_t kDefaultBlock = 256;

/// Dense block of pairwise distances together with the global index of its
/// first row and column.
struct DistanceBlock {
  MatrixF values;
  std::size_t row_begin = 0;
  std::size_t col_begin = 0;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }
  float operator()(std::size_t r, std::size_t c) const noexcept { return values(r, c); }
};

namespace detail {

inline double sq_norm(std::span<const float> a) noexcept {
  double s = 0.0;
  for (float x : a) s += static_cast<double>(x) * static_cast<double>(x);
  return s;
}

inline float gram_distance(double sq_a, double sq_b, double dot) noexcept {
  const double d2 = (sq_a + sq_b) - 2.0 * dot;
  return static_cast<float>(std::sqrt(d2 > 0.0 ? d2 : 0.0));
}

// out[i * ld + j] = |A[i] - B[j]| for i in [a0, a1), j in [b0, b1), stored
// relative to (a0, b0). Four columns are reduced at a time to shorten the
// dependency chain; each individual dot product still sums in k order.
inline void euclidean_tile(const MatrixF& A, std::span<const double> sqA, std::size_t a0,
                           std::size_t a1, const MatrixF& B, std::span<const double> sqB,
                           std::size_t b0, std::size_t b1, float* out, std::size_t ld) noexcept {
  const std::size_t m = A.cols();
  for (std::size_t i = a0; i < a1; ++i) {
    const float* a = A.row(i).data();
    float* o = out + (i - a0) * ld;
    std::size_t j = b0;
    for (; j + 4 <= b1; j += 4) {
      const float* b_0 = B.row(j).data();
      const float* b_1 = B.row(j + 1).data();
      const float* b_2 = B.row(j + 2).data();
      const float* b_3 = B.row(j + 3).data();
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double ak = a[k];
        s0 += ak * static_cast<double>(b_0[k]);
        s1 += ak * static_cast<double>(b_1[k]);
        s2 += ak * static_cast<double>(b_2[k]);
        s3 += ak * static_cast<double>(b_3[k]);
      }
      o[j - b0] = gram_distance(sqA[i], sqB[j], s0);
      o[j - b0 + 1] = gram_distance(sqA[i], sqB[j + 1], s1);
      o[j - b0 + 2] = gram_distance(sqA[i], sqB[j + 2], s2);
      o[j - b0 + 3] = gram_distance(sqA[i], sqB[j + 3], s3);
    }
    for (; j < b1; ++j) {
      const float* b = B.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += static_cast<double>(a[k]) * static_cast<double>(b[k]);
      o[j - b0] = gram_distance(sqA[i], sqB[j], s);
    }
  }
}

inline void check_segments(std::span<const std::uint64_t> seg, std::size_t extent) {
  if (seg.empty() || seg.front() != 0 || seg.back() != extent)
    throw DimensionError("segment boundaries do not cover the block");
  for (std::size_t s = 0; s + 1 < seg.size(); ++s)
    if (seg[s + 1] <= seg[s]) throw InvalidArgument("empty segment");
}

}  // namespace detail

/// Squared L2 norm of every row, in double.
inline std::vector<double> row_sq_norms(const MatrixF& A) {
  std::vector<double> out(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) out[i] = detail::sq_norm(A.row(i));
  return out;
}

/// All pairwise Euclidean distances between rows of A (r x m) and rows of B
/// (c x m), via |a|^2 + |b|^2 - 2 a.b clamped at zero, evaluated in
/// block x block tiles.
inline DistanceBlock pairwise_euclidean(const MatrixF& A, const MatrixF& B,
                                        std::size_t block = kDefaultBlock) {
  detail::require_dims(A.cols() == B.cols(), "pairwise_euclidean: column counts differ");
  if (block == 0) throw InvalidArgument("block size must be positive");
  const auto sqA = row_sq_norms(A);
  const auto sqB = row_sq_norms(B);
  DistanceBlock out{MatrixF(A.rows(), B.rows()), 0, 0};
  float* base = out.values.data().data();
  for (std::size_t i0 = 0; i0 < A.rows(); i0 += block)
    for (std::size_t j0 = 0; j0 < B.rows(); j0 += block)
      detail::euclidean_tile(A, sqA, i0, std::min(i0 + block, A.rows()), B, sqB, j0,
                             std::min(j0 + block, B.rows()), base + i0 * B.rows() + j0, B.rows());
  return out;
}

inline std::vector<float> row_min(const MatrixF& block) {
  if (block.empty()) throw InvalidArgument("row_min of an empty block");
  std::vector<float> out(block.rows());
  for (std::size_t r = 0; r < block.rows(); ++r) out[r] = std::ranges::min(block.row(r));
  return out;
}

inline std::vector<float> col_min(const MatrixF& block) {
  if (block.empty()) throw InvalidArgument("col_min of an empty block");
  std::vector<float> out(block.row(0).begin(), block.row(0).end());
  for (std::size_t r = 1; r < block.rows(); ++r) {
    auto row = block.row(r);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = std::min(out[c], row[c]);
  }
  return out;
}

inline std::vector<float> row_min(const DistanceBlock& b) { return row_min(b.values); }
inline std::vector<float> col_min(const DistanceBlock& b) { return col_min(b.values); }

/// Column minima within each row segment [seg[s], seg[s+1]); result is
/// (segments x cols).
inline MatrixF segmented_col_min(const MatrixF& block, std::span<const std::uint64_t> seg) {
  detail::check_segments(seg, block.rows());
  MatrixF out(seg.size() - 1, block.cols(), std::numeric_limits<float>::infinity());
  for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
    auto o = out.row(s);
    for (std::size_t r = seg[s]; r < seg[s + 1]; ++r) {
      auto row = block.row(r);
      for (std::size_t c = 0; c < o.size(); ++c) o[c] = std::min(o[c], row[c]);
    }
  }
  return out;
}

/// Row minima within each column segment [seg[s], seg[s+1]); result is
/// (rows x segments).
inline MatrixF segmented_row_min(const MatrixF& block, std::span<const std::uint64_t> seg) {
  detail::check_segments(seg, block.cols());
  MatrixF out(block.rows(), seg.size() - 1);
  for (std::size_t r = 0; r < block.rows(); ++r) {
    auto row = block.row(r);
    for (std::size_t s = 0; s + 1 < seg.size(); ++s)
      out(r, s) = *std::min_element(row.begin() + static_cast<std::ptrdiff_t>(seg[s]),
                                    row.begin() + static_cast<std::ptrdiff_t>(seg[s + 1]));
  }
  return out;
}

/// Dot product of one sparse row with a dense vector, double accumulation in
/// ascending word-id order.
inline float sparse_dot(HistogramView h, std::span<const float> z) noexcept {
  double s = 0.0;
  for (std::size_t p = 0; p < h.ids.size(); ++p)
    s += static_cast<double>(h.weights[p]) * static_cast<double>(z[h.ids[p]]);
  return static_cast<float>(s);
}

inline std::vector<float> spmv(const HistogramSet& X, std::span<const float> z) {
  detail::require_dims(z.size() == X.vocab_size(), "spmv: vector length differs from vocabulary");
  std::vector<float> out(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = sparse_dot(X.row(i), z);
  return out;
}

/// X (n x v, sparse) times Z (v x b, dense). Each output entry is reduced
/// exactly like spmv on the corresponding column of Z.
inline MatrixF spmm(const HistogramSet& X, const MatrixF& Z) {
  detail::require_dims(Z.rows() == X.vocab_size(), "spmm: row count differs from vocabulary");
  const std::size_t b = Z.cols();
  MatrixF out(X.size(), b);
  std::vector<double> acc(b);
  for (std::size_t i = 0; i < X.size(); ++i) {
    std::ranges::fill(acc, 0.0);
    const HistogramView h = X.row(i);
    for (std::size_t p = 0; p < h.ids.size(); ++p) {
      const double w = h.weights[p];
      auto zr = Z.row(h.ids[p]);
      for (std::size_t c = 0; c < b; ++c) acc[c] += w * static_cast<double>(zr[c]);
    }
    for (std::size_t c = 0; c < b; ++c) out(i, c) = static_cast<float>(acc[c]);
  }
  return out;
}

/// Weighted average of the embedding rows of each histogram (X times E).
inline MatrixF centroids(const HistogramSet& X, const EmbeddingMatrix& E) {
  detail::require_dims(X.vocab_size() == E.size(), "centroids: vocabulary differs from embeddings");
  const std::size_t m = E.dim();
  MatrixF out(X.size(), m);
  std::vector<double> acc(m);
  for (std::size_t i = 0; i < X.size(); ++i) {
    std::ranges::fill(acc, 0.0);
    const HistogramView h = X.row(i);
    for (std::size_t p = 0; p < h.ids.size(); ++p) {
      const double w = h.weights[p];
      auto e = E.row(h.ids[p]);
      for (std::size_t k = 0; k < m; ++k) acc[k] += w * static_cast<double>(e[k]);
    }
    for (std::size_t k = 0; k < m; ++k) out(i, k) = static_cast<float>(acc[k]);
  }
  return out;
}

}  // namespace lcrwmd
