#pragma once

// Lower-bound relaxations of the word mover's distance:
//
//   wcd_block        distance between embedding centroids
//   rwmd_quadratic   per pair: C = T1 o T2, bounds F1.rowmin(C), F2.colmin(C)
//   lcrwmd_*         per query: Z[w] = min_q |E[w] - T2[q]| over the resident
//                    vocabulary, then a sparse product X1 * Z
//
// The quadratic and linear-complexity routes reduce identical float
// distances in identical order, so their outputs agree bit for bit.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "lcrwmd/corpus.hpp"
#include "lcrwmd/error.hpp"
#include "lcrwmd/kernels.hpp"
#include "lcrwmd/matrix.hpp"
#include "lcrwmd/parallel.hpp"

namespace lcrwmd {

inline constexpr std::size_t kDefaultBatch = 32;

// ---------------------------------------------------------------------------
// Word centroid distance

inline DistanceBlock wcd_block(const HistogramSet& X1, const HistogramSet& X2,
                               const EmbeddingMatrix& E) {
  return pairwise_euclidean(centroids(X1, E), centroids(X2, E));
}

// ---------------------------------------------------------------------------
// Query batches

/// Embedding rows of several histograms stacked into one matrix; segment s
/// covers rows [segments[s], segments[s+1]).
struct StackedRows {
  MatrixF rows;
  std::vector<double> sq_norms;
  std::vector<std::uint64_t> segments{0};
  std::vector<float> weights;

  std::size_t count() const noexcept { return segments.size() - 1; }
  HistogramView weights_of(std::size_t s) const noexcept {
    return {{}, std::span(weights).subspan(segments[s], segments[s + 1] - segments[s])};
  }
};

inline StackedRows stack_rows(const HistogramSet& X, std::size_t first, std::size_t count,
                              const EmbeddingMatrix& E) {
  detail::require_dims(X.vocab_size() == E.size(), "histogram vocabulary differs from embeddings");
  if (first + count > X.size()) throw DimensionError("query range out of bounds");
  StackedRows out;
  const auto b = X.offsets()[first], e = X.offsets()[first + count];
  out.rows = E.gather(std::span(X.ids()).subspan(b, e - b));
  out.sq_norms = row_sq_norms(out.rows);
  out.weights.assign(X.values().begin() + static_cast<std::ptrdiff_t>(b),
                     X.values().begin() + static_cast<std::ptrdiff_t>(e));
  out.segments.resize(count + 1);
  for (std::size_t s = 0; s <= count; ++s) out.segments[s] = X.offsets()[first + s] - b;
  return out;
}

inline StackedRows stack_rows(HistogramView h, const EmbeddingMatrix& E) {
  validate(h, E.size());
  StackedRows out;
  out.rows = E.gather(h.ids);
  out.sq_norms = row_sq_norms(out.rows);
  out.weights.assign(h.weights.begin(), h.weights.end());
  out.segments = {0, h.ids.size()};
  return out;
}

// ---------------------------------------------------------------------------
// Linear-complexity RWMD

/// A resident histogram set with its vocabulary restricted to the words it
/// uses, plus cached squared norms of the surviving embedding rows.
struct ResidentSet {
  RestrictedIndex index;
  std::vector<double> sq_norms;

  static ResidentSet build(const HistogramSet& X, const EmbeddingMatrix& E) {
    ResidentSet r{restrict_vocabulary(X, E), {}};
    r.sq_norms = row_sq_norms(r.index.embeddings.matrix());
    return r;
  }

  const HistogramSet& histograms() const noexcept { return index.histograms; }
  const EmbeddingMatrix& embeddings() const noexcept { return index.embeddings; }
  std::size_t size() const noexcept { return index.histograms.size(); }
  std::size_t vocab_size() const noexcept { return index.kept.size(); }
};

/// Phase 1 for a batch: Z(w, s) = distance from resident word w to the
/// closest word of query s. Query words need not belong to the resident
/// vocabulary; they enter only through their embedding rows.
inline MatrixF nearest_word_distances(const ResidentSet& res, const StackedRows& queries,
                                      std::size_t block = kDefaultBlock, std::size_t workers = 1) {
  const MatrixF& Er = res.embeddings().matrix();
  detail::require_dims(Er.cols() == queries.rows.cols(), "query embedding dimension differs");
  if (block == 0) throw InvalidArgument("block size must be positive");
  const std::size_t v = Er.rows(), width = queries.rows.rows(), b = queries.count();
  MatrixF Z(v, b);
  const std::size_t tiles = (v + block - 1) / block;
  parallel_for(tiles, workers, [&](std::size_t t) {
    const std::size_t r0 = t * block, r1 = std::min(v, r0 + block);
    std::vector<float> tile((r1 - r0) * width);
    detail::euclidean_tile(Er, res.sq_norms, r0, r1, queries.rows, queries.sq_norms, 0, width,
                           tile.data(), width);
    for (std::size_t r = r0; r < r1; ++r) {
      const float* row = tile.data() + (r - r0) * width;
      for (std::size_t s = 0; s < b; ++s)
        Z(r, s) = *std::min_element(row + queries.segments[s], row + queries.segments[s + 1]);
    }
  });
  return Z;
}

/// Many-to-many pass: column s holds, for every resident row i, the cost of
/// moving X1[i] to query s with the second marginal relaxed. (n1 x b)
inline MatrixF lcrwmd_batched(const ResidentSet& res, const StackedRows& queries,
                              std::size_t block = kDefaultBlock, std::size_t workers = 1) {
  if (queries.count() == 0) throw InvalidArgument("query batch is empty");
  const MatrixF Z = nearest_word_distances(res, queries, block, workers);
  const HistogramSet& X = res.histograms();
  if (workers <= 1) return spmm(X, Z);
  MatrixF out(X.size(), Z.cols());
  const std::size_t chunk = 1024, tasks = (X.size() + chunk - 1) / chunk;
  parallel_for(tasks, workers, [&](std::size_t t) {
    const std::size_t r0 = t * chunk, r1 = std::min(X.size(), r0 + chunk);
    const MatrixF part = spmm(X.slice(r0, r1 - r0), Z);
    for (std::size_t r = r0; r < r1; ++r) std::ranges::copy(part.row(r - r0), out.row(r).begin());
  });
  return out;
}

inline MatrixF lcrwmd_batched(const HistogramSet& X1, const HistogramSet& batch,
                              const EmbeddingMatrix& E) {
  return lcrwmd_batched(ResidentSet::build(X1, E), stack_rows(batch, 0, batch.size(), E));
}

/// One query against every resident row: phase 1 then spmv.
inline std::vector<float> lcrwmd_one_sided(const ResidentSet& res, HistogramView query,
                                           const EmbeddingMatrix& E) {
  const MatrixF Z = nearest_word_distances(res, stack_rows(query, E));
  return spmv(res.histograms(), Z.data());
}

inline std::vector<float> lcrwmd_one_sided(const HistogramSet& X1, HistogramView query,
                                           const EmbeddingMatrix& E) {
  return lcrwmd_one_sided(ResidentSet::build(X1, E), query, E);
}

/// Directional bounds for all pairs, n1 x n2: entry (i, j) is the cost of
/// moving X1[i] onto X2[j] when each word travels to its nearest neighbour.
/// X1 is resident; X2 is processed in batches of `batch` rows.
inline MatrixF lcrwmd_directional(const HistogramSet& X1, const HistogramSet& X2,
                                  const EmbeddingMatrix& E, std::size_t batch = kDefaultBatch,
                                  std::size_t workers = 1) {
  if (batch == 0) throw InvalidArgument("batch size must be positive");
  const ResidentSet res = ResidentSet::build(X1, E);
  MatrixF out(X1.size(), X2.size());
  for (std::size_t j0 = 0; j0 < X2.size(); j0 += batch) {
    const std::size_t cnt = std::min(batch, X2.size() - j0);
    const MatrixF part = lcrwmd_batched(res, stack_rows(X2, j0, cnt, E), kDefaultBlock, workers);
    for (std::size_t i = 0; i < X1.size(); ++i)
      for (std::size_t c = 0; c < cnt; ++c) out(i, j0 + c) = part(i, c);
  }
  return out;
}

/// Symmetric linear-complexity RWMD, n1 x n2: max of the bound computed with
/// X1 resident and the bound computed with the roles swapped (vocabulary
/// re-restricted to X2).
inline DistanceBlock lcrwmd_full(const HistogramSet& X1, const HistogramSet& X2,
                                 const EmbeddingMatrix& E, std::size_t batch = kDefaultBatch,
                                 std::size_t workers = 1) {
  MatrixF forward = lcrwmd_directional(X1, X2, E, batch, workers);
  const MatrixF backward = lcrwmd_directional(X2, X1, E, batch, workers);
  for (std::size_t i = 0; i < forward.rows(); ++i)
    for (std::size_t j = 0; j < forward.cols(); ++j)
      forward(i, j) = std::max(forward(i, j), backward(j, i));
  return {std::move(forward), 0, 0};
}

// ---------------------------------------------------------------------------
// Quadratic RWMD

/// Both one-sided bounds for a pair block: forward(i, j) = F1,i . rowmin(C),
/// backward(i, j) = F2,j . colmin(C), with C = T1,i o T2,j.
struct RwmdBounds {
  MatrixF forward;
  MatrixF backward;

  MatrixF symmetric() const {
    MatrixF out = forward;
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = std::max(out(i, j), backward(i, j));
    return out;
  }
};

/// Quadratic RWMD of one query against a stacked resident set, writing the
/// two bounds for each resident row. `scratch` is reused between calls.
inline void rwmd_quadratic_query(const StackedRows& resident, const StackedRows& query,
                                 std::span<float> forward, std::span<float> backward,
                                 std::size_t first_row, std::size_t last_row,
                                 std::vector<float>& scratch) {
  const std::size_t h2 = query.rows.rows();
  std::vector<float> colmin(h2);
  for (std::size_t i = first_row; i < last_row; ++i) {
    const std::size_t r0 = resident.segments[i], r1 = resident.segments[i + 1];
    const std::size_t h1 = r1 - r0;
    scratch.resize(h1 * h2);
    detail::euclidean_tile(resident.rows, resident.sq_norms, r0, r1, query.rows, query.sq_norms, 0,
                           h2, scratch.data(), h2);
    double b1 = 0.0;
    std::ranges::fill(colmin, std::numeric_limits<float>::infinity());
    for (std::size_t p = 0; p < h1; ++p) {
      const float* row = scratch.data() + p * h2;
      float rmin = row[0];
      for (std::size_t q = 0; q < h2; ++q) {
        rmin = std::min(rmin, row[q]);
        colmin[q] = std::min(colmin[q], row[q]);
      }
      b1 += static_cast<double>(resident.weights[r0 + p]) * static_cast<double>(rmin);
    }
    double b2 = 0.0;
    for (std::size_t q = 0; q < h2; ++q)
      b2 += static_cast<double>(query.weights[q]) * static_cast<double>(colmin[q]);
    forward[i] = static_cast<float>(b1);
    backward[i] = static_cast<float>(b2);
  }
}

inline RwmdBounds rwmd_quadratic_bounds(const HistogramSet& X1, const HistogramSet& X2,
                                        const EmbeddingMatrix& E, std::size_t workers = 1) {
  const StackedRows resident = stack_rows(X1, 0, X1.size(), E);
  RwmdBounds out{MatrixF(X1.size(), X2.size()), MatrixF(X1.size(), X2.size())};
  parallel_for(X2.size(), workers, [&](std::size_t j) {
    const StackedRows q = stack_rows(X2, j, 1, E);
    std::vector<float> f(X1.size()), b(X1.size()), scratch;
    rwmd_quadratic_query(resident, q, f, b, 0, X1.size(), scratch);
    for (std::size_t i = 0; i < X1.size(); ++i) {
      out.forward(i, j) = f[i];
      out.backward(i, j) = b[i];
    }
  });
  return out;
}

/// Symmetric quadratic-complexity RWMD, n1 x n2.
inline DistanceBlock rwmd_quadratic(const HistogramSet& X1, const HistogramSet& X2,
                                    const EmbeddingMatrix& E, std::size_t workers = 1) {
  return {rwmd_quadratic_bounds(X1, X2, E, workers).symmetric(), 0, 0};
}

}  // namespace lcrwmd
