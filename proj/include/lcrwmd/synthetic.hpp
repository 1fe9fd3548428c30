#pragma once

// Seeded random instances for tests, benchmarks and the evaluation harness.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "lcrwmd/corpus.hpp"
#include "lcrwmd/index.hpp"

namespace lcrwmd::synthetic {

using Rng = std::mt19937_64;

inline EmbeddingMatrix random_embeddings(std::size_t words, std::size_t dim, Rng& rng,
                                         double scale = 1.0) {
  std::normal_distribution<float> normal(0.0f, static_cast<float>(scale));
  std::vector<float> data(words * dim);
  for (float& x : data) x = normal(rng);
  return EmbeddingMatrix(words, dim, std::move(data));
}

/// `count` distinct ids from [0, universe), ascending (Floyd's algorithm).
inline std::vector<WordId> distinct_ids(std::size_t universe, std::size_t count, Rng& rng) {
  count = std::min(count, universe);
  std::unordered_set<WordId> chosen;
  for (std::size_t j = universe - count; j < universe; ++j) {
    const auto t = static_cast<WordId>(std::uniform_int_distribution<std::size_t>(0, j)(rng));
    if (!chosen.insert(t).second) chosen.insert(static_cast<WordId>(j));
  }
  std::vector<WordId> out(chosen.begin(), chosen.end());
  std::ranges::sort(out);
  return out;
}

/// Histogram over the given ascending ids with random integer counts 1..4.
inline Histogram weighted(std::vector<WordId> ids, Rng& rng) {
  std::uniform_int_distribution<int> count(1, 4);
  std::map<WordId, double> counts;
  for (WordId id : ids) counts[id] = count(rng);
  return Histogram::from_counts(counts);
}

inline Histogram random_histogram(std::size_t vocab, std::size_t h, Rng& rng) {
  return weighted(distinct_ids(vocab, h, rng), rng);
}

/// n histograms with sizes drawn uniformly from [h_min, h_max].
inline HistogramSet random_set(std::size_t n, std::size_t vocab, std::size_t h_min,
                               std::size_t h_max, Rng& rng) {
  HistogramSet out(vocab);
  std::uniform_int_distribution<std::size_t> size(h_min, h_max);
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_histogram(vocab, size(rng), rng));
  return out;
}

struct Instance {
  EmbeddingMatrix embeddings;
  HistogramSet resident;
  HistogramSet transient;
};

inline Instance random_instance(std::size_t n1, std::size_t n2, std::size_t vocab, std::size_t h_min,
                                std::size_t h_max, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Instance inst;
  inst.embeddings = random_embeddings(vocab, dim, rng);
  inst.resident = random_set(n1, vocab, h_min, h_max, rng);
  inst.transient = random_set(n2, vocab, h_min, h_max, rng);
  return inst;
}

struct ClusteredCorpus {
  LoadedEmbeddings embeddings;
  std::vector<RawDocument> docs;  // text is space-separated word tokens
};

struct ClusterConfig {
  std::size_t docs = 500;
  std::size_t clusters = 5;
  std::size_t vocab = 400;
  std::size_t dim = 16;
  std::size_t h_min = 3;
  std::size_t h_max = 8;
  double topical = 0.8;        // chance a token comes from the document's cluster
  double center_scale = 3.0;   // spread of cluster centres
  double word_scale = 1.0;     // spread of words around their centre
};

/// Corpus whose words and documents are grouped into clusters: word w
/// belongs to cluster w % clusters and is embedded near that cluster's
/// centre; document d (label d % clusters) draws most words from its own
/// cluster.
inline ClusteredCorpus clustered_corpus(const ClusterConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t K = cfg.clusters, m = cfg.dim;
  const EmbeddingMatrix centres = random_embeddings(K, m, rng, cfg.center_scale);
  std::normal_distribution<float> noise(0.0f, static_cast<float>(cfg.word_scale));
  std::vector<float> data(cfg.vocab * m);
  ClusteredCorpus out;
  for (std::size_t w = 0; w < cfg.vocab; ++w) {
    out.embeddings.vocab.insert("w" + std::to_string(w));
    auto c = centres.row(static_cast<WordId>(w % K));
    for (std::size_t k = 0; k < m; ++k) data[w * m + k] = c[k] + noise(rng);
  }
  out.embeddings.embeddings = EmbeddingMatrix(cfg.vocab, m, std::move(data));

  const std::size_t per_cluster = cfg.vocab / K;
  std::uniform_int_distribution<std::size_t> size(cfg.h_min, cfg.h_max);
  std::uniform_int_distribution<std::size_t> any(0, cfg.vocab - 1), local(0, per_cluster - 1);
  std::uniform_int_distribution<int> repeat(1, 3);
  std::bernoulli_distribution on_topic(cfg.topical);
  for (std::size_t d = 0; d < cfg.docs; ++d) {
    const std::size_t label = d % K;
    const std::size_t h = size(rng);
    std::string text;
    for (std::size_t t = 0; t < h; ++t) {
      const std::size_t w = on_topic(rng) ? local(rng) * K + label : any(rng);
      for (int r = repeat(rng); r > 0; --r) {
        if (!text.empty()) text.push_back(' ');
        text += "w" + std::to_string(w);
      }
    }
    out.docs.push_back({std::to_string(d), std::move(text), "c" + std::to_string(label)});
  }
  return out;
}

inline Index clustered_index(const ClusterConfig& cfg, std::uint64_t seed) {
  const ClusteredCorpus c = clustered_corpus(cfg, seed);
  return build_index(c.docs, c.embeddings, {});
}

/// Index over a random corpus: `docs` histograms of exactly h distinct
/// words drawn from a `vocab`-word vocabulary with random embeddings.
inline Index random_index(std::size_t docs, std::size_t vocab, std::size_t h, std::size_t dim,
                          std::uint64_t seed) {
  Rng rng(seed);
  LoadedEmbeddings le;
  for (std::size_t w = 0; w < vocab; ++w) le.vocab.insert("w" + std::to_string(w));
  le.embeddings = random_embeddings(vocab, dim, rng);
  HistogramSet X = random_set(docs, vocab, h, h, rng);
  RestrictedIndex r = restrict_vocabulary(X, le.embeddings);
  Index idx;
  idx.vocab = restrict_vocabulary(le.vocab, r.kept);
  idx.embeddings = std::move(r.embeddings);
  idx.docs = std::move(r.histograms);
  for (std::size_t d = 0; d < docs; ++d) idx.doc_ids.push_back(std::to_string(d));
  return idx;
}

/// `count` distinct row ids from [0, n), ascending.
inline std::vector<DocId> sample_rows(std::size_t n, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  return distinct_ids(n, count, rng);
}

}  // namespace lcrwmd::synthetic
