#pragma once

// Core data structures for documents and word embeddings, plus ingestion of
// token streams into L1-normalised word histograms.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lcrwmd/error.hpp"
#include "lcrwmd/matrix.hpp"

namespace lcrwmd {

using WordId = std::uint32_t;
using DocId = std::uint32_t;

inline constexpr WordId kNoWord = std::numeric_limits<WordId>::max();

/// Ordered set of unique tokens with dense ids in [0, size()).
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words) {
    for (auto& w : words) insert(std::move(w));
  }

  /// Returns the id of `word`, adding it if unseen.
  WordId insert(std::string word) {
    auto [it, added] = index_.try_emplace(word, static_cast<WordId>(words_.size()));
    if (added) words_.push_back(std::move(word));
    return it->second;
  }

  /// Id of `word` or kNoWord.
  WordId lookup(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? kNoWord : it->second;
  }

  bool contains(std::string_view word) const { return lookup(word) != kNoWord; }
  const std::string& word(WordId id) const { return words_.at(id); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
};

/// Dense v x m matrix of single-precision word vectors; row w embeds word w.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(MatrixF vectors) : vectors_(std::move(vectors)) {
    for (float x : vectors_.data())
      if (!std::isfinite(x)) throw InvalidArgument("embedding contains a non-finite value");
  }
  EmbeddingMatrix(std::size_t words, std::size_t dim, std::vector<float> data)
      : EmbeddingMatrix(MatrixF(words, dim, std::move(data))) {}

  std::size_t size() const noexcept { return vectors_.rows(); }
  std::size_t dim() const noexcept { return vectors_.cols(); }
  std::span<const float> row(WordId w) const noexcept { return vectors_.row(w); }
  const MatrixF& matrix() const noexcept { return vectors_; }

  /// Copies the rows named by `ids`, in order, into a |ids| x m matrix.
  MatrixF gather(std::span<const WordId> ids) const {
    MatrixF out(ids.size(), dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] >= size()) throw DimensionError("word id outside the embedding matrix");
      std::ranges::copy(row(ids[i]), out.row(i).begin());
    }
    return out;
  }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  MatrixF vectors_;
};

/// Non-owning view of one sparse histogram: parallel arrays of strictly
/// increasing word ids and positive weights.
struct HistogramView {
  std::span<const WordId> ids;
  std::span<const float> weights;

  std::size_t size() const noexcept { return ids.size(); }
};

/// Owning sparse histogram.
struct Histogram {
  std::vector<WordId> ids;
  std::vector<float> weights;

  Histogram() = default;
  Histogram(std::vector<WordId> i, std::vector<float> w) : ids(std::move(i)), weights(std::move(w)) {}

  /// Builds a normalised histogram from raw (id, count) pairs.
  static Histogram from_counts(const std::map<WordId, double>& counts) {
    double total = 0.0;
    for (const auto& [id, c] : counts) total += c;
    Histogram h;
    h.ids.reserve(counts.size());
    h.weights.reserve(counts.size());
    for (const auto& [id, c] : counts) {
      if (c <= 0.0) continue;
      h.ids.push_back(id);
      h.weights.push_back(static_cast<float>(c / total));
    }
    return h;
  }

  HistogramView view() const noexcept { return {ids, weights}; }
  operator HistogramView() const noexcept { return view(); }
  std::size_t size() const noexcept { return ids.size(); }
};

inline constexpr double kNormalizationTolerance = 1e-6;

/// Throws InvalidArgument unless `h` satisfies the histogram invariants.
inline void validate(HistogramView h, std::size_t vocab_size) {
  if (h.ids.size() != h.weights.size()) throw InvalidArgument("histogram ids/weights length differ");
  if (h.ids.empty()) throw InvalidArgument("histogram is empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < h.ids.size(); ++i) {
    if (i > 0 && h.ids[i] <= h.ids[i - 1])
      throw InvalidArgument("histogram word ids are not strictly increasing");
    if (h.ids[i] >= vocab_size) throw InvalidArgument("histogram word id outside vocabulary");
    if (!(h.weights[i] > 0.0f) || !std::isfinite(h.weights[i]))
      throw InvalidArgument("histogram weight is not positive");
    sum += h.weights[i];
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance)
    throw InvalidArgument("histogram weights do not sum to 1");
}

/// A set of histograms stored as a compressed-sparse-row matrix with
/// `vocab_size()` logical columns.
class HistogramSet {
 public:
  HistogramSet() : offsets_{0} {}
  explicit HistogramSet(std::size_t vocab_size) : offsets_{0}, vocab_size_(vocab_size) {}
  HistogramSet(std::size_t vocab_size, std::vector<std::uint64_t> offsets,
               std::vector<WordId> ids, std::vector<float> values)
      : offsets_(std::move(offsets)), ids_(std::move(ids)), values_(std::move(values)),
        vocab_size_(vocab_size) {
    check();
  }

  void push_back(HistogramView h) {
    validate(h, vocab_size_);
    ids_.insert(ids_.end(), h.ids.begin(), h.ids.end());
    values_.insert(values_.end(), h.weights.begin(), h.weights.end());
    offsets_.push_back(ids_.size());
  }

  std::size_t size() const noexcept { return offsets_.size() - 1; }
  bool empty() const noexcept { return size() == 0; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t nnz() const noexcept { return ids_.size(); }

  HistogramView row(std::size_t i) const noexcept {
    const auto b = offsets_[i], e = offsets_[i + 1];
    return {std::span(ids_).subspan(b, e - b), std::span(values_).subspan(b, e - b)};
  }
  std::size_t row_size(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }

  /// Rows [first, first + count) as a new set over the same vocabulary.
  HistogramSet slice(std::size_t first, std::size_t count) const {
    if (first + count > size()) throw DimensionError("histogram slice out of range");
    HistogramSet out(vocab_size_);
    const auto b = offsets_[first], e = offsets_[first + count];
    out.ids_.assign(ids_.begin() + b, ids_.begin() + e);
    out.values_.assign(values_.begin() + b, values_.begin() + e);
    out.offsets_.resize(count + 1);
    for (std::size_t r = 0; r <= count; ++r) out.offsets_[r] = offsets_[first + r] - b;
    return out;
  }

  const std::vector<std::uint64_t>& offsets() const noexcept { return offsets_; }
  const std::vector<WordId>& ids() const noexcept { return ids_; }
  const std::vector<float>& values() const noexcept { return values_; }

  double mean_row_size() const noexcept {
    return empty() ? 0.0 : static_cast<double>(nnz()) / static_cast<double>(size());
  }

  friend bool operator==(const HistogramSet&, const HistogramSet&) = default;

 private:
  void check() const {
    if (offsets_.empty() || offsets_.front() != 0 || offsets_.back() != ids_.size() ||
        ids_.size() != values_.size())
      throw InvalidArgument("inconsistent CSR arrays");
    for (std::size_t i = 0; i + 1 < offsets_.size(); ++i) {
      if (offsets_[i + 1] < offsets_[i]) throw InvalidArgument("CSR offsets decrease");
      validate(row(i), vocab_size_);
    }
  }

  std::vector<std::uint64_t> offsets_;
  std::vector<WordId> ids_;
  std::vector<float> values_;
  std::size_t vocab_size_ = 0;
};

// ---------------------------------------------------------------------------
// Tokenisation and ingestion

/// Whitespace split, ASCII lowercase, strip leading/trailing punctuation.
/// Tokens that are pure punctuation are dropped.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

using StopWords = std::unordered_set<std::string>;

/// Histogram of the in-vocabulary, non-stop-word tokens of one document.
/// Returns an empty histogram if nothing survives filtering.
inline Histogram histogram_of(std::span<const std::string> tokens, const Vocabulary& vocab,
                              const StopWords& stopwords) {
  std::map<WordId, double> counts;
  for (const auto& tok : tokens) {
    if (stopwords.contains(tok)) continue;
    const WordId id = vocab.lookup(tok);
    if (id == kNoWord) continue;
    counts[id] += 1.0;
  }
  return Histogram::from_counts(counts);
}

enum class EmptyDocuments { reject, skip };

struct IngestResult {
  HistogramSet histograms;
  std::vector<std::size_t> kept;     // source index of each histogram row
  std::vector<std::size_t> skipped;  // source indices dropped as empty
};

inline IngestResult ingest(std::span<const std::vector<std::string>> docs, const Vocabulary& vocab,
                           const StopWords& stopwords,
                           EmptyDocuments policy = EmptyDocuments::reject) {
  if (vocab.empty()) throw InvalidArgument("vocabulary is empty");
  IngestResult out{HistogramSet(vocab.size()), {}, {}};
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const Histogram h = histogram_of(docs[d], vocab, stopwords);
    if (h.ids.empty()) {
      if (policy == EmptyDocuments::reject)
        throw IngestError(d, "histogram is empty after removing stop-words and unknown words");
      out.skipped.push_back(d);
      continue;
    }
    out.histograms.push_back(h);
    out.kept.push_back(d);
  }
  return out;
}

/// Term-frequency histograms, L1-normalised, one row per document.
inline HistogramSet build_histograms(std::span<const std::vector<std::string>> docs,
                                     const Vocabulary& vocab, const StopWords& stopwords) {
  return ingest(docs, vocab, stopwords, EmptyDocuments::reject).histograms;
}

// ---------------------------------------------------------------------------
// Vocabulary restriction

struct RestrictedIndex {
  HistogramSet histograms;     // same rows, ids in [0, kept.size())
  EmbeddingMatrix embeddings;  // kept.size() x m
  std::vector<WordId> kept;    // new id -> old id, ascending
  std::vector<WordId> remap;   // old id -> new id, kNoWord if eliminated
};

/// Sorted unique word ids used anywhere in `set`.
inline std::vector<WordId> used_words(const HistogramSet& set) {
  std::vector<char> seen(set.vocab_size(), 0);
  for (WordId id : set.ids()) seen[id] = 1;
  std::vector<WordId> out;
  for (std::size_t w = 0; w < seen.size(); ++w)
    if (seen[w]) out.push_back(static_cast<WordId>(w));
  return out;
}

/// Drops every vocabulary word that does not occur in `set`. Ids are
/// compacted monotonically, so per-row word order is unchanged.
inline RestrictedIndex restrict_vocabulary(const HistogramSet& set, const EmbeddingMatrix& emb) {
  if (set.empty()) throw InvalidArgument("cannot restrict vocabulary of an empty set");
  detail::require_dims(set.vocab_size() == emb.size(),
                       "histogram vocabulary size differs from embedding rows");
  RestrictedIndex out;
  out.kept = used_words(set);
  out.remap.assign(set.vocab_size(), kNoWord);
  for (std::size_t n = 0; n < out.kept.size(); ++n) out.remap[out.kept[n]] = static_cast<WordId>(n);
  std::vector<WordId> ids(set.ids().size());
  std::ranges::transform(set.ids(), ids.begin(), [&](WordId w) { return out.remap[w]; });
  out.histograms = HistogramSet(out.kept.size(), set.offsets(), std::move(ids), set.values());
  out.embeddings = EmbeddingMatrix(emb.gather(out.kept));
  return out;
}

inline Vocabulary restrict_vocabulary(const Vocabulary& vocab, std::span<const WordId> kept) {
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (WordId w : kept) words.push_back(vocab.word(w));
  return Vocabulary(std::move(words));
}

}  // namespace lcrwmd
