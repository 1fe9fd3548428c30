#pragma once

// Resident index: restricted vocabulary, its embeddings, the resident
// histograms and optional per-document metadata, with a little-endian
// binary file format:
//
//   "LCRW" | u32 version | u64 v_e | u64 n | u64 m
//   | u64 offsets[n+1] | u32 word_ids[nnz] | f32 weights[nnz]
//   | f32 embeddings[v_e*m] | v_e x (u32 length, bytes)          vocabulary
//   | u64 count, count x (u32 length, bytes)                   document ids
//   | u64 count, count x (u32 length, bytes)                   labels

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "lcrwmd/corpus.hpp"
#include "lcrwmd/error.hpp"
#include "lcrwmd/io.hpp"

namespace lcrwmd {

inline constexpr std::array<char, 4> kIndexMagic{'L', 'C', 'R', 'W'};
inline constexpr std::uint32_t kIndexVersion = 1;

struct Index {
  Vocabulary vocab;
  EmbeddingMatrix embeddings;
  HistogramSet docs;
  std::vector<std::string> doc_ids;
  std::vector<std::string> labels;  // empty, or one per document

  std::size_t size() const noexcept { return docs.size(); }
  bool has_labels() const noexcept { return !labels.empty(); }

  void check() const {
    detail::require_dims(vocab.size() == embeddings.size(), "index vocabulary/embedding mismatch");
    detail::require_dims(docs.vocab_size() == vocab.size(), "index histogram/vocabulary mismatch");
    detail::require_dims(doc_ids.empty() || doc_ids.size() == docs.size(), "index doc-id count");
    detail::require_dims(labels.empty() || labels.size() == docs.size(), "index label count");
  }

  friend bool operator==(const Index&, const Index&) = default;
};

struct BuildReport {
  std::vector<std::size_t> skipped;  // corpus positions dropped as empty
  std::size_t full_vocab = 0;
};

/// Ingests `corpus` against `embeddings`, then restricts the vocabulary to
/// the words that occur in the resident documents. `labels`, if non-empty,
/// is aligned with `corpus` and overrides labels carried by the records.
inline Index build_index(const std::vector<RawDocument>& corpus, const LoadedEmbeddings& embeddings,
                         const StopWords& stopwords, const std::vector<std::string>& labels = {},
                         EmptyDocuments policy = EmptyDocuments::reject,
                         BuildReport* report = nullptr) {
  if (!labels.empty() && labels.size() < corpus.size())
    throw InvalidArgument("label file has fewer entries than the corpus");
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(corpus.size());
  for (const auto& d : corpus) tokens.push_back(tokenize(d.text));
  IngestResult ingested = ingest(tokens, embeddings.vocab, stopwords, policy);
  if (ingested.histograms.empty()) throw InvalidArgument("corpus has no usable documents");
  RestrictedIndex r = restrict_vocabulary(ingested.histograms, embeddings.embeddings);

  Index idx;
  idx.vocab = restrict_vocabulary(embeddings.vocab, r.kept);
  idx.embeddings = std::move(r.embeddings);
  idx.docs = std::move(r.histograms);
  bool any_label = !labels.empty();
  for (std::size_t src : ingested.kept) any_label = any_label || corpus[src].label.has_value();
  for (std::size_t src : ingested.kept) {
    idx.doc_ids.push_back(corpus[src].id);
    if (!any_label) continue;
    if (!labels.empty()) idx.labels.push_back(labels[src]);
    else if (corpus[src].label) idx.labels.push_back(*corpus[src].label);
    else throw InvalidArgument("document " + corpus[src].id + " has no label");
  }
  if (report) {
    report->skipped = std::move(ingested.skipped);
    report->full_vocab = embeddings.vocab.size();
  }
  return idx;
}

/// Maps documents onto the index vocabulary (words outside it are dropped).
inline IngestResult ingest_queries(const Index& idx, const std::vector<RawDocument>& docs,
                                   const StopWords& stopwords,
                                   EmptyDocuments policy = EmptyDocuments::reject) {
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(docs.size());
  for (const auto& d : docs) tokens.push_back(tokenize(d.text));
  return ingest(tokens, idx.vocab, stopwords, policy);
}

namespace detail {

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_arithmetic_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  char bytes[sizeof(T)];
  if (!in.read(bytes, sizeof(T))) throw LoadError(std::string("index truncated while reading ") + what);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
  const auto len = get<std::uint32_t>(in, "string length");
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw LoadError("index truncated while reading a string");
  return s;
}

inline void put_strings(std::ostream& out, const std::vector<std::string>& v) {
  put<std::uint64_t>(out, v.size());
  for (const auto& s : v) put_string(out, s);
}

inline std::vector<std::string> get_strings(std::istream& in, std::uint64_t limit) {
  const auto count = get<std::uint64_t>(in, "string count");
  if (count != 0 && count != limit) throw LoadError("index metadata count does not match documents");
  std::vector<std::string> v;
  v.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) v.push_back(get_string(in));
  return v;
}

}  // namespace detail

inline void write_index(std::ostream& out, const Index& idx) {
  idx.check();
  out.write(kIndexMagic.data(), kIndexMagic.size());
  detail::put<std::uint32_t>(out, kIndexVersion);
  detail::put<std::uint64_t>(out, idx.vocab.size());
  detail::put<std::uint64_t>(out, idx.docs.size());
  detail::put<std::uint64_t>(out, idx.embeddings.dim());
  for (auto o : idx.docs.offsets()) detail::put<std::uint64_t>(out, o);
  for (auto w : idx.docs.ids()) detail::put<std::uint32_t>(out, w);
  for (auto x : idx.docs.values()) detail::put<float>(out, x);
  for (auto x : idx.embeddings.matrix().data()) detail::put<float>(out, x);
  for (const auto& w : idx.vocab.words()) detail::put_string(out, w);
  detail::put_strings(out, idx.doc_ids);
  detail::put_strings(out, idx.labels);
  if (!out) throw Error("failed writing index");
}

inline Index read_index(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kIndexMagic)
    throw LoadError("not an index file (bad magic)");
  const auto version = detail::get<std::uint32_t>(in, "version");
  if (version != kIndexVersion)
    throw LoadError("unsupported index format version " + std::to_string(version));
  const auto v = detail::get<std::uint64_t>(in, "vocabulary size");
  const auto n = detail::get<std::uint64_t>(in, "document count");
  const auto m = detail::get<std::uint64_t>(in, "dimension");
  std::vector<std::uint64_t> offsets(n + 1);
  for (auto& o : offsets) o = detail::get<std::uint64_t>(in, "row offsets");
  const std::uint64_t nnz = offsets.back();
  std::vector<WordId> ids(nnz);
  for (auto& w : ids) w = detail::get<std::uint32_t>(in, "word ids");
  std::vector<float> values(nnz);
  for (auto& x : values) x = detail::get<float>(in, "weights");
  std::vector<float> emb(v * m);
  for (auto& x : emb) x = detail::get<float>(in, "embeddings");
  std::vector<std::string> words;
  words.reserve(v);
  for (std::uint64_t i = 0; i < v; ++i) words.push_back(detail::get_string(in));

  Index idx;
  try {
    idx.docs = HistogramSet(v, std::move(offsets), std::move(ids), std::move(values));
    idx.embeddings = EmbeddingMatrix(v, m, std::move(emb));
  } catch (const InvalidArgument& e) {
    throw LoadError(std::string("corrupt index: ") + e.what());
  }
  idx.vocab = Vocabulary(std::move(words));
  if (idx.vocab.size() != v) throw LoadError("corrupt index: duplicate vocabulary entries");
  idx.doc_ids = detail::get_strings(in, n);
  idx.labels = detail::get_strings(in, n);
  return idx;
}

inline void save_index(const std::string& path, const Index& idx) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  write_index(out, idx);
}

inline Index load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path + ": cannot open");
  return read_index(in);
}

}  // namespace lcrwmd
