#pragma once

// File formats: word2vec text/binary embeddings, plain-text and JSON-lines
// corpora, stop-word lists and label files.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lcrwmd/corpus.hpp"
#include "lcrwmd/error.hpp"

namespace lcrwmd {

enum class EmbeddingFormat { text, binary };

struct LoadedEmbeddings {
  Vocabulary vocab;
  EmbeddingMatrix embeddings;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::pair<std::size_t, std::size_t> parse_header(std::string_view line,
                                                        const std::string& where) {
  const auto parts = split_ws(line);
  std::size_t v = 0, m = 0;
  if (parts.size() != 2 || !parse_number(parts[0], v) || !parse_number(parts[1], m) || m == 0)
    throw LoadError(where + ": malformed header, expected \"<words> <dimension>\"");
  return {v, m};
}

inline float from_le_bytes(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big)
    bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
  return std::bit_cast<float>(bits);
}

inline void to_le_bytes(float x, char* p) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
  if constexpr (std::endian::native == std::endian::big)
    bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
  std::memcpy(p, &bits, 4);
}

}  // namespace detail

/// Parses word2vec text embeddings. The first occurrence of a duplicated
/// word wins.
inline LoadedEmbeddings parse_embeddings_text(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw LoadError(name + ": missing header");
  const auto [declared, m] = detail::parse_header(line, name + ":1");
  LoadedEmbeddings out;
  std::vector<float> data;
  data.reserve(declared * m);
  std::size_t rows = 0, lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto parts = detail::split_ws(line);
    if (parts.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    if (rows == declared) throw LoadError(where + ": more rows than the header declares");
    if (parts.size() != m + 1)
      throw LoadError(where + ": expected " + std::to_string(m) + " values, found " +
                      std::to_string(parts.size() - 1));
    std::vector<float> vec(m);
    for (std::size_t k = 0; k < m; ++k) {
      if (!detail::parse_number(parts[k + 1], vec[k]))
        throw LoadError(where + ": cannot parse value " + std::string(parts[k + 1]));
      if (!std::isfinite(vec[k])) throw LoadError(where + ": non-finite value");
    }
    ++rows;
    const std::size_t before = out.vocab.size();
    out.vocab.insert(std::string(parts[0]));
    if (out.vocab.size() > before) data.insert(data.end(), vec.begin(), vec.end());
  }
  if (rows != declared)
    throw LoadError(name + ": header declares " + std::to_string(declared) + " rows, found " +
                    std::to_string(rows));
  out.embeddings = EmbeddingMatrix(out.vocab.size(), m, std::move(data));
  return out;
}

/// Parses word2vec binary embeddings: ASCII header line, then per word the
/// token, one space, and `m` little-endian float32 values, optionally
/// followed by a newline.
inline LoadedEmbeddings parse_embeddings_binary(std::istream& in,
                                                const std::string& name = "<stream>") {
  std::string header;
  if (!std::getline(in, header)) throw LoadError(name + ": missing header");
  const auto [declared, m] = detail::parse_header(header, name + ": offset 0");
  std::size_t offset = header.size() + 1;
  LoadedEmbeddings out;
  std::vector<float> data;
  data.reserve(declared * m);
  std::vector<char> buf(m * 4);
  std::vector<float> vec(m);
  for (std::size_t r = 0; r < declared; ++r) {
    std::string token;
    int c;
    while ((c = in.get()) == '\n' || c == '\r' || c == ' ') ++offset;
    const std::size_t token_at = offset;
    while (c != EOF && c != ' ') {
      token.push_back(static_cast<char>(c));
      ++offset;
      c = in.get();
    }
    if (c == EOF)
      throw LoadError(name + ": offset " + std::to_string(token_at) + ": unexpected end of file in row " +
                      std::to_string(r));
    ++offset;
    if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size())))
      throw LoadError(name + ": offset " + std::to_string(offset) + ": truncated vector for \"" +
                      token + "\"");
    for (std::size_t k = 0; k < m; ++k) {
      vec[k] = detail::from_le_bytes(buf.data() + 4 * k);
      if (!std::isfinite(vec[k]))
        throw LoadError(name + ": offset " + std::to_string(offset + 4 * k) + ": non-finite value");
    }
    offset += buf.size();
    const std::size_t before = out.vocab.size();
    out.vocab.insert(std::move(token));
    if (out.vocab.size() > before) data.insert(data.end(), vec.begin(), vec.end());
  }
  out.embeddings = EmbeddingMatrix(out.vocab.size(), m, std::move(data));
  return out;
}

inline LoadedEmbeddings load_embeddings(const std::string& path, EmbeddingFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path + ": cannot open");
  return format == EmbeddingFormat::text ? parse_embeddings_text(in, path)
                                         : parse_embeddings_binary(in, path);
}

inline void write_embeddings(std::ostream& out, const Vocabulary& vocab, const EmbeddingMatrix& emb,
                             EmbeddingFormat format) {
  detail::require_dims(vocab.size() == emb.size(), "vocabulary and embedding sizes differ");
  out << emb.size() << ' ' << emb.dim() << '\n';
  char bytes[4];
  for (std::size_t w = 0; w < emb.size(); ++w) {
    out << vocab.word(static_cast<WordId>(w));
    if (format == EmbeddingFormat::text) {
      char num[32];
      for (float x : emb.row(static_cast<WordId>(w))) {
        auto [p, ec] = std::to_chars(num, num + sizeof num, x);
        out << ' ' << std::string_view(num, static_cast<std::size_t>(p - num));
      }
    } else {
      out << ' ';
      for (float x : emb.row(static_cast<WordId>(w))) {
        detail::to_le_bytes(x, bytes);
        out.write(bytes, 4);
      }
    }
    out << '\n';
  }
}

inline void save_embeddings(const std::string& path, const Vocabulary& vocab,
                            const EmbeddingMatrix& emb, EmbeddingFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(path + ": cannot open for writing");
  write_embeddings(out, vocab, emb, format);
}

// ---------------------------------------------------------------------------
// Corpora

struct RawDocument {
  std::string id;
  std::string text;
  std::optional<std::string> label;
};

/// Reads one document per line. If the first non-blank line starts with '{'
/// the whole file is treated as JSON-lines records {"id", "text"[, "label"]};
/// otherwise each line is a document whose id is its 0-based line number.
inline std::vector<RawDocument> parse_corpus(std::istream& in, const std::string& name = "<stream>") {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  bool jsonl = false;
  for (const auto& l : lines) {
    const auto p = l.find_first_not_of(" \t");
    if (p == std::string::npos) continue;
    jsonl = l[p] == '{';
    break;
  }
  std::vector<RawDocument> docs;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!jsonl) {
      docs.push_back({std::to_string(i), lines[i], std::nullopt});
      continue;
    }
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(name + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string())
      throw LoadError(name + ":" + std::to_string(i + 1) + ": record lacks a string \"text\" field");
    RawDocument d;
    d.text = rec["text"].get<std::string>();
    if (rec.contains("id"))
      d.id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    else
      d.id = std::to_string(docs.size());
    if (rec.contains("label") && !rec["label"].is_null())
      d.label = rec["label"].is_string() ? rec["label"].get<std::string>() : rec["label"].dump();
    docs.push_back(std::move(d));
  }
  return docs;
}

inline std::vector<RawDocument> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open");
  return parse_corpus(in, path);
}

/// One entry per non-blank line, trimmed.
inline std::vector<std::string> load_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
      out.emplace_back();
      continue;
    }
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

/// Stop words, one per line, lowercased like tokens.
inline StopWords load_stopwords(const std::string& path) {
  StopWords out;
  for (auto& w : load_lines(path)) {
    if (w.empty()) continue;
    for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.insert(std::move(w));
  }
  return out;
}

}  // namespace lcrwmd
