#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "lcrwmd/corpus.hpp"
#include "lcrwmd/error.hpp"

namespace lcrwmd {

struct Neighbor {
  float distance;
  DocId id;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Total order used for every top-k decision: distance, then smaller id.
inline bool closer(const Neighbor& a, const Neighbor& b) noexcept {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

/// The k nearest candidates of one query, ascending under `closer`.
using TopKResult = std::vector<Neighbor>;

/// The min(k, |candidates|) smallest candidates. Ids must be unique.
inline TopKResult topk_select(std::vector<Neighbor> candidates, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  if (candidates.size() > k) {
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     candidates.end(), closer);
    candidates.resize(k);
  }
  std::ranges::sort(candidates, closer);
  return candidates;
}

/// Select over a dense distance row; entry i gets id first_id + i.
inline TopKResult topk_select(std::span<const float> distances, std::size_t k, DocId first_id = 0) {
  std::vector<Neighbor> c(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i)
    c[i] = {distances[i], static_cast<DocId>(first_id + i)};
  return topk_select(std::move(c), k);
}

/// k smallest of the union of several valid results.
inline TopKResult topk_merge(std::span<const TopKResult> parts, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  TopKResult out;
  std::vector<std::size_t> cursor(parts.size(), 0);
  while (out.size() < k) {
    std::size_t best = parts.size();
    for (std::size_t p = 0; p < parts.size(); ++p) {
      if (cursor[p] == parts[p].size()) continue;
      if (best == parts.size() || closer(parts[p][cursor[p]], parts[best][cursor[best]])) best = p;
    }
    if (best == parts.size()) break;
    out.push_back(parts[best][cursor[best]++]);
  }
  return out;
}

inline TopKResult topk_merge(const TopKResult& a, const TopKResult& b, std::size_t k) {
  const TopKResult parts[] = {a, b};
  return topk_merge(parts, k);
}

}  // namespace lcrwmd
