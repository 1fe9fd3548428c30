#pragma once

// Retrieval-quality measurements: overlap between the top-k lists of two
// methods, and k-nearest-neighbour label precision.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lcrwmd/engine.hpp"
#include "lcrwmd/synthetic.hpp"

namespace lcrwmd {

/// k = round(pct% of n), at least 1.
inline std::size_t k_from_percent(double pct, std::size_t n) {
  if (!(pct > 0.0) || pct > 100.0) throw InvalidArgument("percentage must be in (0, 100]");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(pct / 100.0 * static_cast<double>(n))));
}

struct OverlapPoint {
  std::string method;
  std::string reference;
  double k_pct = 0.0;
  double reference_pct = 0.0;
  std::size_t k = 0;
  std::size_t reference_k = 0;
  double ratio = 0.0;

  nlohmann::ordered_json to_json() const {
    return {{"method", method},       {"reference", reference}, {"k_pct", k_pct},
            {"reference_pct", reference_pct}, {"k", k},          {"reference_k", reference_k},
            {"overlap", ratio}};
  }
};

struct OverlapReport {
  std::vector<OverlapPoint> points;
};

/// |prefix_k(a) ∩ prefix_kr(b)| / min(k, kr).
inline double overlap_ratio(const TopKResult& a, std::size_t k, const TopKResult& b, std::size_t kr) {
  const std::size_t ka = std::min(k, a.size()), kb = std::min(kr, b.size());
  if (ka == 0 || kb == 0) return 0.0;
  std::unordered_set<DocId> ref;
  for (std::size_t i = 0; i < kb; ++i) ref.insert(b[i].id);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < ka; ++i) hit += ref.contains(a[i].id);
  return static_cast<double>(hit) / static_cast<double>(std::min(ka, kb));
}

struct OverlapConfig {
  Method method = Method::rwmd;
  Method reference = Method::wmd;
  std::vector<double> k_pcts{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> reference_pcts;  // empty: same percentage as k
  std::vector<std::size_t> absolute_k; // overrides k_pcts when non-empty
  std::size_t partitions = 1;
  std::size_t batch = kDefaultBatch;
  bool exclude_self = true;
};

/// Overlap of `method` with `reference`, averaged over queries drawn from
/// the resident rows `query_rows`.
inline OverlapReport evaluate_overlap(const Index& index, std::span<const DocId> query_rows,
                                      const OverlapConfig& cfg) {
  const std::size_t n = index.size() - (cfg.exclude_self ? 1 : 0);
  struct Grid { double pct, ref_pct; std::size_t k, kr; };
  std::vector<Grid> grid;
  if (!cfg.absolute_k.empty()) {
    for (std::size_t k : cfg.absolute_k) {
      if (k == 0 || k > n) throw InvalidArgument("k exceeds the number of candidate documents");
      grid.push_back({100.0 * static_cast<double>(k) / static_cast<double>(n),
                      100.0 * static_cast<double>(k) / static_cast<double>(n), k, k});
    }
  } else {
    const auto& refs = cfg.reference_pcts.empty() ? cfg.k_pcts : cfg.reference_pcts;
    for (double p : cfg.k_pcts)
      for (std::size_t r = 0; r < refs.size(); ++r) {
        if (!cfg.reference_pcts.empty() || refs[r] == p) {
          const std::size_t k = k_from_percent(p, n), kr = k_from_percent(refs[r], n);
          grid.push_back({p, refs[r], k, kr});
        }
      }
  }
  std::size_t kmax = 0, krmax = 0;
  for (const auto& g : grid) {
    kmax = std::max(kmax, g.k);
    krmax = std::max(krmax, g.kr);
  }
  const HistogramSet queries = select_rows(index.docs, query_rows);
  std::vector<std::optional<DocId>> sources(query_rows.begin(), query_rows.end());
  QueryPlan plan;
  plan.partitions = cfg.partitions;
  plan.batch = cfg.batch;
  plan.exclude_self = cfg.exclude_self;
  plan.method = cfg.method;
  plan.k = kmax;
  const QueryResult a = run_query(index, queries, plan, sources);
  QueryResult b;
  if (cfg.reference == cfg.method && krmax <= kmax) {
    b = a;
  } else {
    plan.method = cfg.reference;
    plan.k = krmax;
    b = run_query(index, queries, plan, sources);
  }
  OverlapReport rep;
  for (const auto& g : grid) {
    double sum = 0.0;
    for (std::size_t q = 0; q < queries.size(); ++q) sum += overlap_ratio(a.top[q], g.k, b.top[q], g.kr);
    rep.points.push_back({std::string(method_name(cfg.method)), std::string(method_name(cfg.reference)),
                          g.pct, g.ref_pct, g.k, g.kr,
                          queries.empty() ? 0.0 : sum / static_cast<double>(queries.size())});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// k-NN precision

struct LabelBucket {
  std::string name;
  std::size_t min_count;  // inclusive
  std::size_t max_count;  // exclusive
};

/// Label-frequency buckets: small [300, 1k), medium [1k, 10k),
/// large [10k, 100k), very-large [100k, 1M).
inline std::vector<LabelBucket> default_buckets() {
  return {{"small", 300, 1000},
          {"medium", 1000, 10000},
          {"large", 10000, 100000},
          {"very-large", 100000, 1000000}};
}

/// Buckets from ascending thresholds t0 < t1 < ... : [t0, t1), [t1, t2), ...
inline std::vector<LabelBucket> buckets_from_thresholds(std::span<const std::size_t> t) {
  static const char* names[] = {"small", "medium", "large", "very-large"};
  std::vector<LabelBucket> out;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (t[i + 1] <= t[i]) throw InvalidArgument("bucket thresholds must increase");
    out.push_back({i < 4 ? names[i] : "bucket" + std::to_string(i), t[i], t[i + 1]});
  }
  return out;
}

struct PrecisionPoint {
  std::string method;
  std::size_t k = 0;
  std::string bucket;
  std::size_t labels = 0;  // labels with at least one query in the bucket
  double precision = 0.0;

  nlohmann::ordered_json to_json() const {
    return {{"method", method}, {"k", k}, {"bucket", bucket}, {"labels", labels},
            {"precision", precision}};
  }
};

struct PrecisionReport {
  std::vector<PrecisionPoint> points;

  std::optional<double> at(std::size_t k, std::string_view bucket) const {
    for (const auto& p : points)
      if (p.k == k && p.bucket == bucket) return p.precision;
    return std::nullopt;
  }
};

struct PrecisionConfig {
  Method method = Method::lc_rwmd;
  std::vector<std::size_t> ks{1, 2, 4, 8, 16};
  std::vector<LabelBucket> buckets = default_buckets();
  std::size_t partitions = 1;
  std::size_t batch = kDefaultBatch;
};

/// For each query (a resident row, itself excluded), the fraction of its
/// top-k sharing its label; averaged per label, then combined across labels
/// by geometric mean within each frequency bucket. The "all" bucket spans
/// every label.
inline PrecisionReport evaluate_precision(const Index& index, std::span<const DocId> query_rows,
                                          const PrecisionConfig& cfg) {
  if (!index.has_labels()) throw InvalidArgument("index has no labels");
  if (cfg.ks.empty()) throw InvalidArgument("k grid is empty");
  const std::size_t kmax = *std::ranges::max_element(cfg.ks);
  if (kmax >= index.size()) throw InvalidArgument("k exceeds the number of candidate documents");
  std::map<std::string, std::size_t> freq;
  for (const auto& l : index.labels) ++freq[l];

  const HistogramSet queries = select_rows(index.docs, query_rows);
  std::vector<std::optional<DocId>> sources(query_rows.begin(), query_rows.end());
  QueryPlan plan;
  plan.method = cfg.method;
  plan.k = kmax;
  plan.partitions = cfg.partitions;
  plan.batch = cfg.batch;
  plan.exclude_self = true;
  const QueryResult res = run_query(index, queries, plan, sources);

  std::vector<LabelBucket> buckets = cfg.buckets;
  buckets.push_back({"all", 0, std::numeric_limits<std::size_t>::max()});
  PrecisionReport rep;
  for (std::size_t k : cfg.ks) {
    std::map<std::string, std::pair<double, std::size_t>> per_label;  // sum, count
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const std::string& label = index.labels[query_rows[q]];
      const auto& top = res.top[q];
      const std::size_t kk = std::min(k, top.size());
      std::size_t same = 0;
      for (std::size_t i = 0; i < kk; ++i) same += index.labels[top[i].id] == label;
      auto& acc = per_label[label];
      acc.first += kk ? static_cast<double>(same) / static_cast<double>(kk) : 0.0;
      acc.second += 1;
    }
    for (const auto& b : buckets) {
      double log_sum = 0.0;
      std::size_t count = 0;
      bool zero = false;
      for (const auto& [label, acc] : per_label) {
        const std::size_t f = freq[label];
        if (f < b.min_count || f >= b.max_count) continue;
        const double mean = acc.first / static_cast<double>(acc.second);
        if (mean <= 0.0) zero = true;
        else log_sum += std::log(mean);
        ++count;
      }
      if (count == 0) continue;
      const double gm = zero ? 0.0 : std::exp(log_sum / static_cast<double>(count));
      rep.points.push_back({std::string(method_name(cfg.method)), k, b.name, count, gm});
    }
  }
  return rep;
}

}  // namespace lcrwmd
