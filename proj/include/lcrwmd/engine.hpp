#pragma once

// Partitioned query driver. The resident set is split into P contiguous
// shards; every shard is processed by an independent worker against a
// shared, immutable index, and per-query top-k lists are merged at the end.
// Per-pair distances do not depend on the shard a row lands in, so results
// are identical for every P.

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lcrwmd/corpus.hpp"
#include "lcrwmd/distances.hpp"
#include "lcrwmd/emd.hpp"
#include "lcrwmd/index.hpp"
#include "lcrwmd/kernels.hpp"
#include "lcrwmd/parallel.hpp"
#include "lcrwmd/synthetic.hpp"
#include "lcrwmd/topk.hpp"

namespace lcrwmd {

enum class Method { wcd, rwmd, lc_rwmd, wmd, wmd_pruned };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::wcd: return "wcd";
    case Method::rwmd: return "rwmd";
    case Method::lc_rwmd: return "lc-rwmd";
    case Method::wmd: return "wmd";
    case Method::wmd_pruned: return "wmd-pruned";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::wcd, Method::rwmd, Method::lc_rwmd, Method::wmd, Method::wmd_pruned})
    if (method_name(m) == s) return m;
  throw InvalidArgument("unknown method \"" + std::string(s) + "\"");
}

struct QueryPlan {
  Method method = Method::lc_rwmd;
  std::size_t k = 10;
  std::size_t batch = kDefaultBatch;
  std::size_t partitions = 1;
  std::size_t workers = 0;  // 0: one per partition, capped at hardware threads
  bool exclude_self = false;

  void check() const {
    if (k == 0) throw InvalidArgument("k must be at least 1");
    if (partitions == 0) throw InvalidArgument("partition count must be at least 1");
    if (batch == 0) throw InvalidArgument("batch size must be at least 1");
  }
};

struct QueryResult {
  std::vector<TopKResult> top;             // one per query
  std::vector<std::size_t> exact_solves;   // per query; WMD methods only
};

/// Receives one full distance row (query j against all resident rows).
using RowSink = std::function<void(std::size_t query, std::span<const float> distances)>;

namespace detail {

struct Shard {
  std::size_t begin = 0, end = 0;
  HistogramSet docs;
  std::optional<ResidentSet> resident;  // lc-rwmd, wmd-pruned
  std::optional<StackedRows> stacked;   // rwmd
  MatrixF centroids;                    // wcd
};

inline std::vector<std::pair<std::size_t, std::size_t>> shard_ranges(std::size_t n, std::size_t parts) {
  parts = std::min(parts, n);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < parts; ++s) out.emplace_back(s * n / parts, (s + 1) * n / parts);
  return out;
}

// Backward direction for a query batch: moving each shard row onto each
// query, with the query batch as the resident side. Result is b x rows.
inline MatrixF backward_bounds(const ResidentSet& queries, const HistogramSet& docs,
                               const EmbeddingMatrix& E, std::size_t batch) {
  MatrixF out(queries.size(), docs.size());
  for (std::size_t i0 = 0; i0 < docs.size(); i0 += batch) {
    const std::size_t cnt = std::min(batch, docs.size() - i0);
    const MatrixF part = lcrwmd_batched(queries, stack_rows(docs, i0, cnt, E));
    for (std::size_t q = 0; q < queries.size(); ++q)
      for (std::size_t c = 0; c < cnt; ++c) out(q, i0 + c) = part(q, c);
  }
  return out;
}

}  // namespace detail

/// Runs `queries` (histograms over the index vocabulary) against the index.
/// `sources[j]`, when present, is the resident row query j was drawn from;
/// with plan.exclude_self that row is never returned for query j.
inline QueryResult run_query(const Index& index, const HistogramSet& queries, const QueryPlan& plan,
                             std::span<const std::optional<DocId>> sources = {},
                             const RowSink& full_rows = {}) {
  plan.check();
  index.check();
  const EmbeddingMatrix& E = index.embeddings;
  detail::require_dims(queries.vocab_size() == E.size(), "queries use a different vocabulary");
  if (!sources.empty() && sources.size() != queries.size())
    throw DimensionError("source list does not match query count");
  if (plan.method == Method::wmd_pruned && full_rows)
    throw InvalidArgument("full distance output is not available for wmd-pruned");

  const auto ranges = detail::shard_ranges(index.size(), plan.partitions);
  const std::size_t workers =
      plan.workers ? plan.workers : std::min(ranges.size(), default_workers());
  std::vector<detail::Shard> shards(ranges.size());
  parallel_for(shards.size(), workers, [&](std::size_t s) {
    auto& sh = shards[s];
    std::tie(sh.begin, sh.end) = ranges[s];
    sh.docs = index.docs.slice(sh.begin, sh.end - sh.begin);
    switch (plan.method) {
      case Method::wcd: sh.centroids = centroids(sh.docs, E); break;
      case Method::rwmd: sh.stacked = stack_rows(sh.docs, 0, sh.docs.size(), E); break;
      case Method::lc_rwmd:
      case Method::wmd_pruned: sh.resident = ResidentSet::build(sh.docs, E); break;
      case Method::wmd: break;
    }
  });

  auto source_of = [&](std::size_t j) -> std::optional<DocId> {
    return sources.empty() ? std::nullopt : sources[j];
  };

  QueryResult result;
  result.top.resize(queries.size());
  result.exact_solves.assign(queries.size(), 0);
  for (std::size_t j0 = 0; j0 < queries.size(); j0 += plan.batch) {
    const std::size_t cnt = std::min(plan.batch, queries.size() - j0);
    const HistogramSet qset = queries.slice(j0, cnt);
    std::optional<ResidentSet> qres;
    if (plan.method == Method::lc_rwmd || plan.method == Method::wmd_pruned)
      qres = ResidentSet::build(qset, E);
    MatrixF qcent;
    if (plan.method == Method::wcd) qcent = centroids(qset, E);

    // part[s][c]: top-k of query j0+c within shard s; dist[s]: rows x cnt.
    std::vector<std::vector<TopKResult>> part(shards.size(), std::vector<TopKResult>(cnt));
    std::vector<std::vector<std::size_t>> solves(shards.size(), std::vector<std::size_t>(cnt, 0));
    std::vector<MatrixF> dist(shards.size());

    parallel_for(shards.size(), workers, [&](std::size_t s) {
      const auto& sh = shards[s];
      const std::size_t rows = sh.docs.size();
      MatrixF d;
      switch (plan.method) {
        case Method::wcd:
          d = pairwise_euclidean(sh.centroids, qcent).values;
          break;
        case Method::rwmd: {
          d = MatrixF(rows, cnt);
          std::vector<float> f(rows), b(rows), scratch;
          for (std::size_t c = 0; c < cnt; ++c) {
            rwmd_quadratic_query(*sh.stacked, stack_rows(qset, c, 1, E), f, b, 0, rows, scratch);
            for (std::size_t i = 0; i < rows; ++i) d(i, c) = std::max(f[i], b[i]);
          }
          break;
        }
        case Method::lc_rwmd:
        case Method::wmd_pruned: {
          d = lcrwmd_batched(*sh.resident, stack_rows(qset, 0, cnt, E));
          const MatrixF back = detail::backward_bounds(*qres, sh.docs, E, plan.batch);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t c = 0; c < cnt; ++c) d(i, c) = std::max(d(i, c), back(c, i));
          break;
        }
        case Method::wmd:
          d = MatrixF(rows, cnt);
          for (std::size_t c = 0; c < cnt; ++c)
            for (std::size_t i = 0; i < rows; ++i)
              d(i, c) = static_cast<float>(wmd(qset.row(c), sh.docs.row(i), E));
          break;
      }

      for (std::size_t c = 0; c < cnt; ++c) {
        const auto src = source_of(j0 + c);
        const bool drop = plan.exclude_self && src && *src >= sh.begin && *src < sh.end;
        const DocId self = drop ? static_cast<DocId>(*src - sh.begin) : 0;
        if (plan.method == Method::wmd_pruned) {
          std::vector<float> bounds(rows);
          for (std::size_t i = 0; i < rows; ++i) bounds[i] = d(i, c);
          const DocId excluded[] = {self};
          auto r = prefiltered_topk_wmd(sh.docs, qset.row(c), E, plan.k, bounds,
                                        drop ? std::span<const DocId>(excluded) : std::span<const DocId>{});
          for (auto& nb : r.top) nb.id += static_cast<DocId>(sh.begin);
          part[s][c] = std::move(r.top);
          solves[s][c] = r.exact_solves;
          continue;
        }
        std::vector<Neighbor> cand;
        cand.reserve(rows);
        for (std::size_t i = 0; i < rows; ++i)
          if (!drop || i != self) cand.push_back({d(i, c), static_cast<DocId>(sh.begin + i)});
        part[s][c] = cand.empty() ? TopKResult{} : topk_select(std::move(cand), plan.k);
      }
      if (full_rows) dist[s] = std::move(d);
    });

    for (std::size_t c = 0; c < cnt; ++c) {
      std::vector<TopKResult> lists;
      lists.reserve(shards.size());
      for (std::size_t s = 0; s < shards.size(); ++s) {
        lists.push_back(std::move(part[s][c]));
        result.exact_solves[j0 + c] += solves[s][c];
      }
      result.top[j0 + c] = topk_merge(lists, plan.k);
      if (full_rows) {
        std::vector<float> row(index.size());
        for (std::size_t s = 0; s < shards.size(); ++s)
          for (std::size_t i = 0; i < dist[s].rows(); ++i) row[shards[s].begin + i] = dist[s](i, c);
        full_rows(j0 + c, row);
      }
    }
  }
  return result;
}

/// Resident rows `ids` wrapped as a query set.
inline HistogramSet select_rows(const HistogramSet& X, std::span<const DocId> ids) {
  HistogramSet out(X.vocab_size());
  for (DocId id : ids) {
    if (id >= X.size()) throw DimensionError("row id out of range");
    out.push_back(X.row(id));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmarking

struct BenchRecord {
  std::string method;
  std::string sweep;             // axis varied: "h", "n", "P" or "" for a single point
  std::size_t n = 0;
  double h_mean = 0.0;
  std::size_t m = 0;
  std::size_t partitions = 1;
  double wall_ms = 0.0;          // mean wall time of one query against all n rows
  std::size_t queries = 0;       // queries timed
  std::optional<double> exact_solves;  // mean per query, wmd-pruned only

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["method"] = method;
    if (!sweep.empty()) j["sweep"] = sweep;
    j["n"] = n;
    j["h_mean"] = h_mean;
    j["m"] = m;
    j["P"] = partitions;
    j["wall_ms"] = wall_ms;
    j["queries"] = queries;
    if (exact_solves) j["exact_solves"] = *exact_solves;
    return j;
  }
};

struct BenchOptions {
  double min_time_ms = 200.0;  // keep timing queries until this much time has elapsed
  std::size_t min_queries = 1;
  std::size_t k = 16;
};

/// Mean time to compare one transient histogram with every resident row.
/// Resident-side preprocessing (vocabulary restriction, stacking, centroids)
/// happens once, outside the timed region, as it would at index build.
///
/// lc-rwmd times the one-to-many pass (nearest-word vector over the
/// resident vocabulary, then the sparse product); rwmd times the quadratic
/// pass, which yields both one-sided bounds from a single cost matrix.
inline BenchRecord time_method(const Index& index, const HistogramSet& queries, Method method,
                               std::size_t partitions, const BenchOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  if (queries.empty()) throw InvalidArgument("benchmark needs at least one query");
  const EmbeddingMatrix& E = index.embeddings;
  const auto ranges = detail::shard_ranges(index.size(), partitions);
  const std::size_t workers = std::min(ranges.size(), default_workers());
  std::vector<detail::Shard> shards(ranges.size());
  for (std::size_t s = 0; s < shards.size(); ++s) {
    auto& sh = shards[s];
    std::tie(sh.begin, sh.end) = ranges[s];
    sh.docs = index.docs.slice(sh.begin, sh.end - sh.begin);
    if (method == Method::wcd) sh.centroids = centroids(sh.docs, E);
    if (method == Method::rwmd) sh.stacked = stack_rows(sh.docs, 0, sh.docs.size(), E);
    if (method == Method::lc_rwmd || method == Method::wmd_pruned)
      sh.resident = ResidentSet::build(sh.docs, E);
  }

  std::size_t timed = 0;
  double solves = 0.0;
  std::vector<std::size_t> shard_solves(shards.size());
  const auto start = clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(clock::now() - start).count();
  };
  do {
    const HistogramView q = queries.row(timed % queries.size());
    parallel_for(shards.size(), workers, [&](std::size_t s) {
      const auto& sh = shards[s];
      volatile float sink = 0.0f;
      switch (method) {
        case Method::wcd: {
          HistogramSet one(E.size());
          one.push_back(q);
          sink = pairwise_euclidean(sh.centroids, centroids(one, E)).values(0, 0);
          break;
        }
        case Method::rwmd: {
          std::vector<float> f(sh.docs.size()), b(sh.docs.size()), scratch;
          rwmd_quadratic_query(*sh.stacked, stack_rows(q, E), f, b, 0, sh.docs.size(), scratch);
          sink = f[0];
          break;
        }
        case Method::lc_rwmd:
          sink = lcrwmd_one_sided(*sh.resident, q, E)[0];
          break;
        case Method::wmd:
          sink = wmd_row(sh.docs, q, E)[0];
          break;
        case Method::wmd_pruned: {
          const auto bounds = lcrwmd_query(*sh.resident, sh.docs, q, E);
          shard_solves[s] = prefiltered_topk_wmd(sh.docs, q, E, opt.k, bounds).exact_solves;
          break;
        }
      }
      (void)sink;
    });
    for (auto& x : shard_solves) solves += static_cast<double>(std::exchange(x, 0));
    ++timed;
  } while (timed < opt.min_queries || elapsed_ms() < opt.min_time_ms);

  BenchRecord r;
  r.method = std::string(method_name(method));
  r.n = index.size();
  r.h_mean = index.docs.mean_row_size();
  r.m = E.dim();
  r.partitions = shards.size();
  r.wall_ms = elapsed_ms() / static_cast<double>(timed);
  r.queries = timed;
  if (method == Method::wmd_pruned) r.exact_solves = solves / static_cast<double>(timed);
  return r;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  detail::require_dims(x.size() == y.size() && x.size() >= 2, "slope needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

enum class SweepAxis { h, n, partitions };

struct SweepConfig {
  SweepAxis axis = SweepAxis::h;
  std::vector<std::size_t> values{8, 16, 32, 64};
  std::vector<Method> methods{Method::lc_rwmd, Method::rwmd};
  std::size_t n = 5000;
  std::size_t h = 16;
  std::size_t m = 32;
  std::size_t vocab = 10000;
  std::size_t queries = 16;  // transient histograms sampled from the resident set
  std::size_t partitions = 1;
  std::uint64_t seed = 1;
  BenchOptions options;
};

struct SweepReport {
  std::vector<BenchRecord> records;
  std::vector<std::pair<std::string, double>> slopes;  // per method, log-log vs the axis

  std::optional<double> slope(std::string_view method) const {
    for (const auto& [m, s] : slopes)
      if (m == method) return s;
    return std::nullopt;
  }
};

/// Times every method at each sweep point on seeded synthetic indices and
/// fits the log-log scaling exponent per method.
inline SweepReport run_sweep(const SweepConfig& cfg) {
  SweepReport rep;
  const char* axis = cfg.axis == SweepAxis::h ? "h" : cfg.axis == SweepAxis::n ? "n" : "P";
  std::vector<std::vector<double>> times(cfg.methods.size());
  std::vector<double> xs;
  std::optional<Index> fixed;
  for (std::size_t value : cfg.values) {
    const std::size_t n = cfg.axis == SweepAxis::n ? value : cfg.n;
    const std::size_t h = cfg.axis == SweepAxis::h ? value : cfg.h;
    const std::size_t P = cfg.axis == SweepAxis::partitions ? value : cfg.partitions;
    if (cfg.axis != SweepAxis::partitions || !fixed)
      fixed = synthetic::random_index(n, cfg.vocab, h, cfg.m, cfg.seed + (cfg.axis == SweepAxis::partitions ? 0 : value));
    const auto rows = synthetic::sample_rows(fixed->size(), cfg.queries, cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const HistogramSet q = select_rows(fixed->docs, rows);
    xs.push_back(static_cast<double>(value));
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      BenchRecord r = time_method(*fixed, q, cfg.methods[mi], P, cfg.options);
      r.sweep = axis;
      times[mi].push_back(r.wall_ms);
      rep.records.push_back(std::move(r));
    }
  }
  if (xs.size() >= 2)
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
      rep.slopes.emplace_back(std::string(method_name(cfg.methods[mi])), loglog_slope(xs, times[mi]));
  return rep;
}

}  // namespace lcrwmd
