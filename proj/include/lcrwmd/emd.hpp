#pragma once

// Exact earth mover's distance and the word mover's distance built on it.
//
// The transportation problem is solved as a min-cost flow on the bipartite
// network S -> supply -> demand -> T with successive shortest augmenting
// paths. Dijkstra runs on reduced costs c + u[a] - u[b] >= 0, so the final
// node potentials are a dual-feasible certificate of optimality.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <mutex>
#include <numeric>
#include <span>
#include <vector>

#include "lcrwmd/corpus.hpp"
#include "lcrwmd/distances.hpp"
#include "lcrwmd/error.hpp"
#include "lcrwmd/kernels.hpp"
#include "lcrwmd/matrix.hpp"
#include "lcrwmd/parallel.hpp"
#include "lcrwmd/topk.hpp"

namespace lcrwmd {

inline constexpr double kBalanceTolerance = 1e-6;
inline constexpr double kFlowEpsilon = 1e-12;
inline constexpr double kFeasibilityTolerance = 1e-9;

struct TransportProblem {
  std::vector<double> supply;
  std::vector<double> demand;
  MatrixD cost;  // supply.size() x demand.size()
};

struct Flow {
  std::size_t from;
  std::size_t to;
  double amount;
};

struct TransportPlan {
  std::vector<Flow> flows;
  double objective = 0.0;
  // Dual solution: supply_dual[p] + demand_dual[q] <= cost(p, q).
  std::vector<double> supply_dual;
  std::vector<double> demand_dual;
  std::size_t augmentations = 0;

  double dual_objective(const TransportProblem& prob) const {
    double d = 0.0;
    for (std::size_t p = 0; p < prob.supply.size(); ++p) d += prob.supply[p] * supply_dual[p];
    for (std::size_t q = 0; q < prob.demand.size(); ++q) d += prob.demand[q] * demand_dual[q];
    return d;
  }
};

namespace detail {

inline void validate_problem(const TransportProblem& prob) {
  const std::size_t h1 = prob.supply.size(), h2 = prob.demand.size();
  if (h1 == 0 || h2 == 0) throw InvalidArgument("transport problem has an empty side");
  require_dims(prob.cost.rows() == h1 && prob.cost.cols() == h2,
               "cost matrix does not match supply/demand sizes");
  double s = 0.0, d = 0.0;
  for (double x : prob.supply) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("negative or non-finite supply");
    s += x;
  }
  for (double x : prob.demand) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("negative or non-finite demand");
    d += x;
  }
  if (std::abs(s - d) > kBalanceTolerance)
    throw InvalidArgument("infeasible transport problem: supply and demand totals differ");
  for (double c : prob.cost.data())
    if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("negative or non-finite cost");
}

// Removes cycles from the support of an optimal plan by shifting flow around
// each cycle until one edge empties, leaving a forest (a vertex solution).
// On an optimal plan every support cycle has zero alternating cost.
inline void reduce_to_forest(MatrixD& y, const MatrixD& cost) {
  const std::size_t h1 = y.rows(), h2 = y.cols(), n = h1 + h2;
  for (;;) {
    std::vector<std::vector<std::size_t>> adj(n);
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    bool found = false;
    std::size_t cp = 0, cq = 0;
    for (std::size_t p = 0; p < h1 && !found; ++p)
      for (std::size_t q = 0; q < h2; ++q) {
        if (y(p, q) <= 0.0) continue;
        const std::size_t a = find(p), b = find(h1 + q);
        if (a == b) {
          found = true;
          cp = p;
          cq = q;
          break;
        }
        parent[a] = b;
        adj[p].push_back(h1 + q);
        adj[h1 + q].push_back(p);
      }
    if (!found) return;
    // Path from demand node cq to supply node cp inside the forest.
    std::vector<std::size_t> prev(n, n);
    std::vector<std::size_t> stack{h1 + cq};
    prev[h1 + cq] = h1 + cq;
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      if (x == cp) break;
      for (std::size_t nb : adj[x])
        if (prev[nb] == n) {
          prev[nb] = x;
          stack.push_back(nb);
        }
    }
    // Cycle edges in order, starting with the closing edge (cp, cq).
    std::vector<std::pair<std::size_t, std::size_t>> cycle{{cp, cq}};
    for (std::size_t x = cp; x != h1 + cq; x = prev[x]) {
      const std::size_t px = prev[x];
      cycle.push_back(x < h1 ? std::pair{x, px - h1} : std::pair{px, x - h1});
    }
    double delta_cost = 0.0;
    for (std::size_t e = 0; e < cycle.size(); ++e)
      delta_cost += (e % 2 == 0 ? 1.0 : -1.0) * cost(cycle[e].first, cycle[e].second);
    // Shift along the direction whose cost change is non-positive.
    const std::size_t minus = delta_cost <= 0.0 ? 1 : 0;
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t e = minus; e < cycle.size(); e += 2)
      theta = std::min(theta, y(cycle[e].first, cycle[e].second));
    for (std::size_t e = 0; e < cycle.size(); ++e) {
      double& f = y(cycle[e].first, cycle[e].second);
      f += (e % 2 == minus) ? -theta : theta;
    }
    bool cleared = false;
    for (std::size_t e = minus; e < cycle.size(); e += 2) {
      double& f = y(cycle[e].first, cycle[e].second);
      if (!cleared && f <= theta * 1e-12) {
        f = 0.0;
        cleared = true;
      } else if (f < 0.0) {
        f = 0.0;
      }
    }
  }
}

}  // namespace detail

/// Optimal transport plan for a balanced problem.
inline TransportPlan solve_emd(const TransportProblem& prob) {
  detail::validate_problem(prob);
  const std::size_t h1 = prob.supply.size(), h2 = prob.demand.size();
  const MatrixD& c = prob.cost;
  const double target = std::min(std::accumulate(prob.supply.begin(), prob.supply.end(), 0.0),
                                 std::accumulate(prob.demand.begin(), prob.demand.end(), 0.0));

  // Node layout: 0 = source, 1..h1 supply, h1+1..h1+h2 demand, h1+h2+1 sink.
  const std::size_t n = h1 + h2 + 2, S = 0, T = n - 1;
  auto sup = [](std::size_t p) { return 1 + p; };
  auto dem = [h1](std::size_t q) { return 1 + h1 + q; };

  MatrixD y(h1, h2, 0.0);
  std::vector<double> rem_supply = prob.supply, rem_demand = prob.demand;
  std::vector<double> u(n, 0.0), dist(n);
  std::vector<std::size_t> pred(n);
  std::vector<char> done(n);
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();

  TransportPlan plan;
  double routed = 0.0;
  while (target - routed > kFlowEpsilon) {
    std::ranges::fill(dist, inf);
    std::ranges::fill(pred, none);
    std::ranges::fill(done, 0);
    dist[S] = 0.0;
    for (;;) {
      std::size_t a = none;
      for (std::size_t x = 0; x < n; ++x)
        if (!done[x] && dist[x] < inf && (a == none || dist[x] < dist[a])) a = x;
      if (a == none) break;
      done[a] = 1;
      auto relax = [&](std::size_t b, double cost) {
        const double nd = dist[a] + std::max(0.0, cost + u[a] - u[b]);
        if (nd < dist[b]) {
          dist[b] = nd;
          pred[b] = a;
        }
      };
      if (a == S) {
        for (std::size_t p = 0; p < h1; ++p)
          if (rem_supply[p] > kFlowEpsilon) relax(sup(p), 0.0);
      } else if (a <= h1) {
        const std::size_t p = a - 1;
        for (std::size_t q = 0; q < h2; ++q) relax(dem(q), c(p, q));
      } else if (a < T) {
        const std::size_t q = a - 1 - h1;
        for (std::size_t p = 0; p < h1; ++p)
          if (y(p, q) > kFlowEpsilon) relax(sup(p), -c(p, q));
        if (rem_demand[q] > kFlowEpsilon) relax(T, 0.0);
      }
    }
    if (dist[T] == inf) break;
    for (std::size_t x = 0; x < n; ++x) u[x] += std::min(dist[x], dist[T]);

    // Bottleneck along the path T <- ... <- S.
    double amount = inf;
    for (std::size_t b = T; b != S; b = pred[b]) {
      const std::size_t a = pred[b];
      if (a == S) amount = std::min(amount, rem_supply[b - 1]);
      else if (b == T) amount = std::min(amount, rem_demand[a - 1 - h1]);
      else if (a > h1) amount = std::min(amount, y(b - 1, a - 1 - h1));
    }
    for (std::size_t b = T; b != S; b = pred[b]) {
      const std::size_t a = pred[b];
      if (a == S) rem_supply[b - 1] -= amount;
      else if (b == T) rem_demand[a - 1 - h1] -= amount;
      else if (a <= h1) y(a - 1, b - 1 - h1) += amount;
      else y(b - 1, a - 1 - h1) -= amount;
    }
    routed += amount;
    ++plan.augmentations;
  }
  if (target - routed > kFeasibilityTolerance)
    throw Error("min-cost flow terminated before routing all supply");

  for (double& f : y.data())
    if (f <= kFlowEpsilon) f = 0.0;
  detail::reduce_to_forest(y, c);

  for (std::size_t p = 0; p < h1; ++p)
    for (std::size_t q = 0; q < h2; ++q)
      if (y(p, q) > 0.0) {
        plan.flows.push_back({p, q, y(p, q)});
        plan.objective += y(p, q) * c(p, q);
      }
  plan.supply_dual.resize(h1);
  plan.demand_dual.resize(h2);
  for (std::size_t p = 0; p < h1; ++p) plan.supply_dual[p] = -u[sup(p)];
  for (std::size_t q = 0; q < h2; ++q) plan.demand_dual[q] = u[dem(q)];
  return plan;
}

/// Ground-distance matrix between the words of two histograms.
inline MatrixD word_costs(HistogramView x1, HistogramView x2, const EmbeddingMatrix& E) {
  const DistanceBlock d = pairwise_euclidean(E.gather(x1.ids), E.gather(x2.ids));
  MatrixD out(d.rows(), d.cols());
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t j = 0; j < d.cols(); ++j) out(i, j) = d(i, j);
  return out;
}

inline TransportProblem wmd_problem(HistogramView x1, HistogramView x2, const EmbeddingMatrix& E) {
  validate(x1, E.size());
  validate(x2, E.size());
  // Float weights sum to 1 only within rounding; rescale in double so the
  // two marginals balance exactly.
  auto mass = [](std::span<const float> w) {
    std::vector<double> out(w.begin(), w.end());
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    for (double& x : out) x /= total;
    return out;
  };
  return {mass(x1.weights), mass(x2.weights), word_costs(x1, x2, E)};
}

/// Word mover's distance between two histograms.
inline double wmd(HistogramView x1, HistogramView x2, const EmbeddingMatrix& E) {
  return solve_emd(wmd_problem(x1, x2, E)).objective;
}

// ---------------------------------------------------------------------------
// Top-k WMD retrieval

struct WmdSearchResult {
  TopKResult top;
  std::size_t exact_solves = 0;
};

/// Symmetric RWMD of one query against every row of a resident set, via the
/// linear-complexity route in both directions.
inline std::vector<float> lcrwmd_query(const ResidentSet& res, const HistogramSet& X1,
                                       HistogramView query, const EmbeddingMatrix& E,
                                       std::size_t batch = kDefaultBatch) {
  std::vector<float> out = lcrwmd_one_sided(res, query, E);
  HistogramSet single(E.size());
  single.push_back(query);
  const ResidentSet qres = ResidentSet::build(single, E);
  for (std::size_t i0 = 0; i0 < X1.size(); i0 += batch) {
    const std::size_t cnt = std::min(batch, X1.size() - i0);
    const MatrixF back = lcrwmd_batched(qres, stack_rows(X1, i0, cnt, E));
    for (std::size_t c = 0; c < cnt; ++c) out[i0 + c] = std::max(out[i0 + c], back(0, c));
  }
  return out;
}

/// Exhaustive WMD from `query` to every row of X1.
inline std::vector<float> wmd_row(const HistogramSet& X1, HistogramView query,
                                  const EmbeddingMatrix& E) {
  std::vector<float> out(X1.size());
  for (std::size_t i = 0; i < X1.size(); ++i) out[i] = static_cast<float>(wmd(query, X1.row(i), E));
  return out;
}

inline TopKResult exhaustive_topk_wmd(const HistogramSet& X1, HistogramView query,
                                      const EmbeddingMatrix& E, std::size_t k) {
  return topk_select(wmd_row(X1, query, E), k);
}

/// Exact top-k WMD with RWMD pruning. Candidates are visited in ascending
/// RWMD order; once a candidate's RWMD exceeds the current k-th best WMD
/// (the cutoff), it and every later candidate are skipped. Rows listed in
/// `excluded` are never candidates. With workers > 1 the exact solves run
/// concurrently against a shared, monotonically shrinking cutoff.
inline WmdSearchResult prefiltered_topk_wmd(const HistogramSet& X1, HistogramView query,
                                            const EmbeddingMatrix& E, std::size_t k,
                                            const std::vector<float>& rwmd,
                                            std::span<const DocId> excluded = {},
                                            std::size_t workers = 1) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  detail::require_dims(rwmd.size() == X1.size(), "RWMD vector does not match resident set");
  std::vector<Neighbor> order;
  order.reserve(X1.size());
  for (std::size_t i = 0; i < X1.size(); ++i)
    if (std::ranges::find(excluded, static_cast<DocId>(i)) == excluded.end())
      order.push_back({rwmd[i], static_cast<DocId>(i)});
  std::ranges::sort(order, closer);

  WmdSearchResult out;
  const std::size_t seed = std::min(k, order.size());
  std::vector<Neighbor> top(seed);
  parallel_for(seed, workers, [&](std::size_t t) {
    top[t] = {static_cast<float>(wmd(query, X1.row(order[t].id), E)), order[t].id};
  });
  std::ranges::sort(top, closer);
  out.exact_solves = seed;
  if (seed < k || seed == order.size()) {
    out.top = std::move(top);
    return out;
  }

  // A bound equal to the cutoff is still evaluated; the relative slack
  // absorbs float rounding between the RWMD and WMD reductions.
  auto prunable = [](float bound, float cutoff) {
    return static_cast<double>(bound) > static_cast<double>(cutoff) * (1.0 + 1e-6) + 1e-7;
  };
  std::atomic<float> cutoff{top.back().distance};
  std::atomic<std::size_t> next{seed}, solves{0};
  std::atomic<bool> stop{false};
  std::mutex top_mutex;
  auto worker = [&](std::size_t) {
    for (;;) {
      if (stop.load(std::memory_order_relaxed)) return;
      const std::size_t t = next.fetch_add(1, std::memory_order_relaxed);
      if (t >= order.size()) return;
      if (prunable(order[t].distance, cutoff.load(std::memory_order_relaxed))) {
        stop.store(true, std::memory_order_relaxed);
        return;
      }
      const Neighbor cand{static_cast<float>(wmd(query, X1.row(order[t].id), E)), order[t].id};
      solves.fetch_add(1, std::memory_order_relaxed);
      std::lock_guard lock(top_mutex);
      if (closer(cand, top.back())) {
        top.back() = cand;
        std::ranges::sort(top, closer);
        cutoff.store(top.back().distance, std::memory_order_relaxed);
      }
    }
  };
  parallel_for(std::max<std::size_t>(workers, 1), workers, worker);
  out.exact_solves += solves.load();
  out.top = std::move(top);
  return out;
}

inline WmdSearchResult prefiltered_topk_wmd(const HistogramSet& X1, HistogramView query,
                                            const EmbeddingMatrix& E, std::size_t k,
                                            std::size_t workers = 1) {
  const std::vector<float> rwmd = lcrwmd_query(ResidentSet::build(X1, E), X1, query, E);
  return prefiltered_topk_wmd(X1, query, E, k, rwmd, {}, workers);
}

}  // namespace lcrwmd
