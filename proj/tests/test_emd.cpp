#include <gtest/gtest.h>

#include <random>

#include "lcrwmd/distances.hpp"
#include "lcrwmd/emd.hpp"
#include "lcrwmd/synthetic.hpp"
#include "oracles.hpp"

using namespace lcrwmd;

namespace {

TransportProblem problem(std::vector<double> s, std::vector<double> d, std::vector<std::vector<double>> c) {
  MatrixD cost(s.size(), d.size());
  for (std::size_t p = 0; p < s.size(); ++p)
    for (std::size_t q = 0; q < d.size(); ++q) cost(p, q) = c[p][q];
  return {std::move(s), std::move(d), std::move(cost)};
}

std::vector<std::vector<double>> as_rows(const MatrixD& m) {
  std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

std::vector<double> simplex(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (double& x : w) s += x = u(rng);
  for (double& x : w) x /= s;
  return w;
}

void expect_feasible(const TransportProblem& prob, const TransportPlan& plan) {
  std::vector<double> rows(prob.supply.size(), 0.0), cols(prob.demand.size(), 0.0);
  double obj = 0.0;
  for (const Flow& f : plan.flows) {
    EXPECT_GT(f.amount, 0.0);
    rows[f.from] += f.amount;
    cols[f.to] += f.amount;
    obj += f.amount * prob.cost(f.from, f.to);
  }
  for (std::size_t p = 0; p < rows.size(); ++p) EXPECT_NEAR(rows[p], prob.supply[p], 1e-6);
  for (std::size_t q = 0; q < cols.size(); ++q) EXPECT_NEAR(cols[q], prob.demand[q], 1e-6);
  EXPECT_NEAR(obj, plan.objective, 1e-9);
  EXPECT_LE(plan.flows.size(), prob.supply.size() + prob.demand.size() - 1);
  // Dual feasibility and strong duality.
  for (std::size_t p = 0; p < rows.size(); ++p)
    for (std::size_t q = 0; q < cols.size(); ++q)
      EXPECT_LE(plan.supply_dual[p] + plan.demand_dual[q], prob.cost(p, q) + 1e-9);
  EXPECT_NEAR(plan.dual_objective(prob), plan.objective, 1e-6);
}

}  // namespace

TEST(SolveEmd, Trivial) {
  const auto prob = problem({1.0}, {1.0}, {{2.5}});
  const TransportPlan plan = solve_emd(prob);
  EXPECT_DOUBLE_EQ(plan.objective, 2.5);
  ASSERT_EQ(plan.flows.size(), 1u);
  EXPECT_DOUBLE_EQ(plan.flows[0].amount, 1.0);
  expect_feasible(prob, plan);
}

TEST(SolveEmd, IdenticalMarginalsWithZeroDiagonal) {
  const auto prob = problem({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}, {{0, 1, 2}, {1, 0, 1}, {2, 1, 0}});
  const TransportPlan plan = solve_emd(prob);
  EXPECT_NEAR(plan.objective, 0.0, 1e-12);
  expect_feasible(prob, plan);
}

TEST(SolveEmd, TwoByTwoInspection) {
  const auto prob = problem({0.5, 0.5}, {0.5, 0.5}, {{1.0, 2.0}, {0.0, std::sqrt(5.0)}});
  const TransportPlan plan = solve_emd(prob);
  EXPECT_NEAR(plan.objective, 1.0, 1e-12);
  ASSERT_EQ(plan.flows.size(), 2u);
  EXPECT_EQ(plan.flows[0].from, 0u);
  EXPECT_EQ(plan.flows[0].to, 1u);
  EXPECT_NEAR(plan.flows[0].amount, 0.5, 1e-12);
  EXPECT_EQ(plan.flows[1].from, 1u);
  EXPECT_EQ(plan.flows[1].to, 0u);
  EXPECT_NEAR(plan.flows[1].amount, 0.5, 1e-12);
  EXPECT_NEAR(oracle::transport_by_enumeration(prob.supply, prob.demand, as_rows(prob.cost)), 1.0, 1e-12);
  expect_feasible(prob, plan);
}

TEST(SolveEmd, MatchesEnumerationOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> cost(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> side(1, 4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t h1 = side(rng), h2 = side(rng);
    auto prob = problem(simplex(h1, rng), simplex(h2, rng), std::vector<std::vector<double>>(h1, std::vector<double>(h2)));
    for (double& c : prob.cost.data()) c = cost(rng);
    // Rebalance the demand exactly against the supply total.
    const double s = std::accumulate(prob.supply.begin(), prob.supply.end(), 0.0);
    const double d = std::accumulate(prob.demand.begin(), prob.demand.end(), 0.0);
    for (double& x : prob.demand) x *= s / d;
    const TransportPlan plan = solve_emd(prob);
    const double expect = oracle::transport_by_enumeration(prob.supply, prob.demand, as_rows(prob.cost));
    EXPECT_LE(std::abs(plan.objective - expect), 1e-6 * std::max(1.0, expect)) << "trial " << trial;
    expect_feasible(prob, plan);
  }
}

TEST(SolveEmd, DegenerateAndTiedCosts) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> small(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    auto prob = problem({0.25, 0.25, 0.5}, {0.5, 0.25, 0.25}, std::vector<std::vector<double>>(3, std::vector<double>(3)));
    for (double& c : prob.cost.data()) c = small(rng);
    const TransportPlan plan = solve_emd(prob);
    EXPECT_NEAR(plan.objective, oracle::transport_by_enumeration(prob.supply, prob.demand, as_rows(prob.cost)), 1e-9);
    expect_feasible(prob, plan);
  }
}

TEST(SolveEmd, RejectsImbalanceAndBadCosts) {
  EXPECT_THROW(solve_emd(problem({0.6, 0.5}, {1.0}, {{1}, {1}})), InvalidArgument);
  EXPECT_THROW(solve_emd(problem({1.0}, {1.0}, {{-1}})), InvalidArgument);
  EXPECT_THROW(solve_emd(problem({}, {}, {})), InvalidArgument);
  EXPECT_THROW(solve_emd(TransportProblem{{1.0}, {1.0}, MatrixD(2, 1)}), DimensionError);
}

TEST(Wmd, InspectionAndLaws) {
  const EmbeddingMatrix E(3, 2, {0, 0, 1, 0, 0, 2});
  const Histogram x1({0, 1}, {0.5f, 0.5f}), x2({1, 2}, {0.5f, 0.5f});
  EXPECT_NEAR(wmd(x1, x2, E), 1.0, 1e-7);
  EXPECT_NEAR(wmd(x2, x1, E), 1.0, 1e-7);
  EXPECT_EQ(wmd(x1, x1, E), 0.0);
  EXPECT_NEAR(wmd(Histogram({0}, {1.0f}), Histogram({2}, {1.0f}), E), 2.0, 1e-7);
}

TEST(Wmd, SymmetricAndBoundedBelowByRelaxations) {
  const auto inst = synthetic::random_instance(40, 10, 100, 1, 6, 5, 8);
  const RwmdBounds b = rwmd_quadratic_bounds(inst.resident, inst.transient, inst.embeddings);
  const DistanceBlock w = wcd_block(inst.resident, inst.transient, inst.embeddings);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 10; ++j) {
      const double d = wmd(inst.resident.row(i), inst.transient.row(j), inst.embeddings);
      EXPECT_NEAR(d, wmd(inst.transient.row(j), inst.resident.row(i), inst.embeddings), 1e-6);
      EXPECT_LE(b.forward(i, j), d + 1e-4);
      EXPECT_LE(b.backward(i, j), d + 1e-4);
      EXPECT_LE(w(i, j), d + 1e-4);
    }
}

TEST(PrunedWmd, AllComputedWhenKEqualsN) {
  const auto inst = synthetic::random_instance(12, 1, 60, 1, 6, 4, 9);
  const auto r = prefiltered_topk_wmd(inst.resident, inst.transient.row(0), inst.embeddings, 12);
  EXPECT_EQ(r.exact_solves, 12u);
  EXPECT_EQ(r.top, exhaustive_topk_wmd(inst.resident, inst.transient.row(0), inst.embeddings, 12));
}

TEST(PrunedWmd, IdenticalQueryPrunesEverythingPositive) {
  const auto inst = synthetic::random_instance(100, 1, 400, 2, 6, 8, 10);
  const HistogramView q = inst.resident.row(37);
  const auto rw = lcrwmd_query(ResidentSet::build(inst.resident, inst.embeddings), inst.resident, q, inst.embeddings);
  const auto r = prefiltered_topk_wmd(inst.resident, q, inst.embeddings, 1, rw);
  ASSERT_EQ(r.top.size(), 1u);
  EXPECT_EQ(r.top[0].id, 37u);
  EXPECT_EQ(r.top[0].distance, 0.0f);
  std::size_t zero_bounds = 0;
  for (float x : rw) zero_bounds += x == 0.0f;
  EXPECT_EQ(r.exact_solves, zero_bounds);
}

TEST(PrunedWmd, MatchesExhaustiveAndPrunes) {
  for (std::uint64_t seed = 20; seed < 24; ++seed) {
    const auto inst = synthetic::random_instance(300, 1, 600, 1, 8, 8, seed);
    const HistogramView q = inst.transient.row(0);
    const auto expect = exhaustive_topk_wmd(inst.resident, q, inst.embeddings, 16);
    const auto r = prefiltered_topk_wmd(inst.resident, q, inst.embeddings, 16);
    ASSERT_EQ(r.top.size(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
      EXPECT_EQ(r.top[i].id, expect[i].id);
      EXPECT_NEAR(r.top[i].distance, expect[i].distance, 1e-6);
    }
    EXPECT_LT(r.exact_solves, 300u);
  }
}

TEST(PrunedWmd, SmallerKNeverSolvesMore) {
  const auto inst = synthetic::random_instance(200, 3, 500, 1, 8, 8, 30);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto rw = lcrwmd_query(ResidentSet::build(inst.resident, inst.embeddings), inst.resident,
                                 inst.transient.row(j), inst.embeddings);
    std::size_t prev = 0;
    for (std::size_t k : {1u, 2u, 4u, 8u, 16u, 32u}) {
      const auto r = prefiltered_topk_wmd(inst.resident, inst.transient.row(j), inst.embeddings, k, rw);
      EXPECT_GE(r.exact_solves, prev) << "k=" << k;
      prev = r.exact_solves;
    }
  }
}

TEST(PrunedWmd, ParallelWorkersGiveSameTopK) {
  const auto inst = synthetic::random_instance(200, 2, 500, 1, 8, 8, 31);
  for (std::size_t j = 0; j < 2; ++j) {
    const auto serial = prefiltered_topk_wmd(inst.resident, inst.transient.row(j), inst.embeddings, 8, 1);
    const auto par = prefiltered_topk_wmd(inst.resident, inst.transient.row(j), inst.embeddings, 8, 4);
    EXPECT_EQ(serial.top, par.top);
  }
}

TEST(PrunedWmd, ExcludedRowsNeverReturned) {
  const auto inst = synthetic::random_instance(50, 1, 200, 1, 6, 4, 32);
  const HistogramView q = inst.resident.row(3);
  const auto rw = lcrwmd_query(ResidentSet::build(inst.resident, inst.embeddings), inst.resident, q, inst.embeddings);
  const DocId skip[] = {3};
  const auto r = prefiltered_topk_wmd(inst.resident, q, inst.embeddings, 5, rw, skip);
  for (const auto& nb : r.top) EXPECT_NE(nb.id, 3u);
  EXPECT_THROW(prefiltered_topk_wmd(inst.resident, q, inst.embeddings, 0, rw), InvalidArgument);
}
