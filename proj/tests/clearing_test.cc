// Copyright 2026 The dauction Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dauction/clearing.h"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "dauction/indifference.h"
#include "test_support.h"

namespace dauction {
namespace {

Vector V(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

UtilityFunction Cd(const Vector& alpha) {
  return UtilityFunction(CobbDouglas{alpha});
}

MarketScenario TwoAgentCd(const Vector& a1, const Vector& a2, const Vector& x1,
                          const Vector& x2) {
  Allocation x0(2, 2);
  x0.row(0) = x1.transpose();
  x0.row(1) = x2.transpose();
  return MarketScenario({"cash", "good"}, V({1, 0}),
                        {{"a", Cd(a1)}, {"b", Cd(a2)}}, x0);
}

MarketScenario QuasiLinear(const std::vector<PiecewiseLinearConcave>& phis,
                           const Allocation& x0) {
  std::vector<AgentSpec> agents;
  for (std::size_t i = 0; i < phis.size(); ++i) {
    agents.push_back(
        {"q" + std::to_string(i), UtilityFunction(PiecewiseLinear{phis[i]})});
  }
  return MarketScenario({"cash", "good"}, V({1, 0}), agents, x0);
}

// Exact two-agent quasi-linear optimum: sum phi_i(y_i) over y_1 + y_2 = E is
// piecewise linear in y_1, so its maximum sits at a breakpoint of phi_1 or at
// E minus a breakpoint of phi_2.
double TwoAgentQuasiLinearSurplus(const PiecewiseLinearConcave& phi1,
                                  const PiecewiseLinearConcave& phi2, double y1,
                                  double y2) {
  const double total = y1 + y2;
  std::vector<double> candidates = phi1.knots();
  for (double z : phi2.knots()) candidates.push_back(total - z);
  // Rounding in total - a can step just outside a domain end; the ends
  // themselves are breakpoints, so clamping loses nothing.
  const double lo = std::max(phi1.domain_lo(), total - phi2.domain_hi());
  const double hi = std::min(phi1.domain_hi(), total - phi2.domain_lo());
  double best = kNegInf;
  for (double a : candidates) {
    if (a < lo - 1e-12 || a > hi + 1e-12) continue;
    a = std::clamp(a, lo, hi);
    const double b =
        std::clamp(total - a, phi2.domain_lo(), phi2.domain_hi());
    best = std::max(best, phi1(a) + phi2(b));
  }
  return best - phi1(y1) - phi2(y2);
}

TEST(SolveClearing, TwoAgentCobbDouglasMatchesGrid) {
  const MarketScenario sc =
      TwoAgentCd(V({0.5, 0.5}), V({0.5, 0.5}), V({2, 1}), V({1, 2}));
  const ClearingProblem problem(sc);
  const ClearingOutcome out = SolveClearing(problem);
  EXPECT_TRUE(OutcomeInvariantViolations(out, problem).empty());
  // Equal marginal rates of substitution where each agent is indifferent,
  // i.e. after handing back its share of the surplus.
  Allocation w = out.post_allocation;
  w.col(0) -= out.agent_surplus;
  EXPECT_NEAR(w(0, 1) / w(0, 0), w(1, 1) / w(1, 0), 1e-6);
  const double grid = testing::GridSurplus(V({0.5, 0.5}), V({0.5, 0.5}),
                                           V({2, 1}), V({1, 2}), 1e-5);
  EXPECT_NEAR(out.total_surplus, grid, 1e-7);
  EXPECT_GE(out.total_surplus, grid - 1e-9);
}

TEST(SolveClearing, GridAgreementOnRandomPairs) {
  Rng rng(101);
  for (int s = 0; s < 5; ++s) {
    const Vector a1 = testing::RandomSimplex(rng, 2);
    const Vector a2 = testing::RandomSimplex(rng, 2);
    const Vector x1 = testing::RandomPositive(rng, 2, 0.2, 2.0);
    const Vector x2 = testing::RandomPositive(rng, 2, 0.2, 2.0);
    const ClearingOutcome out =
        SolveClearing(ClearingProblem(TwoAgentCd(a1, a2, x1, x2)));
    const double grid = testing::GridSurplus(a1, a2, x1, x2, 1e-4);
    EXPECT_NEAR(out.total_surplus, grid, 1e-6) << "pair " << s;
  }
}

TEST(SolveClearing, EquilibriumHasNoSurplus) {
  // Proportional holdings with common preferences: marginal rates agree.
  const MarketScenario sc =
      TwoAgentCd(V({0.3, 0.7}), V({0.3, 0.7}), V({1, 1}), V({2, 2}));
  const ClearingOutcome out = SolveClearing(ClearingProblem(sc));
  EXPECT_LE(std::abs(out.total_surplus), 1e-8);
  EXPECT_LE(out.trades.cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_NEAR(out.price[1], 0.7 / 0.3, 1e-6);
}

TEST(SolveClearing, SingleAgentDoesNotTrade) {
  Allocation x0(1, 2);
  x0 << 1, 2;
  const MarketScenario sc({"cash", "good"}, V({1, 0}),
                          {{"solo", Cd(V({0.4, 0.6}))}}, x0);
  const ClearingOutcome out = SolveClearing(ClearingProblem(sc));
  EXPECT_EQ(out.total_surplus, 0.0);
  EXPECT_TRUE(out.trades.isZero(0.0));
  EXPECT_EQ(out.post_allocation, x0);
  EXPECT_NEAR(out.price.dot(sc.numeraire()), 1.0, 1e-15);
}

TEST(SolveClearing, DualEstimateMatchesPrimal) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const MarketScenario sc =
        GenerateRandomScenario(10, 3, seed, NumeraireMode::kUnitCash);
    const ClearingProblem problem(sc);
    const ClearingOutcome out = SolveClearing(problem);
    EXPECT_NEAR(out.stats.barrier_surplus, out.total_surplus, 1e-7)
        << "seed " << seed;
    EXPECT_TRUE(OutcomeInvariantViolations(out, problem).empty());
    EXPECT_GE(out.agent_surplus.minCoeff(), -1e-9);
    for (int i = 0; i < sc.num_agents(); ++i) {
      const Vector post = out.post_allocation.row(i).transpose();
      EXPECT_GE(UtilityValue(sc.agent(i).utility, post),
                problem.floors()[i] - 1e-9);
    }
  }
}

TEST(SolveClearing, AllOnesNumeraire) {
  // The surplus is paid in a different bundle, so the optimum moves along
  // the contract curve; both runs must still verify.
  const MarketScenario cash =
      GenerateRandomScenario(6, 3, 4, NumeraireMode::kUnitCash);
  const MarketScenario ones = MarketScenario(
      cash.assets(), MakeNumeraire(3, NumeraireMode::kAllOnes), cash.agents(),
      cash.endowments());
  for (const MarketScenario* sc : {&cash, &ones}) {
    const ClearingProblem problem(*sc);
    const ClearingOutcome out = SolveClearing(problem);
    EXPECT_GT(out.total_surplus, 0.0);
    EXPECT_NEAR(out.price.dot(sc->numeraire()), 1.0, 1e-12);
    EXPECT_TRUE(VerifyKkt(out, problem).Passes(out.price));
  }
}

TEST(VerifyKkt, PassesAtTheSolutionAndCatchesAWrongPrice) {
  const MarketScenario sc =
      GenerateRandomScenario(10, 3, 2, NumeraireMode::kUnitCash);
  const ClearingProblem problem(sc);
  const ClearingOutcome out = SolveClearing(problem);
  const KktReport good = VerifyKkt(out, problem);
  EXPECT_TRUE(good.Passes(out.price));
  EXPECT_EQ(good.directions_per_agent, 200);
  EXPECT_LE(good.balance_residual, 1e-8);
  for (int j = 1; j < 3; ++j) {
    ClearingOutcome bad = out;
    bad.price[j] += 0.1;
    const KktReport r = VerifyKkt(bad, problem);
    EXPECT_FALSE(r.Passes(bad.price)) << "asset " << j;
    EXPECT_GT(r.max_supergradient_violation, 1e-6);
  }
  ClearingOutcome unbalanced = out;
  unbalanced.trades(0, 1) += 1e-6;
  EXPECT_FALSE(VerifyKkt(unbalanced, problem).Passes(unbalanced.price));
}

TEST(SolveClearingCashReduced, AgreesWithBarrier) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const MarketScenario sc =
        GenerateRandomScenario(10, 3, seed, NumeraireMode::kUnitCash);
    const ClearingProblem problem(sc);
    const ClearingOutcome direct = SolveClearing(problem);
    const ClearingOutcome reduced = SolveClearingCashReduced(problem);
    EXPECT_NEAR(direct.total_surplus, reduced.total_surplus, 1e-8);
    EXPECT_LE((direct.price - reduced.price).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_TRUE(OutcomeInvariantViolations(reduced, problem).empty());
  }
}

TEST(SolveClearingCashReduced, RejectsOtherNumeraires) {
  const MarketScenario sc =
      GenerateRandomScenario(3, 3, 1, NumeraireMode::kAllOnes);
  EXPECT_THROW(SolveClearingCashReduced(ClearingProblem(sc)), MarketError);
}

TEST(SolveClearing, LeontiefWithAllOnesNumeraire) {
  Allocation x0(2, 2);
  x0 << 3, 1, 1, 3;
  const MarketScenario sc({"a", "b"}, V({1, 1}),
                          {{"l1", UtilityFunction(Leontief{V({1, 1})})},
                           {"l2", UtilityFunction(Leontief{V({1, 1})})}},
                          x0);
  const ClearingProblem problem(sc);
  const ClearingOutcome out = SolveClearing(problem);
  EXPECT_TRUE(OutcomeInvariantViolations(out, problem).empty());
  // Both agents can reach (2, 2) and still share the excess: u rises from 1
  // to 2 each, so the total surplus in units of (1, 1) is 2.
  EXPECT_NEAR(out.total_surplus, 2.0, 1e-6);
  EXPECT_TRUE(VerifyKkt(out, problem).Passes(out.price));
}

TEST(SolveClearingByOrderBook, MatchesExactQuasiLinearOptimum) {
  Rng rng(103);
  for (int s = 0; s < 50; ++s) {
    const PiecewiseLinearConcave phi1 = testing::RandomValuation(rng, 2.0, 4);
    const PiecewiseLinearConcave phi2 = testing::RandomValuation(rng, 2.0, 4);
    const double y1 = rng.Uniform(phi1.domain_lo() + 0.1, phi1.domain_hi() - 0.1);
    const double y2 = rng.Uniform(phi2.domain_lo() + 0.1, phi2.domain_hi() - 0.1);
    Allocation x0(2, 2);
    x0 << 5, y1, 5, y2;
    const MarketScenario sc = QuasiLinear({phi1, phi2}, x0);
    ASSERT_TRUE(OrderBookRouteApplies(sc));
    const ClearingProblem problem(sc);
    const ClearingOutcome book =
        SolveClearingByOrderBook(problem, TieRule::kMidpoint);
    const double exact = TwoAgentQuasiLinearSurplus(phi1, phi2, y1, y2);
    EXPECT_NEAR(book.total_surplus, exact, 1e-9) << "case " << s;
    EXPECT_TRUE(OutcomeInvariantViolations(book, problem).empty());
    // The barrier reaches the same value through a different program.
    const ClearingOutcome barrier = SolveClearing(problem);
    EXPECT_NEAR(barrier.total_surplus, exact, 1e-6) << "case " << s;
  }
}

TEST(SolveClearingByOrderBook, RejectsOtherScenarios) {
  const MarketScenario sc =
      GenerateRandomScenario(3, 2, 1, NumeraireMode::kUnitCash);
  EXPECT_FALSE(OrderBookRouteApplies(sc));
  try {
    SolveClearingByOrderBook(ClearingProblem(sc), TieRule::kMidpoint);
    FAIL() << "expected an error";
  } catch (const MarketError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedUtility);
  }
}

TEST(SolveClearing, UnboundedValuationIsUnsupported) {
  Allocation x0(2, 2);
  x0 << 1, 1, 1, 1;
  const MarketScenario sc = QuasiLinear(
      {PiecewiseLinearConcave::Linear(1.0), PiecewiseLinearConcave::Linear(2.0)},
      x0);
  try {
    SolveClearing(ClearingProblem(sc));
    FAIL() << "expected an error";
  } catch (const MarketError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedUtility);
  }
}

TEST(SolveClearing, HoldingOnTheDomainEdgeHasNoStrictStart) {
  const PiecewiseLinearConcave phi({0.0, 1.0, 2.0}, {0.0, 3.0, 4.0},
                                   std::nullopt, std::nullopt);
  Allocation x0(2, 2);
  x0 << 1, 1.5, 1, 1.5;
  const MarketScenario sc = QuasiLinear({phi, phi}, x0);
  Allocation edge(2, 2);
  edge << 1, 2, 1, 1;
  try {
    SolveClearing(ClearingProblem(sc, edge));
    FAIL() << "expected an error";
  } catch (const MarketError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleStart);
    EXPECT_NE(std::string(e.what()).find("infeasible-start"), std::string::npos);
  }
}

TEST(ClearingProblem, RejectsNonConservingAllocation) {
  const MarketScenario sc =
      GenerateRandomScenario(3, 2, 1, NumeraireMode::kUnitCash);
  Allocation x = sc.endowments();
  x(0, 0) += 1e-6;
  EXPECT_THROW(ClearingProblem(sc, x), MarketError);
}

TEST(CheckSlater, RandomScenarioHasBuyersAndSellers) {
  const MarketScenario sc =
      GenerateRandomScenario(5, 3, 3, NumeraireMode::kUnitCash);
  const SlaterReport r = CheckSlater(sc, sc.endowments());
  EXPECT_TRUE(r.ok());
  ASSERT_EQ(r.assets.size(), 3u);
  EXPECT_EQ(r.eps, 1e-6);
}

TEST(CheckSlater, UnownedAssetHasNoSeller) {
  const MarketScenario sc =
      GenerateRandomScenario(3, 3, 3, NumeraireMode::kUnitCash);
  Allocation x = sc.endowments();
  x.col(2).setZero();
  const SlaterReport r = CheckSlater(sc, x);
  EXPECT_FALSE(r.ok());
  EXPECT_GE(r.assets[2].buyer, 0);
  EXPECT_EQ(r.assets[2].seller, -1);
  EXPECT_TRUE(r.assets[1].ok());
}

TEST(CheckRecession, Families) {
  EXPECT_TRUE(CheckRecession(
                  GenerateRandomScenario(4, 3, 1, NumeraireMode::kUnitCash))
                  .ok);
  Allocation x0(2, 2);
  x0 << 1, 1, 1, 1;
  const MarketScenario bounded = QuasiLinear(
      {PiecewiseLinearConcave({0.0, 2.0}, {0.0, 2.0}, std::nullopt,
                              std::nullopt),
       PiecewiseLinearConcave({0.0, 2.0}, {0.0, 4.0}, std::nullopt,
                              std::nullopt)},
      x0);
  EXPECT_TRUE(CheckRecession(bounded).ok);
  // Linear valuations of slope 1 leave a whole half-plane of free trades.
  const MarketScenario linear = QuasiLinear(
      {PiecewiseLinearConcave::Linear(1.0), PiecewiseLinearConcave::Linear(1.0)},
      x0);
  const RecessionReport r = CheckRecession(linear);
  EXPECT_FALSE(r.ok);
  EXPECT_FALSE(r.detail.empty());
}

}  // namespace
}  // namespace dauction
