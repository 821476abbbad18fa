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

// Multi-asset market clearing.
//
// Agents bid their indifference price functions D_i and the auction solves
//
//   maximize sum_i D_i(x_i)  subject to  sum_i x_i = 0.
//
// Substituting w_i = x_i + xbar_i - r_i g gives the equivalent program in
// utilities, which is what the solver works on:
//
//   maximize r over (r, w)
//   subject to sum_i w_i + r g = sum_i x_i,  u_i(w_i) >= u_i(x_i).
//
// The clearing price is the multiplier of the balance equality, normalized
// so that the numeraire costs 1.

#ifndef DAUCTION_CLEARING_H_
#define DAUCTION_CLEARING_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dauction/model.h"
#include "dauction/orderbook.h"
#include "dauction/types.h"

namespace dauction {

// One auction: the scenario's agents holding `allocation`. Floors are the
// utilities of the current holdings.
class ClearingProblem {
 public:
  // Throws MarketError(kInvalidArgument) if the allocation has the wrong
  // shape, does not conserve the scenario's totals (1e-8), or a holding has
  // infinite disutility.
  ClearingProblem(const MarketScenario& scenario, Allocation allocation);
  explicit ClearingProblem(const MarketScenario& scenario)
      : ClearingProblem(scenario, scenario.endowments()) {}

  const MarketScenario& scenario() const { return *scenario_; }
  const Allocation& allocation() const { return allocation_; }
  // u_i(x_i) (untransformed).
  const Vector& floors() const { return floors_; }
  Vector holding(int i) const { return allocation_.row(i).transpose(); }

 private:
  const MarketScenario* scenario_;
  Allocation allocation_;
  Vector floors_;
};

struct SolverOptions {
  // Stop once the barrier duality gap m/t is below tol_surplus * max(1, |r|).
  double tol_surplus = 1e-9;
  double t_initial = 1.0;
  double t_factor = 10.0;
  // Centering stops when half the squared Newton decrement is below this.
  double newton_tol = 1e-12;
  int max_newton_iterations = 2000;
  // Iterates with |w| above this are reported as unbounded.
  double divergence_bound = 1e8;
  // Relative size of the strictly feasible start shift along g.
  double start_shift = 1e-3;
  // Tolerance of the per-agent indifference price evaluations.
  double oracle_tolerance = 1e-10;
};

struct SolverStats {
  std::string method;
  int outer_iterations = 0;
  int newton_iterations = 0;
  double duality_gap = 0.0;
  double equality_residual = 0.0;
  // |g.p - 1| before the final normalization.
  double price_normalization_error = 0.0;
  // The solver's own optimum estimate (r for the barrier, the dual value for
  // the reduced route, the book surplus for the order-book route).
  double barrier_surplus = 0.0;
};

struct ClearingOutcome {
  // xbar_i, chosen orthogonal to g (the split of the total surplus across
  // agents along g does not change any post-trade holding).
  Matrix trades;
  Vector price;
  Vector payments;             // p . xbar_i
  Allocation post_allocation;  // x_i + xbar_i - (p . xbar_i) g
  // sum_i agent_surplus. At the barrier's final iterate this is the value of
  // the feasible point with every utility constraint tight, which matches
  // the optimum to second order in the duality gap.
  double total_surplus = 0.0;
  Vector agent_surplus;  // D_i(xbar_i) - p . xbar_i
  SolverStats stats;
};

// Primal log-barrier method with equality-constrained Newton steps on the
// utility form. Cobb-Douglas agents contribute one barrier term
// -log(sum_j a_j ln w_j - c); Leontief and piecewise-linear agents
// contribute one term per linear inequality.
//
// Errors (MarketError): kUnsupportedUtility for piecewise-linear utilities
// with unbounded domain, kInfeasibleStart, kUnbounded, kMaxIterations, and
// kInvariantViolation if a post-solve check fails.
ClearingOutcome SolveClearing(const ClearingProblem& problem,
                              const SolverOptions& options = {});

// Cash-numeraire (g = e_0) Cobb-Douglas markets only: cash is settled by
// payments, so only the non-cash assets are cleared. The reduced problem is
// solved in price space, minimizing over non-cash prices q the convex dual
//
//   sum_i [ (1, q) . x_i - e_i((1, q), u_i(x_i)) ],
//
// with e_i the closed-form Cobb-Douglas expenditure function.
ClearingOutcome SolveClearingCashReduced(const ClearingProblem& problem,
                                         double tol = 1e-13);

// Exact clearing through the single-asset order book for two-asset markets
// with a cash numeraire in which every agent has a piecewise-linear
// valuation with bounded domain: each agent submits the limit orders that
// realize its valuation at its current position.
ClearingOutcome SolveClearingByOrderBook(const ClearingProblem& problem,
                                         TieRule tie_rule);

// True if SolveClearingByOrderBook accepts the scenario.
bool OrderBookRouteApplies(const MarketScenario& scenario);

// Post-solve invariants: zero net trade, numeraire price 1, nonnegative
// agent surplus, no agent worse off, conservation. Returns one message per
// violation at absolute tolerance `tol`.
std::vector<std::string> OutcomeInvariantViolations(
    const ClearingOutcome& outcome, const ClearingProblem& problem,
    double tol = 1e-8);

struct SlaterAsset {
  int buyer = -1;   // an agent with D_i(eps e_j) finite
  int seller = -1;  // an agent with D_i(-eps e_j) finite
  bool ok() const { return buyer >= 0 && seller >= 0; }
};

struct SlaterReport {
  double eps = 0.0;
  std::vector<SlaterAsset> assets;
  bool ok() const;
};

// Sufficient condition for finite perturbed optimum values near zero: every
// asset has some agent who can buy and some agent who can sell a small
// amount at a finite indifference price.
SlaterReport CheckSlater(const MarketScenario& scenario, const Allocation& x,
                         double eps = 1e-6);

struct RecessionReport {
  bool ok = false;
  std::string detail;
};

// Checks that no nonzero reallocation summing to zero is a direction of
// recession for every agent. Cobb-Douglas and Leontief agents (positive
// parameters) recede only into the positive orthant. For two-asset
// scenarios with piecewise-linear agents the recession cones are computed
// from the extension slopes and tested exactly.
RecessionReport CheckRecession(const MarketScenario& scenario);

struct KktReport {
  // max_i max_d [D_i(xbar_i + d) - D_i(xbar_i) - p.d]
  double max_supergradient_violation = 0.0;
  int worst_agent = -1;
  // ||sum_i xbar_i||_inf
  double balance_residual = 0.0;
  double price_normalization_error = 0.0;
  int directions_per_agent = 0;

  bool Passes(const Vector& price, double balance_tol = 1e-8) const;
};

// Sampled check that the price is a common supergradient of the agents'
// indifference price functions at their trades, plus market balance.
KktReport VerifyKkt(const ClearingOutcome& outcome,
                    const ClearingProblem& problem, int directions = 200,
                    std::uint64_t seed = 7);

}  // namespace dauction

#endif  // DAUCTION_CLEARING_H_
