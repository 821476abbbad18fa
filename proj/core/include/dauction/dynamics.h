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

// Repeated double auctions. Round t clears the market at x^{t-1} and moves
// every agent to its post-trade holding
//
//   x^t_i = x^{t-1}_i + xbar^t_i - (p^t . xbar^t_i) g.
//
// Surpluses are nonincreasing, utilities nondecreasing, and with per-agent
// constants delta_i (u_i(x + r g) >= u_i(x) + delta_i r on a ball holding
// the iterates)
//
//   sum_{s<t} CS(x^s) <= sum_i (u_i(x^t) - u_i(x^0)) / delta_i,
//
// so CS(x^t) decays at least like 1/t.

#ifndef DAUCTION_DYNAMICS_H_
#define DAUCTION_DYNAMICS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dauction/clearing.h"
#include "dauction/model.h"
#include "dauction/orderbook.h"
#include "dauction/types.h"

namespace dauction {

struct RunOptions {
  int max_rounds = 100;
  double cs_stop = 1e-3;
  // Only used by the order-book route (two assets, cash numeraire, bounded
  // piecewise-linear valuations); barrier prices are unique.
  TieRule tie_rule = TieRule::kMidpoint;
  SolverOptions solver;
};

// Clears one auction, choosing the order-book route when it applies and the
// barrier solver otherwise.
ClearingOutcome ClearRound(const ClearingProblem& problem,
                           const RunOptions& options);

struct RoundRecord {
  int t = 0;
  Allocation allocation;  // x^t
  ClearingOutcome outcome;  // the auction at x^{t-1}
  double cs = 0.0;          // CS(x^{t-1})
  // sum_i ln u_i(x^t); NaN when some utility is not positive.
  double sum_ln_u = 0.0;
  double e_dot_p = 0.0;       // total endowment . p^t
  double delta_x_norm = 0.0;  // ||x^t - x^{t-1}||_2 over all entries
  Vector price;
};

enum class StopReason { kConverged, kMaxRounds };

const char* StopReasonName(StopReason reason);

struct AuctionTrace {
  Allocation initial;  // x^0
  std::vector<RoundRecord> rounds;
  StopReason stop = StopReason::kMaxRounds;

  const Allocation& final_allocation() const {
    return rounds.empty() ? initial : rounds.back().allocation;
  }
};

// Runs auctions from the scenario's endowments until CS < cs_stop (checked
// after each round) or max_rounds rounds. Solver errors are rethrown with
// the round index prefixed.
AuctionTrace RunAuctions(const MarketScenario& scenario,
                         const RunOptions& options = {});

// Monotone surplus, monotone utilities, conservation, individual rationality
// and, for Cobb-Douglas scenarios, holdings inside the box (0, e]. One
// message per violation.
std::vector<std::string> TraceInvariantViolations(
    const MarketScenario& scenario, const AuctionTrace& trace);

// Radius covering the trace for delta estimation: twice the largest
// per-agent Euclidean norm of any holding, and at least the largest
// per-agent surplus.
double DeltaRadius(const AuctionTrace& trace);

// delta_i = 0.9 * min [u_i(x + r g) - u_i(x)] / r over `samples` uniform
// points of the ball of radius r intersected with dom u_i; the safety
// factor is skipped when all quotients agree to 1e-12 (linear along g).
// Throws MarketError(kDeltaNonpositive) when an estimate is not positive.
Vector EstimateDelta(const MarketScenario& scenario, double radius,
                     int samples = 4096, std::uint64_t seed = 11);

struct BoundRow {
  int t = 0;
  double rhs = 0.0;         // sum_i (u_i(x^t) - u_i(x^0)) / delta_i
  double cumulative = 0.0;  // sum_{s<t} CS(x^s)
  // CS(x^t), the surplus of round t + 1; NaN on the last round.
  double next_cs = 0.0;
};

struct BoundReport {
  std::vector<BoundRow> rows;
  // min over t of rhs_t / t - CS(x^t)
  double min_rate_margin = kInf;
  // min over t of rhs_t - sum_{s<t} CS(x^s)
  double min_summed_margin = kInf;
  // min over t of rhs_T - t CS(x^t), with T the last round
  double min_final_margin = kInf;
  bool ok = true;
};

// Checks the 1/t bound, its summed form, and t CS(x^t) <= rhs_T at every
// round with slack 1e-9 * (1 + rhs).
BoundReport ConvergenceBoundCheck(const MarketScenario& scenario,
                                  const AuctionTrace& trace,
                                  const Vector& delta);

struct EquilibriumCertificate {
  Allocation allocation;
  double cs = 0.0;
  Vector price;
  bool zero_trade_optimal = false;
  // D_i(y) <= p . y + tol on sampled y for every agent.
  bool common_supergradient = false;
  double max_supergradient_excess = 0.0;
  // u_i(x_i) >= u_i(x0_i) - 1e-9 against the scenario's endowments.
  bool individually_rational = false;
  // cs / sum_i |u_i(x0_i)|
  double cs_ratio = 0.0;

  bool valid() const {
    return zero_trade_optimal && common_supergradient && individually_rational;
  }
};

EquilibriumCertificate CertifyEquilibrium(const MarketScenario& scenario,
                                          const Allocation& x,
                                          double tol = 1e-3,
                                          const RunOptions& options = {},
                                          int samples = 200,
                                          std::uint64_t seed = 5);

// Per-round CSV: header t,cs,sum_ln_u,e_dot_p,delta_x_norm,p_0,...; numbers
// in %.17g so rows parse back exactly.
void WriteTraceCsv(std::ostream& os, const MarketScenario& scenario,
                   const AuctionTrace& trace);

struct CsvRow {
  int t = 0;
  double cs = 0.0;
  double sum_ln_u = 0.0;
  double e_dot_p = 0.0;
  double delta_x_norm = 0.0;
  Vector price;
};

// Throws MarketError(kParse) with the offending line number.
std::vector<CsvRow> ReadTraceCsv(std::istream& is);

}  // namespace dauction

#endif  // DAUCTION_DYNAMICS_H_
