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

// Sealed-bid double auction for a single asset paid in cash.
//
// Sell orders stacked by ascending limit price form the supply curve s(x),
// the marginal price of buying x units from the most generous sellers; buy
// orders stacked by descending limit form the demand curve d(x). The auction
// trades the largest quantity x* with s(x*) <= d(x*) at a price in
//
//   [s(x*), s(x*+)] intersected with the interval between d(x*) and d(x*+),
//
// where x*+ denotes right limits. x* also maximizes the surplus D(x) - S(x),
// with S and D the integrals of s and d (least cost of buying, greatest
// revenue from selling).

#ifndef DAUCTION_ORDERBOOK_H_
#define DAUCTION_ORDERBOOK_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dauction/piecewise_linear.h"

namespace dauction {

enum class Side { kBuy, kSell };

struct LimitOrder {
  Side side;
  double price;     // numeraire per unit
  double quantity;  // asset units, >= 0
  std::string agent;
};

class LimitOrderBook {
 public:
  enum class Validation {
    // Every agent's highest buy limit is strictly below its lowest sell.
    kStrict,
    // Equal limits allowed; used when an agent's valuation is linear across
    // its current position.
    kAllowTouching,
  };

  LimitOrderBook() = default;
  // Throws MarketError(kInvalidArgument) for negative or non-finite
  // quantities, non-finite prices, or an agent whose buy and sell limits
  // cross.
  explicit LimitOrderBook(std::vector<LimitOrder> orders,
                          Validation validation = Validation::kStrict);

  const std::vector<LimitOrder>& orders() const { return orders_; }
  bool empty() const { return orders_.empty(); }

 private:
  std::vector<LimitOrder> orders_;
};

// Piecewise-constant, monotone price curve. levels[k] applies on
// (breakpoints[k-1], breakpoints[k]] with breakpoints[-1] = 0. Beyond
// capacity() the curve is +inf (supply) or -inf (demand); at 0 it is -inf
// (supply) or +inf (demand).
struct StepCurve {
  Side side;
  std::vector<double> breakpoints;  // cumulative quantities, increasing
  std::vector<double> levels;

  double capacity() const {
    return breakpoints.empty() ? 0.0 : breakpoints.back();
  }
  // Left-continuous value at x.
  double At(double x) const;
  // Right limit at x.
  double RightLimit(double x) const;
  // Integral of the curve over [0, x]; S(x) for supply, D(x) for demand.
  // +inf / -inf beyond capacity.
  double Integral(double x) const;
};

struct Curves {
  StepCurve supply;
  StepCurve demand;
};

Curves BuildCurves(const LimitOrderBook& book);

enum class TieRule { kMidpoint, kLow, kHigh };

const char* TieRuleName(TieRule rule);

struct SingleAssetClearing {
  double quantity = 0.0;
  // Closed interval of market clearing prices. With zero quantity this is
  // the spread [best bid, best ask] and may be unbounded.
  double price_lo = 0.0;
  double price_hi = 0.0;
  // Chosen price; empty when no trade takes place and the spread is
  // unbounded on one side.
  std::optional<double> price;
  // Traded quantity per order, indexed like book.orders().
  std::vector<double> fills;
  double surplus = 0.0;
};

SingleAssetClearing ClearSingleAsset(const LimitOrderBook& book,
                                     TieRule tie_rule = TieRule::kMidpoint);

// D(x) - S(x) from a greedy assignment: buyers by descending limit, sellers
// by ascending limit. -inf when x exceeds either side's capacity.
double SurplusOracle(const LimitOrderBook& book, double x);

// The concave valuation an agent communicates with its orders: slope of each
// buy limit to the right of 0, of each sell limit to the left, most generous
// orders closest to 0. Zero at 0, -inf outside [-total sells, total buys].
// Throws MarketError(kInvalidArgument) if a buy limit exceeds a sell limit.
PiecewiseLinearConcave AggregateAgentDemand(std::span<const LimitOrder> orders);

// Inverse of AggregateAgentDemand for a valuation phi held at position y:
// one buy order per linear piece right of y and one sell per piece left of
// it. Requires the domain of phi to be bounded.
std::vector<LimitOrder> OrdersFromValuation(const PiecewiseLinearConcave& phi,
                                            double y, const std::string& agent);

}  // namespace dauction

#endif  // DAUCTION_ORDERBOOK_H_
