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

#include "dauction/orderbook.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "dauction/types.h"

namespace dauction {
namespace {

constexpr double kRelTol = 1e-12;

double QuantityTol(double scale) { return kRelTol * std::max(1.0, scale); }

// Order indices of one side sorted by price priority: descending limits for
// buys, ascending for sells. Zero-quantity orders are dropped.
std::vector<std::size_t> PriorityOrder(const std::vector<LimitOrder>& orders,
                                       Side side) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < orders.size(); ++k) {
    if (orders[k].side == side && orders[k].quantity > 0.0) idx.push_back(k);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return side == Side::kBuy ? orders[a].price > orders[b].price
                              : orders[a].price < orders[b].price;
  });
  return idx;
}

StepCurve BuildCurve(const std::vector<LimitOrder>& orders, Side side) {
  StepCurve curve{side, {}, {}};
  double cumulative = 0.0;
  for (std::size_t k : PriorityOrder(orders, side)) {
    cumulative += orders[k].quantity;
    if (!curve.levels.empty() && curve.levels.back() == orders[k].price) {
      curve.breakpoints.back() = cumulative;
    } else {
      curve.levels.push_back(orders[k].price);
      curve.breakpoints.push_back(cumulative);
    }
  }
  return curve;
}

// Fills `quantity` units on one side in price priority, pro-rata by order
// size within the marginal price level.
void AllocateFills(const std::vector<LimitOrder>& orders, Side side,
                   double quantity, std::vector<double>& fills) {
  const std::vector<std::size_t> idx = PriorityOrder(orders, side);
  const double tol = QuantityTol(quantity);
  double remaining = quantity;
  std::size_t k = 0;
  while (k < idx.size() && remaining > 0.0) {
    std::size_t end = k;
    double level_qty = 0.0;
    while (end < idx.size() && orders[idx[end]].price == orders[idx[k]].price) {
      level_qty += orders[idx[end]].quantity;
      ++end;
    }
    if (remaining >= level_qty - tol) {
      for (std::size_t m = k; m < end; ++m) {
        fills[idx[m]] = orders[idx[m]].quantity;
      }
      remaining -= level_qty;
    } else {
      const double ratio = remaining / level_qty;
      for (std::size_t m = k; m < end; ++m) {
        fills[idx[m]] = orders[idx[m]].quantity * ratio;
      }
      remaining = 0.0;
    }
    k = end;
  }
}

double PickPrice(double lo, double hi, TieRule rule) {
  switch (rule) {
    case TieRule::kLow: return lo;
    case TieRule::kHigh: return hi;
    case TieRule::kMidpoint: break;
  }
  return lo == hi ? lo : 0.5 * (lo + hi);
}

}  // namespace

const char* TieRuleName(TieRule rule) {
  switch (rule) {
    case TieRule::kMidpoint: return "midpoint";
    case TieRule::kLow: return "low";
    case TieRule::kHigh: return "high";
  }
  return "unknown";
}

LimitOrderBook::LimitOrderBook(std::vector<LimitOrder> orders,
                               Validation validation)
    : orders_(std::move(orders)) {
  std::map<std::string, std::pair<double, double>> limits;  // max buy, min sell
  for (const LimitOrder& order : orders_) {
    if (!std::isfinite(order.price)) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "order price must be finite");
    }
    if (!(order.quantity >= 0.0) || !std::isfinite(order.quantity)) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "order quantity must be finite and nonnegative");
    }
    auto [it, inserted] = limits.try_emplace(order.agent, kNegInf, kInf);
    if (order.side == Side::kBuy) {
      it->second.first = std::max(it->second.first, order.price);
    } else {
      it->second.second = std::min(it->second.second, order.price);
    }
  }
  for (const auto& [agent, bounds] : limits) {
    const bool crossed = validation == Validation::kStrict
                             ? bounds.first >= bounds.second
                             : bounds.first > bounds.second;
    if (crossed) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "agent '" + agent +
                            "' has a buy limit at or above its sell limit");
    }
  }
}

double StepCurve::At(double x) const {
  const double sign = side == Side::kSell ? 1.0 : -1.0;
  if (x <= 0.0) return -sign * kInf;
  const double tol = QuantityTol(capacity());
  // First breakpoint b with x <= b + tol.
  const auto it =
      std::lower_bound(breakpoints.begin(), breakpoints.end(), x - tol);
  if (it == breakpoints.end()) return sign * kInf;
  return levels[static_cast<std::size_t>(it - breakpoints.begin())];
}

double StepCurve::RightLimit(double x) const {
  const double sign = side == Side::kSell ? 1.0 : -1.0;
  const double tol = QuantityTol(capacity());
  const auto it =
      std::upper_bound(breakpoints.begin(), breakpoints.end(), x + tol);
  if (it == breakpoints.end()) return sign * kInf;
  return levels[static_cast<std::size_t>(it - breakpoints.begin())];
}

double StepCurve::Integral(double x) const {
  const double sign = side == Side::kSell ? 1.0 : -1.0;
  if (x <= 0.0) return 0.0;
  if (x > capacity() + QuantityTol(capacity())) return sign * kInf;
  double total = 0.0;
  double prev = 0.0;
  for (std::size_t k = 0; k < breakpoints.size() && prev < x; ++k) {
    const double upto = std::min(x, breakpoints[k]);
    total += levels[k] * (upto - prev);
    prev = breakpoints[k];
  }
  return total;
}

Curves BuildCurves(const LimitOrderBook& book) {
  return {BuildCurve(book.orders(), Side::kSell),
          BuildCurve(book.orders(), Side::kBuy)};
}

SingleAssetClearing ClearSingleAsset(const LimitOrderBook& book,
                                     TieRule tie_rule) {
  const Curves curves = BuildCurves(book);
  const StepCurve& s = curves.supply;
  const StepCurve& d = curves.demand;

  // Candidate quantities: every breakpoint up to the smaller capacity. The
  // curves are constant between consecutive candidates, so s <= d holds on a
  // whole segment or nowhere on it.
  const double reach = std::min(s.capacity(), d.capacity());
  const double tol = QuantityTol(reach);
  std::vector<double> candidates;
  for (double b : s.breakpoints) {
    if (b <= reach + tol) candidates.push_back(b);
  }
  for (double b : d.breakpoints) {
    if (b <= reach + tol) candidates.push_back(b);
  }
  std::sort(candidates.begin(), candidates.end());

  double quantity = 0.0;
  for (double b : candidates) {
    if (b <= quantity + tol) continue;
    if (s.At(b) <= d.At(b)) {
      quantity = b;
    } else {
      break;
    }
  }

  SingleAssetClearing result;
  result.quantity = quantity;
  result.fills.assign(book.orders().size(), 0.0);
  if (quantity > 0.0) {
    const double d_left = d.At(quantity);
    const double d_right = d.RightLimit(quantity);
    result.price_lo = std::max(s.At(quantity), std::min(d_left, d_right));
    result.price_hi = std::min(s.RightLimit(quantity), std::max(d_left, d_right));
    // Rounding can only invert the interval by a hair; collapse it.
    if (result.price_lo > result.price_hi) result.price_hi = result.price_lo;
    result.price = PickPrice(result.price_lo, result.price_hi, tie_rule);
    AllocateFills(book.orders(), Side::kBuy, quantity, result.fills);
    AllocateFills(book.orders(), Side::kSell, quantity, result.fills);
    result.surplus = d.Integral(quantity) - s.Integral(quantity);
  } else {
    // No trade: any price inside the spread clears the (empty) market.
    result.price_lo = d.RightLimit(0.0);
    result.price_hi = s.RightLimit(0.0);
    const bool lo_ok = std::isfinite(result.price_lo);
    const bool hi_ok = std::isfinite(result.price_hi);
    if (tie_rule == TieRule::kLow && lo_ok) {
      result.price = result.price_lo;
    } else if (tie_rule == TieRule::kHigh && hi_ok) {
      result.price = result.price_hi;
    } else if (tie_rule == TieRule::kMidpoint && lo_ok && hi_ok) {
      result.price = PickPrice(result.price_lo, result.price_hi, tie_rule);
    }
  }
  return result;
}

double SurplusOracle(const LimitOrderBook& book, double x) {
  if (x < 0.0) return kNegInf;
  const auto& orders = book.orders();
  auto greedy = [&](Side side) {
    double remaining = x;
    double value = 0.0;
    for (std::size_t k : PriorityOrder(orders, side)) {
      if (remaining <= 0.0) break;
      const double take = std::min(remaining, orders[k].quantity);
      value += orders[k].price * take;
      remaining -= take;
    }
    return remaining > QuantityTol(x) ? std::nullopt
                                      : std::optional<double>(value);
  };
  const auto revenue = greedy(Side::kBuy);
  const auto cost = greedy(Side::kSell);
  if (!revenue || !cost) return kNegInf;
  return *revenue - *cost;
}

PiecewiseLinearConcave AggregateAgentDemand(
    std::span<const LimitOrder> orders) {
  std::vector<LimitOrder> buys;
  std::vector<LimitOrder> sells;
  double max_buy = kNegInf;
  double min_sell = kInf;
  for (const LimitOrder& order : orders) {
    if (order.side == Side::kBuy) {
      max_buy = std::max(max_buy, order.price);
      if (order.quantity > 0.0) buys.push_back(order);
    } else {
      min_sell = std::min(min_sell, order.price);
      if (order.quantity > 0.0) sells.push_back(order);
    }
  }
  // Equal limits are a valuation that is linear across the origin.
  if (max_buy > min_sell) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "inconsistent orders: buy limit above sell limit");
  }
  std::stable_sort(buys.begin(), buys.end(),
                   [](const auto& a, const auto& b) { return a.price > b.price; });
  std::stable_sort(sells.begin(), sells.end(),
                   [](const auto& a, const auto& b) { return a.price < b.price; });

  // Walk outward from the origin; sells are collected right to left.
  std::vector<double> left_knots;
  std::vector<double> left_values;
  double x = 0.0;
  double v = 0.0;
  for (const LimitOrder& sell : sells) {
    x -= sell.quantity;
    v -= sell.price * sell.quantity;
    left_knots.push_back(x);
    left_values.push_back(v);
  }
  std::vector<double> knots(left_knots.rbegin(), left_knots.rend());
  std::vector<double> values(left_values.rbegin(), left_values.rend());
  knots.push_back(0.0);
  values.push_back(0.0);
  x = 0.0;
  v = 0.0;
  for (const LimitOrder& buy : buys) {
    x += buy.quantity;
    v += buy.price * buy.quantity;
    knots.push_back(x);
    values.push_back(v);
  }
  return PiecewiseLinearConcave(std::move(knots), std::move(values),
                                std::nullopt, std::nullopt);
}

std::vector<LimitOrder> OrdersFromValuation(const PiecewiseLinearConcave& phi,
                                            double y,
                                            const std::string& agent) {
  if (!phi.bounded()) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "orders need a valuation with bounded domain");
  }
  const auto& knots = phi.knots();
  const double tol = QuantityTol(std::abs(y));
  if (y < knots.front() - tol || y > knots.back() + tol) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "position outside the valuation's domain");
  }
  std::vector<LimitOrder> orders;
  // Pieces to the right of y become buys, nearest first.
  double from = y;
  for (double k : knots) {
    if (k <= from + tol) continue;
    orders.push_back({Side::kBuy, phi.RightSlope(from), k - from, agent});
    from = k;
  }
  // Pieces to the left become sells, nearest first.
  from = y;
  for (auto it = knots.rbegin(); it != knots.rend(); ++it) {
    if (*it >= from - tol) continue;
    orders.push_back({Side::kSell, phi.LeftSlope(from), from - *it, agent});
    from = *it;
  }
  return orders;
}

}  // namespace dauction
