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

#include "dauction/indifference.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace dauction {
namespace {

constexpr int kMaxDoublings = 60;
constexpr int kMaxBisections = 60;

}  // namespace

IndifferenceOracle::IndifferenceOracle(UtilityFunction utility,
                                       Vector endowment, Vector numeraire,
                                       double tolerance)
    : utility_(std::move(utility)),
      endowment_(std::move(endowment)),
      numeraire_(std::move(numeraire)),
      tolerance_(tolerance) {
  const int n = utility_.num_assets();
  if (endowment_.size() != n || numeraire_.size() != n) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "indifference oracle dimensions disagree");
  }
  if (!(tolerance_ > 0.0)) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "indifference tolerance must be positive");
  }
  floor_value_ = UtilityValue(utility_, endowment_);
  floor_level_ = UtilityLevel(utility_, endowment_);
  if (!std::isfinite(floor_value_)) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "endowment utility is not finite");
  }
  quasi_linear_cash_ = utility_.piecewise_linear() != nullptr &&
                       numeraire_[0] > 0.0 && numeraire_[1] == 0.0;
}

bool IndifferenceOracle::Acceptable(const Vector& y) const {
  // A Cobb-Douglas endowment on the boundary has log-utility -inf; compare
  // untransformed values there so points outside the orthant still fail.
  if (floor_level_ == kNegInf) return UtilityValue(utility_, y) >= floor_value_;
  return UtilityLevel(utility_, y) >= floor_level_;
}

double IndifferenceOracle::ReservationPrice(const Vector& x) const {
  if (x.isZero(0.0)) return 0.0;
  if (!x.allFinite()) return kNegInf;

  if (quasi_linear_cash_) {
    const auto& phi = utility_.piecewise_linear()->phi;
    const double gain = phi(endowment_[1] + x[1]);
    if (gain == kNegInf) return kNegInf;
    return (x[0] + gain - phi(endowment_[1])) / numeraire_[0];
  }

  const Vector base = endowment_ + x;
  auto feasible = [&](double r) { return Acceptable(base - r * numeraire_); };

  // The acceptable r form an interval whose upper end is D(x).
  const double scale = 1.0 + x.cwiseAbs().maxCoeff();
  double lo = -scale;
  if (!feasible(lo)) {
    if (const auto anchor = Anchor(base)) lo = *anchor;
  }
  double hi = lo;
  int doublings = 0;
  if (feasible(lo)) {
    double step = scale;
    hi = lo + step;
    while (feasible(hi)) {
      lo = hi;
      step *= 2.0;
      hi = lo + step;
      if (++doublings > kMaxDoublings) {
        throw MarketError(ErrorCode::kNumeraireMonotonicity,
                          "numeraire monotonicity violated");
      }
    }
  } else {
    while (!feasible(lo)) {
      hi = lo;
      lo *= 2.0;
      if (++doublings > kMaxDoublings) return kNegInf;
    }
  }
  // lo is feasible, hi is not; the feasible set is (-inf, D].
  for (int it = 0; it < kMaxBisections + doublings; ++it) {
    if (hi - lo <= tolerance_) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::optional<double> IndifferenceOracle::Anchor(const Vector& base) const {
  const auto* pl = utility_.piecewise_linear();
  if (pl == nullptr || numeraire_[1] == 0.0) return std::nullopt;
  // Along r the utility is base_0 - r g_0 + phi(base_1 - r g_1); with
  // z = base_1 - r g_1 it is concave piecewise linear in z, so its maximum
  // over the domain sits at a knot unless it is unbounded, which the
  // doubling search already handles. Midpoints of adjacent knots cover a
  // maximum at a domain end that rounding pushes outside.
  const std::vector<double>& knots = pl->phi.knots();
  std::vector<double> candidates = knots;
  for (std::size_t k = 1; k < knots.size(); ++k) {
    candidates.push_back(0.5 * (knots[k - 1] + knots[k]));
  }
  std::optional<double> best_r;
  double best = kNegInf;
  for (double z : candidates) {
    const double r = (base[1] - z) / numeraire_[1];
    const Vector y = base - r * numeraire_;
    const double value = UtilityLevel(utility_, y);
    if (value > best && Acceptable(y)) {
      best = value;
      best_r = r;
    }
  }
  return best_r;
}

Vector IndifferenceOracle::ReservationSupergradient(const Vector& x) const {
  const double price = ReservationPrice(x);
  if (price == kNegInf) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "trade is outside the domain of the reservation price");
  }
  const Vector point = endowment_ + x - price * numeraire_;
  const Vector q = UtilitySupergradient(utility_, point);
  const double qg = q.dot(numeraire_);
  if (!(qg > 0.0)) {
    throw MarketError(ErrorCode::kNumeraireMonotonicity,
                      "numeraire monotonicity violated");
  }
  return q / qg;
}

TranslationReport CheckTranslation(const IndifferenceOracle& oracle,
                                   int samples, std::uint64_t seed,
                                   double spread) {
  Rng rng(seed);
  const Vector& x0 = oracle.endowment();
  const Vector& g = oracle.numeraire();
  const Eigen::Index n = x0.size();
  const double slack = 10.0 * oracle.tolerance();
  auto draw_trade = [&]() {
    Vector x(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      x[j] = spread * std::max(std::abs(x0[j]), 0.1) * (2.0 * rng.Uniform01() - 1.0);
    }
    return x;
  };

  TranslationReport report;
  report.samples = samples;
  for (int s = 0; s < samples; ++s) {
    const Vector x = draw_trade();
    const Vector y = draw_trade();
    const double r = (2.0 * rng.Uniform01() - 1.0) * (1.0 + x0.cwiseAbs().maxCoeff());

    const double dx = oracle.ReservationPrice(x);
    const double dxr = oracle.ReservationPrice(x + r * g);
    if (dx == kNegInf || dxr == kNegInf) {
      if (dx != dxr) ++report.translation_violations;
    } else {
      const double err = std::abs(dxr - (dx + r));
      report.max_translation_error = std::max(report.max_translation_error, err);
      if (err > slack) ++report.translation_violations;
    }

    const double dy = oracle.ReservationPrice(y);
    if (dx != kNegInf && dy != kNegInf) {
      const double dmid = oracle.ReservationPrice(0.5 * (x + y));
      const double violation = 0.5 * (dx + dy) - dmid;
      report.max_concavity_violation =
          std::max(report.max_concavity_violation, violation);
      if (violation > slack) ++report.concavity_violations;
    }
  }
  return report;
}

}  // namespace dauction
