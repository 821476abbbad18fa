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

#ifndef DAUCTION_INDIFFERENCE_H_
#define DAUCTION_INDIFFERENCE_H_

#include <cstdint>
#include <optional>

#include "dauction/model.h"
#include "dauction/types.h"

namespace dauction {

// The indifference (reservation) price function of one agent:
//
//   D(x) = sup { r : u(x0 + x - r g) >= u(x0) },
//
// the largest payment, in units of the numeraire portfolio g, the agent
// accepts for the portfolio x without losing utility. D is concave, D(0) = 0
// and D(x + r g) = D(x) + r.
class IndifferenceOracle {
 public:
  // Throws MarketError(kInvalidArgument) if u(x0) is not finite or the
  // dimensions disagree.
  IndifferenceOracle(UtilityFunction utility, Vector endowment,
                     Vector numeraire, double tolerance = 1e-10);

  // D(x), -inf when x is outside dom D. Solved by bracketing and bisection
  // to |dr| <= tolerance; the returned r is always on the feasible side.
  // Quasi-linear utilities with a cash numeraire are evaluated in closed
  // form. Throws MarketError(kNumeraireMonotonicity) when no upper bracket
  // exists.
  double ReservationPrice(const Vector& x) const;

  // p = q / (q.g) for a utility supergradient q at the indifference point
  // x0 + x - D(x) g. p is a supergradient of D at x and p.g = 1.
  Vector ReservationSupergradient(const Vector& x) const;

  const UtilityFunction& utility() const { return utility_; }
  const Vector& endowment() const { return endowment_; }
  const Vector& numeraire() const { return numeraire_; }
  double tolerance() const { return tolerance_; }

 private:
  bool Acceptable(const Vector& y) const;
  // Some r with base - r g acceptable when the acceptable r form a bounded
  // below interval, as for piecewise-linear utilities whose numeraire moves
  // the valued asset. Empty when no such anchor is known.
  std::optional<double> Anchor(const Vector& base) const;

  UtilityFunction utility_;
  Vector endowment_;
  Vector numeraire_;
  double tolerance_;
  double floor_value_;
  double floor_level_;
  bool quasi_linear_cash_;
};

struct TranslationReport {
  int samples = 0;
  int translation_violations = 0;
  int concavity_violations = 0;
  double max_translation_error = 0.0;
  double max_concavity_violation = 0.0;

  bool ok() const {
    return translation_violations == 0 && concavity_violations == 0;
  }
};

// Samples random trades x, y and shifts r and checks D(x + r g) = D(x) + r
// within 10 * tolerance and D((x + y) / 2) >= (D(x) + D(y)) / 2 within the
// same slack. Trades are drawn per coordinate in +-`spread` times
// max(|x0_j|, 0.1).
TranslationReport CheckTranslation(const IndifferenceOracle& oracle,
                                   int samples, std::uint64_t seed,
                                   double spread = 0.9);

}  // namespace dauction

#endif  // DAUCTION_INDIFFERENCE_H_
