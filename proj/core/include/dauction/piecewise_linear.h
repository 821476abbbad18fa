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

#ifndef DAUCTION_PIECEWISE_LINEAR_H_
#define DAUCTION_PIECEWISE_LINEAR_H_

#include <optional>
#include <vector>

namespace dauction {

// A concave, piecewise-linear function on the real line in breakpoint form.
//
// The function interpolates (knots[k], values[k]) linearly between knots.
// Left of the first knot it continues with `left_slope` if present and is
// -inf otherwise; right of the last knot likewise with `right_slope`. Slopes
// must be nonincreasing from left to right.
class PiecewiseLinearConcave {
 public:
  // A single knot at 0 with value 0 and no extensions: 0 at the origin, -inf
  // everywhere else.
  PiecewiseLinearConcave();

  // Throws MarketError(kInvalidArgument) when knots are not strictly
  // increasing, sizes disagree, values are not finite, or slopes increase.
  PiecewiseLinearConcave(std::vector<double> knots, std::vector<double> values,
                         std::optional<double> left_slope,
                         std::optional<double> right_slope);

  // The affine function value0 + slope * y with unbounded domain.
  static PiecewiseLinearConcave Linear(double slope, double value0 = 0.0);

  double operator()(double y) const;

  // Slope of the piece to the right (resp. left) of y; -inf (resp. +inf)
  // when the domain ends there.
  double RightSlope(double y) const;
  double LeftSlope(double y) const;

  // Slopes of the pieces from left to right, including the extensions.
  std::vector<double> Slopes() const;

  double domain_lo() const;
  double domain_hi() const;
  bool bounded() const { return !left_slope_ && !right_slope_; }

  // Same function shifted right by `offset`: result(y) = this(y - offset).
  PiecewiseLinearConcave Shifted(double offset) const;

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  const std::optional<double>& left_slope() const { return left_slope_; }
  const std::optional<double>& right_slope() const { return right_slope_; }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  std::optional<double> left_slope_;
  std::optional<double> right_slope_;
};

}  // namespace dauction

#endif  // DAUCTION_PIECEWISE_LINEAR_H_
