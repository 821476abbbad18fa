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

#include "dauction/piecewise_linear.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "dauction/types.h"

namespace dauction {
namespace {

// Relative slack allowed when checking that slopes are nonincreasing.
constexpr double kSlopeSlack = 1e-12;

}  // namespace

PiecewiseLinearConcave::PiecewiseLinearConcave()
    : knots_{0.0}, values_{0.0} {}

PiecewiseLinearConcave::PiecewiseLinearConcave(
    std::vector<double> knots, std::vector<double> values,
    std::optional<double> left_slope, std::optional<double> right_slope)
    : knots_(std::move(knots)),
      values_(std::move(values)),
      left_slope_(left_slope),
      right_slope_(right_slope) {
  if (knots_.empty() || knots_.size() != values_.size()) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "piecewise-linear function needs matching, nonempty "
                      "knots and values");
  }
  for (std::size_t k = 0; k < knots_.size(); ++k) {
    if (!std::isfinite(knots_[k]) || !std::isfinite(values_[k])) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "piecewise-linear knots and values must be finite");
    }
    if (k > 0 && !(knots_[k] > knots_[k - 1])) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "piecewise-linear knots must be strictly increasing");
    }
  }
  const std::vector<double> slopes = Slopes();
  for (std::size_t k = 1; k < slopes.size(); ++k) {
    const double scale = 1.0 + std::max(std::abs(slopes[k]),
                                        std::abs(slopes[k - 1]));
    if (slopes[k] > slopes[k - 1] + kSlopeSlack * scale) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "piecewise-linear function is not concave");
    }
  }
}

PiecewiseLinearConcave PiecewiseLinearConcave::Linear(double slope,
                                                      double value0) {
  return PiecewiseLinearConcave({0.0}, {value0}, slope, slope);
}

double PiecewiseLinearConcave::operator()(double y) const {
  if (std::isnan(y)) return kNegInf;
  if (y < knots_.front()) {
    if (!left_slope_) return kNegInf;
    return values_.front() + *left_slope_ * (y - knots_.front());
  }
  if (y > knots_.back()) {
    if (!right_slope_) return kNegInf;
    return values_.back() + *right_slope_ * (y - knots_.back());
  }
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), y);
  const std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
  if (hi == 0) return values_.front();
  if (hi == knots_.size()) return values_.back();
  const std::size_t lo = hi - 1;
  const double frac = (y - knots_[lo]) / (knots_[hi] - knots_[lo]);
  return values_[lo] + frac * (values_[hi] - values_[lo]);
}

std::vector<double> PiecewiseLinearConcave::Slopes() const {
  std::vector<double> slopes;
  if (left_slope_) slopes.push_back(*left_slope_);
  for (std::size_t k = 1; k < knots_.size(); ++k) {
    slopes.push_back((values_[k] - values_[k - 1]) /
                     (knots_[k] - knots_[k - 1]));
  }
  if (right_slope_) slopes.push_back(*right_slope_);
  return slopes;
}

double PiecewiseLinearConcave::RightSlope(double y) const {
  if (y >= knots_.back()) return right_slope_ ? *right_slope_ : kNegInf;
  if (y < knots_.front()) return left_slope_ ? *left_slope_ : kNegInf;
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), y);
  const std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
  return (values_[hi] - values_[hi - 1]) / (knots_[hi] - knots_[hi - 1]);
}

double PiecewiseLinearConcave::LeftSlope(double y) const {
  if (y <= knots_.front()) return left_slope_ ? *left_slope_ : kInf;
  if (y > knots_.back()) return right_slope_ ? *right_slope_ : kInf;
  const auto it = std::lower_bound(knots_.begin(), knots_.end(), y);
  const std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
  return (values_[hi] - values_[hi - 1]) / (knots_[hi] - knots_[hi - 1]);
}

double PiecewiseLinearConcave::domain_lo() const {
  return left_slope_ ? kNegInf : knots_.front();
}

double PiecewiseLinearConcave::domain_hi() const {
  return right_slope_ ? kInf : knots_.back();
}

PiecewiseLinearConcave PiecewiseLinearConcave::Shifted(double offset) const {
  std::vector<double> knots = knots_;
  for (double& k : knots) k += offset;
  return PiecewiseLinearConcave(std::move(knots), values_, left_slope_,
                                right_slope_);
}

}  // namespace dauction
