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

#ifndef DAUCTION_TYPES_H_
#define DAUCTION_TYPES_H_

#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dauction {

using Vector = Eigen::VectorXd;
// Rows are agents, columns are assets.
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class ErrorCode {
  kInvalidArgument,
  kNotSubdifferentiable,
  kNumeraireMonotonicity,
  kUnbounded,
  kInfeasibleStart,
  kMaxIterations,
  kUnsupportedUtility,
  kInvariantViolation,
  kDeltaNonpositive,
  kParse,
};

const char* ErrorCodeName(ErrorCode code);

// All library failures are reported through this exception type. The code
// lets callers (the CLI in particular) map failures to exit statuses without
// parsing messages.
class MarketError : public std::runtime_error {
 public:
  MarketError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dauction

#endif  // DAUCTION_TYPES_H_
