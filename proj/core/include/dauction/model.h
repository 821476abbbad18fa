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

// Domain types of the exchange economy: utility families, agents, scenarios
// and allocations, plus the reproducible random scenario generator.

#ifndef DAUCTION_MODEL_H_
#define DAUCTION_MODEL_H_

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "dauction/piecewise_linear.h"
#include "dauction/types.h"

namespace dauction {

// u(x) = prod_j x_j^alpha_j on the closed positive orthant. alpha_j > 0 and
// sum_j alpha_j = 1 (within 1e-12).
struct CobbDouglas {
  Vector alpha;
};

// u(x) = min_j alpha_j x_j with alpha_j > 0. Finite on all of R^J.
struct Leontief {
  Vector alpha;
};

// u(x) = x_0 + phi(x_1) on two assets: cash plus one auctioned asset whose
// valuation phi is concave and piecewise linear, e.g. aggregated from limit
// orders.
struct PiecewiseLinear {
  PiecewiseLinearConcave phi;
};

enum class UtilityKind { kCobbDouglas, kLeontief, kPiecewiseLinear };

class UtilityFunction {
 public:
  // Validates the parameters; throws MarketError(kInvalidArgument).
  explicit UtilityFunction(CobbDouglas cd);
  explicit UtilityFunction(Leontief leontief);
  explicit UtilityFunction(PiecewiseLinear pl);

  UtilityKind kind() const;
  int num_assets() const;

  const CobbDouglas* cobb_douglas() const {
    return std::get_if<CobbDouglas>(&params_);
  }
  const Leontief* leontief() const { return std::get_if<Leontief>(&params_); }
  const PiecewiseLinear* piecewise_linear() const {
    return std::get_if<PiecewiseLinear>(&params_);
  }

 private:
  std::variant<CobbDouglas, Leontief, PiecewiseLinear> params_;
};

const char* UtilityKindName(UtilityKind kind);

// u(x), or -inf outside the domain. Cobb-Douglas points with a zero
// component are on the boundary and evaluate to 0.
double UtilityValue(const UtilityFunction& u, const Vector& x);

// A strictly increasing transform of u used for all internal comparisons:
// sum_j alpha_j ln x_j for Cobb-Douglas (-inf on the boundary), u itself for
// the other families.
double UtilityLevel(const UtilityFunction& u, const Vector& x);

// Some q with u(y) <= u(x) + q.(y - x) for all y. Requires x interior to the
// domain; throws MarketError(kNotSubdifferentiable) otherwise. At Leontief
// ties the lowest minimizing coordinate is selected.
Vector UtilitySupergradient(const UtilityFunction& u, const Vector& x);

// True when x lies in the interior of dom u.
bool InDomainInterior(const UtilityFunction& u, const Vector& x);

struct AgentSpec {
  std::string id;
  UtilityFunction utility;
};

// Rows are agents, columns assets.
using Allocation = Matrix;

// The economy: agents with utilities, their endowments and the numeraire
// portfolio in which prices are quoted. Immutable; validated on construction.
class MarketScenario {
 public:
  // Throws MarketError(kInvalidArgument) when dimensions disagree, ids repeat,
  // the numeraire is zero, an endowment is outside its agent's domain, or a
  // sampled difference quotient along the numeraire is not positive.
  MarketScenario(std::vector<std::string> assets, Vector numeraire,
                 std::vector<AgentSpec> agents, Allocation endowments);

  int num_agents() const { return static_cast<int>(agents_.size()); }
  int num_assets() const { return static_cast<int>(assets_.size()); }
  const std::vector<std::string>& assets() const { return assets_; }
  const Vector& numeraire() const { return numeraire_; }
  const std::vector<AgentSpec>& agents() const { return agents_; }
  const AgentSpec& agent(int i) const { return agents_[i]; }
  const Allocation& endowments() const { return endowments_; }

  // Total endowment e = sum_i x0_i.
  Vector TotalEndowment() const;

  // A copy with the endowments replaced (e.g. by the terminal allocation of
  // a run). Validates like the constructor.
  MarketScenario WithEndowments(const Allocation& endowments) const;

 private:
  std::vector<std::string> assets_;
  Vector numeraire_;
  std::vector<AgentSpec> agents_;
  Allocation endowments_;
};

// Componentwise sum_i x_i == sum_i x0_i within `tol` (absolute).
bool IsFeasible(const MarketScenario& scenario, const Allocation& x,
                double tol = 1e-9);

// Sampled check of strict increase along g for one agent: draws `samples`
// points in the domain near `around` and tests u(x + r g) > u(x). Returns
// the number of failing samples.
int CountNumeraireMonotonicityFailures(const UtilityFunction& u,
                                       const Vector& g, const Vector& around,
                                       int samples, std::uint64_t seed);

enum class NumeraireMode { kUnitCash, kAllOnes };

// Platform-independent uniform draws. Everything random in this library goes
// through std::mt19937_64, whose output sequence the C++ standard fixes, and
// converts the top 53 bits to a double; the <random> distributions are not
// used because their algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0, 1).
  double Uniform01() {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }
  // Standard normal via Box-Muller on Uniform01.
  double Normal();
  std::uint64_t NextU64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Cobb-Douglas economy: alpha_i uniform on the unit cube scaled to the
// simplex, endowments uniform on the unit cube, numeraire e_0 or (1,...,1).
// Draw order: all alpha vectors (agent-major), then all endowments.
// Throws MarketError(kInvalidArgument) for fewer than 2 agents or assets.
MarketScenario GenerateRandomScenario(int n_agents, int n_assets,
                                      std::uint64_t seed,
                                      NumeraireMode numeraire_mode);

Vector MakeNumeraire(int n_assets, NumeraireMode mode);

}  // namespace dauction

#endif  // DAUCTION_MODEL_H_
