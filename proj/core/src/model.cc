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

#include "dauction/model.h"

#include <cmath>
#include <numbers>
#include <set>
#include <utility>

namespace dauction {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kNotSubdifferentiable: return "not-subdifferentiable";
    case ErrorCode::kNumeraireMonotonicity: return "numeraire-monotonicity";
    case ErrorCode::kUnbounded: return "unbounded";
    case ErrorCode::kInfeasibleStart: return "infeasible-start";
    case ErrorCode::kMaxIterations: return "max-iterations";
    case ErrorCode::kUnsupportedUtility: return "unsupported-utility";
    case ErrorCode::kInvariantViolation: return "invariant-violation";
    case ErrorCode::kDeltaNonpositive: return "delta-nonpositive";
    case ErrorCode::kParse: return "parse";
  }
  return "unknown";
}

namespace {

void CheckPositive(const Vector& alpha, const char* family) {
  if (alpha.size() < 1) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      std::string(family) + " needs at least one parameter");
  }
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        std::string(family) +
                            " parameters must be finite and positive");
    }
  }
}

}  // namespace

UtilityFunction::UtilityFunction(CobbDouglas cd) : params_(std::move(cd)) {
  const Vector& alpha = std::get<CobbDouglas>(params_).alpha;
  CheckPositive(alpha, "Cobb-Douglas");
  if (std::abs(alpha.sum() - 1.0) > 1e-12) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "Cobb-Douglas exponents must sum to 1");
  }
}

UtilityFunction::UtilityFunction(Leontief leontief)
    : params_(std::move(leontief)) {
  CheckPositive(std::get<Leontief>(params_).alpha, "Leontief");
}

UtilityFunction::UtilityFunction(PiecewiseLinear pl) : params_(std::move(pl)) {}

UtilityKind UtilityFunction::kind() const {
  switch (params_.index()) {
    case 0: return UtilityKind::kCobbDouglas;
    case 1: return UtilityKind::kLeontief;
    default: return UtilityKind::kPiecewiseLinear;
  }
}

int UtilityFunction::num_assets() const {
  if (const auto* cd = cobb_douglas()) return static_cast<int>(cd->alpha.size());
  if (const auto* le = leontief()) return static_cast<int>(le->alpha.size());
  return 2;
}

const char* UtilityKindName(UtilityKind kind) {
  switch (kind) {
    case UtilityKind::kCobbDouglas: return "cobb_douglas";
    case UtilityKind::kLeontief: return "leontief";
    case UtilityKind::kPiecewiseLinear: return "piecewise_linear";
  }
  return "unknown";
}

double UtilityLevel(const UtilityFunction& u, const Vector& x) {
  if (const auto* cd = u.cobb_douglas()) {
    double level = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (!(x[j] > 0.0)) return kNegInf;
      level += cd->alpha[j] * std::log(x[j]);
    }
    return level;
  }
  return UtilityValue(u, x);
}

double UtilityValue(const UtilityFunction& u, const Vector& x) {
  if (u.cobb_douglas()) {
    bool boundary = false;
    for (double xj : x) {
      if (std::isnan(xj) || xj < 0.0) return kNegInf;
      if (xj == 0.0) boundary = true;
    }
    if (boundary) return 0.0;
    return std::exp(UtilityLevel(u, x));
  }
  if (const auto* le = u.leontief()) {
    double m = kInf;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      m = std::min(m, le->alpha[j] * x[j]);
    }
    return std::isnan(m) ? kNegInf : m;
  }
  const auto* pl = u.piecewise_linear();
  const double phi = pl->phi(x[1]);
  if (phi == kNegInf || std::isnan(x[0])) return kNegInf;
  return x[0] + phi;
}

bool InDomainInterior(const UtilityFunction& u, const Vector& x) {
  if (u.cobb_douglas()) {
    for (double xj : x) {
      if (!(xj > 0.0) || !std::isfinite(xj)) return false;
    }
    return true;
  }
  if (u.leontief()) return x.allFinite();
  const auto& phi = u.piecewise_linear()->phi;
  return std::isfinite(x[0]) && x[1] > phi.domain_lo() &&
         x[1] < phi.domain_hi();
}

Vector UtilitySupergradient(const UtilityFunction& u, const Vector& x) {
  if (!InDomainInterior(u, x)) {
    throw MarketError(ErrorCode::kNotSubdifferentiable,
                      "not subdifferentiable here");
  }
  if (const auto* cd = u.cobb_douglas()) {
    const double value = UtilityValue(u, x);
    return value * cd->alpha.cwiseQuotient(x);
  }
  if (const auto* le = u.leontief()) {
    Eigen::Index argmin = 0;
    double m = kInf;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double v = le->alpha[j] * x[j];
      if (v < m) {
        m = v;
        argmin = j;
      }
    }
    Vector q = Vector::Zero(x.size());
    q[argmin] = le->alpha[argmin];
    return q;
  }
  Vector q(2);
  q[0] = 1.0;
  q[1] = u.piecewise_linear()->phi.RightSlope(x[1]);
  return q;
}

MarketScenario::MarketScenario(std::vector<std::string> assets,
                               Vector numeraire, std::vector<AgentSpec> agents,
                               Allocation endowments)
    : assets_(std::move(assets)),
      numeraire_(std::move(numeraire)),
      agents_(std::move(agents)),
      endowments_(std::move(endowments)) {
  const auto n_assets = static_cast<Eigen::Index>(assets_.size());
  if (n_assets < 1) {
    throw MarketError(ErrorCode::kInvalidArgument, "scenario has no assets");
  }
  if (agents_.empty()) {
    throw MarketError(ErrorCode::kInvalidArgument, "scenario has no agents");
  }
  if (numeraire_.size() != n_assets || endowments_.cols() != n_assets ||
      endowments_.rows() != static_cast<Eigen::Index>(agents_.size())) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "scenario dimensions disagree");
  }
  if (numeraire_.isZero(0.0) || !numeraire_.allFinite()) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "numeraire must be finite and nonzero");
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const AgentSpec& agent = agents_[i];
    if (!ids.insert(agent.id).second) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "duplicate agent id '" + agent.id + "'");
    }
    if (agent.utility.num_assets() != n_assets) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "utility of agent '" + agent.id +
                            "' has the wrong number of assets");
    }
    const Vector x0 = endowments_.row(static_cast<Eigen::Index>(i));
    if (!InDomainInterior(agent.utility, x0)) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "endowment of agent '" + agent.id +
                            "' is outside the utility domain");
    }
    if (CountNumeraireMonotonicityFailures(agent.utility, numeraire_, x0, 32,
                                           0x5eed + i) > 0) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "utility of agent '" + agent.id +
                            "' is not strictly increasing along the numeraire");
    }
  }
}

Vector MarketScenario::TotalEndowment() const {
  return endowments_.colwise().sum().transpose();
}

MarketScenario MarketScenario::WithEndowments(
    const Allocation& endowments) const {
  return MarketScenario(assets_, numeraire_, agents_, endowments);
}

bool IsFeasible(const MarketScenario& scenario, const Allocation& x,
                double tol) {
  if (x.rows() != scenario.num_agents() || x.cols() != scenario.num_assets()) {
    return false;
  }
  const Vector diff =
      x.colwise().sum().transpose() - scenario.TotalEndowment();
  return diff.cwiseAbs().maxCoeff() <= tol;
}

int CountNumeraireMonotonicityFailures(const UtilityFunction& u,
                                       const Vector& g, const Vector& around,
                                       int samples, std::uint64_t seed) {
  Rng rng(seed);
  const double scale = 1.0 + around.cwiseAbs().maxCoeff();
  int failures = 0;
  int drawn = 0;
  for (int attempt = 0; drawn < samples && attempt < 50 * samples;
       ++attempt) {
    Vector x = around;
    // Half of the samples are the point itself or tiny perturbations; the
    // rest spread over a neighborhood of relative size 1/2.
    const double spread = (attempt % 2 == 0) ? 1e-3 : 0.5;
    if (attempt > 0) {
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        x[j] += spread * scale * (rng.Uniform01() - 0.5);
      }
    }
    if (!InDomainInterior(u, x)) continue;
    ++drawn;
    const double r = 1e-3 * scale * rng.Uniform01() + 1e-9;
    const double before = UtilityLevel(u, x);
    const double after = UtilityLevel(u, x + r * g);
    if (!(after > before)) ++failures;
  }
  return failures;
}

double Rng::Normal() {
  const double u1 = Uniform01();
  const double u2 = Uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

Vector MakeNumeraire(int n_assets, NumeraireMode mode) {
  if (mode == NumeraireMode::kAllOnes) return Vector::Ones(n_assets);
  Vector g = Vector::Zero(n_assets);
  g[0] = 1.0;
  return g;
}

MarketScenario GenerateRandomScenario(int n_agents, int n_assets,
                                      std::uint64_t seed,
                                      NumeraireMode numeraire_mode) {
  if (n_agents < 2 || n_assets < 2) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "random scenarios need at least 2 agents and 2 assets");
  }
  Rng rng(seed);
  std::vector<AgentSpec> agents;
  agents.reserve(n_agents);
  for (int i = 0; i < n_agents; ++i) {
    Vector alpha(n_assets);
    for (int j = 0; j < n_assets; ++j) alpha[j] = rng.Uniform01();
    alpha /= alpha.sum();
    agents.push_back(
        {"agent" + std::to_string(i), UtilityFunction(CobbDouglas{alpha})});
  }
  Allocation endowments(n_agents, n_assets);
  for (int i = 0; i < n_agents; ++i) {
    for (int j = 0; j < n_assets; ++j) endowments(i, j) = rng.Uniform01();
  }
  std::vector<std::string> assets;
  for (int j = 0; j < n_assets; ++j) {
    assets.push_back(j == 0 ? "cash" : "asset" + std::to_string(j));
  }
  return MarketScenario(std::move(assets),
                        MakeNumeraire(n_assets, numeraire_mode),
                        std::move(agents), std::move(endowments));
}

}  // namespace dauction
