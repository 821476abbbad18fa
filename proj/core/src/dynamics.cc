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

#include "dauction/dynamics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "dauction/indifference.h"

namespace dauction {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vector Row(const Matrix& m, int i) { return m.row(i).transpose(); }

double SumLnU(const MarketScenario& sc, const Allocation& x) {
  double sum = 0.0;
  for (int i = 0; i < sc.num_agents(); ++i) {
    const UtilityFunction& u = sc.agent(i).utility;
    if (u.cobb_douglas()) {
      sum += UtilityLevel(u, Row(x, i));
    } else {
      const double v = UtilityValue(u, Row(x, i));
      if (!(v > 0.0)) return kNaN;
      sum += std::log(v);
    }
  }
  return sum;
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ClearingOutcome ClearRound(const ClearingProblem& problem,
                           const RunOptions& options) {
  if (OrderBookRouteApplies(problem.scenario())) {
    return SolveClearingByOrderBook(problem, options.tie_rule);
  }
  return SolveClearing(problem, options.solver);
}

const char* StopReasonName(StopReason reason) {
  switch (reason) {
    case StopReason::kConverged:
      return "converged";
    case StopReason::kMaxRounds:
      return "max-rounds";
  }
  return "unknown";
}

AuctionTrace RunAuctions(const MarketScenario& scenario,
                         const RunOptions& options) {
  if (!(options.cs_stop > 0.0) || options.max_rounds < 1) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "cs_stop must be positive and max_rounds at least 1");
  }
  AuctionTrace trace;
  trace.initial = scenario.endowments();
  const Vector total = scenario.TotalEndowment();
  Allocation x = trace.initial;
  for (int t = 1; t <= options.max_rounds; ++t) {
    RoundRecord rec;
    rec.t = t;
    try {
      const ClearingProblem problem(scenario, x);
      rec.outcome = ClearRound(problem, options);
    } catch (const MarketError& e) {
      throw MarketError(e.code(),
                        "round " + std::to_string(t) + ": " + e.what());
    }
    rec.allocation = rec.outcome.post_allocation;
    rec.cs = rec.outcome.total_surplus;
    rec.price = rec.outcome.price;
    rec.e_dot_p = total.dot(rec.price);
    rec.delta_x_norm = (rec.allocation - x).norm();
    rec.sum_ln_u = SumLnU(scenario, rec.allocation);
    x = rec.allocation;
    const bool done = rec.cs < options.cs_stop;
    trace.rounds.push_back(std::move(rec));
    if (done) {
      trace.stop = StopReason::kConverged;
      return trace;
    }
  }
  trace.stop = StopReason::kMaxRounds;
  return trace;
}

std::vector<std::string> TraceInvariantViolations(
    const MarketScenario& scenario, const AuctionTrace& trace) {
  std::vector<std::string> out;
  const int n = scenario.num_agents();
  const Vector total = scenario.TotalEndowment();
  bool all_cd = true;
  for (const AgentSpec& a : scenario.agents()) {
    all_cd = all_cd && a.utility.cobb_douglas() != nullptr;
  }
  Vector u0(n);
  for (int i = 0; i < n; ++i) {
    u0[i] = UtilityValue(scenario.agent(i).utility, Row(trace.initial, i));
  }
  Vector prev_u = u0;
  double prev_cs = kInf;
  for (const RoundRecord& rec : trace.rounds) {
    const std::string at = "round " + std::to_string(rec.t) + ": ";
    if (rec.cs > prev_cs + 1e-9 * std::max(1.0, prev_cs)) {
      out.push_back(at + "surplus increased");
    }
    prev_cs = rec.cs;
    const Vector sums = rec.allocation.colwise().sum().transpose();
    if ((sums - total).cwiseAbs().maxCoeff() > 1e-8) {
      out.push_back(at + "total endowment not conserved");
    }
    for (int i = 0; i < n; ++i) {
      const double u =
          UtilityValue(scenario.agent(i).utility, Row(rec.allocation, i));
      if (u < prev_u[i] - 1e-9) {
        out.push_back(at + "utility of agent '" + scenario.agent(i).id +
                      "' decreased");
      }
      if (u < u0[i] - 1e-9) {
        out.push_back(at + "agent '" + scenario.agent(i).id +
                      "' is below its endowment utility");
      }
      prev_u[i] = u;
    }
    if (all_cd) {
      const bool inside =
          (rec.allocation.array() > 0.0).all() &&
          (rec.allocation.rowwise() - total.transpose()).maxCoeff() <= 1e-8;
      if (!inside) out.push_back(at + "holdings left the box (0, e]");
    }
  }
  return out;
}

double DeltaRadius(const AuctionTrace& trace) {
  double norm = trace.initial.rowwise().norm().maxCoeff();
  double surplus = 0.0;
  for (const RoundRecord& rec : trace.rounds) {
    norm = std::max(norm, rec.allocation.rowwise().norm().maxCoeff());
    if (rec.outcome.agent_surplus.size() > 0) {
      surplus = std::max(surplus, rec.outcome.agent_surplus.maxCoeff());
    }
  }
  return std::max(2.0 * norm, surplus);
}

Vector EstimateDelta(const MarketScenario& scenario, double radius,
                     int samples, std::uint64_t seed) {
  if (!(radius > 0.0) || samples < 1) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "delta estimation needs a positive radius and samples");
  }
  const int n = scenario.num_agents();
  const int m = scenario.num_assets();
  const Vector& g = scenario.numeraire();
  Rng rng(seed);
  Vector delta(n);
  for (int i = 0; i < n; ++i) {
    const UtilityFunction& u = scenario.agent(i).utility;
    const bool orthant = u.cobb_douglas() != nullptr;
    double lo = kInf;
    double hi = kNegInf;
    int drawn = 0;
    for (int attempt = 0; drawn < samples && attempt < 100 * samples;
         ++attempt) {
      // Uniform in the ball: Gaussian direction, radius r U^(1/m).
      Vector x(m);
      for (int j = 0; j < m; ++j) x[j] = rng.Normal();
      x *= radius * std::pow(rng.Uniform01(), 1.0 / m) / x.norm();
      // The ball is symmetric, so folding onto the orthant stays uniform.
      if (orthant) x = x.cwiseAbs();
      const double before = UtilityValue(u, x);
      if (!std::isfinite(before)) continue;
      ++drawn;
      const double q = (UtilityValue(u, x + radius * g) - before) / radius;
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    const bool linear = hi - lo <= 1e-12 * std::max(1.0, std::abs(lo));
    delta[i] = linear ? lo : 0.9 * lo;
    if (!(delta[i] > 0.0) || !std::isfinite(delta[i])) {
      std::ostringstream os;
      os << "delta estimate for agent '" << scenario.agent(i).id
         << "' is not positive at radius " << radius;
      throw MarketError(ErrorCode::kDeltaNonpositive, os.str());
    }
  }
  return delta;
}

BoundReport ConvergenceBoundCheck(const MarketScenario& scenario,
                                  const AuctionTrace& trace,
                                  const Vector& delta) {
  const int n = scenario.num_agents();
  if (delta.size() != n) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "one delta per agent is required");
  }
  BoundReport report;
  Vector u0(n);
  for (int i = 0; i < n; ++i) {
    u0[i] = UtilityValue(scenario.agent(i).utility, Row(trace.initial, i));
  }
  const auto& rounds = trace.rounds;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < rounds.size(); ++k) {
    BoundRow row;
    row.t = rounds[k].t;
    double rhs = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = UtilityValue(scenario.agent(i).utility,
                                    Row(rounds[k].allocation, i));
      rhs += (u - u0[i]) / delta[i];
    }
    row.rhs = rhs;
    cumulative += rounds[k].cs;
    row.cumulative = cumulative;
    row.next_cs = k + 1 < rounds.size() ? rounds[k + 1].cs : kNaN;
    report.rows.push_back(row);
  }
  if (report.rows.empty()) return report;
  const double final_rhs = report.rows.back().rhs;
  for (const BoundRow& row : report.rows) {
    const double slack = 1e-9 * (1.0 + std::abs(row.rhs));
    const double summed = row.rhs - row.cumulative;
    report.min_summed_margin = std::min(report.min_summed_margin, summed);
    if (summed < -slack) report.ok = false;
    if (std::isnan(row.next_cs)) continue;
    const double rate = row.rhs / row.t - row.next_cs;
    report.min_rate_margin = std::min(report.min_rate_margin, rate);
    if (rate < -slack) report.ok = false;
    const double fin = final_rhs - row.t * row.next_cs;
    report.min_final_margin = std::min(report.min_final_margin, fin);
    if (fin < -1e-9 * (1.0 + std::abs(final_rhs))) report.ok = false;
  }
  return report;
}

EquilibriumCertificate CertifyEquilibrium(const MarketScenario& scenario,
                                          const Allocation& x, double tol,
                                          const RunOptions& options,
                                          int samples, std::uint64_t seed) {
  EquilibriumCertificate cert;
  cert.allocation = x;
  const ClearingProblem problem(scenario, x);
  const ClearingOutcome outcome = ClearRound(problem, options);
  cert.cs = outcome.total_surplus;
  cert.price = outcome.price;
  cert.zero_trade_optimal = cert.cs <= tol;

  const Vector& g = scenario.numeraire();
  const int m = scenario.num_assets();
  Rng rng(seed);
  cert.max_supergradient_excess = kNegInf;
  double u0_sum = 0.0;
  cert.individually_rational = true;
  for (int i = 0; i < scenario.num_agents(); ++i) {
    const UtilityFunction& u = scenario.agent(i).utility;
    const Vector xi = Row(x, i);
    const double u0 = UtilityValue(u, Row(scenario.endowments(), i));
    u0_sum += std::abs(u0);
    if (UtilityValue(u, xi) < u0 - 1e-9) cert.individually_rational = false;
    const IndifferenceOracle oracle(u, xi, g);
    const double scale = 1.0 + xi.cwiseAbs().maxCoeff();
    for (int s = 0; s < samples; ++s) {
      Vector y(m);
      for (int j = 0; j < m; ++j) y[j] = rng.Normal();
      y *= scale * std::pow(10.0, -6.0 * rng.Uniform01()) / y.norm();
      const double excess = oracle.ReservationPrice(y) - cert.price.dot(y);
      cert.max_supergradient_excess =
          std::max(cert.max_supergradient_excess, excess);
    }
  }
  if (samples == 0) cert.max_supergradient_excess = 0.0;
  cert.common_supergradient = cert.max_supergradient_excess <= tol;
  cert.cs_ratio = u0_sum > 0.0 ? cert.cs / u0_sum : kInf;
  return cert;
}

void WriteTraceCsv(std::ostream& os, const MarketScenario& scenario,
                   const AuctionTrace& trace) {
  os << "t,cs,sum_ln_u,e_dot_p,delta_x_norm";
  for (int j = 0; j < scenario.num_assets(); ++j) os << ",p_" << j;
  os << '\n';
  for (const RoundRecord& rec : trace.rounds) {
    os << rec.t << ',' << Num(rec.cs) << ',' << Num(rec.sum_ln_u) << ','
       << Num(rec.e_dot_p) << ',' << Num(rec.delta_x_norm);
    for (double p : rec.price) os << ',' << Num(p);
    os << '\n';
  }
}

std::vector<CsvRow> ReadTraceCsv(std::istream& is) {
  std::vector<CsvRow> rows;
  std::string line;
  int line_no = 0;
  int columns = -1;
  auto fail = [&](const std::string& what) {
    throw MarketError(ErrorCode::kParse,
                      "line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (columns < 0) {
      if (cells.size() < 6 || cells[0] != "t" || cells[1] != "cs" ||
          cells[2] != "sum_ln_u" || cells[3] != "e_dot_p" ||
          cells[4] != "delta_x_norm") {
        fail("unexpected header");
      }
      for (std::size_t j = 5; j < cells.size(); ++j) {
        if (cells[j] != "p_" + std::to_string(j - 5)) fail("bad price column");
      }
      columns = static_cast<int>(cells.size());
      continue;
    }
    if (static_cast<int>(cells.size()) != columns) fail("wrong column count");
    std::vector<double> v(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      char* end = nullptr;
      v[j] = std::strtod(cells[j].c_str(), &end);
      if (end == cells[j].c_str() || *end != '\0') fail("bad number");
    }
    CsvRow row;
    row.t = static_cast<int>(v[0]);
    if (row.t != v[0]) fail("round index is not an integer");
    row.cs = v[1];
    row.sum_ln_u = v[2];
    row.e_dot_p = v[3];
    row.delta_x_norm = v[4];
    row.price = Eigen::Map<const Vector>(v.data() + 5, columns - 5);
    rows.push_back(std::move(row));
  }
  if (columns < 0) {
    line_no = 0;
    fail("missing header");
  }
  return rows;
}

}  // namespace dauction
