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

#include "commands.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "dauction/clearing.h"
#include "dauction/dynamics.h"
#include "dauction/indifference.h"
#include "dauction/model.h"
#include "dauction/orderbook.h"
#include "dauction/scenario_io.h"

namespace dauction::cli {
namespace {

const std::map<std::string, TieRule> kTieRules = {
    {"midpoint", TieRule::kMidpoint},
    {"low", TieRule::kLow},
    {"high", TieRule::kHigh}};

const std::map<std::string, NumeraireMode> kNumeraires = {
    {"cash", NumeraireMode::kUnitCash}, {"ones", NumeraireMode::kAllOnes}};

CLI::Option* AddTieRule(CLI::App* sub, std::string& target) {
  return sub->add_option("--tie-rule", target,
                         "Price choice inside a price interval")
      ->check(CLI::IsMember({"midpoint", "low", "high"}))
      ->capture_default_str();
}

void AddGenerator(CLI::App* sub, GeneratorSpec& spec, bool required) {
  auto* agents = sub->add_option("--agents", spec.agents, "Number of agents")
                     ->check(CLI::Range(2, 1000000));
  auto* assets = sub->add_option("--assets", spec.assets, "Number of assets")
                     ->check(CLI::Range(2, 10000));
  sub->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  sub->add_option("--numeraire", spec.numeraire,
                  "Numeraire portfolio: cash = (1,0,...,0), ones = (1,...,1)")
      ->check(CLI::IsMember({"cash", "ones"}))
      ->capture_default_str();
  if (required) {
    agents->required();
    assets->required();
  }
}

MarketScenario Generate(const GeneratorSpec& spec) {
  return GenerateRandomScenario(spec.agents, spec.assets, spec.seed,
                                kNumeraires.at(spec.numeraire));
}

Allocation LoadAllocation(const MarketScenario& sc, const std::string& path) {
  if (path.empty()) return sc.endowments();
  Allocation x = ParseAllocation(ReadFile(path));
  if (x.rows() != sc.num_agents() || x.cols() != sc.num_assets()) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "allocation shape does not match the scenario");
  }
  return x;
}

// Writes to a file, or to stdout for "-".
void Emit(const std::string& path, const std::string& contents) {
  if (path == "-") {
    std::cout << contents;
  } else {
    WriteFile(path, contents);
  }
}

std::string Fixed3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string Sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

void PrintTraceTable(std::ostream& os, const MarketScenario& sc,
                     const AuctionTrace& trace) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%4s %12s %12s %12s %12s", "t", "CS",
                "sum ln u", "e.p", "|dx|");
  os << buf;
  for (int j = 0; j < sc.num_assets(); ++j) {
    std::snprintf(buf, sizeof buf, " %9s", ("p_" + std::to_string(j)).c_str());
    os << buf;
  }
  os << '\n';
  for (const RoundRecord& rec : trace.rounds) {
    std::snprintf(buf, sizeof buf, "%4d %12.3f %12.3f %12.3f %12.3f", rec.t,
                  rec.cs, rec.sum_ln_u, rec.e_dot_p, rec.delta_x_norm);
    os << buf;
    for (double p : rec.price) {
      std::snprintf(buf, sizeof buf, " %9.3f", p);
      os << buf;
    }
    os << '\n';
  }
}

struct SweepRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
};

SweepRange ParseSweep(std::string text) {
  if (text.rfind("seeds=", 0) == 0) text = text.substr(6);
  const auto dots = text.find("..");
  SweepRange range;
  try {
    if (dots == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const std::string a = text.substr(0, dots);
    const std::string b = text.substr(dots + 2);
    range.first = std::stoull(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    range.last = std::stoull(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
  } catch (const std::exception&) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "--sweep expects seeds=a..b, got '" + text + "'");
  }
  if (range.last < range.first) {
    throw MarketError(ErrorCode::kInvalidArgument, "--sweep range is empty");
  }
  return range;
}

// out.csv -> out.seed7.csv
std::string WithSeed(const std::string& path, std::uint64_t seed) {
  if (path.empty() || path == "-") return path;
  const std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path() / p.stem();
  out += ".seed" + std::to_string(seed);
  out += p.extension();
  return out.string();
}

RunOptions MakeRunOptions(const RunConfig& config) {
  RunOptions options;
  options.cs_stop = config.cs_stop;
  options.max_rounds = config.max_rounds;
  options.tie_rule = kTieRules.at(config.tie_rule);
  options.solver.tol_surplus = config.tol_surplus;
  return options;
}

// One complete run with its artifacts; returns the exit status.
int RunOne(const RunConfig& config, const MarketScenario& scenario,
           std::ostream& os, bool table) {
  const RunOptions options = MakeRunOptions(config);
  const AuctionTrace trace = RunAuctions(scenario, options);
  if (table) PrintTraceTable(os, scenario, trace);
  os << "stop: " << StopReasonName(trace.stop) << " after "
     << trace.rounds.size() << " round(s)";
  if (!trace.rounds.empty()) os << ", final CS " << Sci(trace.rounds.back().cs);
  os << '\n';

  const auto violations = TraceInvariantViolations(scenario, trace);
  for (const std::string& v : violations) os << "invariant: " << v << '\n';

  if (!config.csv.empty()) {
    std::ostringstream csv;
    WriteTraceCsv(csv, scenario, trace);
    Emit(config.csv, csv.str());
  }
  if (!config.json.empty()) Emit(config.json, TraceToJson(scenario, trace));
  if (!config.final_scenario.empty()) {
    Emit(config.final_scenario,
         ScenarioToJson(scenario.WithEndowments(trace.final_allocation())));
  }
  if (config.certify) {
    const EquilibriumCertificate cert = CertifyEquilibrium(
        scenario, trace.final_allocation(), config.cs_stop, options);
    os << "certificate: " << (cert.valid() ? "valid" : "not valid")
       << "\n  CS " << Sci(cert.cs) << " (ratio to sum |u(x0)| "
       << Sci(cert.cs_ratio) << ")"
       << "\n  zero trade optimal: " << (cert.zero_trade_optimal ? "yes" : "no")
       << "\n  common supergradient: "
       << (cert.common_supergradient ? "yes" : "no") << " (max excess "
       << Sci(cert.max_supergradient_excess) << ")"
       << "\n  individually rational: "
       << (cert.individually_rational ? "yes" : "no") << '\n';
  }
  if (config.bound_check) {
    const double radius = DeltaRadius(trace);
    const Vector delta = EstimateDelta(scenario, radius);
    const BoundReport report = ConvergenceBoundCheck(scenario, trace, delta);
    os << "rate bound: " << (report.ok ? "holds" : "VIOLATED")
       << "\n  radius " << Fixed3(radius) << ", delta in ["
       << Sci(delta.minCoeff()) << ", " << Sci(delta.maxCoeff()) << "]"
       << "\n  min margin of CS(x^t) <= rhs_t / t: "
       << Sci(report.min_rate_margin)
       << "\n  min margin of the summed bound: "
       << Sci(report.min_summed_margin)
       << "\n  min margin of t CS(x^t) <= final rhs: "
       << Sci(report.min_final_margin) << '\n';
  }
  if (!violations.empty()) return kExitError;
  return trace.stop == StopReason::kConverged ? kExitOk : kExitMaxRounds;
}

int RunSweep(const RunConfig& config) {
  const SweepRange range = ParseSweep(config.sweep);
  const std::uint64_t count = range.last - range.first + 1;
  std::vector<int> status(count, kExitError);
  std::vector<std::string> logs(count);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&]() {
    for (std::uint64_t k = next++; k < count; k = next++) {
      RunConfig one = config;
      one.spec.seed = range.first + k;
      one.csv = WithSeed(config.csv, one.spec.seed);
      one.json = WithSeed(config.json, one.spec.seed);
      one.final_scenario = WithSeed(config.final_scenario, one.spec.seed);
      std::ostringstream os;
      try {
        status[k] = RunOne(one, Generate(one.spec), os, false);
      } catch (const MarketError& e) {
        os << "error [" << ErrorCodeName(e.code()) << "]: " << e.what() << '\n';
        status[k] = kExitError;
      }
      logs[k] = os.str();
    }
  };
  const unsigned threads = std::max(
      1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                             static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  int worst = kExitOk;
  for (std::uint64_t k = 0; k < count; ++k) {
    std::cout << "seed " << range.first + k << ": " << logs[k];
    if (status[k] == kExitError) {
      worst = kExitError;
    } else if (status[k] == kExitMaxRounds && worst == kExitOk) {
      worst = kExitMaxRounds;
    }
  }
  return worst;
}

}  // namespace

void RegisterGen(CLI::App& app, GenConfig& config) {
  auto* sub = app.add_subcommand("gen", "Generate a random Cobb-Douglas scenario");
  AddGenerator(sub, config.spec, true);
  sub->add_option("-o,--out", config.out, "Output file (default: stdout)");
}

void RegisterRun(CLI::App& app, RunConfig& config) {
  auto* sub = app.add_subcommand("run", "Run repeated auctions until the surplus is small");
  auto* scenario =
      sub->add_option("--scenario", config.scenario_path, "Scenario file")
          ->check(CLI::ExistingFile);
  AddGenerator(sub, config.spec, false);
  for (const char* name : {"--agents", "--assets", "--seed", "--numeraire"}) {
    scenario->excludes(sub->get_option(name));
  }
  sub->add_option("--cs-stop", config.cs_stop, "Stop once CS falls below this")
      ->envname("DAUCTION_CS_STOP")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--max-rounds", config.max_rounds, "Round limit")
      ->envname("DAUCTION_MAX_ROUNDS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--tol-surplus", config.tol_surplus,
                  "Relative duality gap of each clearing solve")
      ->envname("DAUCTION_TOL_SURPLUS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  AddTieRule(sub, config.tie_rule);
  sub->add_option("--csv", config.csv, "Per-round CSV ('-' for stdout)");
  sub->add_option("--json", config.json, "Trace as JSON ('-' for stdout)");
  sub->add_option("--final", config.final_scenario,
                  "Write the scenario with the final allocation as endowment");
  sub->add_flag("--certify", config.certify,
                "Certify the final allocation as an equilibrium");
  sub->add_flag("--bound-check", config.bound_check,
                "Check the 1/t surplus bound with estimated delta");
  sub->add_option("--sweep", config.sweep,
                  "Run generator seeds a..b in parallel (seeds=a..b)")
      ->excludes(scenario);
  sub->add_flag("-q,--quiet", config.quiet, "Omit the per-round table");
}

void RegisterClear(CLI::App& app, ClearConfig& config) {
  auto* sub = app.add_subcommand("clear", "Clear one multi-asset auction");
  sub->add_option("--scenario", config.scenario_path, "Scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--allocation", config.allocation_path,
                  "Current holdings (default: the endowments)")
      ->check(CLI::ExistingFile);
  sub->add_option("--route", config.route,
                  "auto, barrier, cash-reduced or order-book")
      ->check(CLI::IsMember({"auto", "barrier", "cash-reduced", "order-book"}))
      ->capture_default_str();
  AddTieRule(sub, config.tie_rule);
  sub->add_option("--json", config.json, "Outcome as JSON ('-' for stdout)");
  sub->add_option("--kkt-directions", config.kkt_directions,
                  "Sampled directions per agent for the KKT check (0: skip)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--tol-surplus", config.tol_surplus,
                  "Relative duality gap of the barrier solve")
      ->envname("DAUCTION_TOL_SURPLUS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void RegisterClearOrders(CLI::App& app, OrdersConfig& config) {
  auto* sub = app.add_subcommand("clear-orders", "Clear a single-asset order book");
  sub->add_option("book", config.book_path, "Order book file")
      ->required()
      ->check(CLI::ExistingFile);
  AddTieRule(sub, config.tie_rule);
}

void RegisterPrice(CLI::App& app, PriceConfig& config) {
  auto* sub = app.add_subcommand("price", "Indifference price of a trade for one agent");
  sub->add_option("--scenario", config.scenario_path, "Scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--allocation", config.allocation_path,
                  "Current holdings (default: the endowments)")
      ->check(CLI::ExistingFile);
  sub->add_option("--agent", config.agent, "Agent id")->required();
  sub->add_option("--trade", config.trade, "Portfolio, comma separated")
      ->required()
      ->delimiter(',');
}

void RegisterCheck(CLI::App& app, CheckConfig& config) {
  auto* sub = app.add_subcommand("check", "Diagnose the standing assumptions of a scenario");
  sub->add_option("--scenario", config.scenario_path, "Scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--allocation", config.allocation_path,
                  "Holdings to test (default: the endowments)")
      ->check(CLI::ExistingFile);
  sub->add_option("--radius", config.radius,
                  "Ball radius for delta (default: twice the largest holding norm)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--samples", config.samples, "Samples per agent for delta")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

int CmdGen(const GenConfig& config) {
  const MarketScenario sc = Generate(config.spec);
  const std::string text = ScenarioToJson(sc);
  std::ostream& summary = config.out.empty() ? std::cerr : std::cout;
  if (config.out.empty()) {
    std::cout << text;
  } else {
    WriteFile(config.out, text);
  }
  summary << "generated " << sc.num_agents() << " agents, " << sc.num_assets()
          << " assets, seed " << config.spec.seed << ", numeraire "
          << config.spec.numeraire << '\n';
  return kExitOk;
}

int CmdRun(const RunConfig& config) {
  const bool generated = config.scenario_path.empty();
  if (generated && (config.spec.agents == 0 || config.spec.assets == 0)) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "run needs --scenario or both --agents and --assets");
  }
  if (!config.sweep.empty()) {
    if (!generated) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "--sweep needs a generator spec");
    }
    return RunSweep(config);
  }
  const MarketScenario sc = generated ? Generate(config.spec)
                                      : ParseScenario(ReadFile(config.scenario_path));
  // Keep stdout clean when an artifact is streamed there.
  const bool streaming = config.csv == "-" || config.json == "-" ||
                         config.final_scenario == "-";
  std::ostream& os = streaming ? std::cerr : std::cout;
  return RunOne(config, sc, os, !config.quiet);
}

int CmdClear(const ClearConfig& config) {
  const MarketScenario sc = ParseScenario(ReadFile(config.scenario_path));
  const ClearingProblem problem(sc, LoadAllocation(sc, config.allocation_path));
  RunOptions options;
  options.tie_rule = kTieRules.at(config.tie_rule);
  options.solver.tol_surplus = config.tol_surplus;
  ClearingOutcome out;
  if (config.route == "barrier") {
    out = SolveClearing(problem, options.solver);
  } else if (config.route == "cash-reduced") {
    out = SolveClearingCashReduced(problem);
  } else if (config.route == "order-book") {
    out = SolveClearingByOrderBook(problem, options.tie_rule);
  } else {
    out = ClearRound(problem, options);
  }
  std::optional<KktReport> kkt;
  if (config.kkt_directions > 0) {
    kkt = VerifyKkt(out, problem, config.kkt_directions);
  }
  std::ostream& os = config.json == "-" ? std::cerr : std::cout;
  os << "method: " << out.stats.method << "\nprice:";
  for (double p : out.price) os << ' ' << Fixed3(p);
  os << "\nCS: " << Fixed3(out.total_surplus) << " (" << Sci(out.total_surplus)
     << ")\n";
  char buf[64];
  os << "agent          surplus    payment  trade\n";
  for (int i = 0; i < sc.num_agents(); ++i) {
    std::snprintf(buf, sizeof buf, "%-12s %9.3f %10.3f ", sc.agent(i).id.c_str(),
                  out.agent_surplus[i], out.payments[i]);
    os << buf;
    for (Eigen::Index j = 0; j < out.trades.cols(); ++j) {
      std::snprintf(buf, sizeof buf, " %9.3f", out.trades(i, j));
      os << buf;
    }
    os << '\n';
  }
  if (kkt) {
    os << "KKT: " << (kkt->Passes(out.price) ? "pass" : "FAIL")
       << " (supergradient violation " << Sci(kkt->max_supergradient_violation)
       << ", balance " << Sci(kkt->balance_residual) << ", |g.p - 1| "
       << Sci(kkt->price_normalization_error) << ")\n";
  }
  if (!config.json.empty()) Emit(config.json, OutcomeToJson(sc, out, kkt));
  return kExitOk;
}

int CmdClearOrders(const OrdersConfig& config) {
  const LimitOrderBook book = ParseOrderBook(ReadFile(config.book_path));
  const TieRule rule = kTieRules.at(config.tie_rule);
  const SingleAssetClearing c = ClearSingleAsset(book, rule);
  auto num = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  std::cout << "quantity: " << num(c.quantity) << "\nprice interval: ["
            << num(c.price_lo) << ", " << num(c.price_hi) << "]\nprice: ";
  if (c.price) {
    std::cout << num(*c.price);
  } else {
    std::cout << "none";
  }
  std::cout << " (tie rule " << TieRuleName(rule) << ")\nsurplus: "
            << num(c.surplus) << "\nfills:\n";
  for (std::size_t k = 0; k < book.orders().size(); ++k) {
    const LimitOrder& o = book.orders()[k];
    std::cout << "  " << o.agent << ' '
              << (o.side == Side::kBuy ? "buy" : "sell") << ' ' << num(o.price)
              << ' ' << num(o.quantity) << " -> " << num(c.fills[k]) << '\n';
  }
  return kExitOk;
}

int CmdPrice(const PriceConfig& config) {
  const MarketScenario sc = ParseScenario(ReadFile(config.scenario_path));
  const Allocation x = LoadAllocation(sc, config.allocation_path);
  int agent = -1;
  for (int i = 0; i < sc.num_agents(); ++i) {
    if (sc.agent(i).id == config.agent) agent = i;
  }
  if (agent < 0) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "no agent '" + config.agent + "' in the scenario");
  }
  if (static_cast<int>(config.trade.size()) != sc.num_assets()) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "--trade needs one entry per asset");
  }
  const Vector trade = Eigen::Map<const Vector>(config.trade.data(),
                                                sc.num_assets());
  const IndifferenceOracle oracle(sc.agent(agent).utility,
                                  x.row(agent).transpose(), sc.numeraire());
  const double d = oracle.ReservationPrice(trade);
  std::cout.precision(12);
  std::cout << "D = " << (std::isfinite(d) ? std::to_string(d) : "-inf")
            << '\n';
  if (std::isfinite(d)) {
    try {
      const Vector p = oracle.ReservationSupergradient(trade);
      std::cout << "supergradient:";
      for (double v : p) std::cout << ' ' << v;
      std::cout << '\n';
    } catch (const MarketError& e) {
      std::cout << "supergradient: unavailable (" << e.what() << ")\n";
    }
  }
  return kExitOk;
}

int CmdCheck(const CheckConfig& config) {
  const MarketScenario sc = ParseScenario(ReadFile(config.scenario_path));
  const Allocation x = LoadAllocation(sc, config.allocation_path);
  const int n = sc.num_agents();

  int mono_fail = 0;
  for (int i = 0; i < n; ++i) {
    const Vector xi = x.row(i).transpose();
    if (!InDomainInterior(sc.agent(i).utility, xi)) continue;
    if (CountNumeraireMonotonicityFailures(sc.agent(i).utility, sc.numeraire(),
                                           xi, 256, 0xc4ec + i) > 0) {
      ++mono_fail;
    }
  }
  std::cout << "numeraire monotonicity: " << (mono_fail == 0 ? "pass" : "FAIL")
            << " (" << mono_fail << " of " << n << " agents fail sampling)\n";

  const SlaterReport slater = CheckSlater(sc, x);
  std::cout << "buyers and sellers: " << (slater.ok() ? "pass" : "FAIL")
            << " (eps " << slater.eps << ")\n";
  for (int j = 0; j < sc.num_assets(); ++j) {
    const SlaterAsset& a = slater.assets[j];
    std::cout << "  " << sc.assets()[j] << ": " << (a.ok() ? "pass" : "FAIL")
              << " buyer " << (a.buyer >= 0 ? sc.agent(a.buyer).id : "none")
              << ", seller " << (a.seller >= 0 ? sc.agent(a.seller).id : "none")
              << '\n';
  }

  const RecessionReport rec = CheckRecession(sc);
  std::cout << "recession: " << (rec.ok ? "pass" : "FAIL") << " (" << rec.detail
            << ")\n";

  double radius = config.radius;
  if (!(radius > 0.0)) radius = 2.0 * x.rowwise().norm().maxCoeff();
  try {
    const Vector delta = EstimateDelta(sc, radius, config.samples);
    std::cout << "delta: pass (radius " << radius << ", min "
              << delta.minCoeff() << ", max " << delta.maxCoeff() << ")\n";
    if (n <= 10) {
      for (int i = 0; i < n; ++i) {
        std::cout << "  " << sc.agent(i).id << ": delta = " << delta[i] << '\n';
      }
    }
  } catch (const MarketError& e) {
    std::cout << "delta: FAIL (" << e.what() << ")\n";
  }
  return kExitOk;
}

}  // namespace dauction::cli
