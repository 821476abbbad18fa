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

#include "dauction/scenario_io.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace dauction {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void ParseFail(const std::string& what) {
  throw MarketError(ErrorCode::kParse, what);
}

Json Parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    ParseFail(std::string("malformed JSON: ") + e.what());
  }
}

const Json& Field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    ParseFail(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double Number(const Json& v, const std::string& where) {
  if (!v.is_number()) ParseFail(where + ": expected a number");
  return v.get<double>();
}

Vector NumberArray(const Json& v, const std::string& where) {
  if (!v.is_array()) ParseFail(where + ": expected an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] =
        Number(v[k], where + "[" + std::to_string(k) + "]");
  }
  return out;
}

std::vector<double> StdVector(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

Json MatrixJson(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(StdVector(m.row(i).transpose()));
  }
  return rows;
}

// JSON has no infinities or NaN; they are written as null.
Json Real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

UtilityFunction ParseUtility(const Json& u, const std::string& where) {
  const Json& type = Field(u, "type", where);
  if (!type.is_string()) ParseFail(where + ": 'type' must be a string");
  const std::string t = type.get<std::string>();
  if (t == "cobb_douglas") {
    return UtilityFunction(
        CobbDouglas{NumberArray(Field(u, "alpha", where), where + ".alpha")});
  }
  if (t == "leontief") {
    return UtilityFunction(
        Leontief{NumberArray(Field(u, "alpha", where), where + ".alpha")});
  }
  if (t == "piecewise_linear") {
    const Vector knots = NumberArray(Field(u, "knots", where), where + ".knots");
    const Vector values =
        NumberArray(Field(u, "values", where), where + ".values");
    std::optional<double> left;
    std::optional<double> right;
    if (u.contains("left_slope") && !u["left_slope"].is_null()) {
      left = Number(u["left_slope"], where + ".left_slope");
    }
    if (u.contains("right_slope") && !u["right_slope"].is_null()) {
      right = Number(u["right_slope"], where + ".right_slope");
    }
    return UtilityFunction(PiecewiseLinear{PiecewiseLinearConcave(
        StdVector(knots), StdVector(values), left, right)});
  }
  ParseFail(where + ": unknown utility type '" + t + "'");
}

Json UtilityJson(const UtilityFunction& u) {
  Json out;
  if (const auto* cd = u.cobb_douglas()) {
    out["type"] = "cobb_douglas";
    out["alpha"] = StdVector(cd->alpha);
  } else if (const auto* le = u.leontief()) {
    out["type"] = "leontief";
    out["alpha"] = StdVector(le->alpha);
  } else {
    const auto& phi = u.piecewise_linear()->phi;
    out["type"] = "piecewise_linear";
    out["knots"] = phi.knots();
    out["values"] = phi.values();
    if (phi.left_slope()) out["left_slope"] = *phi.left_slope();
    if (phi.right_slope()) out["right_slope"] = *phi.right_slope();
  }
  return out;
}

Side ParseSide(std::string s, const std::string& where) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s == "buy" || s == "bid") return Side::kBuy;
  if (s == "sell" || s == "ask") return Side::kSell;
  ParseFail(where + ": side must be 'buy' or 'sell', got '" + s + "'");
}

}  // namespace

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "cannot open '" + path + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << contents) || !out.flush()) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "cannot write '" + path + "'");
  }
}

MarketScenario ParseScenario(const std::string& text) {
  const Json doc = Parse(text);
  const Json& assets_json = Field(doc, "assets", "scenario");
  if (!assets_json.is_array()) ParseFail("scenario.assets: expected an array");
  std::vector<std::string> assets;
  for (const Json& a : assets_json) {
    if (!a.is_string()) ParseFail("scenario.assets: names must be strings");
    assets.push_back(a.get<std::string>());
  }
  const Vector g = NumberArray(Field(doc, "numeraire", "scenario"),
                               "scenario.numeraire");
  const Json& agents_json = Field(doc, "agents", "scenario");
  if (!agents_json.is_array()) ParseFail("scenario.agents: expected an array");
  std::vector<AgentSpec> agents;
  Allocation endowments(static_cast<Eigen::Index>(agents_json.size()),
                        static_cast<Eigen::Index>(assets.size()));
  for (std::size_t i = 0; i < agents_json.size(); ++i) {
    const std::string where = "scenario.agents[" + std::to_string(i) + "]";
    const Json& a = agents_json[i];
    const Json& id = Field(a, "id", where);
    if (!id.is_string()) ParseFail(where + ".id: expected a string");
    const Vector x0 =
        NumberArray(Field(a, "endowment", where), where + ".endowment");
    if (x0.size() != endowments.cols()) {
      ParseFail(where + ".endowment: expected " +
                std::to_string(endowments.cols()) + " entries");
    }
    endowments.row(static_cast<Eigen::Index>(i)) = x0.transpose();
    agents.push_back({id.get<std::string>(),
                      ParseUtility(Field(a, "utility", where),
                                   where + ".utility")});
  }
  return MarketScenario(std::move(assets), g, std::move(agents), endowments);
}

std::string ScenarioToJson(const MarketScenario& scenario) {
  Json doc;
  doc["assets"] = scenario.assets();
  doc["numeraire"] = StdVector(scenario.numeraire());
  Json agents = Json::array();
  for (int i = 0; i < scenario.num_agents(); ++i) {
    Json a;
    a["id"] = scenario.agent(i).id;
    a["utility"] = UtilityJson(scenario.agent(i).utility);
    a["endowment"] = StdVector(scenario.endowments().row(i).transpose());
    agents.push_back(std::move(a));
  }
  doc["agents"] = std::move(agents);
  return doc.dump(2) + "\n";
}

Allocation ParseAllocation(const std::string& text) {
  const Json doc = Parse(text);
  const Json& rows = Field(doc, "allocation", "allocation file");
  if (!rows.is_array() || rows.empty()) {
    ParseFail("allocation: expected a nonempty array of rows");
  }
  Allocation x;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vector row =
        NumberArray(rows[i], "allocation[" + std::to_string(i) + "]");
    if (i == 0) x.resize(static_cast<Eigen::Index>(rows.size()), row.size());
    if (row.size() != x.cols()) ParseFail("allocation: ragged rows");
    x.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return x;
}

std::string AllocationToJson(const Allocation& x) {
  Json doc;
  doc["allocation"] = MatrixJson(x);
  return doc.dump(2) + "\n";
}

LimitOrderBook ParseOrderBook(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  std::vector<LimitOrder> orders;
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    const Json doc = Parse(text);
    const Json& list = doc.is_object() ? Field(doc, "orders", "order book") : doc;
    if (!list.is_array()) ParseFail("order book: expected an array of orders");
    for (std::size_t k = 0; k < list.size(); ++k) {
      const std::string where = "order " + std::to_string(k);
      const Json& o = list[k];
      const Json& agent = Field(o, "agent", where);
      const Json& side = Field(o, "side", where);
      if (!agent.is_string() || !side.is_string()) {
        ParseFail(where + ": 'agent' and 'side' must be strings");
      }
      orders.push_back({ParseSide(side.get<std::string>(), where),
                        Number(Field(o, "price", where), where + ".price"),
                        Number(Field(o, "quantity", where), where + ".quantity"),
                        agent.get<std::string>()});
    }
  } else {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string where = "line " + std::to_string(line_no);
      if (const auto hash = line.find('#'); hash != std::string::npos) {
        line.erase(hash);
      }
      std::istringstream fields(line);
      std::vector<std::string> tokens;
      for (std::string tok; fields >> tok;) tokens.push_back(tok);
      if (tokens.empty()) continue;
      if (tokens.size() != 4) {
        ParseFail(where + ": expected 'agent side price quantity'");
      }
      double price = 0.0;
      double quantity = 0.0;
      for (auto [tok, out] : {std::pair{&tokens[2], &price},
                              std::pair{&tokens[3], &quantity}}) {
        char* end = nullptr;
        *out = std::strtod(tok->c_str(), &end);
        if (end == tok->c_str() || *end != '\0') {
          ParseFail(where + ": '" + *tok + "' is not a number");
        }
      }
      orders.push_back(
          {ParseSide(tokens[1], where), price, quantity, tokens[0]});
    }
  }
  return LimitOrderBook(std::move(orders));
}

std::string OutcomeToJson(const MarketScenario& scenario,
                          const ClearingOutcome& outcome,
                          const std::optional<KktReport>& kkt) {
  Json doc;
  doc["assets"] = scenario.assets();
  Json agents = Json::array();
  for (const AgentSpec& a : scenario.agents()) agents.push_back(a.id);
  doc["agents"] = std::move(agents);
  doc["price"] = StdVector(outcome.price);
  doc["total_surplus"] = outcome.total_surplus;
  doc["agent_surplus"] = StdVector(outcome.agent_surplus);
  doc["payments"] = StdVector(outcome.payments);
  doc["trades"] = MatrixJson(outcome.trades);
  doc["post_allocation"] = MatrixJson(outcome.post_allocation);
  Json stats;
  stats["method"] = outcome.stats.method;
  stats["outer_iterations"] = outcome.stats.outer_iterations;
  stats["newton_iterations"] = outcome.stats.newton_iterations;
  stats["duality_gap"] = outcome.stats.duality_gap;
  stats["equality_residual"] = outcome.stats.equality_residual;
  stats["price_normalization_error"] = outcome.stats.price_normalization_error;
  stats["solver_surplus"] = outcome.stats.barrier_surplus;
  doc["stats"] = std::move(stats);
  if (kkt) {
    Json k;
    k["max_supergradient_violation"] = Real(kkt->max_supergradient_violation);
    k["worst_agent"] = kkt->worst_agent;
    k["balance_residual"] = kkt->balance_residual;
    k["price_normalization_error"] = kkt->price_normalization_error;
    k["directions_per_agent"] = kkt->directions_per_agent;
    k["passes"] = kkt->Passes(outcome.price);
    doc["kkt"] = std::move(k);
  }
  return doc.dump(2) + "\n";
}

std::string TraceToJson(const MarketScenario& scenario,
                        const AuctionTrace& trace) {
  Json doc;
  doc["assets"] = scenario.assets();
  doc["stop_reason"] = StopReasonName(trace.stop);
  Json rounds = Json::array();
  for (const RoundRecord& rec : trace.rounds) {
    Json r;
    r["t"] = rec.t;
    r["cs"] = rec.cs;
    r["sum_ln_u"] = Real(rec.sum_ln_u);
    r["e_dot_p"] = rec.e_dot_p;
    r["delta_x_norm"] = rec.delta_x_norm;
    r["price"] = StdVector(rec.price);
    r["agent_surplus"] = StdVector(rec.outcome.agent_surplus);
    r["method"] = rec.outcome.stats.method;
    rounds.push_back(std::move(r));
  }
  doc["rounds"] = std::move(rounds);
  doc["final_allocation"] = MatrixJson(trace.final_allocation());
  return doc.dump(2) + "\n";
}

}  // namespace dauction
