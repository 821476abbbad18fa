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

#ifndef DAUCTION_TOOLS_COMMANDS_H_
#define DAUCTION_TOOLS_COMMANDS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace dauction::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMaxRounds = 2;

struct GeneratorSpec {
  int agents = 0;
  int assets = 0;
  std::uint64_t seed = 0;
  std::string numeraire = "cash";
};

struct GenConfig {
  GeneratorSpec spec;
  std::string out;
};

// Exactly one of scenario_path and the generator flags is given.
struct RunConfig {
  std::string scenario_path;
  GeneratorSpec spec;
  double cs_stop = 1e-3;
  int max_rounds = 100;
  double tol_surplus = 1e-9;
  std::string tie_rule = "midpoint";
  std::string csv;
  std::string json;
  std::string final_scenario;
  bool certify = false;
  bool bound_check = false;
  std::string sweep;
  bool quiet = false;
};

struct ClearConfig {
  std::string scenario_path;
  std::string allocation_path;
  std::string route = "auto";
  std::string tie_rule = "midpoint";
  std::string json;
  int kkt_directions = 200;
  double tol_surplus = 1e-9;
};

struct OrdersConfig {
  std::string book_path;
  std::string tie_rule = "midpoint";
};

struct PriceConfig {
  std::string scenario_path;
  std::string allocation_path;
  std::string agent;
  std::vector<double> trade;
};

struct CheckConfig {
  std::string scenario_path;
  std::string allocation_path;
  double radius = 0.0;
  int samples = 4096;
};

void RegisterGen(CLI::App& app, GenConfig& config);
void RegisterRun(CLI::App& app, RunConfig& config);
void RegisterClear(CLI::App& app, ClearConfig& config);
void RegisterClearOrders(CLI::App& app, OrdersConfig& config);
void RegisterPrice(CLI::App& app, PriceConfig& config);
void RegisterCheck(CLI::App& app, CheckConfig& config);

int CmdGen(const GenConfig& config);
int CmdRun(const RunConfig& config);
int CmdClear(const ClearConfig& config);
int CmdClearOrders(const OrdersConfig& config);
int CmdPrice(const PriceConfig& config);
int CmdCheck(const CheckConfig& config);

}  // namespace dauction::cli

#endif  // DAUCTION_TOOLS_COMMANDS_H_
