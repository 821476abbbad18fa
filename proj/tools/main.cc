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

// dauction: scenario generation, single-asset and multi-asset clearing,
// repeated auctions and assumption diagnostics. Exit status 0 on success
// (for `run`: converged), 2 when `run` hits max rounds, 1 on any error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.h"
#include "dauction/types.h"

int main(int argc, char** argv) {
  CLI::App app{"Double auctions for multi-asset exchange economies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dauction 0.1.0");

  dauction::cli::GenConfig gen;
  dauction::cli::RunConfig run;
  dauction::cli::ClearConfig clear;
  dauction::cli::OrdersConfig orders;
  dauction::cli::PriceConfig price;
  dauction::cli::CheckConfig check;
  dauction::cli::RegisterGen(app, gen);
  dauction::cli::RegisterRun(app, run);
  dauction::cli::RegisterClear(app, clear);
  dauction::cli::RegisterClearOrders(app, orders);
  dauction::cli::RegisterPrice(app, price);
  dauction::cli::RegisterCheck(app, check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dauction::cli::kExitError;
  }

  try {
    if (app.got_subcommand("gen")) return dauction::cli::CmdGen(gen);
    if (app.got_subcommand("run")) return dauction::cli::CmdRun(run);
    if (app.got_subcommand("clear")) return dauction::cli::CmdClear(clear);
    if (app.got_subcommand("clear-orders")) {
      return dauction::cli::CmdClearOrders(orders);
    }
    if (app.got_subcommand("price")) return dauction::cli::CmdPrice(price);
    if (app.got_subcommand("check")) return dauction::cli::CmdCheck(check);
  } catch (const dauction::MarketError& e) {
    std::cerr << "error [" << dauction::ErrorCodeName(e.code())
              << "]: " << e.what() << '\n';
    return dauction::cli::kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dauction::cli::kExitError;
  }
  return dauction::cli::kExitError;
}
