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

// Text formats: JSON for scenarios, allocations, outcomes and traces; JSON
// or one order per line for order books. docs/formats.md has the schemas.
// Parse failures throw MarketError(kParse); semantic failures keep the code
// of the failing constructor.

#ifndef DAUCTION_SCENARIO_IO_H_
#define DAUCTION_SCENARIO_IO_H_

#include <optional>
#include <string>

#include "dauction/clearing.h"
#include "dauction/dynamics.h"
#include "dauction/model.h"
#include "dauction/orderbook.h"

namespace dauction {

std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, const std::string& contents);

MarketScenario ParseScenario(const std::string& text);
// Pretty-printed with shortest round-trip numbers; stable byte for byte.
std::string ScenarioToJson(const MarketScenario& scenario);

// {"allocation": [[...], ...]}, one row per agent in scenario order.
Allocation ParseAllocation(const std::string& text);
std::string AllocationToJson(const Allocation& x);

// JSON array of {"agent", "side", "price", "quantity"} objects, or lines
// "agent side price quantity" with '#' comments. Errors name the line.
LimitOrderBook ParseOrderBook(const std::string& text);

std::string OutcomeToJson(const MarketScenario& scenario,
                          const ClearingOutcome& outcome,
                          const std::optional<KktReport>& kkt = std::nullopt);

std::string TraceToJson(const MarketScenario& scenario,
                        const AuctionTrace& trace);

}  // namespace dauction

#endif  // DAUCTION_SCENARIO_IO_H_
