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

// End-to-end checks of the dauction binary. Each test works in its own
// temporary directory.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "dauction/scenario_io.h"

namespace dauction {
namespace {

namespace fs = std::filesystem;

struct Result {
  int status = -1;
  std::string out;
};

// Runs the binary through the shell with `env` prepended; stderr is merged
// into the captured output unless `stdout_only`.
Result Invoke(const std::string& args, const std::string& env = "",
           bool stdout_only = false) {
  std::string cmd = env + (env.empty() ? "" : " ") + "'" DAUCTION_CLI_PATH "' " +
                    args + (stdout_only ? " 2>/dev/null" : " 2>&1");
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

bool Contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("dauction_cli_" + std::string(info->name()) + "_" +
            std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Path(const std::string& name) const {
    return (dir_ / name).string();
  }
  std::string Write(const std::string& name, const std::string& contents) {
    WriteFile(Path(name), contents);
    return Path(name);
  }

  fs::path dir_;
};

const char* kTwoAgents = R"({
  "assets": ["cash", "good"],
  "numeraire": [1, 0],
  "agents": [
    {"id": "a", "utility": {"type": "cobb_douglas", "alpha": [0.5, 0.5]},
     "endowment": [2, 1]},
    {"id": "b", "utility": {"type": "cobb_douglas", "alpha": [0.5, 0.5]},
     "endowment": [1, 2]}
  ]
})";

TEST_F(CliTest, GenIsDeterministicAndParses) {
  const Result a = Invoke("gen --agents 6 --assets 3 --seed 4", "", true);
  const Result b = Invoke("gen --agents 6 --assets 3 --seed 4", "", true);
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  const MarketScenario sc = ParseScenario(a.out);
  EXPECT_EQ(sc.num_agents(), 6);
  EXPECT_EQ(sc.num_assets(), 3);
  EXPECT_EQ(a.out, ScenarioToJson(GenerateRandomScenario(
                       6, 3, 4, NumeraireMode::kUnitCash)));

  const Result c = Invoke("gen --agents 6 --assets 3 --seed 4 --numeraire ones -o " +
                       Path("s.json"));
  ASSERT_EQ(c.status, 0);
  EXPECT_TRUE(Contains(c.out, "generated 6 agents, 3 assets, seed 4, numeraire ones"));
  EXPECT_EQ(ParseScenario(ReadFile(Path("s.json"))).numeraire(),
            Vector::Ones(3));
}

TEST_F(CliTest, RunExitCodes) {
  const Result ok = Invoke("run --agents 10 --assets 3 --seed 2 -q");
  EXPECT_EQ(ok.status, 0) << ok.out;
  EXPECT_TRUE(Contains(ok.out, "stop: converged after ")) << ok.out;

  const Result capped = Invoke("run --agents 20 --assets 3 --seed 1 --max-rounds 1 -q");
  EXPECT_EQ(capped.status, 2) << capped.out;
  EXPECT_TRUE(Contains(capped.out, "stop: max-rounds after 1 round(s)"));

  const Result bad = Invoke("run --agents 10 -q");
  EXPECT_EQ(bad.status, 1);
  EXPECT_TRUE(Contains(bad.out, "error [invalid-argument]")) << bad.out;
}

TEST_F(CliTest, EnvironmentOverridesDefaults) {
  const Result r = Invoke("run --agents 20 --assets 3 --seed 1 -q",
                       "DAUCTION_MAX_ROUNDS=1");
  EXPECT_EQ(r.status, 2) << r.out;
  // A flag on the command line wins over the environment.
  const Result flag = Invoke("run --agents 20 --assets 3 --seed 1 -q --max-rounds 2",
                          "DAUCTION_MAX_ROUNDS=1");
  EXPECT_TRUE(Contains(flag.out, "after 2 round(s)")) << flag.out;
}

TEST_F(CliTest, RunWritesArtifacts) {
  const std::string sc = Write("s.json", kTwoAgents);
  const Result r = Invoke("run --scenario " + sc + " --csv " + Path("t.csv") +
                       " --json " + Path("t.json") + " --certify -q");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(Contains(r.out, "certificate: valid")) << r.out;
  const std::string csv = ReadFile(Path("t.csv"));
  EXPECT_EQ(csv.rfind("t,cs,sum_ln_u,e_dot_p,delta_x_norm,p_0,p_1\n", 0), 0u);
  EXPECT_TRUE(Contains(ReadFile(Path("t.json")), "\"stop_reason\""));
}

TEST_F(CliTest, FinalScenarioIsAFixedPoint) {
  const Result gen = Invoke("gen --agents 10 --assets 3 --seed 9 -o " + Path("s.json"));
  ASSERT_EQ(gen.status, 0);
  const Result first = Invoke("run --scenario " + Path("s.json") +
                           " --cs-stop 1e-10 -q --final " + Path("f.json"));
  ASSERT_EQ(first.status, 0) << first.out;
  const Result again =
      Invoke("run --scenario " + Path("f.json") + " --cs-stop 1e-10 -q");
  EXPECT_EQ(again.status, 0);
  EXPECT_TRUE(Contains(again.out, "stop: converged after 1 round(s)"))
      << again.out;
}

TEST_F(CliTest, ClearOrdersWorkedExample) {
  const std::string book = Write("book.txt",
                                 "# agent side price quantity\n"
                                 "s1 sell 8 3\n"
                                 "s2 sell 9 4\n"
                                 "b1 buy 10 5\n"
                                 "b2 buy 8.5 2\n");
  const Result r = Invoke("clear-orders " + book);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(Contains(r.out, "quantity: 5\n")) << r.out;
  EXPECT_TRUE(Contains(r.out, "price interval: [9, 9]")) << r.out;
  EXPECT_TRUE(Contains(r.out, "price: 9 (tie rule midpoint)")) << r.out;
  EXPECT_TRUE(Contains(r.out, "surplus: 8")) << r.out;
  EXPECT_TRUE(Contains(r.out, "fills:")) << r.out;
}

TEST_F(CliTest, ClearOrdersReportsTheBadLine) {
  const std::string book = Write("book.txt", "a buy 10 5\nb sell x 3\n");
  const Result r = Invoke("clear-orders " + book);
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(Contains(r.out, "error [parse]: line 2: 'x' is not a number"))
      << r.out;
}

TEST_F(CliTest, ClearPriceAndCheck) {
  const std::string sc = Write("s.json", kTwoAgents);
  const Result clear = Invoke("clear --scenario " + sc + " --json " + Path("o.json"));
  ASSERT_EQ(clear.status, 0) << clear.out;
  EXPECT_TRUE(Contains(clear.out, "method: ")) << clear.out;
  EXPECT_TRUE(Contains(clear.out, "CS: ")) << clear.out;
  EXPECT_TRUE(Contains(clear.out, "KKT: pass")) << clear.out;
  EXPECT_TRUE(Contains(ReadFile(Path("o.json")), "\"total_surplus\""));

  const Result price =
      Invoke("price --scenario " + sc + " --agent a --trade 0,1");
  ASSERT_EQ(price.status, 0) << price.out;
  EXPECT_TRUE(Contains(price.out, "D = 1")) << price.out;
  EXPECT_TRUE(Contains(price.out, "supergradient:")) << price.out;

  const Result check = Invoke("check --scenario " + sc);
  ASSERT_EQ(check.status, 0) << check.out;
  for (const char* line : {"numeraire monotonicity: pass",
                           "buyers and sellers: pass", "recession: pass",
                           "delta: pass"}) {
    EXPECT_TRUE(Contains(check.out, line)) << line << "\n" << check.out;
  }
}

TEST_F(CliTest, UnknownAgentAndMissingFile) {
  const std::string sc = Write("s.json", kTwoAgents);
  const Result agent = Invoke("price --scenario " + sc + " --agent zz --trade 0,1");
  EXPECT_EQ(agent.status, 1);
  EXPECT_TRUE(Contains(agent.out, "error [")) << agent.out;
  const Result missing = Invoke("clear --scenario " + Path("nope.json"));
  EXPECT_EQ(missing.status, 1);
}

}  // namespace
}  // namespace dauction
