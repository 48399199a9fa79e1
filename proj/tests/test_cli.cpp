// Copyright 2026 The Skyline Authors
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

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "scratch.hpp"

#ifndef SKYLINE_CLI_PATH
#error "SKYLINE_CLI_PATH must point at the skyline executable"
#endif

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

Run cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SKYLINE_CLI_PATH + "\" " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
  const Run help = cli("--help");
  CHECK(help.code == 0);
  CHECK(help.output.find("gen-traces") != std::string::npos);
  for (const char* sub : {"gen-traces", "split", "calibrate", "train", "evaluate", "sweep"}) {
    const Run r = cli(std::string(sub) + " --help");
    CHECK(r.code == 0);
    CHECK(r.output.find("--") != std::string::npos);
  }
  CHECK(cli("train --help").output.find("--fixed-init") != std::string::npos);
  CHECK(cli("").code == 2);
  CHECK(cli("bogus").code == 2);
  const Run missing = cli("gen-traces --seed 1");
  CHECK(missing.code == 2);
  CHECK(missing.output.find("--out") != std::string::npos);
  CHECK(missing.output.find("Usage") != std::string::npos);
  CHECK(cli("gen-traces --out x.jsonl").code == 2);
  CHECK(cli("gen-traces --seed 1 --out x.jsonl --count abc").code == 2);
}

TEST_CASE("gen-traces defaults and empty corpora") {
  test::Scratch dir;
  const auto out = dir.path("c.jsonl");
  const Run r = cli("gen-traces --seed 3 --count 2 --out " + out.string());
  REQUIRE(r.code == 0);
  CHECK(r.output.find("30 passages x 24 layers") != std::string::npos);
  std::ifstream in(out);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["passages"].size() == 30);
    CHECK(j["passages"][0]["logits"].size() == 24);
    ++lines;
  }
  CHECK(lines == 2);

  const auto empty = dir.path("empty.jsonl");
  CHECK(cli("gen-traces --seed 3 --count 0 --out " + empty.string()).code == 0);
  CHECK(std::filesystem::exists(empty));
  CHECK(std::filesystem::file_size(empty) == 0);
}

TEST_CASE("flags can come from a config file") {
  test::Scratch dir;
  const auto cfg = dir.path("run.toml");
  const auto out = dir.path("c.jsonl");
  std::ofstream(cfg) << "[gen-traces]\nseed = 4\ncount = 3\nn-passages = 5\nn-layers = 2\nout = \""
                     << out.string() << "\"\n";
  const Run r = cli("--config " + cfg.string() + " gen-traces");
  CHECK(r.code == 0);
  CHECK(r.output.find("3 questions, 5 passages x 2 layers") != std::string::npos);
  CHECK(std::filesystem::exists(out));
}

TEST_CASE("I/O and validation failures exit 1") {
  test::Scratch dir;
  CHECK(cli("calibrate --dev0 /nonexistent/d.jsonl --out " + dir.path("c.json").string())
            .code == 1);
  CHECK(cli("gen-traces --seed 1 --count 1 --out /nonexistent/dir/c.jsonl").code == 1);
  const auto bad = dir.path("bad.jsonl");
  std::ofstream(bad)
      << R"({"question_id": "broken-7", "passages": [{"rank": 1, "has_answer": false, )"
         R"("logits": [0.5], "answer_correct": [true]}]})"
      << "\n";
  const Run r = cli("calibrate --dev0 " + bad.string() + " --out " +
                    dir.path("c.json").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("broken-7") != std::string::npos);
}

TEST_CASE("pipeline with split, calibration, training and sweeps") {
  test::Scratch dir;
  auto p = [&](const char* name) { return dir.path(name).string(); };
  REQUIRE(cli("gen-traces --seed 5 --count 600 --n-passages 30 --n-layers 8 --out " +
              p("all.jsonl")).code == 0);
  const Run split = cli("split --traces " + p("all.jsonl") + " --train " + p("train.jsonl") +
                        " --dev0 " + p("dev0.jsonl") + " --dev1 " + p("dev1.jsonl") +
                        " --test " + p("test.jsonl") + " --ratios 1,1,1,1");
  REQUIRE(split.code == 0);
  CHECK(split.output.find("train=") != std::string::npos);
  CHECK(cli("split --traces " + p("all.jsonl") + " --train " + p("x.jsonl") + " --test " +
            p("x.jsonl")).code == 2);

  REQUIRE(cli("calibrate --dev0 " + p("dev0.jsonl") + " --out " + p("calib.json")).code == 0);
  CHECK(cli("train --dev0 " + p("dev0.jsonl") + " --calibration " + p("calib.json") +
            " --out " + p("policy.json")).code == 2);  // no seed
  const Run train = cli("train --dev0 " + p("dev0.jsonl") + " --dev1 " + p("dev1.jsonl") +
                        " --calibration " + p("calib.json") + " --seed 2 --epochs 2" +
                        " --out " + p("policy.json") + " --history " + p("history.csv"));
  REQUIRE(train.code == 0);
  CHECK(slurp(p("history.csv")).rfind("epoch,mean_return,held_out_hap,wall_time_ms\n", 0) == 0);

  const Run sweep = cli("sweep --traces " + p("test.jsonl") + " --calibration " +
                        p("calib.json") + " --strategy policy --params " + p("policy.json") +
                        " --budgets 30,60,90,120,240 --mode any_layer --out-json " +
                        p("sweep.json") + " --out-csv " + p("sweep.csv"));
  REQUIRE(sweep.code == 0);
  const auto report = nlohmann::json::parse(slurp(p("sweep.json")));
  REQUIRE(report["curve"].size() == 5);
  const double xs[] = {1, 2, 3, 4, 8};
  for (int k = 0; k < 5; ++k) CHECK(report["curve"][k]["avg_layers"] == xs[k]);

  CHECK(cli("sweep --traces " + p("test.jsonl") + " --calibration " + p("calib.json") +
            " --strategy policy --budgets 30").code == 2);  // no params
  CHECK(cli("sweep --traces " + p("test.jsonl") + " --calibration " + p("calib.json") +
            " --strategy random --budgets 30").code == 2);  // no seed
  CHECK(cli("evaluate --traces " + p("test.jsonl") + " --calibration " + p("calib.json") +
            " --strategy efficient").code == 2);  // no k
  CHECK(cli("evaluate --traces " + p("test.jsonl") + " --calibration " + p("calib.json") +
            " --strategy efficient --k 9").code == 2);  // k > L
  CHECK(cli("evaluate --traces " + p("test.jsonl") + " --calibration " + p("calib.json") +
            " --strategy greedy --budget 5 --out-json " + p("same") + " --out-csv " +
            p("same")).code == 2);

  // Head-to-head at equal cost: efficient at k = 3 against the policy at 3 layers.
  const Run eff = cli("evaluate --traces " + p("test.jsonl") + " --calibration " +
                      p("calib.json") + " --strategy efficient --k 3 --out-json " +
                      p("eff.json"));
  REQUIRE(eff.code == 0);
  const Run pol = cli("evaluate --traces " + p("test.jsonl") + " --calibration " +
                      p("calib.json") + " --strategy policy --params " + p("policy.json") +
                      " --budget 90 --mode any_layer --out-json " + p("pol.json") +
                      " --logs " + p("logs.json"));
  REQUIRE(pol.code == 0);
  const auto e = nlohmann::json::parse(slurp(p("eff.json")));
  const auto q = nlohmann::json::parse(slurp(p("pol.json")));
  CHECK(e["curve"][0]["avg_layers"] == q["curve"][0]["avg_layers"]);
  const auto logs = nlohmann::json::parse(slurp(p("logs.json")));
  CHECK(logs.is_array());
  CHECK(logs[0]["actions"].size() == 90);
}

}  // TEST_SUITE
