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

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "skyline/schedulers.hpp"

using namespace skyline;

namespace {

double logit(double p) { return std::log(p / (1 - p)); }

// Passages with the given HasAnswer probabilities per layer (identity
// calibration) and answers flagged per passage.
QuestionInstance scripted(const std::vector<std::vector<double>>& probs,
                          const std::vector<bool>& answers = {}) {
  QuestionInstance q;
  q.question_id = "scripted";
  for (std::size_t i = 0; i < probs.size(); ++i) {
    PassageTrace p;
    p.rank = static_cast<int>(i) + 1;
    p.has_answer = i < answers.size() && answers[i];
    for (double pr : probs[i]) {
      p.logits.push_back(logit(pr));
      p.answer_correct.push_back(p.has_answer);
    }
    q.passages.push_back(p);
  }
  return q;
}

QuestionInstance uniform_question(int n, int L, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.n_passages = n;
  cfg.n_layers = L;
  cfg.seed = seed;
  return generate(cfg, 1).front();
}

}  // namespace

TEST_SUITE("schedulers") {

TEST_CASE("tower builder with tau 1 never exits early") {
  const auto q = uniform_question(6, 5, 1);
  const auto calib = CalibrationTable::identity(5);
  const ScheduleLog log = run_tower_builder(q, 1.0, 1, OutputMode::kLastLayer, calib);
  CHECK(log.final_skyline.heights == std::vector<int>(6, 5));
  CHECK(log.final_skyline.cost_spent == 30);
  CHECK(log.unroll_layers == 0);
}

TEST_CASE("tower builder exits when 1 - HasAnswer reaches tau") {
  const auto q = scripted({{0.02, 0.5, 0.5}, {0.5, 0.5, 0.5}});
  const auto calib = CalibrationTable::identity(3);
  const ScheduleLog log = run_tower_builder(q, 0.9, 1, OutputMode::kAnyLayer, calib);
  CHECK(log.final_skyline.heights == std::vector<int>{1, 3});
  CHECK(log.actions == std::vector<int>{0, 1, 1, 1});
}

TEST_CASE("tower builder with m = 2 under LastLayer") {
  const auto q = scripted({{0.05, 0.5, 0.5}, {0.5, 0.5, 0.5}, {0.4, 0.6, 0.3}},
                          {false, true, false});
  const auto calib = CalibrationTable::identity(3);
  const ScheduleLog log = run_tower_builder(q, 0.9, 2, OutputMode::kLastLayer, calib);
  CHECK(log.final_skyline.heights == std::vector<int>{1, 3, 3});
  std::vector<int> sel = log.selected_towers;
  std::sort(sel.begin(), sel.end());
  CHECK(sel == std::vector<int>{1, 2});
  CHECK(log.final_skyline.cost_spent == 7);
  CHECK(log.unroll_layers == 0);
}

TEST_CASE("greedy expands the most probable tower") {
  const auto q = scripted({{0.2, 0.2}, {0.7, 0.7}});
  const auto calib = CalibrationTable::identity(2);
  const ScheduleLog log =
      run_greedy_skyline(q, Budget{3}, 1, OutputMode::kAnyLayer, calib);
  CHECK(log.actions == std::vector<int>{0, 1, 1});
}

TEST_CASE("budget zero falls back to the first m towers") {
  const auto q = scripted({{0.9}, {0.9}, {0.9}}, {true, true, true});
  const auto calib = CalibrationTable::identity(1);
  const ScheduleLog log =
      run_greedy_skyline(q, Budget{0}, 2, OutputMode::kLastLayer, calib);
  CHECK(log.actions.empty());
  CHECK(log.selected_towers == std::vector<int>{0, 1});
  CHECK_FALSE(log.prediction_correct);
  CHECK(log.final_skyline.cost_spent == 0);
  CHECK(log.unroll_layers == 0);
}

TEST_CASE("greedy matches a hand simulation on a scripted trace") {
  const auto q = scripted({{0.3, 0.9}, {0.6, 0.1}, {0.5, 0.8}});
  const auto calib = CalibrationTable::identity(2);
  const ScheduleLog ranked =
      run_greedy_skyline(q, Budget{4}, 1, OutputMode::kAnyLayer, calib);
  CHECK(ranked.actions == std::vector<int>{0, 1, 2, 1});
  const ScheduleLog flat = run_greedy_skyline(q, Budget{4}, 1, OutputMode::kAnyLayer,
                                              calib, InitRule::kConstant);
  CHECK(flat.actions == std::vector<int>{0, 1, 1, 2});
  CHECK(ranked.actions == oracle::greedy_actions(q, calib, 4, true));
  CHECK(flat.actions == oracle::greedy_actions(q, calib, 4, false));
}

TEST_CASE("greedy agrees with the exhaustive simulator on random instances") {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + int(rng() % 5), L = 1 + int(rng() % 5);
    const int budget = int(rng() % (n * L + 3));
    const auto q = oracle::random_instance(rng, n, L, "r");
    const auto calib = oracle::random_calibration(rng, L);
    for (InitRule rule : {InitRule::kRankOrder, InitRule::kConstant}) {
      const auto log = run_greedy_skyline(q, Budget{budget}, 1, OutputMode::kAnyLayer,
                                          calib, rule);
      CHECK(log.actions ==
            oracle::greedy_actions(q, calib, budget, rule == InitRule::kRankOrder));
    }
  }
}

TEST_CASE("policy with zero MLP reduces to greedy with constant init") {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + int(rng() % 6), L = 1 + int(rng() % 4);
    const auto q = oracle::random_instance(rng, n, L, "r");
    const auto calib = oracle::random_calibration(rng, L);
    PolicyParams p(PolicyShape{4, L, 6}, InitPriority::kFixed, 0.5);
    p.alpha() = 1.0;
    const int budget = int(rng() % (n * L + 1));
    const auto a = run_policy_skyline(q, Budget{budget}, 1, OutputMode::kLastLayer,
                                      calib, p, ActionMode::kGreedy);
    const auto b = run_greedy_skyline(q, Budget{budget}, 1, OutputMode::kLastLayer,
                                      calib, InitRule::kConstant);
    CHECK(a == b);
  }
}

TEST_CASE("a single passage is expanded until the budget or L") {
  const auto q = uniform_question(1, 6, 2);
  const auto calib = CalibrationTable::identity(6);
  std::mt19937_64 rng(1);
  const PolicyParams p = PolicyParams::initialize(PolicyShape{8, 6, 30}, 3);
  for (int budget : {0, 4, 6, 9}) {
    const auto log = run_policy_skyline(q, Budget{budget}, 1, OutputMode::kAnyLayer,
                                        calib, p, ActionMode::kSample, &rng);
    CHECK(log.actions == std::vector<int>(std::min(budget, 6), 0));
  }
}

TEST_CASE("sampled runs are reproducible for a fixed seed") {
  const auto q = uniform_question(10, 6, 4);
  const auto calib = CalibrationTable::identity(6);
  const PolicyParams p = PolicyParams::initialize(PolicyShape{8, 6, 30}, 5);
  SchedulerConfig cfg;
  cfg.strategy = PolicySkylineStrategy{&p, ActionMode::kSample, 99};
  cfg.budget = Budget{20};
  const auto a = run_scheduler(q, cfg, calib, 3);
  CHECK(a == run_scheduler(q, cfg, calib, 3));
  CHECK_FALSE(a.actions == run_scheduler(q, cfg, calib, 4).actions);
  cfg.strategy = RandomSkylineStrategy{99};
  const auto r = run_scheduler(q, cfg, calib, 3);
  CHECK(r == run_scheduler(q, cfg, calib, 3));
}

TEST_CASE("policy scheduling rejects mismatched inputs") {
  const auto q = uniform_question(5, 4, 1);
  const auto calib = CalibrationTable::identity(4);
  const PolicyParams small(PolicyShape{2, 4, 3});
  CHECK_THROWS_AS(run_policy_skyline(q, Budget{3}, 1, OutputMode::kAnyLayer, calib,
                                     small, ActionMode::kGreedy),
                  std::invalid_argument);
  const PolicyParams wrong_l(PolicyShape{2, 5, 8});
  CHECK_THROWS_AS(run_policy_skyline(q, Budget{3}, 1, OutputMode::kAnyLayer, calib,
                                     wrong_l, ActionMode::kGreedy),
                  std::invalid_argument);
  const PolicyParams ok(PolicyShape{2, 4, 8});
  CHECK_THROWS_AS(run_policy_skyline(q, Budget{3}, 1, OutputMode::kAnyLayer, calib,
                                     ok, ActionMode::kSample, nullptr),
                  std::invalid_argument);
}

TEST_CASE("static baselines") {
  const auto q = uniform_question(30, 24, 6);
  const auto calib = CalibrationTable::identity(24);
  const auto standard = run_static(q, Standard{}, 1, calib);
  CHECK(standard.final_skyline.cost_spent == 720);
  CHECK(standard.final_skyline.cost_spent / 30.0 == 24.0);
  const auto efficient = run_static(q, Efficient{6}, 1, calib);
  CHECK(efficient.final_skyline.cost_spent == 180);
  CHECK(efficient.unroll_layers == 0);
  const auto topk = run_static(q, TopK{18}, 1, calib);
  CHECK(topk.final_skyline.cost_spent / 30.0 == doctest::Approx(14.4));
  for (int i = 0; i < 30; ++i) CHECK(topk.final_skyline.heights[i] == (i < 18 ? 24 : 0));
}

TEST_CASE("output phase") {
  SUBCASE("full tower with a correct last layer") {
    const auto q = scripted({{0.5, 0.5, 0.9}}, {true});
    const auto calib = CalibrationTable::identity(3);
    SimulatedReader reader(q, calib);
    Skyline s = Skyline::empty(1);
    for (int k = 0; k < 3; ++k) reader.advance(s, 0);
    const auto out = output_phase(s, reader, 1, OutputMode::kLastLayer);
    CHECK(out.prediction_correct);
    CHECK(out.extra_cost == 0);
  }
  SUBCASE("LastLayer unrolls the shorter selected tower") {
    const auto q = scripted({{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}});
    const auto calib = CalibrationTable::identity(3);
    SimulatedReader reader(q, calib);
    Skyline s = Skyline::empty(2);
    reader.advance(s, 0);
    reader.advance(s, 0);
    for (int k = 0; k < 3; ++k) reader.advance(s, 1);
    const auto out = output_phase(s, reader, 2, OutputMode::kLastLayer);
    CHECK(out.extra_cost == 1);
    CHECK(s.heights == std::vector<int>{3, 3});
    CHECK(s.cost_spent == 6);
  }
  SUBCASE("AnyLayer with no correct extraction") {
    auto q = scripted({{0.8, 0.8}, {0.7, 0.7}}, {true, false});
    q.passages[0].answer_correct = {false, true};
    const auto calib = CalibrationTable::identity(2);
    SimulatedReader reader(q, calib);
    Skyline s = Skyline::empty(2);
    reader.advance(s, 0);
    reader.advance(s, 1);
    const auto out = output_phase(s, reader, 2, OutputMode::kAnyLayer);
    CHECK_FALSE(out.prediction_correct);
    CHECK(out.extra_cost == 0);
  }
  SUBCASE("the most confident selected tower answers") {
    auto q = scripted({{0.6, 0.6}, {0.9, 0.9}}, {false, true});
    const auto calib = CalibrationTable::identity(2);
    SimulatedReader reader(q, calib);
    Skyline s = Skyline::empty(2);
    reader.advance(s, 0);
    reader.advance(s, 1);
    CHECK(output_phase(s, reader, 2, OutputMode::kAnyLayer).prediction_correct);
  }
}

TEST_CASE("scheduler configs are validated against the question") {
  const auto q = uniform_question(4, 3, 1);
  auto rejects = [&](SchedulerConfig cfg) {
    CHECK_THROWS_AS(validate(cfg, q), std::invalid_argument);
  };
  SchedulerConfig cfg;
  cfg.m = 0;
  rejects(cfg);
  cfg = {};
  cfg.m = 5;
  rejects(cfg);
  cfg = {};
  cfg.strategy = TowerBuilderStrategy{0.0};
  rejects(cfg);
  cfg.strategy = TowerBuilderStrategy{1.5};
  rejects(cfg);
  cfg.strategy = Efficient{4};
  rejects(cfg);
  cfg.strategy = TopK{0};
  rejects(cfg);
  cfg.strategy = GreedySkylineStrategy{};
  cfg.budget = Budget{-1};
  rejects(cfg);
  cfg.budget = Budget{13};
  rejects(cfg);
  cfg.strategy = PolicySkylineStrategy{};
  cfg.budget = Budget{3};
  rejects(cfg);
  cfg.strategy = GreedySkylineStrategy{};
  CHECK_NOTHROW(validate(cfg, q));
}

TEST_CASE("strategy names and scope") {
  CHECK(strategy_name(Standard{}) == "standard");
  CHECK(strategy_name(TopK{}) == "top_k");
  CHECK(strategy_name(TowerBuilderStrategy{}) == "tower_builder");
  CHECK(is_global(GreedySkylineStrategy{}));
  CHECK(is_global(RandomSkylineStrategy{}));
  CHECK_FALSE(is_global(TowerBuilderStrategy{}));
  CHECK_FALSE(is_global(Efficient{}));
}

TEST_CASE("schedule logs round-trip through JSON") {
  const auto q = uniform_question(5, 4, 2);
  const auto log = run_greedy_skyline(q, Budget{7}, 2, OutputMode::kLastLayer,
                                      CalibrationTable::identity(4));
  const nlohmann::json j = log;
  CHECK(j.get<ScheduleLog>() == log);
}

}  // TEST_SUITE
