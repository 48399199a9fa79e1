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
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "scratch.hpp"
#include "skyline/training.hpp"

using namespace skyline;

namespace {

// Exactly one answer passage per question with near-certain probes.
std::vector<QuestionInstance> one_answer_corpus(std::uint64_t seed, int count,
                                                int n, int L) {
  std::mt19937_64 rng(seed);
  std::vector<QuestionInstance> corpus;
  for (int k = 0; k < count; ++k) {
    const int answer = int(rng() % n);
    QuestionInstance q;
    q.question_id = "o" + std::to_string(k);
    for (int i = 0; i < n; ++i) {
      PassageTrace p;
      p.rank = i + 1;
      p.has_answer = i == answer;
      p.logits.assign(L, p.has_answer ? 6.0 : -6.0);
      p.answer_correct.assign(L, p.has_answer);
      q.passages.push_back(p);
    }
    corpus.push_back(q);
  }
  return corpus;
}

double greedy_hap(const std::vector<QuestionInstance>& corpus,
                  const PolicyParams& p, int budget,
                  const CalibrationTable& calib) {
  double hits = 0, actions = 0;
  for (const auto& q : corpus) {
    const auto log = run_policy_skyline(q, Budget{budget}, 1, OutputMode::kAnyLayer,
                                        calib, p, ActionMode::kGreedy);
    for (int a : log.actions) hits += q.passages[a].has_answer;
    actions += double(log.actions.size());
  }
  return hits / actions;
}

// Expected undiscounted return of the sampled policy by enumerating every
// action sequence.
double expected_return(const QuestionInstance& q, const PolicyParams& p,
                       const CalibrationTable& calib, int budget, double c) {
  const SimulatedReader reader(q, calib);
  const int L = static_cast<int>(q.layers());
  std::function<double(const Skyline&, int)> value = [&](const Skyline& s,
                                                         int left) -> double {
    if (left == 0) return 0.0;
    const auto mask = expandable_mask(s, L);
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) return 0.0;
    const auto dist = policy_distribution(s, p, mask);
    double v = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (!mask[i]) continue;
      Skyline next = s;
      reader.advance(next, static_cast<int>(i));
      const double r = (q.passages[i].has_answer ? 1.0 : 0.0) - c;
      v += dist[i] * (r + value(next, left - 1));
    }
    return v;
  };
  return value(Skyline::empty(q.size()), budget);
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("step rewards") {
  QuestionInstance q{"r", {PassageTrace{1, true, {1.0}, {true}},
                           PassageTrace{2, false, {-1.0}, {false}}}};
  CHECK(step_reward(0, q, 0.1) == doctest::Approx(0.9));
  CHECK(step_reward(1, q, 0.1) == doctest::Approx(-0.1));
  CHECK(step_reward(0, q, 0.0) == 1.0);
  CHECK(step_reward(1, q, 0.0) == 0.0);
}

TEST_CASE("discounted returns") {
  const std::vector<double> r{0.9, -0.1};
  const auto R = discounted_returns(r, 0.9);
  CHECK(R[0] == doctest::Approx(0.81).epsilon(1e-15));
  CHECK(R[1] == doctest::Approx(-0.1).epsilon(1e-15));
  const std::vector<double> mixed{0.3, -2.0, 5.0};
  CHECK(discounted_returns(mixed, 0.0) == mixed);
  CHECK(discounted_returns(std::vector<double>{}, 0.9).empty());
  for (int k : {1, 2, 10, 100, 240}) {
    const std::vector<double> rewards(k, 0.9);
    const double closed = 0.9 * (1 - std::pow(0.9, k)) / (1 - 0.9);
    CHECK(std::abs(discounted_returns(rewards, 0.9)[0] - closed) < 1e-12);
  }
}

TEST_CASE("config validation") {
  auto rejects = [](TrainConfig cfg) { CHECK_THROWS(validate(cfg)); };
  TrainConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.lr = -1;
  rejects(cfg);
  cfg = {};
  cfg.batch_size = 0;
  rejects(cfg);
  cfg = {};
  cfg.gamma = 1.5;
  rejects(cfg);
  cfg = {};
  cfg.max_steps = -1;
  rejects(cfg);
  cfg = {};
  cfg.epochs = -1;
  rejects(cfg);
}

TEST_CASE("lr zero leaves parameters untouched") {
  GeneratorConfig g;
  g.n_passages = 6;
  g.n_layers = 4;
  const auto corpus = generate(g, 40);
  const auto calib = CalibrationTable::identity(4);
  const PolicyParams init = PolicyParams::initialize(PolicyShape{4, 4, 6}, 1);
  TrainConfig cfg;
  cfg.lr = 0;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.max_steps = 10;
  const auto result = train(corpus, {}, init, cfg, calib);
  CHECK(result.params == init);
  CHECK(result.history.size() == 2);
}

TEST_CASE("single-tower questions produce no gradient") {
  GeneratorConfig g;
  g.n_passages = 1;
  g.n_layers = 5;
  const auto corpus = generate(g, 20);
  const auto calib = CalibrationTable::identity(5);
  const PolicyParams init = PolicyParams::initialize(PolicyShape{4, 5, 3}, 2);
  TrainConfig cfg;
  cfg.lr = 0.5;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  int episodes = 0;
  const auto result = train(corpus, {}, init, cfg, calib,
                            [&](int, const ScheduleLog& log) {
                              ++episodes;
                              CHECK(log.rewards.size() == log.actions.size());
                              const auto w = discounted_returns(log.rewards, 0.9);
                              const auto grad = episode_gradient(corpus[0], log, w, init, calib);
                              for (double v : grad.values()) CHECK(v == 0.0);
                            });
  CHECK(episodes == 60);
  CHECK(result.params == init);
}

TEST_CASE("training on clean probes raises held-out HAP") {
  const auto corpus = one_answer_corpus(1, 200, 6, 4);
  const auto held_out = one_answer_corpus(2, 100, 6, 4);
  const auto calib = CalibrationTable::identity(4);
  PolicyParams init(PolicyShape{4, 4, 6}, InitPriority::kLearnable);
  init.alpha() = 1.0;
  TrainConfig cfg;
  cfg.lr = 0.05;
  cfg.max_steps = 8;
  cfg.seed = 3;
  const auto result = train(corpus, held_out, init, cfg, calib);
  const double before = greedy_hap(held_out, init, 8, calib);
  const double after = greedy_hap(held_out, result.params, 8, calib);
  MESSAGE("held-out HAP " << before << " -> " << after);
  CHECK(after > before);
  CHECK(result.history.back().held_out_hap == doctest::Approx(after));
}

TEST_CASE("sampled gradient estimate matches the exact policy gradient") {
  // Two towers, two layers, budget 2, undiscounted returns: the REINFORCE
  // estimate averages to the gradient of the enumerated expected return.
  QuestionInstance q{"toy", {PassageTrace{1, false, {-0.5, -1.5}, {false, false}},
                             PassageTrace{2, true, {0.3, 1.2}, {true, true}}}};
  const auto calib = CalibrationTable::identity(2);
  std::mt19937_64 prng(12);
  const PolicyParams p = oracle::random_params(prng, PolicyShape{2, 2, 2}, 0.8);
  const double c = 0.1;
  const int budget = 2;

  std::vector<double> exact(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    PolicyParams up = p, down = p;
    up.values()[k] += 1e-5;
    down.values()[k] -= 1e-5;
    exact[k] = (expected_return(q, up, calib, budget, c) -
                expected_return(q, down, calib, budget, c)) / 2e-5;
  }

  const int episodes = 10000;
  std::vector<double> estimate(p.size(), 0.0);
  std::mt19937_64 rng(5);
  for (int e = 0; e < episodes; ++e) {
    ScheduleLog log = run_policy_skyline(q, Budget{budget}, 1, OutputMode::kAnyLayer,
                                         calib, p, ActionMode::kSample, &rng);
    assign_rewards(log, q, c);
    const auto returns = discounted_returns(log.rewards, 1.0);
    const auto g = episode_gradient(q, log, returns, p, calib);
    for (std::size_t k = 0; k < p.size(); ++k) estimate[k] += g.values()[k] / episodes;
  }
  double diff = 0, norm = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    diff += (estimate[k] - exact[k]) * (estimate[k] - exact[k]);
    norm += exact[k] * exact[k];
  }
  MESSAGE("relative error " << std::sqrt(diff / norm));
  CHECK(std::sqrt(diff / norm) < 0.1);
  CHECK((estimate[0] > 0) == (exact[0] > 0));
}

TEST_CASE("episode gradient is the weighted sum of per-step gradients") {
  std::mt19937_64 rng(21);
  const auto q = oracle::random_instance(rng, 4, 3, "w");
  const auto calib = oracle::random_calibration(rng, 3);
  const PolicyParams p = oracle::random_params(rng, PolicyShape{2, 3, 4});
  const auto log = run_policy_skyline(q, Budget{7}, 1, OutputMode::kAnyLayer, calib,
                                      p, ActionMode::kSample, &rng);
  std::vector<double> w;
  for (std::size_t t = 0; t < log.actions.size(); ++t) w.push_back(0.5 - 0.2 * double(t));
  const auto got = episode_gradient(q, log, w, p, calib);
  std::vector<double> want(p.size(), 0.0);
  const SimulatedReader reader(q, calib);
  Skyline s = Skyline::empty(q.size());
  for (std::size_t t = 0; t < log.actions.size(); ++t) {
    const auto g = log_prob_gradient(s, log.actions[t], p, expandable_mask(s, 3));
    for (std::size_t k = 0; k < p.size(); ++k) want[k] += w[t] * g.values()[k];
    reader.advance(s, log.actions[t]);
  }
  for (std::size_t k = 0; k < p.size(); ++k) {
    CHECK(got.values()[k] == doctest::Approx(want[k]).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("training is deterministic for a seed") {
  GeneratorConfig g;
  g.n_passages = 8;
  g.n_layers = 4;
  const auto corpus = generate(g, 30);
  const auto calib = CalibrationTable::identity(4);
  const PolicyParams init = PolicyParams::initialize(PolicyShape{4, 4, 8}, 1);
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.epochs = 3;
  cfg.max_steps = 12;
  cfg.seed = 4;
  const auto a = train(corpus, corpus, init, cfg, calib);
  const auto b = train(corpus, corpus, init, cfg, calib);
  CHECK(a.params == b.params);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].mean_return == b.history[e].mean_return);
    CHECK(a.history[e].held_out_hap == b.history[e].held_out_hap);
  }
  cfg.seed = 5;
  CHECK_FALSE(train(corpus, corpus, init, cfg, calib).params == a.params);
}

TEST_CASE("divergence is reported") {
  GeneratorConfig g;
  g.n_passages = 5;
  g.n_layers = 3;
  const auto corpus = generate(g, 20);
  const auto calib = CalibrationTable::identity(3);
  const PolicyParams init = PolicyParams::initialize(PolicyShape{4, 3, 5}, 1);
  TrainConfig cfg;
  cfg.lr = 1e308;
  cfg.batch_size = 1;
  cfg.max_steps = 6;
  CHECK_THROWS_AS(train(corpus, {}, init, cfg, calib), TrainingError);
}

TEST_CASE("history CSV") {
  test::Scratch dir;
  const std::vector<EpochStats> history{{1, -0.25, 0.5, 12.5}, {2, 0.125, 0.75, 10}};
  save_history_csv(history, dir.path("h.csv"));
  std::ifstream in(dir.path("h.csv"));
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "epoch,mean_return,held_out_hap,wall_time_ms\n"
                    "1,-0.25,0.5,12.500\n2,0.125,0.75,10.000\n");
}

}  // TEST_SUITE
