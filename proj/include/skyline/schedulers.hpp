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

// Skyline-building strategies. One action executes one layer on one passage;
// a layer execution is the unit of cost.
//
//   TowerBuilder     each tower early-exits on its own when 1 - HasAnswer >= tau
//   greedy skyline   priority queue keyed by the current calibrated HasAnswer
//   policy skyline   softmax policy over learned priorities
//   static           standard (all towers to L), efficient(k), top_k(k)
//
// Every strategy finishes with the Output phase: pick the m tallest towers,
// optionally unroll them to full height (LastLayer), and answer from the most
// confident one.
//
// Ties are always broken toward the lower tower index.

#ifndef SKYLINE_SCHEDULERS_HPP_
#define SKYLINE_SCHEDULERS_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "skyline/policy.hpp"
#include "skyline/synthetic.hpp"
#include "skyline/trace.hpp"

namespace skyline {

enum class OutputMode { kLastLayer, kAnyLayer };
enum class InitRule { kRankOrder, kConstant };

// Calibrated view of one question's traces; advancing a tower is the only way
// a skyline changes.
class SimulatedReader {
 public:
  SimulatedReader(const QuestionInstance& q, const CalibrationTable& calib);

  int towers() const { return static_cast<int>(q_.size()); }
  int layers() const { return static_cast<int>(q_.layers()); }
  const QuestionInstance& question() const { return q_; }

  // Calibrated HasAnswer probability of tower i after `height` layers.
  double has_answer(int i, int height) const;
  // Executes the next layer of tower i. Precondition: tower not full.
  void advance(Skyline& s, int i) const;

 private:
  const QuestionInstance& q_;
  const CalibrationTable& calib_;
};

struct OutputResult {
  std::vector<int> selected_towers;
  bool prediction_correct = false;
  int extra_cost = 0;
};

// With no computed tower (zero budget) falls back to the first m towers by
// rank and declares the prediction incorrect. Otherwise only non-empty towers
// are eligible. LastLayer unrolls the selected towers in `skyline`.
OutputResult output_phase(Skyline& skyline, const SimulatedReader& reader,
                          int m, OutputMode mode);

ScheduleLog run_tower_builder(const QuestionInstance& q, double tau, int m,
                              OutputMode mode, const CalibrationTable& calib);

// Priority of an empty tower under the greedy scheduler. kRankOrder maps rank
// r to 1 + (n - r) / n, i.e. into [1, 2), above every probability, so empty
// towers are opened top rank first before any tower is extended.
double empty_tower_priority(InitRule rule, int index, int n);

ScheduleLog run_greedy_skyline(const QuestionInstance& q, Budget budget, int m,
                               OutputMode mode, const CalibrationTable& calib,
                               InitRule init_rule = InitRule::kRankOrder);

// `rng` is only used in sample mode; greedy mode may pass nullptr.
ScheduleLog run_policy_skyline(const QuestionInstance& q, Budget budget, int m,
                               OutputMode mode, const CalibrationTable& calib,
                               const PolicyParams& params,
                               ActionMode action_mode,
                               std::mt19937_64* rng = nullptr);

// Parameters whose policy is uniform over expandable towers.
PolicyParams uniform_policy(int n_layers, int n_max);

struct Standard {};
struct Efficient {
  int k_layers = 1;
};
struct TopK {
  int k_passages = 1;
};
using StaticStrategy = std::variant<Standard, Efficient, TopK>;

// Efficient reads answers at layer k (AnyLayer); standard and top-k process
// towers to full height.
ScheduleLog run_static(const QuestionInstance& q, const StaticStrategy& strategy,
                       int m, const CalibrationTable& calib);

struct TowerBuilderStrategy {
  double tau = 0.9;
};
struct GreedySkylineStrategy {
  InitRule init_rule = InitRule::kRankOrder;
};
struct PolicySkylineStrategy {
  const PolicyParams* params = nullptr;
  ActionMode action_mode = ActionMode::kGreedy;
  std::uint64_t seed = 0;  // per-question streams derive from (seed, index)
};
struct RandomSkylineStrategy {
  std::uint64_t seed = 0;
};

using Strategy = std::variant<TowerBuilderStrategy, GreedySkylineStrategy,
                              PolicySkylineStrategy, RandomSkylineStrategy,
                              Standard, Efficient, TopK>;

struct SchedulerConfig {
  Strategy strategy = Standard{};
  Budget budget{};  // global schedulers only
  int m = 1;
  OutputMode output_mode = OutputMode::kLastLayer;
};

// Whether the strategy schedules across towers (Flips are meaningful).
bool is_global(const Strategy& strategy);
std::string strategy_name(const Strategy& strategy);

// Throws std::invalid_argument when tau, k, budget or m is out of range for q.
void validate(const SchedulerConfig& config, const QuestionInstance& q);

// `question_index` selects the random stream of stochastic strategies.
ScheduleLog run_scheduler(const QuestionInstance& q,
                          const SchedulerConfig& config,
                          const CalibrationTable& calib,
                          std::size_t question_index = 0);

std::mt19937_64 episode_stream(std::uint64_t seed, std::uint64_t a,
                               std::uint64_t b = 0);

void to_json(nlohmann::json& j, const ScheduleLog& log);
void from_json(const nlohmann::json& j, ScheduleLog& log);

}  // namespace skyline

#endif  // SKYLINE_SCHEDULERS_HPP_
