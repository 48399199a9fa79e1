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

// REINFORCE training of the tower-selection policy.
//
// An episode is one question scheduled by the policy in sample mode. Step t
// earns r_t = 1[tower has an answer] - c and the return is the discounted
// suffix sum R_t = r_t + gamma * R_{t+1}. The update ascends
//
//   (1 / batch) * sum_episodes sum_t R_t * grad log pi(i_t | S_t)
//
// with plain SGD. Gradients are summed over time steps, not normalised per
// episode.

#ifndef SKYLINE_TRAINING_HPP_
#define SKYLINE_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "skyline/policy.hpp"
#include "skyline/schedulers.hpp"
#include "skyline/synthetic.hpp"
#include "skyline/trace.hpp"

namespace skyline {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 32;
  int epochs = 16;
  int max_steps = 240;  // episode budget in layer executions
  double step_cost = 0.1;
  double gamma = 0.9;
  std::uint64_t seed = 0;
  // Subtract a moving average of returns before weighting the gradient.
  bool use_baseline = false;
  double baseline_decay = 0.9;
  // Budget for the held-out HAP check; 0 means max_steps.
  int eval_budget = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void validate(const TrainConfig& cfg);

// 1 - c when the chosen passage has an answer, -c otherwise.
double step_reward(int action, const QuestionInstance& q, double step_cost);

std::vector<double> discounted_returns(std::span<const double> rewards,
                                       double gamma);

// Fills log.rewards from the trace.
void assign_rewards(ScheduleLog& log, const QuestionInstance& q,
                    double step_cost);

// Replays the logged actions and returns sum_t weights[t] * grad log pi.
PolicyParams episode_gradient(const QuestionInstance& q, const ScheduleLog& log,
                              std::span<const double> weights,
                              const PolicyParams& params,
                              const CalibrationTable& calib);

struct EpochStats {
  int epoch = 0;           // 1-based
  double mean_return = 0;  // mean R_1 over the epoch's episodes
  double held_out_hap = 0;
  double wall_time_ms = 0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<EpochStats> history;
};

// Called after every sampled episode with the rewards filled in.
using EpisodeObserver = std::function<void(int epoch, const ScheduleLog& log)>;

// Episodes within an epoch visit the corpus in a seeded shuffled order; the
// episode on question k in epoch e samples from episode_stream(seed, e, k).
// Held-out HAP uses greedy actions on `held_out` (falls back to `corpus` when
// empty). Throws TrainingError on a non-finite gradient or parameter.
TrainResult train(std::span<const QuestionInstance> corpus,
                  std::span<const QuestionInstance> held_out,
                  const PolicyParams& init, const TrainConfig& cfg,
                  const CalibrationTable& calib,
                  const EpisodeObserver& observer = {});

// CSV with header epoch,mean_return,held_out_hap,wall_time_ms.
void save_history_csv(std::span<const EpochStats> history,
                      const std::filesystem::path& path);

}  // namespace skyline

#endif  // SKYLINE_TRAINING_HPP_
