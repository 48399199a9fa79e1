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

#include "skyline/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

namespace skyline {
namespace {

int episode_budget(const QuestionInstance& q, int steps) {
  const int full = static_cast<int>(q.size() * q.layers());
  return std::min(steps, full);
}

std::string first_bad_coordinate(const PolicyParams& p) {
  const auto v = p.values();
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v[k])) {
      return "coordinate " + std::to_string(k) + " = " + std::to_string(v[k]);
    }
  }
  return "none";
}

double greedy_hap(std::span<const QuestionInstance> corpus,
                  const PolicyParams& params, const CalibrationTable& calib,
                  int budget) {
  long hits = 0;
  long total = 0;
  for (const QuestionInstance& q : corpus) {
    const ScheduleLog log = run_policy_skyline(
        q, Budget{episode_budget(q, budget)}, 1, OutputMode::kAnyLayer, calib,
        params, ActionMode::kGreedy);
    for (int a : log.actions) {
      hits += q.passages[static_cast<std::size_t>(a)].has_answer ? 1 : 0;
    }
    total += static_cast<long>(log.actions.size());
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) {
    throw std::invalid_argument("lr must be a non-negative finite number");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (!(cfg.step_cost >= 0.0)) {
    throw std::invalid_argument("step_cost must be >= 0");
  }
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1]");
  }
  if (!(cfg.baseline_decay >= 0.0 && cfg.baseline_decay < 1.0)) {
    throw std::invalid_argument("baseline_decay must lie in [0, 1)");
  }
  if (cfg.eval_budget < 0) throw std::invalid_argument("eval_budget must be >= 0");
}

double step_reward(int action, const QuestionInstance& q, double step_cost) {
  const bool hit = q.passages.at(static_cast<std::size_t>(action)).has_answer;
  return (hit ? 1.0 : 0.0) - step_cost;
}

std::vector<double> discounted_returns(std::span<const double> rewards,
                                       double gamma) {
  std::vector<double> out(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + gamma * running;
    out[t] = running;
  }
  return out;
}

void assign_rewards(ScheduleLog& log, const QuestionInstance& q,
                    double step_cost) {
  log.rewards.resize(log.actions.size());
  for (std::size_t t = 0; t < log.actions.size(); ++t) {
    log.rewards[t] = step_reward(log.actions[t], q, step_cost);
  }
}

PolicyParams episode_gradient(const QuestionInstance& q, const ScheduleLog& log,
                              std::span<const double> weights,
                              const PolicyParams& params,
                              const CalibrationTable& calib) {
  const SimulatedReader reader(q, calib);
  const int n = reader.towers();
  const int L = reader.layers();
  PolicyParams grad(params.shape(), params.init_mode(), 0.0);

  // A tower's priority depends only on its own (index, height), so the
  // per-step terms collapse onto coeff[i][h] before any backward pass.
  std::vector<double> coeff(static_cast<std::size_t>(n * (L + 1)), 0.0);
  auto cell = [&](int i, int h) -> double& {
    return coeff[static_cast<std::size_t>(i * (L + 1) + h)];
  };

  Skyline sky = Skyline::empty(q.size());
  std::vector<bool> mask = expandable_mask(sky, L);
  std::vector<double> prio(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    prio[static_cast<std::size_t>(i)] = priority(sky, i, params);
  }
  for (std::size_t t = 0; t < log.actions.size(); ++t) {
    const int a = log.actions[t];
    const std::vector<double> dist = softmax_masked(prio, mask);
    const double w = weights[t];
    for (int j = 0; j < n; ++j) {
      const std::size_t uj = static_cast<std::size_t>(j);
      if (!mask[uj]) continue;
      cell(j, sky.heights[uj]) += w * ((j == a ? 1.0 : 0.0) - dist[uj]);
    }
    reader.advance(sky, a);
    const std::size_t ua = static_cast<std::size_t>(a);
    if (sky.heights[ua] == L) {
      mask[ua] = false;
    } else {
      prio[ua] = priority(sky, a, params);
    }
  }

  Skyline probe = Skyline::empty(q.size());
  for (int i = 0; i < n; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    for (int h = 0; h <= L; ++h) {
      const double c = cell(i, h);
      if (c == 0.0) continue;
      probe.heights[ui] = h;
      probe.summaries[ui] =
          h == 0 ? std::nullopt : std::optional<double>(reader.has_answer(i, h));
      accumulate_priority_gradient(probe, i, params, c, grad);
    }
    probe.heights[ui] = 0;
    probe.summaries[ui].reset();
  }
  return grad;
}

TrainResult train(std::span<const QuestionInstance> corpus,
                  std::span<const QuestionInstance> held_out,
                  const PolicyParams& init, const TrainConfig& cfg,
                  const CalibrationTable& calib,
                  const EpisodeObserver& observer) {
  validate(cfg);
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
  if (!init.all_finite()) {
    throw TrainingError("initial parameters are not finite: " +
                        first_bad_coordinate(init));
  }
  const std::span<const QuestionInstance> check =
      held_out.empty() ? corpus : held_out;
  const int eval_budget = cfg.eval_budget > 0 ? cfg.eval_budget : cfg.max_steps;

  TrainResult result{init, {}};
  PolicyParams& params = result.params;
  double baseline = 0.0;
  bool baseline_ready = false;

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 shuffler =
        episode_stream(cfg.seed, static_cast<std::uint64_t>(epoch),
                       std::numeric_limits<std::uint64_t>::max());
    std::shuffle(order.begin(), order.end(), shuffler);

    double return_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      PolicyParams batch_grad(params.shape(), params.init_mode(), 0.0);
      double batch_return_sum = 0.0;
      std::size_t batch_steps = 0;

      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t k = order[b];
        const QuestionInstance& q = corpus[k];
        std::mt19937_64 rng = episode_stream(
            cfg.seed, static_cast<std::uint64_t>(epoch), k);
        ScheduleLog log;
        try {
          log = run_policy_skyline(q, Budget{episode_budget(q, cfg.max_steps)},
                                   1, OutputMode::kAnyLayer, calib, params,
                                   ActionMode::kSample, &rng);
        } catch (const std::domain_error& e) {
          throw TrainingError("epoch " + std::to_string(epoch) + ", question " +
                              q.question_id + ": " + e.what());
        }
        assign_rewards(log, q, cfg.step_cost);
        std::vector<double> weights = discounted_returns(log.rewards, cfg.gamma);
        if (!weights.empty()) return_sum += weights.front();
        for (double r : weights) batch_return_sum += r;
        batch_steps += weights.size();
        if (cfg.use_baseline && baseline_ready) {
          for (double& w : weights) w -= baseline;
        }
        const PolicyParams g = episode_gradient(q, log, weights, params, calib);
        auto dst = batch_grad.values();
        const auto src = g.values();
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        if (observer) observer(epoch, log);
      }

      if (!batch_grad.all_finite()) {
        throw TrainingError("non-finite policy gradient in epoch " +
                            std::to_string(epoch) + " at batch offset " +
                            std::to_string(begin) + ": " +
                            first_bad_coordinate(batch_grad));
      }
      const double step = cfg.lr / static_cast<double>(end - begin);
      auto p = params.values();
      const auto g = batch_grad.values();
      for (std::size_t c = 0; c < p.size(); ++c) p[c] += step * g[c];
      if (!params.all_finite()) {
        throw TrainingError("parameters became non-finite in epoch " +
                            std::to_string(epoch) + ": " +
                            first_bad_coordinate(params));
      }
      if (cfg.use_baseline && batch_steps > 0) {
        const double mean = batch_return_sum / static_cast<double>(batch_steps);
        baseline = baseline_ready ? cfg.baseline_decay * baseline +
                                        (1.0 - cfg.baseline_decay) * mean
                                  : mean;
        baseline_ready = true;
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_return = return_sum / static_cast<double>(corpus.size());
    stats.held_out_hap = greedy_hap(check, params, calib, eval_budget);
    stats.wall_time_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    result.history.push_back(stats);
  }
  return result;
}

void save_history_csv(std::span<const EpochStats> history,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write history file " + path.string());
  out << "epoch,mean_return,held_out_hap,wall_time_ms\n";
  char buf[128];
  for (const EpochStats& s : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.3f\n", s.epoch,
                  s.mean_return, s.held_out_hap, s.wall_time_ms);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace skyline
