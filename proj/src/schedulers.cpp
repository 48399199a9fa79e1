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

#include "skyline/schedulers.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

namespace skyline {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

ScheduleLog start_log(const QuestionInstance& q) {
  ScheduleLog log;
  log.question_id = q.question_id;
  log.final_skyline = Skyline::empty(q.size());
  return log;
}

void execute(ScheduleLog& log, const SimulatedReader& reader, int tower) {
  reader.advance(log.final_skyline, tower);
  log.actions.push_back(tower);
}

void finish(ScheduleLog& log, const SimulatedReader& reader, int m,
            OutputMode mode) {
  log.scheduler_layers = static_cast<int>(log.actions.size());
  log.rewards.assign(log.actions.size(), 0.0);
  OutputResult out = output_phase(log.final_skyline, reader, m, mode);
  log.selected_towers = std::move(out.selected_towers);
  log.prediction_correct = out.prediction_correct;
  log.unroll_layers = out.extra_cost;
}

struct QueueEntry {
  double priority;
  int index;
};

// Max-heap on priority; lower index wins ties.
struct QueueOrder {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    if (a.priority != b.priority) return a.priority < b.priority;
    return a.index > b.index;
  }
};

}  // namespace

SimulatedReader::SimulatedReader(const QuestionInstance& q,
                                 const CalibrationTable& calib)
    : q_(q), calib_(calib) {
  if (calib.layers() != q.layers()) {
    throw std::invalid_argument(
        "calibration table has " + std::to_string(calib.layers()) +
        " layers but question " + q.question_id + " has " +
        std::to_string(q.layers()));
  }
}

double SimulatedReader::has_answer(int i, int height) const {
  return calib_.probability(
      q_.passages[static_cast<std::size_t>(i)]
          .logits[static_cast<std::size_t>(height - 1)],
      height);
}

void SimulatedReader::advance(Skyline& s, int i) const {
  const std::size_t ui = static_cast<std::size_t>(i);
  if (s.heights[ui] >= layers()) {
    throw std::logic_error("tower " + std::to_string(i) + " is already full");
  }
  const int h = ++s.heights[ui];
  s.summaries[ui] = has_answer(i, h);
  ++s.cost_spent;
}

OutputResult output_phase(Skyline& skyline, const SimulatedReader& reader,
                          int m, OutputMode mode) {
  OutputResult out;
  const int n = static_cast<int>(skyline.size());
  std::vector<int> eligible;
  for (int i = 0; i < n; ++i) {
    if (skyline.heights[static_cast<std::size_t>(i)] > 0) eligible.push_back(i);
  }
  if (eligible.empty()) {
    for (int i = 0; i < std::min(m, n); ++i) out.selected_towers.push_back(i);
    return out;
  }
  std::stable_sort(eligible.begin(), eligible.end(), [&](int a, int b) {
    const std::size_t ua = static_cast<std::size_t>(a);
    const std::size_t ub = static_cast<std::size_t>(b);
    if (skyline.heights[ua] != skyline.heights[ub]) {
      return skyline.heights[ua] > skyline.heights[ub];
    }
    if (*skyline.summaries[ua] != *skyline.summaries[ub]) {
      return *skyline.summaries[ua] > *skyline.summaries[ub];
    }
    return a < b;
  });
  eligible.resize(std::min<std::size_t>(eligible.size(),
                                        static_cast<std::size_t>(m)));
  out.selected_towers = eligible;

  if (mode == OutputMode::kLastLayer) {
    for (int i : out.selected_towers) {
      while (skyline.heights[static_cast<std::size_t>(i)] < reader.layers()) {
        reader.advance(skyline, i);
        ++out.extra_cost;
      }
    }
  }
  int best = -1;
  double best_conf = 0.0;
  for (int i : out.selected_towers) {
    const double conf = *skyline.summaries[static_cast<std::size_t>(i)];
    if (best < 0 || conf > best_conf || (conf == best_conf && i < best)) {
      best = i;
      best_conf = conf;
    }
  }
  const int read_height = skyline.heights[static_cast<std::size_t>(best)];
  out.prediction_correct =
      reader.question()
          .passages[static_cast<std::size_t>(best)]
          .answer_correct[static_cast<std::size_t>(read_height - 1)];
  return out;
}

ScheduleLog run_tower_builder(const QuestionInstance& q, double tau, int m,
                              OutputMode mode, const CalibrationTable& calib) {
  const SimulatedReader reader(q, calib);
  ScheduleLog log = start_log(q);
  for (int i = 0; i < reader.towers(); ++i) {
    while (true) {
      execute(log, reader, i);
      const std::size_t ui = static_cast<std::size_t>(i);
      if (log.final_skyline.heights[ui] == reader.layers()) break;
      if (1.0 - *log.final_skyline.summaries[ui] >= tau) break;
    }
  }
  finish(log, reader, m, mode);
  return log;
}

double empty_tower_priority(InitRule rule, int index, int n) {
  if (rule == InitRule::kConstant) return 0.5;
  const int rank = index + 1;
  return 1.0 + static_cast<double>(n - rank) / static_cast<double>(n);
}

ScheduleLog run_greedy_skyline(const QuestionInstance& q, Budget budget, int m,
                               OutputMode mode, const CalibrationTable& calib,
                               InitRule init_rule) {
  const SimulatedReader reader(q, calib);
  ScheduleLog log = start_log(q);
  const int n = reader.towers();
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, QueueOrder> queue;
  for (int i = 0; i < n; ++i) {
    queue.push({empty_tower_priority(init_rule, i, n), i});
  }
  while (static_cast<int>(log.actions.size()) < budget.total_layers &&
         !queue.empty()) {
    const int i = queue.top().index;
    queue.pop();
    execute(log, reader, i);
    const std::size_t ui = static_cast<std::size_t>(i);
    if (log.final_skyline.heights[ui] < reader.layers()) {
      queue.push({*log.final_skyline.summaries[ui], i});
    }
  }
  finish(log, reader, m, mode);
  return log;
}

ScheduleLog run_policy_skyline(const QuestionInstance& q, Budget budget, int m,
                               OutputMode mode, const CalibrationTable& calib,
                               const PolicyParams& params,
                               ActionMode action_mode, std::mt19937_64* rng) {
  const SimulatedReader reader(q, calib);
  const int n = reader.towers();
  if (n > params.shape().n_max) {
    throw std::invalid_argument("question " + q.question_id + " has " +
                                std::to_string(n) +
                                " passages but the policy supports n_max=" +
                                std::to_string(params.shape().n_max));
  }
  if (params.shape().n_layers != reader.layers()) {
    throw std::invalid_argument("policy was built for L=" +
                                std::to_string(params.shape().n_layers) +
                                " but question " + q.question_id + " has L=" +
                                std::to_string(reader.layers()));
  }
  if (action_mode == ActionMode::kSample && rng == nullptr) {
    throw std::invalid_argument("sample mode needs a random stream");
  }
  ScheduleLog log = start_log(q);
  Skyline& sky = log.final_skyline;
  std::vector<bool> mask = expandable_mask(sky, reader.layers());
  std::vector<double> prio(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    prio[static_cast<std::size_t>(i)] = priority(sky, i, params);
  }
  int open = n;
  while (static_cast<int>(log.actions.size()) < budget.total_layers &&
         open > 0) {
    const std::vector<double> dist = softmax_masked(prio, mask);
    const int a = action_mode == ActionMode::kGreedy
                      ? select_greedy(dist)
                      : select_sample(dist, *rng);
    execute(log, reader, a);
    const std::size_t ua = static_cast<std::size_t>(a);
    if (sky.heights[ua] == reader.layers()) {
      mask[ua] = false;
      --open;
    } else {
      prio[ua] = priority(sky, a, params);
    }
  }
  finish(log, reader, m, mode);
  return log;
}

PolicyParams uniform_policy(int n_layers, int n_max) {
  PolicyParams p(PolicyShape{1, n_layers, n_max}, InitPriority::kFixed, 0.0);
  p.alpha() = 0.0;
  return p;
}

ScheduleLog run_static(const QuestionInstance& q,
                       const StaticStrategy& strategy, int m,
                       const CalibrationTable& calib) {
  const SimulatedReader reader(q, calib);
  ScheduleLog log = start_log(q);
  const int n = reader.towers();
  const int L = reader.layers();
  auto build = [&](int towers, int height) {
    for (int i = 0; i < towers; ++i) {
      for (int h = 0; h < height; ++h) execute(log, reader, i);
    }
  };
  std::visit(Overloaded{
                 [&](const Standard&) {
                   build(n, L);
                   finish(log, reader, m, OutputMode::kLastLayer);
                 },
                 [&](const Efficient& e) {
                   build(n, e.k_layers);
                   finish(log, reader, m, OutputMode::kAnyLayer);
                 },
                 [&](const TopK& t) {
                   build(t.k_passages, L);
                   finish(log, reader, m, OutputMode::kLastLayer);
                 },
             },
             strategy);
  return log;
}

bool is_global(const Strategy& strategy) {
  return std::holds_alternative<GreedySkylineStrategy>(strategy) ||
         std::holds_alternative<PolicySkylineStrategy>(strategy) ||
         std::holds_alternative<RandomSkylineStrategy>(strategy);
}

std::string strategy_name(const Strategy& strategy) {
  return std::visit(
      Overloaded{
          [](const TowerBuilderStrategy&) { return std::string("tower_builder"); },
          [](const GreedySkylineStrategy&) { return std::string("greedy"); },
          [](const PolicySkylineStrategy&) { return std::string("policy"); },
          [](const RandomSkylineStrategy&) { return std::string("random"); },
          [](const Standard&) { return std::string("standard"); },
          [](const Efficient&) { return std::string("efficient"); },
          [](const TopK&) { return std::string("top_k"); },
      },
      strategy);
}

void validate(const SchedulerConfig& config, const QuestionInstance& q) {
  const int n = static_cast<int>(q.size());
  const int L = static_cast<int>(q.layers());
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("question " + q.question_id + ": " + what);
  };
  if (config.m < 1 || config.m > n) {
    fail("m must lie in [1, n] = [1, " + std::to_string(n) + "]");
  }
  std::visit(
      Overloaded{
          [&](const TowerBuilderStrategy& t) {
            if (!(t.tau > 0.0 && t.tau <= 1.0)) fail("tau must lie in (0, 1]");
          },
          [&](const Efficient& e) {
            if (e.k_layers < 1 || e.k_layers > L) {
              fail("efficient k must lie in [1, L] = [1, " + std::to_string(L) + "]");
            }
          },
          [&](const TopK& t) {
            if (t.k_passages < 1 || t.k_passages > n) {
              fail("top_k k must lie in [1, n] = [1, " + std::to_string(n) + "]");
            }
          },
          [&](const PolicySkylineStrategy& p) {
            if (p.params == nullptr) fail("policy strategy needs parameters");
          },
          [](const auto&) {},
      },
      config.strategy);
  if (is_global(config.strategy) &&
      (config.budget.total_layers < 0 || config.budget.total_layers > n * L)) {
    fail("budget must lie in [0, n*L] = [0, " + std::to_string(n * L) + "]");
  }
}

ScheduleLog run_scheduler(const QuestionInstance& q,
                          const SchedulerConfig& config,
                          const CalibrationTable& calib,
                          std::size_t question_index) {
  return std::visit(
      Overloaded{
          [&](const TowerBuilderStrategy& t) {
            return run_tower_builder(q, t.tau, config.m, config.output_mode,
                                     calib);
          },
          [&](const GreedySkylineStrategy& g) {
            return run_greedy_skyline(q, config.budget, config.m,
                                      config.output_mode, calib, g.init_rule);
          },
          [&](const PolicySkylineStrategy& p) {
            std::mt19937_64 rng = episode_stream(p.seed, question_index);
            return run_policy_skyline(q, config.budget, config.m,
                                      config.output_mode, calib, *p.params,
                                      p.action_mode, &rng);
          },
          [&](const RandomSkylineStrategy& r) {
            std::mt19937_64 rng = episode_stream(r.seed, question_index);
            const int n = static_cast<int>(q.size());
            return run_policy_skyline(
                q, config.budget, config.m, config.output_mode, calib,
                uniform_policy(static_cast<int>(q.layers()), n),
                ActionMode::kSample, &rng);
          },
          [&](const Standard& s) { return run_static(q, s, config.m, calib); },
          [&](const Efficient& e) { return run_static(q, e, config.m, calib); },
          [&](const TopK& t) { return run_static(q, t, config.m, calib); },
      },
      config.strategy);
}

std::mt19937_64 episode_stream(std::uint64_t seed, std::uint64_t a,
                               std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32),
                    0x5eedu};
  return std::mt19937_64(seq);
}

void to_json(nlohmann::json& j, const ScheduleLog& log) {
  nlohmann::json summaries = nlohmann::json::array();
  for (const auto& s : log.final_skyline.summaries) {
    summaries.push_back(s ? nlohmann::json(*s) : nlohmann::json(nullptr));
  }
  j = nlohmann::json{{"question_id", log.question_id},
                     {"actions", log.actions},
                     {"rewards", log.rewards},
                     {"heights", log.final_skyline.heights},
                     {"summaries", summaries},
                     {"cost_spent", log.final_skyline.cost_spent},
                     {"selected_towers", log.selected_towers},
                     {"prediction_correct", log.prediction_correct},
                     {"scheduler_layers", log.scheduler_layers},
                     {"unroll_layers", log.unroll_layers}};
}

void from_json(const nlohmann::json& j, ScheduleLog& log) {
  log.question_id = j.at("question_id").get<std::string>();
  log.actions = j.at("actions").get<std::vector<int>>();
  log.rewards = j.at("rewards").get<std::vector<double>>();
  log.final_skyline.heights = j.at("heights").get<std::vector<int>>();
  log.final_skyline.summaries.clear();
  for (const auto& s : j.at("summaries")) {
    log.final_skyline.summaries.push_back(
        s.is_null() ? std::nullopt : std::optional<double>(s.get<double>()));
  }
  log.final_skyline.cost_spent = j.at("cost_spent").get<int>();
  log.selected_towers = j.at("selected_towers").get<std::vector<int>>();
  log.prediction_correct = j.at("prediction_correct").get<bool>();
  log.scheduler_layers = j.at("scheduler_layers").get<int>();
  log.unroll_layers = j.at("unroll_layers").get<int>();
}

}  // namespace skyline
