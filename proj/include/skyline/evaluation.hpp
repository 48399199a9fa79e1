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

// Accuracy-vs-cost evaluation and scheduling diagnostics.
//
// Cost is counted in layer executions. avg_layers is total cost (scheduler
// actions plus LastLayer unrolling) divided by questions * passages.

#ifndef SKYLINE_EVALUATION_HPP_
#define SKYLINE_EVALUATION_HPP_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "skyline/schedulers.hpp"
#include "skyline/synthetic.hpp"
#include "skyline/trace.hpp"

namespace skyline {

// Heights here are the tower heights when scheduling stops, i.e. the number
// of actions spent on each tower, before any LastLayer unrolling.
struct Diagnostics {
  double var_h = 0.0;         // population variance, averaged over questions
  double avg_rank = 0.0;      // mean 1-based rank over all actions
  std::optional<double> flips;  // mean switches per question; global only
  double h_plus_minus = 0.0;  // mean over questions with both groups
  double hap = 0.0;           // fraction of actions on answer passages
};

Diagnostics diagnostics(std::span<const ScheduleLog> logs,
                        std::span<const QuestionInstance> corpus);

struct EvalPoint {
  double budget_param = 0.0;  // budget, tau, k, ... depending on strategy
  double avg_layers = 0.0;
  double accuracy = 0.0;
  double scheduler_layers = 0.0;  // per question
  double unroll_layers = 0.0;     // per question
  Diagnostics diagnostics;
};

struct EvalReport {
  std::string strategy;
  int n_layers = 0;
  std::vector<EvalPoint> curve;  // sorted by avg_layers ascending
};

struct EvalRun {
  EvalPoint point;
  std::vector<ScheduleLog> logs;
};

EvalRun evaluate_with_logs(std::span<const QuestionInstance> corpus,
                           const SchedulerConfig& config,
                           const CalibrationTable& calib);
EvalPoint evaluate(std::span<const QuestionInstance> corpus,
                   const SchedulerConfig& config,
                   const CalibrationTable& calib);

// `values` is tau for tower_builder, the budget for global schedulers, k for
// efficient and top_k; ignored for standard (one point).
EvalReport sweep(std::span<const QuestionInstance> corpus,
                 const SchedulerConfig& base, std::span<const double> values,
                 const CalibrationTable& calib);

// Returns `base` with the swept parameter set to `value`.
SchedulerConfig with_parameter(const SchedulerConfig& base, double value);

struct Reduction {
  bool reachable = false;
  double avg_layers = 0.0;
  double factor = 0.0;  // n_layers / avg_layers
};

// Smallest cost at which the curve reaches target_fraction * standard
// accuracy, interpolating linearly between neighbouring points.
Reduction reduction_factor(std::span<const EvalPoint> curve,
                           double target_fraction, double standard_accuracy,
                           int n_layers);
// Takes the standard accuracy from the curve point at avg_layers == n_layers;
// throws std::invalid_argument if there is none.
Reduction reduction_factor(const EvalReport& report, double target_fraction);

nlohmann::json report_to_json(const EvalReport& report);
// Columns budget_param,avg_layers,accuracy,scheduler_layers,unroll_layers,
// followed by a "# diagnostics" section.
std::string report_to_csv(const EvalReport& report);
void save_report(const EvalReport& report, const std::filesystem::path& json_path,
                 const std::filesystem::path& csv_path);

}  // namespace skyline

#endif  // SKYLINE_EVALUATION_HPP_
