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

#include "skyline/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace skyline {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x == 0.0 ? 0.0 : x);
  return buf;
}

}  // namespace

Diagnostics diagnostics(std::span<const ScheduleLog> logs,
                        std::span<const QuestionInstance> corpus) {
  if (logs.size() != corpus.size()) {
    throw std::invalid_argument("diagnostics: logs and corpus differ in size");
  }
  Diagnostics d;
  if (logs.empty()) return d;
  double var_sum = 0.0;
  double flip_sum = 0.0;
  double hpm_sum = 0.0;
  long hpm_count = 0;
  long rank_sum = 0;
  long hits = 0;
  long actions = 0;

  for (std::size_t k = 0; k < logs.size(); ++k) {
    const ScheduleLog& log = logs[k];
    const QuestionInstance& q = corpus[k];
    const std::size_t n = q.size();
    std::vector<double> heights(n, 0.0);
    for (std::size_t t = 0; t < log.actions.size(); ++t) {
      const std::size_t a = static_cast<std::size_t>(log.actions[t]);
      heights.at(a) += 1.0;
      rank_sum += q.passages[a].rank;
      hits += q.passages[a].has_answer ? 1 : 0;
      if (t > 0 && log.actions[t] != log.actions[t - 1]) flip_sum += 1.0;
    }
    actions += static_cast<long>(log.actions.size());

    double mean = 0.0;
    for (double h : heights) mean += h;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double h : heights) var += (h - mean) * (h - mean);
    var_sum += var / static_cast<double>(n);

    double plus = 0.0, minus = 0.0;
    int n_plus = 0, n_minus = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (q.passages[i].has_answer) {
        plus += heights[i];
        ++n_plus;
      } else {
        minus += heights[i];
        ++n_minus;
      }
    }
    if (n_plus > 0 && n_minus > 0) {
      hpm_sum += plus / n_plus - minus / n_minus;
      ++hpm_count;
    }
  }
  const double questions = static_cast<double>(logs.size());
  d.var_h = var_sum / questions;
  d.flips = flip_sum / questions;
  d.h_plus_minus = hpm_count > 0 ? hpm_sum / static_cast<double>(hpm_count) : 0.0;
  if (actions > 0) {
    d.avg_rank = static_cast<double>(rank_sum) / static_cast<double>(actions);
    d.hap = static_cast<double>(hits) / static_cast<double>(actions);
  }
  return d;
}

EvalRun evaluate_with_logs(std::span<const QuestionInstance> corpus,
                           const SchedulerConfig& config,
                           const CalibrationTable& calib) {
  EvalRun run;
  long cost = 0;
  long scheduler = 0;
  long unroll = 0;
  long correct = 0;
  long towers = 0;
  run.logs.reserve(corpus.size());
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const QuestionInstance& q = corpus[k];
    validate(config, q);
    ScheduleLog log = run_scheduler(q, config, calib, k);
    cost += log.final_skyline.cost_spent;
    scheduler += log.scheduler_layers;
    unroll += log.unroll_layers;
    correct += log.prediction_correct ? 1 : 0;
    towers += static_cast<long>(q.size());
    run.logs.push_back(std::move(log));
  }
  EvalPoint& p = run.point;
  if (!corpus.empty()) {
    const double questions = static_cast<double>(corpus.size());
    p.avg_layers = static_cast<double>(cost) / static_cast<double>(towers);
    p.accuracy = static_cast<double>(correct) / questions;
    p.scheduler_layers = static_cast<double>(scheduler) / questions;
    p.unroll_layers = static_cast<double>(unroll) / questions;
  }
  p.diagnostics = diagnostics(run.logs, corpus);
  if (!is_global(config.strategy)) p.diagnostics.flips.reset();
  p.budget_param = std::visit(
      Overloaded{
          [](const TowerBuilderStrategy& t) { return t.tau; },
          [](const Efficient& e) { return static_cast<double>(e.k_layers); },
          [](const TopK& t) { return static_cast<double>(t.k_passages); },
          [&](const Standard&) {
            return corpus.empty() ? 0.0
                                  : static_cast<double>(corpus.front().layers());
          },
          [&](const auto&) {
            return static_cast<double>(config.budget.total_layers);
          },
      },
      config.strategy);
  return run;
}

EvalPoint evaluate(std::span<const QuestionInstance> corpus,
                   const SchedulerConfig& config,
                   const CalibrationTable& calib) {
  return evaluate_with_logs(corpus, config, calib).point;
}

SchedulerConfig with_parameter(const SchedulerConfig& base, double value) {
  SchedulerConfig cfg = base;
  std::visit(Overloaded{
                 [&](TowerBuilderStrategy& t) { t.tau = value; },
                 [&](Efficient& e) { e.k_layers = static_cast<int>(value); },
                 [&](TopK& t) { t.k_passages = static_cast<int>(value); },
                 [](Standard&) {},
                 [&](auto&) {
                   cfg.budget.total_layers = static_cast<int>(value);
                 },
             },
             cfg.strategy);
  return cfg;
}

EvalReport sweep(std::span<const QuestionInstance> corpus,
                 const SchedulerConfig& base, std::span<const double> values,
                 const CalibrationTable& calib) {
  EvalReport report;
  report.strategy = strategy_name(base.strategy);
  report.n_layers = corpus.empty() ? 0 : static_cast<int>(corpus.front().layers());
  if (std::holds_alternative<Standard>(base.strategy)) {
    report.curve.push_back(evaluate(corpus, base, calib));
    return report;
  }
  if (values.empty()) throw std::invalid_argument("sweep: no parameter values");
  for (double v : values) {
    report.curve.push_back(evaluate(corpus, with_parameter(base, v), calib));
  }
  std::stable_sort(report.curve.begin(), report.curve.end(),
                   [](const EvalPoint& a, const EvalPoint& b) {
                     return a.avg_layers < b.avg_layers;
                   });
  return report;
}

Reduction reduction_factor(std::span<const EvalPoint> curve,
                           double target_fraction, double standard_accuracy,
                           int n_layers) {
  const double target = target_fraction * standard_accuracy;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].accuracy < target) continue;
    double x = curve[i].avg_layers;
    if (i > 0) {
      const EvalPoint& lo = curve[i - 1];
      const EvalPoint& hi = curve[i];
      x = lo.avg_layers + (target - lo.accuracy) * (hi.avg_layers - lo.avg_layers) /
                              (hi.accuracy - lo.accuracy);
    }
    return Reduction{true, x, static_cast<double>(n_layers) / x};
  }
  return Reduction{};
}

Reduction reduction_factor(const EvalReport& report, double target_fraction) {
  const EvalPoint* standard = nullptr;
  for (const EvalPoint& p : report.curve) {
    if (std::abs(p.avg_layers - report.n_layers) < 1e-9) standard = &p;
  }
  if (standard == nullptr) {
    throw std::invalid_argument(
        "reduction_factor: curve has no point at full cost (avg_layers == L)");
  }
  return reduction_factor(report.curve, target_fraction, standard->accuracy,
                          report.n_layers);
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json curve = nlohmann::json::array();
  for (const EvalPoint& p : report.curve) {
    const Diagnostics& d = p.diagnostics;
    curve.push_back({{"budget_param", p.budget_param},
                     {"avg_layers", p.avg_layers},
                     {"accuracy", p.accuracy},
                     {"cost_breakdown",
                      {{"scheduler_layers", p.scheduler_layers},
                       {"unroll_layers", p.unroll_layers}}},
                     {"diagnostics",
                      {{"var_h", d.var_h},
                       {"avg_rank", d.avg_rank},
                       {"flips", d.flips ? nlohmann::json(*d.flips)
                                         : nlohmann::json(nullptr)},
                       {"h_plus_minus", d.h_plus_minus},
                       {"hap", d.hap}}}});
  }
  return {{"strategy", report.strategy},
          {"n_layers", report.n_layers},
          {"curve", curve}};
}

std::string report_to_csv(const EvalReport& report) {
  std::string out =
      "budget_param,avg_layers,accuracy,scheduler_layers,unroll_layers\n";
  for (const EvalPoint& p : report.curve) {
    out += real(p.budget_param) + "," + real(p.avg_layers) + "," +
           real(p.accuracy) + "," + real(p.scheduler_layers) + "," +
           real(p.unroll_layers) + "\n";
  }
  out += "# diagnostics\n";
  out += "budget_param,var_h,avg_rank,flips,h_plus_minus,hap\n";
  for (const EvalPoint& p : report.curve) {
    const Diagnostics& d = p.diagnostics;
    out += real(p.budget_param) + "," + real(d.var_h) + "," + real(d.avg_rank) +
           "," + (d.flips ? real(*d.flips) : std::string("-")) + "," +
           real(d.h_plus_minus) + "," + real(d.hap) + "\n";
  }
  return out;
}

void save_report(const EvalReport& report,
                 const std::filesystem::path& json_path,
                 const std::filesystem::path& csv_path) {
  if (!json_path.empty()) {
    std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report " + json_path.string());
    out << report_to_json(report).dump(2) << '\n';
    if (!out) throw IoError("write failed for " + json_path.string());
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report " + csv_path.string());
    out << report_to_csv(report);
    if (!out) throw IoError("write failed for " + csv_path.string());
  }
}

}  // namespace skyline
