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

#include "skyline/skyline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "skyline/evaluation.hpp"
#include "skyline/policy.hpp"
#include "skyline/schedulers.hpp"
#include "skyline/synthetic.hpp"
#include "skyline/trace.hpp"
#include "skyline/training.hpp"

struct sky_corpus {
  std::vector<skyline::QuestionInstance> questions;
};
struct sky_calibration {
  skyline::CalibrationTable table;
};
struct sky_policy {
  skyline::PolicyParams params;
};
struct sky_report {
  skyline::EvalReport report;
};
struct sky_history {
  std::vector<skyline::EpochStats> epochs;
};

namespace {

thread_local std::string g_last_error;

sky_status set_error(sky_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

// Maps exceptions from the C++ core onto status codes.
template <class F>
sky_status guarded(F&& body) {
  try {
    body();
    return SKY_OK;
  } catch (const skyline::TraceError& e) {
    return set_error(SKY_ERR_PARSE, e.what());
  } catch (const skyline::IoError& e) {
    return set_error(SKY_ERR_IO, e.what());
  } catch (const skyline::TrainingError& e) {
    return set_error(SKY_ERR_NUMERIC, e.what());
  } catch (const std::invalid_argument& e) {
    return set_error(SKY_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return set_error(SKY_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return set_error(SKY_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(SKY_ERR_INTERNAL, "unknown error");
  }
}

#define SKY_REQUIRE(cond, msg)                                   \
  do {                                                           \
    if (!(cond)) return set_error(SKY_ERR_INVALID_ARGUMENT, msg); \
  } while (0)

skyline::SchedulerConfig to_config(const sky_scheduler_config& c,
                                   double param) {
  skyline::SchedulerConfig cfg;
  cfg.m = c.m;
  cfg.output_mode = c.output_mode == SKY_OUTPUT_ANY_LAYER
                        ? skyline::OutputMode::kAnyLayer
                        : skyline::OutputMode::kLastLayer;
  switch (c.strategy) {
    case SKY_STRATEGY_STANDARD:
      cfg.strategy = skyline::Standard{};
      break;
    case SKY_STRATEGY_EFFICIENT:
      cfg.strategy = skyline::Efficient{};
      break;
    case SKY_STRATEGY_TOP_K:
      cfg.strategy = skyline::TopK{};
      break;
    case SKY_STRATEGY_TOWER_BUILDER:
      cfg.strategy = skyline::TowerBuilderStrategy{};
      break;
    case SKY_STRATEGY_GREEDY:
      cfg.strategy = skyline::GreedySkylineStrategy{
          c.init_rule == SKY_INIT_CONSTANT ? skyline::InitRule::kConstant
                                           : skyline::InitRule::kRankOrder};
      break;
    case SKY_STRATEGY_POLICY:
      if (c.policy == nullptr) {
        throw std::invalid_argument("policy strategy needs a policy handle");
      }
      cfg.strategy = skyline::PolicySkylineStrategy{
          &c.policy->params,
          c.sample_actions ? skyline::ActionMode::kSample
                           : skyline::ActionMode::kGreedy,
          c.seed};
      break;
    case SKY_STRATEGY_RANDOM:
      cfg.strategy = skyline::RandomSkylineStrategy{c.seed};
      break;
    default:
      throw std::invalid_argument("unknown strategy");
  }
  if (param != std::floor(param) &&
      c.strategy != SKY_STRATEGY_TOWER_BUILDER &&
      c.strategy != SKY_STRATEGY_STANDARD) {
    throw std::invalid_argument("budget and k values must be integers");
  }
  return skyline::with_parameter(cfg, param);
}

}  // namespace

extern "C" {

const char* sky_last_error(void) { return g_last_error.c_str(); }

const char* sky_status_name(sky_status status) {
  switch (status) {
    case SKY_OK: return "ok";
    case SKY_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SKY_ERR_IO: return "i/o error";
    case SKY_ERR_PARSE: return "parse error";
    case SKY_ERR_NUMERIC: return "numeric error";
    case SKY_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

sky_generator_config sky_generator_config_default(void) {
  const skyline::GeneratorConfig d;
  return sky_generator_config{d.n_passages,
                              d.n_layers,
                              d.seed,
                              d.answer_rate_by_rank.a,
                              d.answer_rate_by_rank.b,
                              d.answer_rate_by_rank.c,
                              d.drift,
                              d.noise_sd,
                              d.extraction_reliability};
}

sky_status sky_corpus_generate(const sky_generator_config* config, size_t count,
                               sky_corpus** out) {
  SKY_REQUIRE(config != nullptr && out != nullptr, "null argument");
  return guarded([&] {
    skyline::GeneratorConfig g;
    g.n_passages = config->n_passages;
    g.n_layers = config->n_layers;
    g.seed = config->seed;
    g.answer_rate_by_rank = {config->decay_a, config->decay_b, config->decay_c};
    g.drift = config->drift;
    g.noise_sd = config->noise_sd;
    g.extraction_reliability = config->extraction_reliability;
    auto c = std::make_unique<sky_corpus>();
    c->questions = skyline::generate(g, count);
    *out = c.release();
  });
}

sky_status sky_corpus_load(const char* path, sky_corpus** out) {
  SKY_REQUIRE(path != nullptr && out != nullptr, "null argument");
  return guarded([&] {
    auto c = std::make_unique<sky_corpus>();
    c->questions = skyline::load_traces(path);
    *out = c.release();
  });
}

sky_status sky_corpus_save(const sky_corpus* corpus, const char* path) {
  SKY_REQUIRE(corpus != nullptr && path != nullptr, "null argument");
  return guarded([&] { skyline::save_traces(corpus->questions, path); });
}

void sky_corpus_free(sky_corpus* corpus) { delete corpus; }

size_t sky_corpus_size(const sky_corpus* corpus) {
  return corpus ? corpus->questions.size() : 0;
}

int sky_corpus_passages(const sky_corpus* corpus) {
  if (!corpus || corpus->questions.empty()) return 0;
  return static_cast<int>(corpus->questions.front().size());
}

int sky_corpus_layers(const sky_corpus* corpus) {
  if (!corpus || corpus->questions.empty()) return 0;
  return static_cast<int>(corpus->questions.front().layers());
}

const char* sky_corpus_question_id(const sky_corpus* corpus, size_t index) {
  if (!corpus || index >= corpus->questions.size()) return nullptr;
  return corpus->questions[index].question_id.c_str();
}

sky_status sky_corpus_subset(const sky_corpus* corpus, const size_t* indices,
                             size_t count, sky_corpus** out) {
  SKY_REQUIRE(corpus != nullptr && out != nullptr, "null argument");
  SKY_REQUIRE(indices != nullptr || count == 0, "null indices");
  return guarded([&] {
    auto c = std::make_unique<sky_corpus>();
    c->questions.reserve(count);
    for (size_t k = 0; k < count; ++k) {
      c->questions.push_back(corpus->questions.at(indices[k]));
    }
    *out = c.release();
  });
}

sky_status sky_calibration_fit(const sky_corpus* dev, const double* grid,
                               size_t grid_len, sky_calibration** out) {
  SKY_REQUIRE(dev != nullptr && out != nullptr, "null argument");
  return guarded([&] {
    const std::vector<double> g =
        grid ? std::vector<double>(grid, grid + grid_len)
             : skyline::default_temperature_grid();
    auto c = std::make_unique<sky_calibration>();
    c->table = skyline::calibrate(dev->questions, g);
    *out = c.release();
  });
}

sky_status sky_calibration_identity(int n_layers, sky_calibration** out) {
  SKY_REQUIRE(out != nullptr, "null argument");
  SKY_REQUIRE(n_layers >= 1, "n_layers must be >= 1");
  return guarded([&] {
    auto c = std::make_unique<sky_calibration>();
    c->table = skyline::CalibrationTable::identity(n_layers);
    *out = c.release();
  });
}

sky_status sky_calibration_load(const char* path, sky_calibration** out) {
  SKY_REQUIRE(path != nullptr && out != nullptr, "null argument");
  return guarded([&] {
    auto c = std::make_unique<sky_calibration>();
    c->table = skyline::load_calibration(path);
    *out = c.release();
  });
}

sky_status sky_calibration_save(const sky_calibration* calib,
                                const char* path) {
  SKY_REQUIRE(calib != nullptr && path != nullptr, "null argument");
  return guarded([&] { skyline::save_calibration(calib->table, path); });
}

void sky_calibration_free(sky_calibration* calib) { delete calib; }

int sky_calibration_layers(const sky_calibration* calib) {
  return calib ? static_cast<int>(calib->table.layers()) : 0;
}

double sky_calibration_temperature(const sky_calibration* calib, int layer) {
  if (!calib || layer < 0 ||
      static_cast<size_t>(layer) >= calib->table.layers()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return calib->table.temperatures[static_cast<size_t>(layer)];
}

sky_status sky_calibration_nll(const sky_calibration* calib,
                               const sky_corpus* dev, double* out) {
  SKY_REQUIRE(dev != nullptr && out != nullptr, "null argument");
  return guarded([&] {
    const int L = dev->questions.empty()
                      ? 0
                      : static_cast<int>(dev->questions.front().layers());
    if (calib && static_cast<int>(calib->table.layers()) != L) {
      throw std::invalid_argument("calibration and corpus differ in layers");
    }
    double total = 0.0;
    for (int l = 0; l < L; ++l) {
      const double t =
          calib ? calib->table.temperatures[static_cast<size_t>(l)] : 1.0;
      total += skyline::layer_nll(dev->questions, l, t);
    }
    *out = total;
  });
}

sky_status sky_policy_create(int d, int n_layers, int n_max, uint64_t seed,
                             int learnable_init, sky_policy** out) {
  SKY_REQUIRE(out != nullptr, "null argument");
  return guarded([&] {
    auto p = std::make_unique<sky_policy>();
    p->params = skyline::PolicyParams::initialize(
        skyline::PolicyShape{d, n_layers, n_max}, seed,
        learnable_init ? skyline::InitPriority::kLearnable
                       : skyline::InitPriority::kFixed);
    *out = p.release();
  });
}

sky_status sky_policy_load(const char* path, sky_policy** out) {
  SKY_REQUIRE(path != nullptr && out != nullptr, "null argument");
  return guarded([&] {
    auto p = std::make_unique<sky_policy>();
    p->params = skyline::load_policy(path);
    *out = p.release();
  });
}

sky_status sky_policy_save(const sky_policy* policy, const char* path) {
  SKY_REQUIRE(policy != nullptr && path != nullptr, "null argument");
  return guarded([&] { skyline::save_policy(policy->params, path); });
}

void sky_policy_free(sky_policy* policy) { delete policy; }

size_t sky_policy_parameter_count(const sky_policy* policy) {
  return policy ? skyline::count_parameters(policy->params) : 0;
}

sky_train_config sky_train_config_default(void) {
  const skyline::TrainConfig d;
  return sky_train_config{d.lr,        d.batch_size, d.epochs,
                          d.max_steps, d.step_cost,  d.gamma,
                          d.seed,      d.use_baseline ? 1 : 0,
                          d.eval_budget};
}

sky_status sky_train(const sky_corpus* corpus, const sky_corpus* held_out,
                     const sky_policy* init, const sky_train_config* config,
                     const sky_calibration* calib, sky_policy** out,
                     sky_history** history) {
  SKY_REQUIRE(corpus && init && config && calib && out, "null argument");
  return guarded([&] {
    skyline::TrainConfig cfg;
    cfg.lr = config->lr;
    cfg.batch_size = config->batch_size;
    cfg.epochs = config->epochs;
    cfg.max_steps = config->max_steps;
    cfg.step_cost = config->step_cost;
    cfg.gamma = config->gamma;
    cfg.seed = config->seed;
    cfg.use_baseline = config->use_baseline != 0;
    cfg.eval_budget = config->eval_budget;
    static const std::vector<skyline::QuestionInstance> kNone;
    skyline::TrainResult result = skyline::train(
        corpus->questions, held_out ? held_out->questions : kNone,
        init->params, cfg, calib->table);
    auto p = std::make_unique<sky_policy>();
    p->params = std::move(result.params);
    std::unique_ptr<sky_history> h;
    if (history) {
      h = std::make_unique<sky_history>();
      h->epochs = std::move(result.history);
    }
    *out = p.release();
    if (history) *history = h.release();
  });
}

size_t sky_history_epochs(const sky_history* history) {
  return history ? history->epochs.size() : 0;
}

sky_status sky_history_epoch(const sky_history* history, size_t index,
                             double* mean_return, double* held_out_hap,
                             double* wall_time_ms) {
  SKY_REQUIRE(history != nullptr, "null argument");
  SKY_REQUIRE(index < history->epochs.size(), "epoch index out of range");
  const skyline::EpochStats& s = history->epochs[index];
  if (mean_return) *mean_return = s.mean_return;
  if (held_out_hap) *held_out_hap = s.held_out_hap;
  if (wall_time_ms) *wall_time_ms = s.wall_time_ms;
  return SKY_OK;
}

sky_status sky_history_save_csv(const sky_history* history, const char* path) {
  SKY_REQUIRE(history != nullptr && path != nullptr, "null argument");
  return guarded([&] { skyline::save_history_csv(history->epochs, path); });
}

void sky_history_free(sky_history* history) { delete history; }

sky_scheduler_config sky_scheduler_config_default(void) {
  return sky_scheduler_config{SKY_STRATEGY_STANDARD,
                              0.0,
                              1,
                              SKY_OUTPUT_LAST_LAYER,
                              SKY_INIT_RANK_ORDER,
                              nullptr,
                              0,
                              0};
}

sky_status sky_sweep(const sky_corpus* corpus,
                     const sky_scheduler_config* config, const double* params,
                     size_t param_count, const sky_calibration* calib,
                     sky_report** out) {
  SKY_REQUIRE(corpus && config && calib && out, "null argument");
  SKY_REQUIRE(params != nullptr || param_count == 0, "null parameter list");
  return guarded([&] {
    if (param_count == 0 && config->strategy != SKY_STRATEGY_STANDARD) {
      throw std::invalid_argument("sweep needs at least one parameter value");
    }
    auto r = std::make_unique<sky_report>();
    r->report.strategy = skyline::strategy_name(to_config(*config, 0.0).strategy);
    r->report.n_layers = corpus->questions.empty()
                             ? 0
                             : static_cast<int>(corpus->questions.front().layers());
    if (config->strategy == SKY_STRATEGY_STANDARD) {
      r->report.curve.push_back(skyline::evaluate(
          corpus->questions, to_config(*config, 0.0), calib->table));
    }
    for (size_t k = 0; k < param_count && config->strategy != SKY_STRATEGY_STANDARD;
         ++k) {
      r->report.curve.push_back(skyline::evaluate(
          corpus->questions, to_config(*config, params[k]), calib->table));
    }
    std::stable_sort(r->report.curve.begin(), r->report.curve.end(),
                     [](const skyline::EvalPoint& a, const skyline::EvalPoint& b) {
                       return a.avg_layers < b.avg_layers;
                     });
    *out = r.release();
  });
}

sky_status sky_evaluate(const sky_corpus* corpus,
                        const sky_scheduler_config* config,
                        const sky_calibration* calib, sky_report** out) {
  SKY_REQUIRE(config != nullptr, "null argument");
  return sky_sweep(corpus, config, &config->param, 1, calib, out);
}

size_t sky_report_size(const sky_report* report) {
  return report ? report->report.curve.size() : 0;
}

sky_status sky_report_point(const sky_report* report, size_t index,
                            sky_eval_point* out) {
  SKY_REQUIRE(report != nullptr && out != nullptr, "null argument");
  SKY_REQUIRE(index < report->report.curve.size(), "point index out of range");
  const skyline::EvalPoint& p = report->report.curve[index];
  const skyline::Diagnostics& d = p.diagnostics;
  *out = sky_eval_point{p.budget_param,
                        p.avg_layers,
                        p.accuracy,
                        p.scheduler_layers,
                        p.unroll_layers,
                        d.var_h,
                        d.avg_rank,
                        d.flips ? *d.flips
                                : std::numeric_limits<double>::quiet_NaN(),
                        d.h_plus_minus,
                        d.hap};
  return SKY_OK;
}

sky_status sky_report_save(const sky_report* report, const char* json_path,
                           const char* csv_path) {
  SKY_REQUIRE(report != nullptr, "null argument");
  return guarded([&] {
    skyline::save_report(report->report, json_path ? json_path : "",
                         csv_path ? csv_path : "");
  });
}

sky_status sky_report_reduction(const sky_report* report,
                                double target_fraction, double* avg_layers,
                                double* factor, int* reachable) {
  SKY_REQUIRE(report && avg_layers && factor && reachable, "null argument");
  return guarded([&] {
    const skyline::Reduction r =
        skyline::reduction_factor(report->report, target_fraction);
    *avg_layers = r.avg_layers;
    *factor = r.factor;
    *reachable = r.reachable ? 1 : 0;
  });
}

void sky_report_free(sky_report* report) { delete report; }

sky_status sky_schedule_logs_save(const sky_corpus* corpus,
                                  const sky_scheduler_config* config,
                                  const sky_calibration* calib,
                                  const char* path) {
  SKY_REQUIRE(corpus && config && calib && path, "null argument");
  return guarded([&] {
    const skyline::EvalRun run = skyline::evaluate_with_logs(
        corpus->questions, to_config(*config, config->param), calib->table);
    nlohmann::json doc = run.logs;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw skyline::IoError(std::string("cannot write ") + path);
    out << doc.dump() << '\n';
    if (!out) throw skyline::IoError(std::string("write failed for ") + path);
  });
}

}  // extern "C"
