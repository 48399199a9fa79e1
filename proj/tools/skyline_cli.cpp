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

// skyline: command-line driver over the C API.
//
//   skyline gen-traces --seed 1 --count 5000 --out corpus.jsonl
//   skyline split --traces corpus.jsonl --train train.jsonl --dev0 dev0.jsonl
//                 --dev1 dev1.jsonl --test test.jsonl
//   skyline calibrate --dev0 dev0.jsonl --out calib.json
//   skyline train --dev0 dev0.jsonl --dev1 dev1.jsonl --calibration calib.json
//                 --seed 1 --out policy.json
//   skyline sweep --traces test.jsonl --calibration calib.json
//                 --strategy policy --params policy.json --budgets 30,60,90
//
// Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skyline/skyline.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised from subcommand bodies after sky_* failures.
struct ApiError : std::runtime_error {
  ApiError(sky_status s, const std::string& what)
      : std::runtime_error(what), status(s) {}
  sky_status status;
};

void check(sky_status s, const std::string& context) {
  if (s != SKY_OK) {
    throw ApiError(s, context + ": " + sky_status_name(s) + ": " +
                          sky_last_error());
  }
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Corpus = std::unique_ptr<sky_corpus, Deleter<sky_corpus, sky_corpus_free>>;
using Calibration =
    std::unique_ptr<sky_calibration,
                    Deleter<sky_calibration, sky_calibration_free>>;
using Policy = std::unique_ptr<sky_policy, Deleter<sky_policy, sky_policy_free>>;
using Report = std::unique_ptr<sky_report, Deleter<sky_report, sky_report_free>>;
using History =
    std::unique_ptr<sky_history, Deleter<sky_history, sky_history_free>>;

Corpus load_corpus(const std::string& path) {
  sky_corpus* c = nullptr;
  check(sky_corpus_load(path.c_str(), &c), "loading " + path);
  return Corpus(c);
}

Calibration load_calibration(const std::string& path) {
  sky_calibration* c = nullptr;
  check(sky_calibration_load(path.c_str(), &c), "loading " + path);
  return Calibration(c);
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + ": cannot parse \"" + item + "\" as a number");
    }
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

void require_distinct(const std::vector<std::string>& paths) {
  std::set<std::filesystem::path> seen;
  for (const std::string& p : paths) {
    if (p.empty()) continue;
    const auto norm = std::filesystem::absolute(p).lexically_normal();
    if (!seen.insert(norm).second) {
      throw UsageError("output path " + p + " is used twice");
    }
  }
}

// ---- gen-traces ---------------------------------------------------------

struct GenArgs {
  int n_passages = 30;
  int n_layers = 24;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  std::string decay;
  double drift = 0, noise_sd = 0, reliability = 0;
  std::string out;
};

int cmd_gen_traces(const GenArgs& a) {
  sky_generator_config cfg = sky_generator_config_default();
  cfg.n_passages = a.n_passages;
  cfg.n_layers = a.n_layers;
  cfg.seed = a.seed;
  if (!a.decay.empty()) {
    const auto abc = parse_list(a.decay, "--answer-decay");
    if (abc.size() != 3) throw UsageError("--answer-decay expects a,b,c");
    cfg.decay_a = abc[0];
    cfg.decay_b = abc[1];
    cfg.decay_c = abc[2];
  }
  if (a.drift > 0) cfg.drift = a.drift;
  if (a.noise_sd > 0) cfg.noise_sd = a.noise_sd;
  if (a.reliability > 0) cfg.extraction_reliability = a.reliability;
  sky_corpus* raw = nullptr;
  check(sky_corpus_generate(&cfg, a.count, &raw), "generating traces");
  Corpus corpus(raw);
  check(sky_corpus_save(corpus.get(), a.out.c_str()), "writing " + a.out);
  std::printf("gen-traces: %zu questions, %d passages x %d layers -> %s\n",
              a.count, cfg.n_passages, cfg.n_layers, a.out.c_str());
  return kExitOk;
}

// ---- split --------------------------------------------------------------

struct SplitArgs {
  std::string traces;
  std::string train, dev0, dev1, test;
  std::string ratios = "78839,4379,4379,10570";
};

std::uint64_t split_hash(const char* s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (; *s; ++s) {
    h ^= static_cast<unsigned char>(*s);
    h *= 0x100000001b3ull;
  }
  // FNV-1a barely mixes trailing bytes into the high bits; finish with the
  // MurmurHash3 64-bit finalizer.
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ull;
  h ^= h >> 33;
  return h;
}

int cmd_split(const SplitArgs& a) {
  const auto ratios = parse_list(a.ratios, "--ratios");
  if (ratios.size() != 4) throw UsageError("--ratios expects train,dev0,dev1,test");
  double total = 0;
  for (double r : ratios) {
    if (!(r >= 0)) throw UsageError("--ratios must be non-negative");
    total += r;
  }
  if (!(total > 0)) throw UsageError("--ratios must not all be zero");
  const std::vector<std::string> outs{a.train, a.dev0, a.dev1, a.test};
  require_distinct(outs);

  Corpus corpus = load_corpus(a.traces);
  std::vector<std::vector<std::size_t>> buckets(4);
  for (std::size_t k = 0; k < sky_corpus_size(corpus.get()); ++k) {
    const double u = static_cast<double>(split_hash(sky_corpus_question_id(corpus.get(), k)) >> 11) *
                     0x1.0p-53;
    double cum = 0;
    std::size_t b = 3;
    for (std::size_t j = 0; j < 4; ++j) {
      cum += ratios[j] / total;
      if (u < cum) {
        b = j;
        break;
      }
    }
    buckets[b].push_back(k);
  }
  static const char* kNames[] = {"train", "dev0", "dev1", "test"};
  std::string summary;
  for (std::size_t j = 0; j < 4; ++j) {
    summary += std::string(j ? ", " : "") + kNames[j] + "=" +
               std::to_string(buckets[j].size());
    if (outs[j].empty()) continue;
    sky_corpus* raw = nullptr;
    check(sky_corpus_subset(corpus.get(), buckets[j].data(), buckets[j].size(),
                            &raw),
          "splitting");
    Corpus part(raw);
    check(sky_corpus_save(part.get(), outs[j].c_str()), "writing " + outs[j]);
  }
  std::printf("split: %s\n", summary.c_str());
  return kExitOk;
}

// ---- calibrate ----------------------------------------------------------

struct CalibrateArgs {
  std::string dev0;
  std::string grid;
  std::string out;
};

int cmd_calibrate(const CalibrateArgs& a) {
  Corpus dev = load_corpus(a.dev0);
  std::vector<double> grid;
  if (!a.grid.empty()) grid = parse_list(a.grid, "--grid");
  sky_calibration* raw = nullptr;
  check(sky_calibration_fit(dev.get(), grid.empty() ? nullptr : grid.data(),
                            grid.size(), &raw),
        "calibrating on " + a.dev0);
  Calibration calib(raw);
  double before = 0, after = 0;
  check(sky_calibration_nll(nullptr, dev.get(), &before), "nll");
  check(sky_calibration_nll(calib.get(), dev.get(), &after), "nll");
  check(sky_calibration_save(calib.get(), a.out.c_str()), "writing " + a.out);
  std::printf("calibrate: %d layers, NLL %.6g -> %.6g on %zu questions -> %s\n",
              sky_calibration_layers(calib.get()), before, after,
              sky_corpus_size(dev.get()), a.out.c_str());
  return kExitOk;
}

// ---- train --------------------------------------------------------------

struct TrainArgs {
  std::string dev0, dev1, calibration, out, history, init_params;
  std::uint64_t seed = 0;
  sky_train_config cfg = sky_train_config_default();
  int embedding = 8;
  bool fixed_init = false;
};

int cmd_train(TrainArgs a) {
  require_distinct({a.out, a.history});
  Corpus dev0 = load_corpus(a.dev0);
  Corpus dev1 = a.dev1.empty() ? Corpus() : load_corpus(a.dev1);
  Calibration calib = load_calibration(a.calibration);
  if (sky_corpus_size(dev0.get()) == 0) {
    throw ApiError(SKY_ERR_INVALID_ARGUMENT, a.dev0 + " holds no questions");
  }
  Policy init;
  if (!a.init_params.empty()) {
    sky_policy* raw = nullptr;
    check(sky_policy_load(a.init_params.c_str(), &raw), "loading " + a.init_params);
    init.reset(raw);
  } else {
    sky_policy* raw = nullptr;
    check(sky_policy_create(a.embedding, sky_corpus_layers(dev0.get()),
                            sky_corpus_passages(dev0.get()), a.seed,
                            a.fixed_init ? 0 : 1, &raw),
          "initialising policy");
    init.reset(raw);
  }
  a.cfg.seed = a.seed;
  sky_policy* trained = nullptr;
  sky_history* hist = nullptr;
  check(sky_train(dev0.get(), dev1.get(), init.get(), &a.cfg, calib.get(),
                  &trained, &hist),
        "training");
  Policy policy(trained);
  History history(hist);
  check(sky_policy_save(policy.get(), a.out.c_str()), "writing " + a.out);
  if (!a.history.empty()) {
    check(sky_history_save_csv(history.get(), a.history.c_str()),
          "writing " + a.history);
  }
  double ret = 0, hap = 0;
  const std::size_t epochs = sky_history_epochs(history.get());
  if (epochs > 0) {
    check(sky_history_epoch(history.get(), epochs - 1, &ret, &hap, nullptr),
          "history");
  }
  std::printf(
      "train: %zu epochs on %zu questions, %zu parameters, final mean return "
      "%.6g, held-out HAP %.4f -> %s\n",
      epochs, sky_corpus_size(dev0.get()),
      sky_policy_parameter_count(policy.get()), ret, hap, a.out.c_str());
  return kExitOk;
}

// ---- evaluate / sweep ---------------------------------------------------

struct EvalArgs {
  std::string traces, calibration, strategy, params;
  std::string mode = "last_layer";
  std::string init_rule = "rank_order";
  int m = 1;
  bool sample = false;
  std::optional<std::uint64_t> seed;
  std::optional<double> k, tau, budget;   // evaluate
  std::string ks, taus, budgets;           // sweep
  std::string out_json, out_csv, logs;
};

const std::map<std::string, sky_strategy>& strategies() {
  static const std::map<std::string, sky_strategy> m{
      {"standard", SKY_STRATEGY_STANDARD},
      {"efficient", SKY_STRATEGY_EFFICIENT},
      {"top_k", SKY_STRATEGY_TOP_K},
      {"tower_builder", SKY_STRATEGY_TOWER_BUILDER},
      {"greedy", SKY_STRATEGY_GREEDY},
      {"policy", SKY_STRATEGY_POLICY},
      {"random", SKY_STRATEGY_RANDOM}};
  return m;
}

int run_eval(const EvalArgs& a, bool is_sweep) {
  require_distinct({a.out_json, a.out_csv, a.logs});
  sky_scheduler_config cfg = sky_scheduler_config_default();
  cfg.strategy = strategies().at(a.strategy);
  cfg.m = a.m;
  cfg.output_mode =
      a.mode == "any_layer" ? SKY_OUTPUT_ANY_LAYER : SKY_OUTPUT_LAST_LAYER;
  cfg.init_rule = a.init_rule == "constant" ? SKY_INIT_CONSTANT : SKY_INIT_RANK_ORDER;
  cfg.sample_actions = a.sample ? 1 : 0;
  const bool stochastic = cfg.strategy == SKY_STRATEGY_RANDOM ||
                          (cfg.strategy == SKY_STRATEGY_POLICY && a.sample);
  if (stochastic && !a.seed) {
    throw UsageError("--seed is required for stochastic scheduling");
  }
  cfg.seed = a.seed.value_or(0);

  std::vector<double> values;
  auto pick = [&](const std::optional<double>& one, const std::string& many,
                  const char* one_flag, const char* many_flag) {
    if (is_sweep) {
      if (many.empty()) {
        throw UsageError(std::string(many_flag) + " is required for strategy " +
                         a.strategy);
      }
      values = parse_list(many, many_flag);
    } else {
      if (!one) {
        throw UsageError(std::string(one_flag) + " is required for strategy " +
                         a.strategy);
      }
      values = {*one};
    }
  };
  switch (cfg.strategy) {
    case SKY_STRATEGY_STANDARD:
      values = {0.0};
      break;
    case SKY_STRATEGY_EFFICIENT:
    case SKY_STRATEGY_TOP_K:
      pick(a.k, a.ks, "--k", "--ks");
      break;
    case SKY_STRATEGY_TOWER_BUILDER:
      pick(a.tau, a.taus, "--tau", "--taus");
      break;
    default:
      pick(a.budget, a.budgets, "--budget", "--budgets");
      break;
  }

  Policy policy;
  if (cfg.strategy == SKY_STRATEGY_POLICY) {
    if (a.params.empty()) throw UsageError("--params is required for strategy policy");
    sky_policy* raw = nullptr;
    check(sky_policy_load(a.params.c_str(), &raw), "loading " + a.params);
    policy.reset(raw);
    cfg.policy = policy.get();
  }
  Corpus corpus = load_corpus(a.traces);
  Calibration calib = load_calibration(a.calibration);

  sky_report* raw = nullptr;
  check(sky_sweep(corpus.get(), &cfg, values.data(), values.size(), calib.get(),
                  &raw),
        a.strategy);
  Report report(raw);
  check(sky_report_save(report.get(), a.out_json.empty() ? nullptr : a.out_json.c_str(),
                        a.out_csv.empty() ? nullptr : a.out_csv.c_str()),
        "writing report");
  if (!a.logs.empty()) {
    cfg.param = values.front();
    check(sky_schedule_logs_save(corpus.get(), &cfg, calib.get(), a.logs.c_str()),
          "writing logs");
  }

  const char* verb = is_sweep ? "sweep" : "evaluate";
  for (std::size_t k = 0; k < sky_report_size(report.get()); ++k) {
    sky_eval_point p{};
    check(sky_report_point(report.get(), k, &p), "report");
    std::printf("%s %s: param=%g avg_layers=%.4f accuracy=%.4f hap=%.4f\n",
                verb, a.strategy.c_str(), p.budget_param, p.avg_layers,
                p.accuracy, p.hap);
  }
  return kExitOk;
}

void add_eval_flags(CLI::App* sub, EvalArgs& a, bool is_sweep) {
  std::vector<std::string> names;
  for (const auto& [name, _] : strategies()) names.push_back(name);
  sub->add_option("--traces", a.traces, "Trace corpus (JSONL) to schedule")
      ->required();
  sub->add_option("--calibration", a.calibration, "Calibration table (JSON)")
      ->required();
  sub->add_option("--strategy", a.strategy, "Scheduling strategy")
      ->required()
      ->check(CLI::IsMember(names));
  sub->add_option("--params", a.params, "Policy parameters (strategy policy)");
  sub->add_option("--m", a.m, "Towers passed to the output phase")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--mode", a.mode, "Output mode")
      ->capture_default_str()
      ->check(CLI::IsMember({"last_layer", "any_layer"}));
  sub->add_option("--init-rule", a.init_rule, "Empty-tower priority for greedy")
      ->capture_default_str()
      ->check(CLI::IsMember({"rank_order", "constant"}));
  sub->add_flag("--sample", a.sample, "Sample policy actions instead of argmax");
  sub->add_option("--seed", a.seed, "Seed for random and sampled scheduling");
  if (is_sweep) {
    sub->add_option("--budgets", a.budgets,
                    "Comma list of total layer budgets (greedy, policy, random)");
    sub->add_option("--taus", a.taus, "Comma list of exit thresholds (tower_builder)");
    sub->add_option("--ks", a.ks, "Comma list of k values (efficient, top_k)");
  } else {
    sub->add_option("--budget,--budgets", a.budget, "Total layer budget per question");
    sub->add_option("--tau", a.tau, "Exit threshold (tower_builder)");
    sub->add_option("--k", a.k, "Layers (efficient) or passages (top_k)");
  }
  sub->add_option("--out-json", a.out_json, "Report output (JSON)");
  sub->add_option("--out-csv", a.out_csv, "Report output (CSV)");
  sub->add_option("--logs", a.logs,
                  "Per-question schedule logs (JSON) at the first parameter");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained scheduling of anytime reader layers"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read flags from a TOML/INI file ([subcommand] sections)");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-traces", "Generate a synthetic trace corpus");
  gen_cmd->add_option("--n-passages", gen.n_passages, "Passages per question")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--n-layers", gen.n_layers, "Reader layers")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--count", gen.count, "Number of questions")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->required();
  gen_cmd->add_option("--answer-decay", gen.decay,
                      "a,b,c with P(answer|rank) = a*exp(-b(rank-1)) + c "
                      "(default 0.2,0.15,0.02)");
  gen_cmd->add_option("--drift", gen.drift, "Per-layer logit drift (default 0.15)");
  gen_cmd->add_option("--noise-sd", gen.noise_sd, "Logit noise sd (default 1.0)");
  gen_cmd->add_option("--extraction-reliability", gen.reliability,
                      "P(extraction correct | confident answer passage) "
                      "(default 0.8)");
  gen_cmd->add_option("--out", gen.out, "Output JSONL path")->required();

  SplitArgs split;
  auto* split_cmd = app.add_subcommand(
      "split", "Split a corpus into train/dev0/dev1/test by question_id hash");
  split_cmd->add_option("--traces", split.traces, "Input corpus")
      ->required();
  split_cmd->add_option("--train", split.train, "Output for the train split");
  split_cmd->add_option("--dev0", split.dev0, "Output for dev0 (calibration, scheduler training)");
  split_cmd->add_option("--dev1", split.dev1, "Output for dev1 (scheduler validation)");
  split_cmd->add_option("--test", split.test, "Output for the test split");
  split_cmd->add_option("--ratios", split.ratios, "Relative split sizes")
      ->capture_default_str();

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Fit per-layer temperatures on dev0");
  cal_cmd->add_option("--dev0", cal.dev0, "Calibration corpus")
      ->required();
  cal_cmd->add_option("--grid", cal.grid,
                      "Comma list of candidate temperatures (default: 32 "
                      "log-spaced points in [0.25, 8])");
  cal_cmd->add_option("--out", cal.out, "Output JSON path")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the scheduling policy with REINFORCE");
  train_cmd->add_option("--dev0", tr.dev0, "Scheduler training corpus")
      ->required();
  train_cmd->add_option("--dev1", tr.dev1, "Validation corpus for held-out HAP");
  train_cmd->add_option("--calibration", tr.calibration, "Calibration table")
      ->required();
  train_cmd->add_option("--seed", tr.seed, "Training seed")->required();
  train_cmd->add_option("--out", tr.out, "Output policy JSON")->required();
  train_cmd->add_option("--history", tr.history, "Per-epoch history CSV");
  train_cmd->add_option("--init-params", tr.init_params, "Start from these parameters");
  train_cmd->add_option("--lr", tr.cfg.lr, "SGD learning rate")->capture_default_str();
  train_cmd->add_option("--batch-size", tr.cfg.batch_size, "Episodes per update")
      ->capture_default_str();
  train_cmd->add_option("--epochs", tr.cfg.epochs, "Passes over dev0")
      ->capture_default_str();
  train_cmd->add_option("--max-steps", tr.cfg.max_steps, "Episode budget in layers")
      ->capture_default_str();
  train_cmd->add_option("--step-cost", tr.cfg.step_cost, "Per-step penalty c")
      ->capture_default_str();
  train_cmd->add_option("--gamma", tr.cfg.gamma, "Discount factor")
      ->capture_default_str();
  train_cmd->add_option("--eval-budget", tr.cfg.eval_budget,
                        "Budget for held-out HAP (0 = max-steps)")
      ->capture_default_str();
  train_cmd->add_option("--embedding", tr.embedding, "Embedding size d")
      ->capture_default_str();
  train_cmd->add_flag("--fixed-init", tr.fixed_init,
                      "Keep initial priorities fixed at 0 instead of learning them");
  bool baseline = false;
  train_cmd->add_flag("--baseline", baseline, "Subtract a moving-average return baseline");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate one scheduler setting");
  add_eval_flags(eval_cmd, ev, false);
  EvalArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a scheduler over a parameter list");
  add_eval_flags(sweep_cmd, sw, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::fprintf(stderr, "\n%s", app.help().c_str());
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_traces(gen);
    if (*split_cmd) return cmd_split(split);
    if (*cal_cmd) return cmd_calibrate(cal);
    if (*train_cmd) {
      tr.cfg.use_baseline = baseline ? 1 : 0;
      return cmd_train(tr);
    }
    if (*eval_cmd) return run_eval(ev, false);
    if (*sweep_cmd) return run_eval(sw, true);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ApiError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.status == SKY_ERR_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
  }
  return kExitUsage;
}
