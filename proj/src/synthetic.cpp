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

#include "skyline/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "json.hpp"

namespace skyline {
namespace {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

std::mt19937_64 question_stream(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(std::uint64_t{index} >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

double AnswerDecay::at(int rank) const {
  return a * std::exp(-b * static_cast<double>(rank - 1)) + c;
}

void validate(const GeneratorConfig& config) {
  if (config.n_passages < 1) throw ConfigError("n_passages must be >= 1");
  if (config.n_layers < 1) throw ConfigError("n_layers must be >= 1");
  const AnswerDecay& d = config.answer_rate_by_rank;
  if (!(d.a >= 0.0) || !(d.b >= 0.0) || !(d.c >= 0.0)) {
    throw ConfigError("answer decay a, b, c must be non-negative");
  }
  if (d.a + d.c > 1.0) throw ConfigError("answer decay needs a + c <= 1");
  if (!(config.drift > 0.0) || !std::isfinite(config.drift)) {
    throw ConfigError("drift must be positive");
  }
  if (!(config.noise_sd > 0.0) || !std::isfinite(config.noise_sd)) {
    throw ConfigError("noise_sd must be positive");
  }
  if (!(config.extraction_reliability >= 0.0 &&
        config.extraction_reliability <= 1.0)) {
    throw ConfigError("extraction_reliability must lie in [0, 1]");
  }
}

std::vector<QuestionInstance> generate(const GeneratorConfig& config,
                                       std::size_t count) {
  validate(config);
  std::vector<QuestionInstance> corpus;
  corpus.reserve(count);
  char id[32];
  for (std::size_t k = 0; k < count; ++k) {
    std::mt19937_64 rng = question_stream(config.seed, k);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, config.noise_sd);

    QuestionInstance q;
    std::snprintf(id, sizeof id, "q%06zu", k);
    q.question_id = id;
    q.passages.resize(static_cast<std::size_t>(config.n_passages));
    for (int r = 0; r < config.n_passages; ++r) {
      PassageTrace& p = q.passages[static_cast<std::size_t>(r)];
      p.rank = r + 1;
      p.has_answer = unit(rng) < config.answer_rate_by_rank.at(p.rank);
      const double direction = p.has_answer ? 1.0 : -1.0;
      p.logits.resize(static_cast<std::size_t>(config.n_layers));
      p.answer_correct.assign(static_cast<std::size_t>(config.n_layers), false);
      for (int l = 0; l < config.n_layers; ++l) {
        const double mean = direction * config.drift * (l + 1);
        const double logit = canonical_real(mean + noise(rng));
        p.logits[static_cast<std::size_t>(l)] = logit;
        // Draw unconditionally so the stream layout does not depend on labels.
        const bool extracted = unit(rng) < config.extraction_reliability;
        p.answer_correct[static_cast<std::size_t>(l)] =
            p.has_answer && logit > 0.0 && extracted;
      }
    }
    corpus.push_back(std::move(q));
  }
  return corpus;
}

double apply_calibration(double logit, double temperature) {
  const double z = logit / temperature;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double CalibrationTable::probability(double logit, int height) const {
  return apply_calibration(logit,
                           temperatures.at(static_cast<std::size_t>(height - 1)));
}

CalibrationTable CalibrationTable::identity(int n_layers) {
  return CalibrationTable{
      std::vector<double>(static_cast<std::size_t>(n_layers), 1.0)};
}

double layer_nll(std::span<const QuestionInstance> dev, int layer,
                 double temperature) {
  double nll = 0.0;
  for (const QuestionInstance& q : dev) {
    for (const PassageTrace& p : q.passages) {
      const double z = p.logits[static_cast<std::size_t>(layer)] / temperature;
      nll += p.has_answer ? softplus(-z) : softplus(z);
    }
  }
  return nll;
}

CalibrationTable calibrate(std::span<const QuestionInstance> dev,
                           std::span<const double> grid) {
  if (dev.empty()) throw std::invalid_argument("calibrate: empty dev set");
  if (grid.empty()) throw std::invalid_argument("calibrate: empty grid");
  for (double t : grid) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw std::invalid_argument("calibrate: grid values must be positive");
    }
  }
  const int n_layers = static_cast<int>(dev.front().layers());
  CalibrationTable table;
  table.temperatures.resize(static_cast<std::size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l) {
    double best_t = 0.0;
    double best_nll = 0.0;
    bool first = true;
    for (double t : grid) {
      const double nll = layer_nll(dev, l, t);
      if (first || nll < best_nll || (nll == best_nll && t < best_t)) {
        best_t = t;
        best_nll = nll;
        first = false;
      }
    }
    table.temperatures[static_cast<std::size_t>(l)] = best_t;
  }
  return table;
}

std::vector<double> default_temperature_grid() {
  constexpr int kPoints = 32;
  std::vector<double> grid(kPoints);
  for (int k = 0; k < kPoints; ++k) {
    grid[static_cast<std::size_t>(k)] =
        0.25 * std::pow(32.0, static_cast<double>(k) / (kPoints - 1));
  }
  grid.back() = 8.0;
  return grid;
}

void save_calibration(const CalibrationTable& table,
                      const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["temperatures"] = table.temperatures;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write calibration file " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

CalibrationTable load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open calibration file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw TraceError(path.string() + ": " + e.what(), 0);
  }
  if (!doc.is_object() || doc.size() != 1 || !doc.contains("temperatures") ||
      !doc["temperatures"].is_array()) {
    throw TraceError(path.string() +
                         ": expected {\"temperatures\": [..]} and nothing else",
                     0);
  }
  CalibrationTable table;
  for (const auto& v : doc["temperatures"]) {
    if (!v.is_number()) {
      throw TraceError(path.string() + ": temperatures must be numbers", 0);
    }
    const double t = v.get<double>();
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw TraceError(path.string() + ": temperatures must be positive", 0);
    }
    table.temperatures.push_back(t);
  }
  if (table.temperatures.empty()) {
    throw TraceError(path.string() + ": no temperatures", 0);
  }
  return table;
}

}  // namespace skyline
