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

// Seeded synthetic trace corpora and per-layer temperature calibration of
// the HasAnswer logits.

#ifndef SKYLINE_SYNTHETIC_HPP_
#define SKYLINE_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "skyline/trace.hpp"

namespace skyline {

// P(has_answer | rank) = a * exp(-b * (rank - 1)) + c.
struct AnswerDecay {
  double a = 0.2;
  double b = 0.15;
  double c = 0.02;

  double at(int rank) const;
};

struct GeneratorConfig {
  int n_passages = 30;
  int n_layers = 24;
  std::uint64_t seed = 0;
  AnswerDecay answer_rate_by_rank;
  // Mean logit at layer l is +drift*l for answer passages, -drift*l otherwise.
  double drift = 0.15;
  double noise_sd = 1.0;
  // P(answer_correct[l]) for an answer passage once sigmoid(logit[l]) > 0.5.
  double extraction_reliability = 0.8;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void validate(const GeneratorConfig& config);

// Deterministic in (config, count). Question k draws from its own random
// stream derived from (seed, k), so a corpus of size N is a prefix of any
// larger corpus generated with the same config. Logits are pre-rounded with
// canonical_real so the corpus survives save/load unchanged.
std::vector<QuestionInstance> generate(const GeneratorConfig& config,
                                       std::size_t count);

struct CalibrationTable {
  std::vector<double> temperatures;  // one per layer, all > 0

  std::size_t layers() const { return temperatures.size(); }
  // Calibrated probability after `height` layers (1-based).
  double probability(double logit, int height) const;

  static CalibrationTable identity(int n_layers);
  bool operator==(const CalibrationTable&) const = default;
};

// sigmoid(logit / T).
double apply_calibration(double logit, double temperature);

// Binary negative log-likelihood of sigmoid(logit / T) against has_answer,
// summed over every passage in `dev` at `layer` (0-based).
double layer_nll(std::span<const QuestionInstance> dev, int layer,
                 double temperature);

// For each layer picks the grid value with the lowest NLL; ties go to the
// smaller temperature.
CalibrationTable calibrate(std::span<const QuestionInstance> dev,
                           std::span<const double> grid);

// 32 log-spaced points from 0.25 to 8.0.
std::vector<double> default_temperature_grid();

void save_calibration(const CalibrationTable& table,
                      const std::filesystem::path& path);
CalibrationTable load_calibration(const std::filesystem::path& path);

}  // namespace skyline

#endif  // SKYLINE_SYNTHETIC_HPP_
