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

// Core domain types: per-passage reader traces, the skyline state that
// schedulers build up, and the log a scheduler run leaves behind.
//
// A trace is the frozen output of an anytime reader on one retrieved passage:
// the raw HasAnswer logit after every layer plus whether answer extraction at
// that layer would be correct. Schedulers never see anything else.

#ifndef SKYLINE_TRACE_HPP_
#define SKYLINE_TRACE_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skyline {

// Thrown by load_traces for malformed lines and invariant violations. `line`
// is 1-based; 0 when the error is not tied to a line.
class TraceError : public std::runtime_error {
 public:
  TraceError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PassageTrace {
  int rank = 1;  // 1 = top retrieved passage
  bool has_answer = false;
  std::vector<double> logits;        // raw HasAnswer logit after layer 1..L
  std::vector<bool> answer_correct;  // extraction correct at layer 1..L

  std::size_t layers() const { return logits.size(); }
  bool operator==(const PassageTrace&) const = default;
};

struct QuestionInstance {
  std::string question_id;
  std::vector<PassageTrace> passages;  // rank ascending

  std::size_t size() const { return passages.size(); }
  std::size_t layers() const {
    return passages.empty() ? 0 : passages.front().layers();
  }
  bool operator==(const QuestionInstance&) const = default;
};

// Throws TraceError (line 0) naming question_id and the offending field.
void validate(const QuestionInstance& q);

// Reads the JSONL trace format. An empty file yields an empty corpus.
std::vector<QuestionInstance> load_traces(const std::filesystem::path& path);
std::vector<QuestionInstance> parse_traces(const std::string& text);

// Reals are written with 9 significant digits and negative zero becomes 0,
// so load(save(x)) == canonicalize(x).
void save_traces(std::span<const QuestionInstance> instances,
                 const std::filesystem::path& path);
std::string format_trace_line(const QuestionInstance& q);

// The value a real takes after one write/read cycle.
double canonical_real(double x);

struct Budget {
  int total_layers = 0;
};

// S = (H, A): tower heights plus the calibrated HasAnswer probability at each
// tower's current top layer (absent while the tower is empty).
struct Skyline {
  std::vector<int> heights;
  std::vector<std::optional<double>> summaries;
  int cost_spent = 0;

  static Skyline empty(std::size_t n) {
    return Skyline{std::vector<int>(n, 0),
                   std::vector<std::optional<double>>(n), 0};
  }
  std::size_t size() const { return heights.size(); }
  bool operator==(const Skyline&) const = default;
};

// summaries[i] present iff heights[i] > 0, heights within [0, n_layers], and
// cost_spent == sum(heights).
bool skyline_consistent(const Skyline& s, int n_layers);

struct ScheduleLog {
  std::string question_id;
  std::vector<int> actions;     // tower index per executed layer, in order
  std::vector<double> rewards;  // same length as actions
  Skyline final_skyline;
  std::vector<int> selected_towers;
  bool prediction_correct = false;
  int scheduler_layers = 0;  // == actions.size()
  int unroll_layers = 0;     // LastLayer unrolling in the Output phase

  bool operator==(const ScheduleLog&) const = default;
};

}  // namespace skyline

#endif  // SKYLINE_TRACE_HPP_
