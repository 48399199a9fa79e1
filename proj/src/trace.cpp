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

#include "skyline/trace.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace skyline {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg, std::size_t line) {
  if (line > 0) {
    throw TraceError("line " + std::to_string(line) + ": " + msg, line);
  }
  throw TraceError(msg, line);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where, std::size_t line) {
  if (!obj.is_object()) fail(where + ": expected a JSON object", line);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known |= (it.key() == key);
    if (!known) fail(where + ": unknown key \"" + it.key() + "\"", line);
  }
  for (const char* key : allowed) {
    if (!obj.contains(key)) {
      fail(where + ": missing key \"" + std::string(key) + "\"", line);
    }
  }
}

PassageTrace parse_passage(const json& obj, const std::string& where,
                           std::size_t line) {
  check_keys(obj, {"rank", "has_answer", "logits", "answer_correct"}, where,
             line);
  PassageTrace p;
  const json& rank = obj["rank"];
  if (!rank.is_number_integer()) fail(where + ".rank: expected integer", line);
  p.rank = rank.get<int>();
  if (!obj["has_answer"].is_boolean()) {
    fail(where + ".has_answer: expected boolean", line);
  }
  p.has_answer = obj["has_answer"].get<bool>();

  const json& logits = obj["logits"];
  if (!logits.is_array()) fail(where + ".logits: expected array", line);
  p.logits.reserve(logits.size());
  for (const json& v : logits) {
    if (!v.is_number()) fail(where + ".logits: expected numbers", line);
    p.logits.push_back(v.get<double>());
  }
  const json& correct = obj["answer_correct"];
  if (!correct.is_array()) {
    fail(where + ".answer_correct: expected array", line);
  }
  p.answer_correct.reserve(correct.size());
  for (const json& v : correct) {
    if (!v.is_boolean()) {
      fail(where + ".answer_correct: expected booleans", line);
    }
    p.answer_correct.push_back(v.get<bool>());
  }
  return p;
}

QuestionInstance parse_line(const std::string& text, std::size_t line) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("parse error: ") + e.what(), line);
  }
  check_keys(obj, {"question_id", "passages"}, "question", line);
  QuestionInstance q;
  if (!obj["question_id"].is_string()) {
    fail("question_id: expected string", line);
  }
  q.question_id = obj["question_id"].get<std::string>();
  const json& passages = obj["passages"];
  if (!passages.is_array()) {
    fail("question " + q.question_id + ": passages: expected array", line);
  }
  for (std::size_t i = 0; i < passages.size(); ++i) {
    q.passages.push_back(parse_passage(
        passages[i],
        "question " + q.question_id + ": passages[" + std::to_string(i) + "]",
        line));
  }
  try {
    validate(q);
  } catch (const TraceError& e) {
    fail(e.what(), line);
  }
  return q;
}

void append_real(std::string& out, double x) {
  x = canonical_real(x);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  out += buf;
}

}  // namespace

double canonical_real(double x) {
  if (x == 0.0) return 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

void validate(const QuestionInstance& q) {
  const std::string where = "question " + q.question_id;
  if (q.passages.empty()) fail(where + ": passages must not be empty", 0);
  const std::size_t n_layers = q.passages.front().logits.size();
  if (n_layers == 0) fail(where + ": logits must have at least one layer", 0);
  for (std::size_t i = 0; i < q.passages.size(); ++i) {
    const PassageTrace& p = q.passages[i];
    const std::string pw = where + ": passages[" + std::to_string(i) + "]";
    if (p.rank != static_cast<int>(i) + 1) {
      fail(pw + ".rank: expected " + std::to_string(i + 1) + ", got " +
               std::to_string(p.rank) + " (ranks must be 1..n in order)",
           0);
    }
    if (p.logits.size() != n_layers) {
      fail(pw + ".logits: length " + std::to_string(p.logits.size()) +
               " differs from L=" + std::to_string(n_layers),
           0);
    }
    if (p.answer_correct.size() != n_layers) {
      fail(pw + ".answer_correct: length " +
               std::to_string(p.answer_correct.size()) + " differs from L=" +
               std::to_string(n_layers),
           0);
    }
    for (double v : p.logits) {
      if (!std::isfinite(v)) fail(pw + ".logits: non-finite value", 0);
    }
    if (!p.has_answer) {
      for (bool c : p.answer_correct) {
        if (c) {
          fail(pw +
                   ".answer_correct: has_answer is false but an "
                   "answer_correct entry is true",
               0);
        }
      }
    }
  }
}

std::vector<QuestionInstance> parse_traces(const std::string& text) {
  std::vector<QuestionInstance> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_line(line, line_no));
  }
  return out;
}

std::vector<QuestionInstance> load_traces(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_traces(buf.str());
}

std::string format_trace_line(const QuestionInstance& q) {
  std::string out = "{\"question_id\": ";
  out += json(q.question_id).dump();
  out += ", \"passages\": [";
  for (std::size_t i = 0; i < q.passages.size(); ++i) {
    const PassageTrace& p = q.passages[i];
    if (i > 0) out += ", ";
    out += "{\"rank\": " + std::to_string(p.rank);
    out += ", \"has_answer\": ";
    out += p.has_answer ? "true" : "false";
    out += ", \"logits\": [";
    for (std::size_t l = 0; l < p.logits.size(); ++l) {
      if (l > 0) out += ", ";
      append_real(out, p.logits[l]);
    }
    out += "], \"answer_correct\": [";
    for (std::size_t l = 0; l < p.answer_correct.size(); ++l) {
      if (l > 0) out += ", ";
      out += p.answer_correct[l] ? "true" : "false";
    }
    out += "]}";
  }
  out += "]}";
  return out;
}

void save_traces(std::span<const QuestionInstance> instances,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write trace file " + path.string());
  for (const QuestionInstance& q : instances) {
    out << format_trace_line(q) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

bool skyline_consistent(const Skyline& s, int n_layers) {
  if (s.summaries.size() != s.heights.size()) return false;
  int total = 0;
  for (std::size_t i = 0; i < s.heights.size(); ++i) {
    const int h = s.heights[i];
    if (h < 0 || h > n_layers) return false;
    if (s.summaries[i].has_value() != (h > 0)) return false;
    total += h;
  }
  return total == s.cost_spent;
}

}  // namespace skyline
