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

#include "skyline/policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace skyline {
namespace {

using nlohmann::json;

void check_shape(const PolicyShape& s) {
  if (s.d < 1 || s.n_layers < 1 || s.n_max < 1) {
    throw std::invalid_argument("policy shape needs d, n_layers, n_max >= 1");
  }
}

struct HiddenState {
  std::array<double, kPolicyHidden> act{};  // tanh outputs
};

// MLP forward pass for one feature vector x of length 2d+1.
double mlp_forward(const PolicyParams& params, std::span<const double> x,
                   HiddenState& hidden) {
  const int in = params.shape().input_dim();
  const auto w1 = params.w1();
  const auto b1 = params.b1();
  const auto w2 = params.w2();
  double out = params.b2();
  for (int k = 0; k < kPolicyHidden; ++k) {
    double z = b1[static_cast<std::size_t>(k)];
    const double* row = w1.data() + static_cast<std::ptrdiff_t>(k) * in;
    for (int j = 0; j < in; ++j) z += row[j] * x[static_cast<std::size_t>(j)];
    const double t = std::tanh(z);
    hidden.act[static_cast<std::size_t>(k)] = t;
    out += w2[static_cast<std::size_t>(k)] * t;
  }
  return out;
}

void fill_input(const Skyline& skyline, int i, const PolicyParams& params,
                std::vector<double>& x) {
  const int d = params.shape().d;
  x.resize(static_cast<std::size_t>(2 * d + 1));
  const auto h = params.height_row(skyline.heights[static_cast<std::size_t>(i)]);
  const auto idx = params.index_row(i);
  std::copy(h.begin(), h.end(), x.begin());
  std::copy(idx.begin(), idx.end(), x.begin() + d);
  x[static_cast<std::size_t>(2 * d)] =
      *skyline.summaries[static_cast<std::size_t>(i)];
}

json matrix_to_json(std::span<const double> flat, int rows, int cols) {
  json m = json::array();
  for (int r = 0; r < rows; ++r) {
    m.push_back(std::vector<double>(
        flat.begin() + static_cast<std::ptrdiff_t>(r) * cols,
        flat.begin() + static_cast<std::ptrdiff_t>(r + 1) * cols));
  }
  return m;
}

[[noreturn]] void bad_policy(const std::filesystem::path& path,
                             const std::string& msg) {
  throw TraceError(path.string() + ": " + msg, 0);
}

void read_vector(const json& v, std::span<double> dst,
                 const std::filesystem::path& path, const std::string& name) {
  if (!v.is_array() || v.size() != dst.size()) {
    bad_policy(path, name + ": expected " + std::to_string(dst.size()) +
                         " numbers");
  }
  for (std::size_t k = 0; k < dst.size(); ++k) {
    if (!v[k].is_number()) bad_policy(path, name + ": expected numbers");
    dst[k] = v[k].get<double>();
  }
}

void read_matrix(const json& m, std::span<double> dst, int rows, int cols,
                 const std::filesystem::path& path, const std::string& name) {
  if (!m.is_array() || m.size() != static_cast<std::size_t>(rows)) {
    bad_policy(path, name + ": expected " + std::to_string(rows) + " rows");
  }
  for (int r = 0; r < rows; ++r) {
    read_vector(m[static_cast<std::size_t>(r)],
                dst.subspan(static_cast<std::size_t>(r * cols),
                            static_cast<std::size_t>(cols)),
                path, name + "[" + std::to_string(r) + "]");
  }
}

}  // namespace

PolicyParams::PolicyParams(PolicyShape shape, InitPriority mode,
                           double fixed_value)
    : shape_(shape), init_mode_(mode) {
  check_shape(shape);
  const std::size_t in = static_cast<std::size_t>(shape.input_dim());
  const std::size_t d = static_cast<std::size_t>(shape.d);
  off_w1_ = 1;
  off_b1_ = off_w1_ + kPolicyHidden * in;
  off_w2_ = off_b1_ + kPolicyHidden;
  off_b2_ = off_w2_ + kPolicyHidden;
  off_height_ = off_b2_ + 1;
  off_index_ = off_height_ + static_cast<std::size_t>(shape.n_layers + 1) * d;
  off_init_ = off_index_ + static_cast<std::size_t>(shape.n_max) * d;
  data_.assign(off_init_ + static_cast<std::size_t>(shape.n_max), 0.0);
  if (mode == InitPriority::kFixed) {
    std::fill(init_priority().begin(), init_priority().end(), fixed_value);
  }
}

PolicyParams PolicyParams::initialize(PolicyShape shape, std::uint64_t seed,
                                      InitPriority mode) {
  PolicyParams p(shape, mode, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  p.alpha() = 1.0;
  for (double& w : p.w1()) w = u(rng);
  for (double& w : p.w2()) w = u(rng);
  for (double& w : p.height_emb()) w = u(rng);
  for (double& w : p.index_emb()) w = u(rng);
  return p;
}

bool PolicyParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::size_t count_parameters(const PolicyShape& s) {
  const std::size_t d = static_cast<std::size_t>(s.d);
  return 1 + static_cast<std::size_t>(s.input_dim()) * kPolicyHidden +
         kPolicyHidden + kPolicyHidden + 1 +
         static_cast<std::size_t>(s.n_layers + 1) * d +
         static_cast<std::size_t>(s.n_max) * d +
         static_cast<std::size_t>(s.n_max);
}

std::vector<double> TowerFeatures::concat() const {
  std::vector<double> x(height_vec);
  x.insert(x.end(), index_vec.begin(), index_vec.end());
  x.push_back(has_answer_prob);
  return x;
}

TowerFeatures features(const Skyline& skyline, int i,
                       const PolicyParams& params) {
  const std::size_t ui = static_cast<std::size_t>(i);
  if (skyline.heights.at(ui) <= 0 || !skyline.summaries[ui].has_value()) {
    throw std::logic_error("features: tower " + std::to_string(i) +
                           " is empty; use its initial priority");
  }
  const auto h = params.height_row(skyline.heights[ui]);
  const auto idx = params.index_row(i);
  return TowerFeatures{{h.begin(), h.end()},
                       {idx.begin(), idx.end()},
                       *skyline.summaries[ui]};
}

double priority(const Skyline& skyline, int i, const PolicyParams& params) {
  const std::size_t ui = static_cast<std::size_t>(i);
  if (skyline.heights[ui] == 0) return params.init_priority()[ui];
  std::vector<double> x;
  fill_input(skyline, i, params, x);
  HiddenState hidden;
  return params.alpha() * *skyline.summaries[ui] +
         mlp_forward(params, x, hidden);
}

std::vector<bool> expandable_mask(const Skyline& skyline, int n_layers) {
  std::vector<bool> mask(skyline.size());
  for (std::size_t i = 0; i < skyline.size(); ++i) {
    mask[i] = skyline.heights[i] < n_layers;
  }
  return mask;
}

std::vector<double> softmax_masked(std::span<const double> priorities,
                                   const std::vector<bool>& mask) {
  double top = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < priorities.size(); ++i) {
    if (mask[i]) {
      if (!std::isfinite(priorities[i])) {
        throw std::domain_error("policy_distribution: priority of tower " +
                                std::to_string(i) + " is not finite");
      }
      top = std::max(top, priorities[i]);
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("policy_distribution: empty mask");
  std::vector<double> dist(priorities.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < priorities.size(); ++i) {
    if (mask[i]) {
      dist[i] = std::exp(priorities[i] - top);
      total += dist[i];
    }
  }
  for (double& p : dist) p /= total;
  return dist;
}

std::vector<double> policy_distribution(const Skyline& skyline,
                                        const PolicyParams& params,
                                        const std::vector<bool>& mask) {
  std::vector<double> prio(skyline.size(), 0.0);
  for (std::size_t i = 0; i < skyline.size(); ++i) {
    if (mask[i]) prio[i] = priority(skyline, static_cast<int>(i), params);
  }
  return softmax_masked(prio, mask);
}

int select_greedy(std::span<const double> dist) {
  int best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

int select_sample(std::span<const double> dist, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cum += dist[i];
    if (u < cum) return static_cast<int>(i);
  }
  // Rounding left cum slightly below 1 and u landed in the gap.
  return last_positive;
}

void accumulate_priority_gradient(const Skyline& skyline, int i,
                                  const PolicyParams& params, double scale,
                                  PolicyParams& grad) {
  const std::size_t ui = static_cast<std::size_t>(i);
  if (skyline.heights[ui] == 0) {
    if (params.init_mode() == InitPriority::kLearnable) {
      grad.init_priority()[ui] += scale;
    }
    return;
  }
  const PolicyShape& s = params.shape();
  const int in = s.input_dim();
  const int d = s.d;
  std::vector<double> x;
  fill_input(skyline, i, params, x);
  HiddenState hidden;
  mlp_forward(params, x, hidden);

  grad.alpha() += scale * x[static_cast<std::size_t>(2 * d)];
  grad.b2() += scale;
  auto gw1 = grad.w1();
  auto gb1 = grad.b1();
  auto gw2 = grad.w2();
  const auto w1 = params.w1();
  const auto w2 = params.w2();
  std::vector<double> dx(static_cast<std::size_t>(in), 0.0);
  for (int k = 0; k < kPolicyHidden; ++k) {
    const std::size_t uk = static_cast<std::size_t>(k);
    const double t = hidden.act[uk];
    gw2[uk] += scale * t;
    const double g = scale * w2[uk] * (1.0 - t * t);
    gb1[uk] += g;
    const std::size_t row = uk * static_cast<std::size_t>(in);
    for (int j = 0; j < in; ++j) {
      const std::size_t uj = static_cast<std::size_t>(j);
      gw1[row + uj] += g * x[uj];
      dx[uj] += g * w1[row + uj];
    }
  }
  auto gh = grad.height_emb().subspan(
      static_cast<std::size_t>(skyline.heights[ui] * d),
      static_cast<std::size_t>(d));
  auto gi = grad.index_emb().subspan(static_cast<std::size_t>(i * d),
                                     static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    gh[static_cast<std::size_t>(j)] += dx[static_cast<std::size_t>(j)];
    gi[static_cast<std::size_t>(j)] += dx[static_cast<std::size_t>(d + j)];
  }
}

PolicyParams log_prob_gradient(const Skyline& skyline, int action,
                               const PolicyParams& params,
                               const std::vector<bool>& mask) {
  PolicyParams grad(params.shape(), params.init_mode(), 0.0);
  const std::vector<double> dist = policy_distribution(skyline, params, mask);
  // d log pi(a) = d p_a - sum_j pi_j d p_j
  for (std::size_t j = 0; j < dist.size(); ++j) {
    const double coeff =
        (static_cast<int>(j) == action ? 1.0 : 0.0) - dist[j];
    if (!mask[j] || coeff == 0.0) continue;
    accumulate_priority_gradient(skyline, static_cast<int>(j), params, coeff,
                                 grad);
  }
  return grad;
}

void save_policy(const PolicyParams& params,
                 const std::filesystem::path& path) {
  const PolicyShape& s = params.shape();
  json doc;
  doc["format"] = "skyline-policy";
  doc["version"] = 1;
  doc["shape"] = {{"d", s.d},
                  {"n_layers", s.n_layers},
                  {"n_max", s.n_max},
                  {"hidden", kPolicyHidden},
                  {"input_dim", s.input_dim()}};
  doc["init_priority_mode"] =
      params.init_mode() == InitPriority::kLearnable ? "learnable" : "fixed";
  doc["alpha"] = params.alpha();
  doc["mlp"] = {{"w1", matrix_to_json(params.w1(), kPolicyHidden,
                                      s.input_dim())},
                {"b1", std::vector<double>(params.b1().begin(),
                                           params.b1().end())},
                {"w2", std::vector<double>(params.w2().begin(),
                                           params.w2().end())},
                {"b2", params.b2()}};
  doc["height_emb"] = matrix_to_json(params.height_emb(), s.n_layers + 1, s.d);
  doc["index_emb"] = matrix_to_json(params.index_emb(), s.n_max, s.d);
  doc["init_priority"] = std::vector<double>(params.init_priority().begin(),
                                             params.init_priority().end());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write policy file " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

PolicyParams load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open policy file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    bad_policy(path, e.what());
  }
  try {
    if (doc.at("format") != "skyline-policy" || doc.at("version") != 1) {
      bad_policy(path, "not a skyline-policy version 1 document");
    }
    const json& js = doc.at("shape");
    PolicyShape shape{js.at("d").get<int>(), js.at("n_layers").get<int>(),
                      js.at("n_max").get<int>()};
    if (js.at("hidden").get<int>() != kPolicyHidden ||
        js.at("input_dim").get<int>() != shape.input_dim()) {
      bad_policy(path, "shape metadata inconsistent with hidden width 32");
    }
    const std::string mode = doc.at("init_priority_mode").get<std::string>();
    if (mode != "learnable" && mode != "fixed") {
      bad_policy(path, "init_priority_mode must be learnable or fixed");
    }
    PolicyParams p(shape,
                   mode == "learnable" ? InitPriority::kLearnable
                                       : InitPriority::kFixed,
                   0.0);
    p.alpha() = doc.at("alpha").get<double>();
    const json& mlp = doc.at("mlp");
    read_matrix(mlp.at("w1"), p.w1(), kPolicyHidden, shape.input_dim(), path,
                "mlp.w1");
    read_vector(mlp.at("b1"), p.b1(), path, "mlp.b1");
    read_vector(mlp.at("w2"), p.w2(), path, "mlp.w2");
    p.b2() = mlp.at("b2").get<double>();
    read_matrix(doc.at("height_emb"), p.height_emb(), shape.n_layers + 1,
                shape.d, path, "height_emb");
    read_matrix(doc.at("index_emb"), p.index_emb(), shape.n_max, shape.d, path,
                "index_emb");
    read_vector(doc.at("init_priority"), p.init_priority(), path,
                "init_priority");
    if (!p.all_finite()) bad_policy(path, "non-finite parameter");
    return p;
  } catch (const json::exception& e) {
    bad_policy(path, e.what());
  } catch (const std::invalid_argument& e) {
    bad_policy(path, e.what());
  }
}

PolicyParams load_policy(const std::filesystem::path& path,
                         const PolicyShape& expected) {
  PolicyParams p = load_policy(path);
  if (!(p.shape() == expected)) {
    bad_policy(path, "shape (d=" + std::to_string(p.shape().d) +
                         ", L=" + std::to_string(p.shape().n_layers) +
                         ", n_max=" + std::to_string(p.shape().n_max) +
                         ") does not match the expected shape");
  }
  return p;
}

}  // namespace skyline
