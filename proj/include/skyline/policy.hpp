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

// Learned tower-selection policy.
//
// Every non-empty tower i gets a priority
//
//   p_i(S) = alpha * HasAnswer(a_i) + MLP([HeightEmb(h_i), IndexEmb(i), HasAnswer(a_i)])
//
// where the MLP is a single tanh hidden layer of width 32 with a scalar output.
// Empty towers use a per-index initial priority instead. The policy is a
// softmax over the priorities of towers that can still grow.
//
// All parameters live in one flat vector so that gradients share the same
// layout and an SGD step is a single axpy.

#ifndef SKYLINE_POLICY_HPP_
#define SKYLINE_POLICY_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "skyline/trace.hpp"

namespace skyline {

inline constexpr int kPolicyHidden = 32;
inline constexpr int kDefaultEmbedding = 8;

struct PolicyShape {
  int d = kDefaultEmbedding;
  int n_layers = 24;  // HeightEmb has n_layers + 1 rows (heights 0..L)
  int n_max = 30;

  int input_dim() const { return 2 * d + 1; }
  bool operator==(const PolicyShape&) const = default;
};

enum class InitPriority { kLearnable, kFixed };

class PolicyParams {
 public:
  PolicyParams() = default;
  // All zeros; init priorities fixed at `fixed_value` unless learnable.
  explicit PolicyParams(PolicyShape shape,
                        InitPriority mode = InitPriority::kFixed,
                        double fixed_value = 0.0);

  // alpha = 1, embeddings and MLP weights uniform in [-0.1, 0.1], biases and
  // init priorities 0.
  static PolicyParams initialize(PolicyShape shape, std::uint64_t seed,
                                 InitPriority mode = InitPriority::kLearnable);

  const PolicyShape& shape() const { return shape_; }
  InitPriority init_mode() const { return init_mode_; }
  void set_init_mode(InitPriority mode) { init_mode_ = mode; }

  double& alpha() { return data_[0]; }
  double alpha() const { return data_[0]; }
  // Row-major [kPolicyHidden x input_dim].
  std::span<double> w1() { return block(off_w1_, off_b1_); }
  std::span<const double> w1() const { return block(off_w1_, off_b1_); }
  std::span<double> b1() { return block(off_b1_, off_w2_); }
  std::span<const double> b1() const { return block(off_b1_, off_w2_); }
  std::span<double> w2() { return block(off_w2_, off_b2_); }
  std::span<const double> w2() const { return block(off_w2_, off_b2_); }
  double& b2() { return data_[off_b2_]; }
  double b2() const { return data_[off_b2_]; }
  // Row-major [(n_layers + 1) x d].
  std::span<double> height_emb() { return block(off_height_, off_index_); }
  std::span<const double> height_emb() const {
    return block(off_height_, off_index_);
  }
  // Row-major [n_max x d].
  std::span<double> index_emb() { return block(off_index_, off_init_); }
  std::span<const double> index_emb() const {
    return block(off_index_, off_init_);
  }
  std::span<double> init_priority() { return block(off_init_, data_.size()); }
  std::span<const double> init_priority() const {
    return block(off_init_, data_.size());
  }

  std::span<const double> height_row(int height) const {
    return height_emb().subspan(static_cast<std::size_t>(height * shape_.d),
                                static_cast<std::size_t>(shape_.d));
  }
  std::span<const double> index_row(int index) const {
    return index_emb().subspan(static_cast<std::size_t>(index * shape_.d),
                               static_cast<std::size_t>(shape_.d));
  }

  // Flat view over every scalar, in declaration order.
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::size_t size() const { return data_.size(); }

  bool all_finite() const;
  bool operator==(const PolicyParams&) const = default;

 private:
  std::span<double> block(std::size_t begin, std::size_t end) {
    return std::span<double>(data_).subspan(begin, end - begin);
  }
  std::span<const double> block(std::size_t begin, std::size_t end) const {
    return std::span<const double>(data_).subspan(begin, end - begin);
  }

  PolicyShape shape_{};
  InitPriority init_mode_ = InitPriority::kFixed;
  std::vector<double> data_;
  std::size_t off_w1_ = 0, off_b1_ = 0, off_w2_ = 0, off_b2_ = 0;
  std::size_t off_height_ = 0, off_index_ = 0, off_init_ = 0;
};

// 1 + (2d+1)*32 + 32 + 32 + 1 + (L+1)*d + n_max*d + n_max.
std::size_t count_parameters(const PolicyShape& shape);
inline std::size_t count_parameters(const PolicyParams& params) {
  return count_parameters(params.shape());
}

struct TowerFeatures {
  std::vector<double> height_vec;
  std::vector<double> index_vec;
  double has_answer_prob = 0.0;

  // [height_vec, index_vec, has_answer_prob]
  std::vector<double> concat() const;
};

// Precondition: skyline.heights[i] > 0. Throws std::logic_error otherwise.
TowerFeatures features(const Skyline& skyline, int i,
                       const PolicyParams& params);

double priority(const Skyline& skyline, int i, const PolicyParams& params);

// Softmax over priorities restricted to `mask` (true = expandable). Masked
// towers get exactly 0. Throws std::invalid_argument on an empty mask.
std::vector<double> softmax_masked(std::span<const double> priorities,
                                   const std::vector<bool>& mask);
std::vector<double> policy_distribution(const Skyline& skyline,
                                        const PolicyParams& params,
                                        const std::vector<bool>& mask);

// Towers below full height.
std::vector<bool> expandable_mask(const Skyline& skyline, int n_layers);

enum class ActionMode { kGreedy, kSample };

// Greedy: argmax, lowest index on ties. Sample: inverse-CDF draw from `rng`;
// zero-probability entries are never returned.
int select_greedy(std::span<const double> dist);
int select_sample(std::span<const double> dist, std::mt19937_64& rng);

// Gradient of log pi(action | skyline) in the same layout as PolicyParams.
// init_priority entries get gradient only when the mode is learnable.
PolicyParams log_prob_gradient(const Skyline& skyline, int action,
                               const PolicyParams& params,
                               const std::vector<bool>& mask);

// Adds scale * d priority_i / d params into `grad`.
void accumulate_priority_gradient(const Skyline& skyline, int i,
                                  const PolicyParams& params, double scale,
                                  PolicyParams& grad);

void save_policy(const PolicyParams& params, const std::filesystem::path& path);
// Validates shape metadata against the stored arrays. If `expected` is given
// the stored shape must match it.
PolicyParams load_policy(const std::filesystem::path& path);
PolicyParams load_policy(const std::filesystem::path& path,
                         const PolicyShape& expected);

}  // namespace skyline

#endif  // SKYLINE_POLICY_HPP_
