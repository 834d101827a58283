#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "azedu/features.hpp"

namespace azedu {

struct NetworkConfig {
  int board_x = 15;
  int board_y = 15;
  int input_planes = kInputPlanes;
  int trunk_channels = 64;
  int trunk_blocks = 4;
  int policy_channels = 2;
  int value_channels = 1;
  int value_hidden = 64;
  std::uint64_t seed = 0;

  int cells() const { return board_x * board_y; }
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct ParamArray {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<T> values;

  friend bool operator==(const ParamArray&, const ParamArray&) = default;
};

// Named parameter arrays in a fixed order given by parameter_layout().
template <typename T>
struct ParamSet {
  NetworkConfig config;
  std::vector<ParamArray<T>> arrays;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& a : arrays) n += a.values.size();
    return n;
  }

  const ParamArray<T>& find(std::string_view name) const {
    for (const auto& a : arrays) {
      if (a.name == name) return a;
    }
    throw std::out_of_range("no parameter named " + std::string(name));
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    out.config = config;
    out.arrays.reserve(arrays.size());
    for (const auto& a : arrays) {
      out.arrays.push_back({a.name, a.shape, std::vector<U>(a.values.begin(), a.values.end())});
    }
    return out;
  }

  ParamSet zeros_like() const {
    ParamSet out = *this;
    for (auto& a : out.arrays) std::fill(a.values.begin(), a.values.end(), T(0));
    return out;
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

using Weights = ParamSet<float>;

struct ParamSpec {
  std::string name;
  std::vector<std::uint32_t> shape;
  int fan_in;
  bool is_bias;
};

// Trunk: 3x3 conv -> ReLU -> trunk_blocks residual blocks.
// Policy head: 1x1 conv -> ReLU -> dense(cells) -> softmax.
// Value head: 1x1 conv -> ReLU -> dense(value_hidden) -> ReLU -> dense(1) -> tanh.
std::vector<ParamSpec> parameter_layout(const NetworkConfig& config);

// He-normal weights from config.seed, zero biases.
Weights init_network(const NetworkConfig& config);

// Throws ShapeMismatch naming the first array that disagrees with the layout.
template <typename T>
void check_shapes(const ParamSet<T>& params);

struct Prediction {
  std::vector<MoveDistribution> policy;  // softmax, unmasked
  std::vector<double> value;             // tanh, in [-1, 1]
};

template <typename T>
Prediction forward(const ParamSet<T>& params, std::span<const StateTensor> batch);

struct LossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double total_loss = 0.0;  // policy_loss + value_loss
  double weight_penalty = 0.0;  // L2 term, kept out of total_loss
};

inline constexpr double kLogEpsilon = 1e-10;

// Cross-entropy against full target distributions plus MSE on z, batch means.
template <typename T>
LossReport loss(const ParamSet<T>& params, std::span<const TrainingSample> batch);

// Same report as loss(); fills `grad` (shaped like params) with d total / d param.
template <typename T>
LossReport loss_and_gradients(const ParamSet<T>& params,
                              std::span<const TrainingSample> batch,
                              ParamSet<T>& grad);

struct OptimizerConfig {
  double momentum = 0.9;
  double weight_decay = 1e-4;  // on weights, not biases
};

// SGD with momentum: v = mu*v + (g + wd*w); w -= lr*v.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(OptimizerConfig config = {}) : config_(config) {}

  const OptimizerConfig& config() const { return config_; }

  // Loss is reported at the pre-step weights. Throws NonFiniteGradient and
  // leaves both the weights and the momentum buffers untouched.
  LossReport step(Weights& weights, std::span<const TrainingSample> batch, double lr);

 private:
  OptimizerConfig config_;
  Weights velocity_;
};

std::pair<Weights, LossReport> backward_and_step(const Weights& weights,
                                                 SgdOptimizer& optimizer,
                                                 std::span<const TrainingSample> batch,
                                                 double lr);

}  // namespace azedu
