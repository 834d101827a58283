#include "azedu/network.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "azedu/sample_io.hpp"
#include "oracles.hpp"

namespace azedu {
namespace {

NetworkConfig tiny(std::uint64_t seed = 1) {
  NetworkConfig c;
  c.board_x = 6;
  c.board_y = 6;
  c.trunk_channels = 8;
  c.trunk_blocks = 1;
  c.value_hidden = 8;
  c.seed = seed;
  return c;
}

GameConfig game6() {
  GameConfig g;
  g.board_x = 6;
  g.board_y = 6;
  g.win_length = 4;
  return g;
}

std::vector<TrainingSample> random_batch(int n, std::uint64_t seed, const GameConfig& g = game6()) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrainingSample> out;
  for (int i = 0; i < n; ++i) {
    TrainingSample s;
    s.state = encode_state(oracle::random_position(g, rng, g.cells() / 2));
    s.policy_target.probs.resize(g.cells());
    double sum = 0.0;
    for (auto& p : s.policy_target.probs) sum += p = u(rng) < 0.3 ? u(rng) : 0.0;
    if (sum == 0.0) {
      s.policy_target.probs[0] = sum = 1.0;
    }
    for (auto& p : s.policy_target.probs) p /= sum;
    s.z = static_cast<std::int8_t>(std::uniform_int_distribution<int>(-1, 1)(rng));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<StateTensor> states_of(const std::vector<TrainingSample>& b) {
  std::vector<StateTensor> out;
  for (const auto& s : b) out.push_back(s.state);
  return out;
}

ParamArray<float>& array(Weights& w, const std::string& name) {
  for (auto& a : w.arrays) {
    if (a.name == name) return a;
  }
  throw std::out_of_range(name);
}

TEST(InitNetwork, SeedDeterminism) {
  EXPECT_EQ(init_network(tiny(5)), init_network(tiny(5)));
  EXPECT_NE(init_network(tiny(5)), init_network(tiny(6)));
}

TEST(InitNetwork, FirstConvShape) {
  NetworkConfig c;
  const Weights w = init_network(c);
  EXPECT_EQ(w.find("input.conv.weight").shape, (std::vector<std::uint32_t>{64, 21, 3, 3}));
  EXPECT_EQ(w.find("policy.fc.weight").shape, (std::vector<std::uint32_t>{225, 2 * 225}));
  EXPECT_EQ(w.find("value.fc2.weight").shape, (std::vector<std::uint32_t>{1, 64}));
  for (float b : w.find("input.conv.bias").values) EXPECT_EQ(b, 0.0f);
}

TEST(InitNetwork, RejectsBadConfig) {
  NetworkConfig c = tiny();
  c.input_planes = 17;
  EXPECT_THROW(init_network(c), std::invalid_argument);
  c = tiny();
  c.trunk_channels = 0;
  EXPECT_THROW(init_network(c), std::invalid_argument);
}

TEST(CheckShapes, NamesTheLayer) {
  Weights w = init_network(tiny());
  array(w, "value.fc1.weight").shape = {3, 3};
  try {
    check_shapes(w);
    FAIL();
  } catch (const ShapeMismatch& e) {
    EXPECT_NE(std::string(e.what()).find("value.fc1.weight"), std::string::npos);
  }
}

TEST(Forward, RangesOnRandomInputs) {
  std::mt19937_64 rng(2);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Weights w = init_network(tiny(seed));
    // Scale weights up so the heads saturate sometimes.
    for (auto& a : w.arrays) {
      for (auto& v : a.values) v *= 3.0f;
    }
    std::vector<StateTensor> batch;
    std::uniform_int_distribution<int> cell(-1, 1);
    for (int i = 0; i < 16; ++i) {
      StateTensor t(6, 6);
      for (auto& v : t.data) v = static_cast<std::int8_t>(cell(rng));
      batch.push_back(t);
    }
    const Prediction p = forward(w, std::span<const StateTensor>(batch));
    ASSERT_EQ(p.policy.size(), 16u);
    for (int i = 0; i < 16; ++i) {
      EXPECT_GE(p.value[i], -1.0);
      EXPECT_LE(p.value[i], 1.0);
      EXPECT_NEAR(p.policy[i].sum(), 1.0, 1e-6);
      for (double q : p.policy[i].probs) EXPECT_GE(q, 0.0);
    }
  }
}

TEST(Forward, DuplicatesInBatchAgree) {
  const Weights w = init_network(tiny());
  auto states = states_of(random_batch(5, 3));
  states.push_back(states[1]);
  states.insert(states.begin(), states[3]);
  const Prediction p = forward(w, std::span<const StateTensor>(states));
  // GEMM tails round differently by column, so agreement is to float precision.
  for (auto [i, j] : {std::pair{0, 4}, std::pair{2, 6}}) {
    EXPECT_NEAR(p.value[i], p.value[j], 1e-5);
    for (std::size_t s = 0; s < p.policy[i].probs.size(); ++s) {
      EXPECT_NEAR(p.policy[i].probs[s], p.policy[j].probs[s], 1e-6);
    }
  }
  const Prediction again = forward(w, std::span<const StateTensor>(states));
  EXPECT_EQ(again.policy, p.policy);
  EXPECT_EQ(again.value, p.value);
}

TEST(Forward, WrongBoardRejected) {
  const Weights w = init_network(tiny());
  std::vector<StateTensor> batch = {StateTensor(7, 7)};
  EXPECT_THROW(forward(w, std::span<const StateTensor>(batch)), ShapeMismatch);
}

TEST(Loss, UniformAgainstOneHotIsLogCells) {
  Weights w = init_network(tiny());
  for (auto& v : array(w, "policy.fc.weight").values) v = 0.0f;
  auto batch = random_batch(4, 4);
  for (auto& s : batch) {
    std::fill(s.policy_target.probs.begin(), s.policy_target.probs.end(), 0.0);
    s.policy_target.probs[7] = 1.0;
  }
  const LossReport r = loss(w, std::span<const TrainingSample>(batch));
  EXPECT_NEAR(r.policy_loss, std::log(36.0), 5e-7);
  EXPECT_EQ(r.total_loss, r.policy_loss + r.value_loss);
}

TEST(Loss, ExactPredictionsGiveZero) {
  Weights w = init_network(tiny());
  for (auto& v : array(w, "policy.fc.weight").values) v = 0.0f;
  array(w, "policy.fc.bias").values[5] = 1000.0f;
  for (auto& v : array(w, "value.fc2.weight").values) v = 0.0f;
  auto batch = random_batch(3, 5);
  for (auto& s : batch) {
    std::fill(s.policy_target.probs.begin(), s.policy_target.probs.end(), 0.0);
    s.policy_target.probs[5] = 1.0;
    s.z = 0;
  }
  const LossReport r = loss(w, std::span<const TrainingSample>(batch));
  EXPECT_NEAR(r.policy_loss, 0.0, 1e-9);
  EXPECT_EQ(r.value_loss, 0.0);
  EXPECT_EQ(r.total_loss, r.policy_loss);
}

TEST(Loss, Deterministic) {
  const Weights w = init_network(tiny());
  const auto batch = random_batch(8, 6);
  const LossReport a = loss(w, std::span<const TrainingSample>(batch));
  const LossReport b = loss(w, std::span<const TrainingSample>(batch));
  EXPECT_EQ(a.total_loss, b.total_loss);
  EXPECT_EQ(a.total_loss, a.policy_loss + a.value_loss);
}

// Central differences on 64-bit parameters against the analytic gradient.
TEST(Gradients, MatchFiniteDifferences) {
  ParamSet<double> params = init_network(tiny(3)).cast<double>();
  // Zero biases put all-empty receptive fields exactly on the ReLU kink.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  for (auto& arr : params.arrays) {
    if (arr.name.ends_with(".bias")) {
      for (auto& v : arr.values) v = small(rng);
    }
  }
  const auto batch = random_batch(3, 7);
  const std::span<const TrainingSample> b(batch);
  ParamSet<double> grad;
  loss_and_gradients(params, b, grad);

  const double h = 1e-6;  // small enough that no pre-activation crosses a kink
  ParamSet<double> probe = params;
  std::size_t checked = 0, bad = 0;
  double worst = 0.0;
  for (std::size_t a = 0; a < probe.arrays.size(); ++a) {
    for (std::size_t i = 0; i < probe.arrays[a].values.size(); ++i) {
      double& v = probe.arrays[a].values[i];
      const double orig = v;
      v = orig + h;
      const double up = loss(probe, b).total_loss;
      v = orig - h;
      const double down = loss(probe, b).total_loss;
      v = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grad.arrays[a].values[i];
      const double abs_err = std::abs(numeric - analytic);
      const double rel_err = abs_err / std::max(std::abs(numeric), std::abs(analytic));
      ++checked;
      if (abs_err >= 1e-6 && rel_err >= 1e-4) {
        ++bad;
        worst = std::max(worst, rel_err);
        ADD_FAILURE() << probe.arrays[a].name << "[" << i << "] analytic " << analytic << " numeric " << numeric;
      }
    }
  }
  EXPECT_EQ(checked, params.parameter_count());
  EXPECT_EQ(bad, 0u) << "worst relative error " << worst;
}

TEST(Optimizer, ZeroLearningRateLeavesWeights) {
  Weights w = init_network(tiny());
  const Weights before = w;
  SgdOptimizer opt;
  const auto batch = random_batch(4, 8);
  for (int i = 0; i < 3; ++i) opt.step(w, std::span<const TrainingSample>(batch), 0.0);
  EXPECT_EQ(w, before);
  EXPECT_THROW(opt.step(w, std::span<const TrainingSample>(batch), -1.0), std::invalid_argument);
}

TEST(Optimizer, OverfitsOneBatch) {
  Weights w = init_network(tiny(4));
  SgdOptimizer opt;
  const auto batch = random_batch(16, 9);
  std::vector<double> losses;
  for (int i = 0; i < 50; ++i) {
    losses.push_back(opt.step(w, std::span<const TrainingSample>(batch), 0.01).total_loss);
  }
  int increases = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) increases += losses[i] > losses[i - 1] + 1e-9;
  EXPECT_LE(increases, 5);
  EXPECT_LT(losses.back(), losses.front());
}

TEST(Optimizer, NonFiniteGradientLeavesWeights) {
  Weights w = init_network(tiny());
  array(w, "value.fc2.weight").values[0] = std::numeric_limits<float>::quiet_NaN();
  const Weights before = w;
  SgdOptimizer opt;
  const auto batch = random_batch(2, 10);
  EXPECT_THROW(opt.step(w, std::span<const TrainingSample>(batch), 0.1), NonFiniteGradient);
  // NaN != NaN, so compare bytes.
  for (std::size_t a = 0; a < w.arrays.size(); ++a) {
    ASSERT_EQ(std::memcmp(w.arrays[a].values.data(), before.arrays[a].values.data(),
                          w.arrays[a].values.size() * sizeof(float)), 0);
  }
}

TEST(Optimizer, BackwardAndStepReturnsNewWeights) {
  const Weights w = init_network(tiny());
  SgdOptimizer opt;
  const auto batch = random_batch(4, 11);
  const auto [next, report] = backward_and_step(w, opt, std::span<const TrainingSample>(batch), 0.01);
  EXPECT_NE(next, w);
  EXPECT_EQ(report.total_loss, loss(w, std::span<const TrainingSample>(batch)).total_loss);
}

TEST(SampleIo, RoundTrip) {
  const auto batch = random_batch(5, 12);
  std::stringstream ss;
  write_sample_batch(ss, 6, 6, batch);
  const auto back = read_sample_batch(ss);
  ASSERT_EQ(back.size(), batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_EQ(back[i].state, batch[i].state);
    EXPECT_EQ(back[i].z, batch[i].z);
    for (int k = 0; k < 36; ++k) {
      EXPECT_EQ(back[i].policy_target.probs[k], static_cast<float>(batch[i].policy_target.probs[k]));
    }
  }
}

TEST(SampleIo, Truncated) {
  const auto batch = random_batch(2, 13);
  std::stringstream ss;
  write_sample_batch(ss, 6, 6, batch);
  std::string bytes = ss.str();
  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, bytes.size() - 1}) {
    std::stringstream t(bytes.substr(0, cut));
    EXPECT_THROW(read_sample_batch(t), std::runtime_error) << cut;
  }
  std::stringstream bad("AZEX" + bytes.substr(4));
  EXPECT_THROW(read_sample_batch(bad), std::runtime_error);
}

}  // namespace
}  // namespace azedu
