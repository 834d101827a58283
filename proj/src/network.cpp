#include "azedu/network.hpp"

#include <Eigen/Core>

#include <cmath>
#include <random>

namespace azedu {

void NetworkConfig::validate() const {
  if (board_x <= 0 || board_y <= 0 || trunk_channels <= 0 || trunk_blocks < 0 ||
      policy_channels <= 0 || value_channels <= 0 || value_hidden <= 0) {
    throw std::invalid_argument("network config: sizes must be positive");
  }
  if (input_planes != kInputPlanes) {
    throw std::invalid_argument("network config: input_planes must be " +
                                std::to_string(kInputPlanes));
  }
}

std::vector<ParamSpec> parameter_layout(const NetworkConfig& c) {
  c.validate();
  using u32 = std::uint32_t;
  const u32 ch = c.trunk_channels;
  const u32 cells = c.cells();
  std::vector<ParamSpec> specs;
  auto conv = [&](const std::string& name, u32 out, u32 in, u32 k) {
    specs.push_back({name + ".weight", {out, in, k, k}, static_cast<int>(in * k * k), false});
    specs.push_back({name + ".bias", {out}, 0, true});
  };
  auto dense = [&](const std::string& name, u32 out, u32 in) {
    specs.push_back({name + ".weight", {out, in}, static_cast<int>(in), false});
    specs.push_back({name + ".bias", {out}, 0, true});
  };
  conv("input.conv", ch, c.input_planes, 3);
  for (int b = 0; b < c.trunk_blocks; ++b) {
    conv("block" + std::to_string(b) + ".conv1", ch, ch, 3);
    conv("block" + std::to_string(b) + ".conv2", ch, ch, 3);
  }
  conv("policy.conv", c.policy_channels, ch, 1);
  dense("policy.fc", cells, c.policy_channels * cells);
  conv("value.conv", c.value_channels, ch, 1);
  dense("value.fc1", c.value_hidden, c.value_channels * cells);
  dense("value.fc2", 1, c.value_hidden);
  return specs;
}

Weights init_network(const NetworkConfig& config) {
  Weights w;
  w.config = config;
  std::mt19937_64 rng(config.seed);
  for (const ParamSpec& spec : parameter_layout(config)) {
    std::size_t n = 1;
    for (auto d : spec.shape) n *= d;
    ParamArray<float> a{spec.name, spec.shape, std::vector<float>(n, 0.0f)};
    if (!spec.is_bias) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / spec.fan_in));
      for (float& v : a.values) v = static_cast<float>(normal(rng));
    }
    w.arrays.push_back(std::move(a));
  }
  return w;
}

template <typename T>
void check_shapes(const ParamSet<T>& params) {
  const auto specs = parameter_layout(params.config);
  if (specs.size() != params.arrays.size()) {
    throw ShapeMismatch("expected " + std::to_string(specs.size()) +
                        " parameter arrays, found " +
                        std::to_string(params.arrays.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& a = params.arrays[i];
    std::size_t n = 1;
    for (auto d : a.shape) n *= d;
    if (a.name != specs[i].name || a.shape != specs[i].shape || a.values.size() != n) {
      throw ShapeMismatch("layer " + specs[i].name + ": shape differs from config");
    }
  }
}

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

struct Geometry {
  int batch;
  int width;
  int height;
  int hw() const { return width * height; }
  int columns() const { return batch * hw(); }
};

// Order matches parameter_layout().
struct Slots {
  explicit Slots(int blocks)
      : policy_conv(2 + 4 * blocks),
        policy_fc(policy_conv + 2),
        value_conv(policy_fc + 2),
        value_fc1(value_conv + 2),
        value_fc2(value_fc1 + 2) {}
  static constexpr int input = 0;
  static int conv1(int b) { return 2 + 4 * b; }
  static int conv2(int b) { return 4 + 4 * b; }
  int policy_conv, policy_fc, value_conv, value_fc1, value_fc2;
};

// Activations are (channels, batch*cells), row-major so each channel is contiguous.
template <typename T>
void im2col3x3(const Mat<T>& in, const Geometry& g, Mat<T>& cols) {
  const int channels = static_cast<int>(in.rows());
  const int hw = g.hw();
  cols.setZero(channels * 9, g.columns());
  for (int c = 0; c < channels; ++c) {
    const T* src = in.data() + static_cast<std::ptrdiff_t>(c) * in.cols();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = cols.data() + static_cast<std::ptrdiff_t>(c * 9 + ky * 3 + kx) * cols.cols();
        for (int b = 0; b < g.batch; ++b) {
          for (int y = 0; y < g.height; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= g.height) continue;
            for (int x = 0; x < g.width; ++x) {
              const int sx = x + kx - 1;
              if (sx < 0 || sx >= g.width) continue;
              dst[b * hw + y * g.width + x] = src[b * hw + sy * g.width + sx];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im3x3(const Mat<T>& cols, const Geometry& g, Mat<T>& out) {
  const int channels = static_cast<int>(cols.rows() / 9);
  const int hw = g.hw();
  out.setZero(channels, g.columns());
  for (int c = 0; c < channels; ++c) {
    T* dst = out.data() + static_cast<std::ptrdiff_t>(c) * out.cols();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src =
            cols.data() + static_cast<std::ptrdiff_t>(c * 9 + ky * 3 + kx) * cols.cols();
        for (int b = 0; b < g.batch; ++b) {
          for (int y = 0; y < g.height; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= g.height) continue;
            for (int x = 0; x < g.width; ++x) {
              const int sx = x + kx - 1;
              if (sx < 0 || sx >= g.width) continue;
              dst[b * hw + sy * g.width + sx] += src[b * hw + y * g.width + x];
            }
          }
        }
      }
    }
  }
}

template <typename T>
ConstMatMap<T> as_matrix(const ParamArray<T>& a) {
  const Eigen::Index rows = a.shape[0];
  const Eigen::Index cols = static_cast<Eigen::Index>(a.values.size()) / rows;
  return ConstMatMap<T>(a.values.data(), rows, cols);
}

template <typename T>
MatMap<T> as_matrix(ParamArray<T>& a) {
  const Eigen::Index rows = a.shape[0];
  const Eigen::Index cols = static_cast<Eigen::Index>(a.values.size()) / rows;
  return MatMap<T>(a.values.data(), rows, cols);
}

template <typename T>
ConstVecMap<T> as_vector(const ParamArray<T>& a) {
  return ConstVecMap<T>(a.values.data(), static_cast<Eigen::Index>(a.values.size()));
}

template <typename T>
VecMap<T> as_vector(ParamArray<T>& a) {
  return VecMap<T>(a.values.data(), static_cast<Eigen::Index>(a.values.size()));
}

// (channels, batch*cells) -> (channels*cells, batch), matching a per-sample flatten.
template <typename T>
Mat<T> flatten(const Mat<T>& a, const Geometry& g) {
  const int hw = g.hw();
  Mat<T> out(a.rows() * hw, g.batch);
  for (Eigen::Index c = 0; c < a.rows(); ++c) {
    for (int b = 0; b < g.batch; ++b) {
      for (int s = 0; s < hw; ++s) out(c * hw + s, b) = a(c, b * hw + s);
    }
  }
  return out;
}

template <typename T>
Mat<T> unflatten(const Mat<T>& x, const Geometry& g) {
  const int hw = g.hw();
  const Eigen::Index channels = x.rows() / hw;
  Mat<T> out(channels, g.columns());
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (int b = 0; b < g.batch; ++b) {
      for (int s = 0; s < hw; ++s) out(c, b * hw + s) = x(c * hw + s, b);
    }
  }
  return out;
}

template <typename T>
void relu(Mat<T>& m) {
  m = m.cwiseMax(T(0));
}

// Zero the gradient where the forward ReLU output was zero.
template <typename T>
void relu_backward(Mat<T>& grad, const Mat<T>& out) {
  grad = (out.array() > T(0)).select(grad, T(0));
}

template <typename T>
struct Activations {
  Geometry geometry{};
  Mat<T> input;
  std::vector<Mat<T>> trunk;  // trunk[0]: after input conv; trunk[b+1]: after block b
  std::vector<Mat<T>> mid;    // relu(conv1) inside block b
  Mat<T> policy_conv, value_conv;
  Mat<T> policy_flat, value_flat;
  Mat<T> probs;   // (cells, batch)
  Mat<T> hidden;  // (value_hidden, batch)
  Mat<T> value;   // (1, batch)
};

template <typename T>
Mat<T> conv3x3(const Mat<T>& in, const ParamArray<T>& w, const ParamArray<T>& b,
               const Geometry& g, Mat<T>& cols) {
  im2col3x3(in, g, cols);
  Mat<T> out = as_matrix(w) * cols;
  out.colwise() += as_vector(b);
  return out;
}

template <typename T>
Mat<T> conv1x1(const Mat<T>& in, const ParamArray<T>& w, const ParamArray<T>& b) {
  Mat<T> out = as_matrix(w) * in;
  out.colwise() += as_vector(b);
  return out;
}

template <typename T>
Activations<T> run_forward(const ParamSet<T>& p, std::span<const StateTensor> batch) {
  const NetworkConfig& cfg = p.config;
  if (p.arrays.size() != parameter_layout(cfg).size()) {
    throw ShapeMismatch("parameter set does not match its config");
  }
  Activations<T> act;
  Geometry& g = act.geometry;
  g = {static_cast<int>(batch.size()), cfg.board_x, cfg.board_y};
  const int hw = g.hw();

  act.input.resize(cfg.input_planes, g.columns());
  for (int b = 0; b < g.batch; ++b) {
    const StateTensor& t = batch[b];
    if (t.board_x != cfg.board_x || t.board_y != cfg.board_y ||
        t.data.size() != static_cast<std::size_t>(cfg.input_planes) * hw) {
      throw ShapeMismatch("state tensor " + std::to_string(b) +
                          " does not match network board size");
    }
    for (int c = 0; c < cfg.input_planes; ++c) {
      for (int s = 0; s < hw; ++s) act.input(c, b * hw + s) = static_cast<T>(t.data[c * hw + s]);
    }
  }

  const Slots slot(cfg.trunk_blocks);
  const auto& a = p.arrays;
  Mat<T> cols;
  act.trunk.push_back(conv3x3(act.input, a[Slots::input], a[Slots::input + 1], g, cols));
  relu(act.trunk.back());
  for (int blk = 0; blk < cfg.trunk_blocks; ++blk) {
    const int c1 = Slots::conv1(blk), c2 = Slots::conv2(blk);
    Mat<T> h = conv3x3(act.trunk.back(), a[c1], a[c1 + 1], g, cols);
    relu(h);
    Mat<T> out = conv3x3(h, a[c2], a[c2 + 1], g, cols);
    out += act.trunk.back();
    relu(out);
    act.mid.push_back(std::move(h));
    act.trunk.push_back(std::move(out));
  }
  const Mat<T>& features = act.trunk.back();

  act.policy_conv = conv1x1(features, a[slot.policy_conv], a[slot.policy_conv + 1]);
  relu(act.policy_conv);
  act.policy_flat = flatten(act.policy_conv, g);
  Mat<T> logits = as_matrix(a[slot.policy_fc]) * act.policy_flat;
  logits.colwise() += as_vector(a[slot.policy_fc + 1]);
  act.probs.resize(hw, g.batch);
  for (int b = 0; b < g.batch; ++b) {
    const T m = logits.col(b).maxCoeff();
    T sum = 0;
    for (int s = 0; s < hw; ++s) {
      const T e = std::exp(logits(s, b) - m);
      act.probs(s, b) = e;
      sum += e;
    }
    act.probs.col(b) /= sum;
  }

  act.value_conv = conv1x1(features, a[slot.value_conv], a[slot.value_conv + 1]);
  relu(act.value_conv);
  act.value_flat = flatten(act.value_conv, g);
  act.hidden = as_matrix(a[slot.value_fc1]) * act.value_flat;
  act.hidden.colwise() += as_vector(a[slot.value_fc1 + 1]);
  relu(act.hidden);
  act.value = as_matrix(a[slot.value_fc2]) * act.hidden;
  act.value.array() += a[slot.value_fc2 + 1].values[0];
  act.value = act.value.array().tanh().matrix();
  return act;
}

template <typename T>
std::vector<StateTensor> states_of(std::span<const TrainingSample> batch) {
  std::vector<StateTensor> states;
  states.reserve(batch.size());
  for (const auto& s : batch) states.push_back(s.state);
  return states;
}

template <typename T>
LossReport report_loss(const Activations<T>& act, std::span<const TrainingSample> batch) {
  const int hw = act.geometry.hw();
  double policy = 0.0, value = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& target = batch[b].policy_target.probs;
    if (target.size() != static_cast<std::size_t>(hw)) {
      throw ShapeMismatch("policy target size does not match network board size");
    }
    double ce = 0.0;
    for (int s = 0; s < hw; ++s) {
      if (target[s] != 0.0) {
        ce -= target[s] * std::log(static_cast<double>(act.probs(s, b)) + kLogEpsilon);
      }
    }
    policy += ce;
    const double d = static_cast<double>(act.value(0, b)) - batch[b].z;
    value += d * d;
  }
  const double n = static_cast<double>(batch.size());
  LossReport r;
  r.policy_loss = policy / n;
  r.value_loss = value / n;
  r.total_loss = r.policy_loss + r.value_loss;
  return r;
}

}  // namespace

template <typename T>
Prediction forward(const ParamSet<T>& params, std::span<const StateTensor> batch) {
  Prediction out;
  if (batch.empty()) return out;
  const Activations<T> act = run_forward(params, batch);
  const int hw = act.geometry.hw();
  out.policy.resize(batch.size());
  out.value.resize(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto& probs = out.policy[b].probs;
    probs.resize(hw);
    for (int s = 0; s < hw; ++s) probs[s] = static_cast<double>(act.probs(s, b));
    out.value[b] = static_cast<double>(act.value(0, b));
  }
  return out;
}

template <typename T>
LossReport loss(const ParamSet<T>& params, std::span<const TrainingSample> batch) {
  if (batch.empty()) throw std::invalid_argument("loss of an empty batch");
  const auto states = states_of<T>(batch);
  return report_loss(run_forward(params, std::span<const StateTensor>(states)), batch);
}

template <typename T>
LossReport loss_and_gradients(const ParamSet<T>& params,
                              std::span<const TrainingSample> batch,
                              ParamSet<T>& grad) {
  if (batch.empty()) throw std::invalid_argument("loss of an empty batch");
  const auto states = states_of<T>(batch);
  const Activations<T> act = run_forward(params, std::span<const StateTensor>(states));
  const LossReport report = report_loss(act, batch);

  grad = params.zeros_like();
  const NetworkConfig& cfg = params.config;
  const Geometry& g = act.geometry;
  const int hw = g.hw();
  const T inv_n = T(1) / static_cast<T>(batch.size());
  const Slots slot(cfg.trunk_blocks);
  const auto& a = params.arrays;
  auto& ga = grad.arrays;

  // Policy head. d/dlogit_j = p_j (g_j - sum_a p_a g_a) with g_a = -pi_a / (p_a + eps) / n.
  Mat<T> dlogits(hw, g.batch);
  for (int b = 0; b < g.batch; ++b) {
    const auto& target = batch[b].policy_target.probs;
    T dot = 0;
    for (int s = 0; s < hw; ++s) {
      const T gs = -static_cast<T>(target[s]) / (act.probs(s, b) + static_cast<T>(kLogEpsilon)) * inv_n;
      dlogits(s, b) = gs;
      dot += act.probs(s, b) * gs;
    }
    for (int s = 0; s < hw; ++s) dlogits(s, b) = act.probs(s, b) * (dlogits(s, b) - dot);
  }
  as_matrix(ga[slot.policy_fc]) = dlogits * act.policy_flat.transpose();
  as_vector(ga[slot.policy_fc + 1]) = dlogits.rowwise().sum();
  Mat<T> dpolicy_conv = unflatten<T>(as_matrix(a[slot.policy_fc]).transpose() * dlogits, g);
  relu_backward(dpolicy_conv, act.policy_conv);

  const Mat<T>& features = act.trunk.back();
  as_matrix(ga[slot.policy_conv]) = dpolicy_conv * features.transpose();
  as_vector(ga[slot.policy_conv + 1]) = dpolicy_conv.rowwise().sum();
  Mat<T> dtrunk = as_matrix(a[slot.policy_conv]).transpose() * dpolicy_conv;

  // Value head.
  Mat<T> dpre(1, g.batch);
  for (int b = 0; b < g.batch; ++b) {
    const T v = act.value(0, b);
    dpre(0, b) = T(2) * (v - static_cast<T>(batch[b].z)) * inv_n * (T(1) - v * v);
  }
  as_matrix(ga[slot.value_fc2]) = dpre * act.hidden.transpose();
  ga[slot.value_fc2 + 1].values[0] = dpre.sum();
  Mat<T> dhidden = as_matrix(a[slot.value_fc2]).transpose() * dpre;
  relu_backward(dhidden, act.hidden);
  as_matrix(ga[slot.value_fc1]) = dhidden * act.value_flat.transpose();
  as_vector(ga[slot.value_fc1 + 1]) = dhidden.rowwise().sum();
  Mat<T> dvalue_conv = unflatten<T>(as_matrix(a[slot.value_fc1]).transpose() * dhidden, g);
  relu_backward(dvalue_conv, act.value_conv);
  as_matrix(ga[slot.value_conv]) = dvalue_conv * features.transpose();
  as_vector(ga[slot.value_conv + 1]) = dvalue_conv.rowwise().sum();
  dtrunk += as_matrix(a[slot.value_conv]).transpose() * dvalue_conv;

  // Residual trunk, last block first.
  Mat<T> cols, dcols, dinput;
  for (int blk = cfg.trunk_blocks - 1; blk >= 0; --blk) {
    const int c1 = Slots::conv1(blk), c2 = Slots::conv2(blk);
    relu_backward(dtrunk, act.trunk[blk + 1]);

    im2col3x3(act.mid[blk], g, cols);
    as_matrix(ga[c2]) = dtrunk * cols.transpose();
    as_vector(ga[c2 + 1]) = dtrunk.rowwise().sum();
    dcols = as_matrix(a[c2]).transpose() * dtrunk;
    Mat<T> dmid;
    col2im3x3(dcols, g, dmid);
    relu_backward(dmid, act.mid[blk]);

    im2col3x3(act.trunk[blk], g, cols);
    as_matrix(ga[c1]) = dmid * cols.transpose();
    as_vector(ga[c1 + 1]) = dmid.rowwise().sum();
    dcols = as_matrix(a[c1]).transpose() * dmid;
    col2im3x3(dcols, g, dinput);
    dtrunk += dinput;  // skip connection
  }

  relu_backward(dtrunk, act.trunk[0]);
  im2col3x3(act.input, g, cols);
  as_matrix(ga[Slots::input]) = dtrunk * cols.transpose();
  as_vector(ga[Slots::input + 1]) = dtrunk.rowwise().sum();
  return report;
}

LossReport SgdOptimizer::step(Weights& weights, std::span<const TrainingSample> batch,
                              double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument("learning rate must be finite and nonnegative");
  }
  Weights grad;
  LossReport report = loss_and_gradients(weights, batch, grad);
  for (const auto& g : grad.arrays) {
    for (float v : g.values) {
      if (!std::isfinite(v)) throw NonFiniteGradient("non-finite gradient in " + g.name);
    }
  }
  if (!std::isfinite(report.total_loss)) throw NonFiniteGradient("non-finite loss");

  if (velocity_.arrays.size() != weights.arrays.size() || !(velocity_.config == weights.config)) {
    velocity_ = weights.zeros_like();
  }
  const float mu = static_cast<float>(config_.momentum);
  const float flr = static_cast<float>(lr);
  double penalty = 0.0;
  for (std::size_t i = 0; i < weights.arrays.size(); ++i) {
    auto& w = weights.arrays[i].values;
    auto& v = velocity_.arrays[i].values;
    const auto& g = grad.arrays[i].values;
    const bool decay = weights.arrays[i].shape.size() > 1;
    const float wd = decay ? static_cast<float>(config_.weight_decay) : 0.0f;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (decay) penalty += static_cast<double>(w[k]) * w[k];
      v[k] = mu * v[k] + (g[k] + wd * w[k]);
      w[k] -= flr * v[k];
    }
  }
  report.weight_penalty = 0.5 * config_.weight_decay * penalty;
  return report;
}

std::pair<Weights, LossReport> backward_and_step(const Weights& weights,
                                                 SgdOptimizer& optimizer,
                                                 std::span<const TrainingSample> batch,
                                                 double lr) {
  Weights next = weights;
  LossReport report = optimizer.step(next, batch, lr);
  return {std::move(next), report};
}

template void check_shapes(const ParamSet<float>&);
template void check_shapes(const ParamSet<double>&);
template Prediction forward(const ParamSet<float>&, std::span<const StateTensor>);
template Prediction forward(const ParamSet<double>&, std::span<const StateTensor>);
template LossReport loss(const ParamSet<float>&, std::span<const TrainingSample>);
template LossReport loss(const ParamSet<double>&, std::span<const TrainingSample>);
template LossReport loss_and_gradients(const ParamSet<float>&, std::span<const TrainingSample>,
                                       ParamSet<float>&);
template LossReport loss_and_gradients(const ParamSet<double>&, std::span<const TrainingSample>,
                                       ParamSet<double>&);

}  // namespace azedu
