#pragma once

// Context-reconstruction bottleneck MLP: each window is trained to predict
// windows at nearby offsets within its session. The bottleneck activation is
// the embedding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bmf/error.hpp"
#include "bmf/functionals.hpp"

namespace bmf {

inline constexpr std::size_t kBottleneckDim = 64;
inline constexpr int kContextRange = 6;
inline constexpr int kContextFrames = 5;

/// Default topology with five hidden layers.
inline const std::vector<std::size_t> kDefaultLayers{420, 300, 200, 64, 200, 300, 420};
/// Small topology with two hidden layers either side of the bottleneck.
inline const std::vector<std::size_t> kSmallLayers{420, 200, 64, 200, 420};

enum class Activation : std::uint8_t { kTanh = 0 };

struct MlpModel {
  std::vector<std::size_t> layer_sizes;
  // weights[l] maps layer l to layer l+1, shape (layer_sizes[l+1] x layer_sizes[l]) row-major.
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  Activation hidden_activation = Activation::kTanh;  // output layer is linear
  std::size_t bottleneck_index = 0;

  std::size_t n_weight_layers() const { return weights.size(); }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t embedding_dim() const { return layer_sizes[bottleneck_index]; }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }
};

/// Parameter-shaped buffer (gradients, optimizer moments).
struct MlpParams {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpParams zeros_like(const MlpModel& m) {
    MlpParams p;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      p.weights.emplace_back(m.weights[l].size(), 0.0);
      p.biases.emplace_back(m.biases[l].size(), 0.0);
    }
    return p;
  }
  void fill(double v) {
    for (auto& w : weights) std::fill(w.begin(), w.end(), v);
    for (auto& b : biases) std::fill(b.begin(), b.end(), v);
  }
};

struct TrainingSample {
  std::vector<double> input;
  std::vector<std::vector<double>> targets;
  std::string session_id;
  std::size_t k = 0;
  std::vector<int> offsets;
};

enum class Optimizer { kAdam, kSgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

namespace detail {

/// Unbiased integer in [0, n) from a 64-bit engine (portable across
/// standard libraries, unlike std::uniform_int_distribution).
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do x = rng();
  while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline void seeded_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace detail

/// One training sample per window k of every session: the window itself as
/// input and min(n_ctx, available) distinct windows at offsets in [-w, w]
/// excluding 0 as targets. Sessions with a single window are skipped.
inline std::vector<TrainingSample> build_dataset(
    std::span<const std::vector<FeatureWindow>> sessions, int w = kContextRange,
    int n_ctx = kContextFrames, std::uint64_t seed = 1) {
  if (w < 1) throw InputError("context range w must be >= 1");
  if (n_ctx < 1) throw InputError("context count must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<TrainingSample> out;
  std::vector<int> candidates;
  for (const auto& session : sessions) {
    const auto n = static_cast<int>(session.size());
    if (n < 2) continue;
    for (int k = 0; k < n; ++k) {
      candidates.clear();
      for (int o = -w; o <= w; ++o)
        if (o != 0 && k + o >= 0 && k + o < n) candidates.push_back(o);
      const auto take = std::min<std::size_t>(static_cast<std::size_t>(n_ctx), candidates.size());
      // Partial Fisher-Yates: the first `take` entries are a uniform draw.
      for (std::size_t i = 0; i < take; ++i) {
        const auto j = i + detail::uniform_index(rng, candidates.size() - i);
        std::swap(candidates[i], candidates[j]);
      }
      TrainingSample s;
      s.input = session[static_cast<std::size_t>(k)].vector;
      s.session_id = session[static_cast<std::size_t>(k)].session_id;
      s.k = static_cast<std::size_t>(k);
      s.offsets.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
      for (int o : s.offsets) s.targets.push_back(session[static_cast<std::size_t>(k + o)].vector);
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Glorot-uniform weights, zero biases. The bottleneck is the first hidden
/// layer of width `bottleneck_dim`.
inline MlpModel init_mlp(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed,
                         std::size_t bottleneck_dim = kBottleneckDim) {
  if (layer_sizes.size() < 3) throw InputError("network needs at least one hidden layer");
  if (layer_sizes.front() != layer_sizes.back())
    throw InputError("network input and output widths must match");
  for (auto s : layer_sizes)
    if (s == 0) throw InputError("layer widths must be positive");
  MlpModel m;
  m.layer_sizes = layer_sizes;
  auto it = std::find(layer_sizes.begin() + 1, layer_sizes.end() - 1, bottleneck_dim);
  if (it == layer_sizes.end() - 1)
    throw InputError("network has no hidden layer of width " + std::to_string(bottleneck_dim));
  m.bottleneck_index = static_cast<std::size_t>(it - layer_sizes.begin());

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const auto fan_in = layer_sizes[l], fan_out = layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (auto& x : w) x = (2.0 * detail::uniform_unit(rng) - 1.0) * limit;
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

inline void validate(const MlpModel& m) {
  if (m.layer_sizes.size() < 3 || m.weights.size() + 1 != m.layer_sizes.size() ||
      m.biases.size() != m.weights.size())
    throw InputError("model layer structure is inconsistent");
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    if (m.weights[l].size() != m.layer_sizes[l] * m.layer_sizes[l + 1] ||
        m.biases[l].size() != m.layer_sizes[l + 1])
      throw InputError("model parameter shapes do not match layer sizes");
  }
  if (m.bottleneck_index == 0 || m.bottleneck_index + 1 >= m.layer_sizes.size())
    throw InputError("model bottleneck must be a hidden layer");
}

namespace detail {

// out = tanh?(W a + b) for one layer.
inline void layer_forward(const MlpModel& m, std::size_t l, std::span<const double> in,
                          std::span<double> out) {
  const std::size_t n_in = m.layer_sizes[l], n_out = m.layer_sizes[l + 1];
  const double* w = m.weights[l].data();
  const bool hidden = l + 2 < m.layer_sizes.size();
  for (std::size_t i = 0; i < n_out; ++i) {
    const double* row = w + i * n_in;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= n_in; j += 4) {
      a0 += row[j] * in[j];
      a1 += row[j + 1] * in[j + 1];
      a2 += row[j + 2] * in[j + 2];
      a3 += row[j + 3] * in[j + 3];
    }
    for (; j < n_in; ++j) a0 += row[j] * in[j];
    const double z = (a0 + a1) + (a2 + a3) + m.biases[l][i];
    out[i] = hidden ? std::tanh(z) : z;
  }
}

}  // namespace detail

/// Activations of every layer; front() is the input, back() the output.
using Activations = std::vector<std::vector<double>>;

inline Activations forward(const MlpModel& m, std::span<const double> x) {
  if (x.size() != m.input_dim())
    throw InputError("input has " + std::to_string(x.size()) + " dims, model expects " +
                     std::to_string(m.input_dim()));
  Activations acts(m.layer_sizes.size());
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    acts[l + 1].resize(m.layer_sizes[l + 1]);
    detail::layer_forward(m, l, acts[l], acts[l + 1]);
  }
  return acts;
}

/// Mean over targets of the per-dimension mean squared error.
inline double reconstruction_loss(std::span<const double> output,
                                  const std::vector<std::vector<double>>& targets) {
  if (targets.empty()) throw InputError("sample has no targets");
  double total = 0.0;
  for (const auto& t : targets) {
    if (t.size() != output.size()) throw InputError("target dimension mismatch");
    double se = 0.0;
    for (std::size_t d = 0; d < t.size(); ++d) {
      const double e = output[d] - t[d];
      se += e * e;
    }
    total += se / static_cast<double>(t.size());
  }
  return total / static_cast<double>(targets.size());
}

/// Adds d(loss)/d(params) for one sample into `grads` and returns the loss.
inline double accumulate_gradients(const MlpModel& m, const TrainingSample& s, MlpParams& grads) {
  const auto acts = forward(m, s.input);
  const auto& y = acts.back();
  const double loss = reconstruction_loss(y, s.targets);

  // dL/dy = 2/(D T) * sum_t (y - t); output layer is linear.
  const auto dim = static_cast<double>(y.size());
  const auto n_t = static_cast<double>(s.targets.size());
  std::vector<double> delta(y.size(), 0.0);
  for (const auto& t : s.targets)
    for (std::size_t d = 0; d < y.size(); ++d) delta[d] += y[d] - t[d];
  for (auto& v : delta) v *= 2.0 / (dim * n_t);

  std::vector<double> prev;
  for (std::size_t l = m.n_weight_layers(); l-- > 0;) {
    const std::size_t n_in = m.layer_sizes[l], n_out = m.layer_sizes[l + 1];
    const auto& a = acts[l];
    double* gw = grads.weights[l].data();
    double* gb = grads.biases[l].data();
    const double* w = m.weights[l].data();
    for (std::size_t i = 0; i < n_out; ++i) {
      const double di = delta[i];
      gb[i] += di;
      double* grow = gw + i * n_in;
      for (std::size_t j = 0; j < n_in; ++j) grow[j] += di * a[j];
    }
    if (l == 0) break;
    prev.assign(n_in, 0.0);
    for (std::size_t i = 0; i < n_out; ++i) {
      const double di = delta[i];
      const double* row = w + i * n_in;
      for (std::size_t j = 0; j < n_in; ++j) prev[j] += di * row[j];
    }
    for (std::size_t j = 0; j < n_in; ++j) prev[j] *= 1.0 - a[j] * a[j];  // tanh'
    delta.swap(prev);
  }
  return loss;
}

struct LossAndGrad {
  double loss = 0.0;
  MlpParams gradients;
};

inline LossAndGrad loss_and_grad(const MlpModel& m, const TrainingSample& s) {
  LossAndGrad out{0.0, MlpParams::zeros_like(m)};
  out.loss = accumulate_gradients(m, s, out.gradients);
  return out;
}

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_history;  // mean sample loss per epoch
};

/// Mini-batch training with a seeded shuffle each epoch. Epoch loss is the
/// mean of per-sample losses evaluated before each batch's update.
inline TrainResult train(MlpModel model, std::span<const TrainingSample> dataset,
                         const TrainConfig& cfg) {
  if (dataset.empty()) throw InputError("training dataset is empty");
  if (cfg.batch_size == 0) throw InputError("batch size must be positive");
  if (!(cfg.learning_rate >= 0.0)) throw InputError("learning rate must be non-negative");
  validate(model);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto grads = MlpParams::zeros_like(model);
  auto m1 = MlpParams::zeros_like(model);
  auto m2 = MlpParams::zeros_like(model);
  std::uint64_t step = 0;

  auto apply = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& mo,
                   std::vector<double>& ve, double scale, double bc1, double bc2) {
    if (cfg.optimizer == Optimizer::kSgd) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg.learning_rate * g[i] * scale;
      return;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * scale;
      mo[i] = cfg.beta1 * mo[i] + (1.0 - cfg.beta1) * gi;
      ve[i] = cfg.beta2 * ve[i] + (1.0 - cfg.beta2) * gi * gi;
      p[i] -= cfg.learning_rate * (mo[i] / bc1) / (std::sqrt(ve[i] / bc2) + cfg.epsilon);
    }
  };

  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::seeded_shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grads.fill(0.0);
      for (std::size_t i = start; i < end; ++i)
        epoch_loss += accumulate_gradients(model, dataset[order[i]], grads);
      ++step;
      const double scale = 1.0 / static_cast<double>(end - start);
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t l = 0; l < model.n_weight_layers(); ++l) {
        apply(model.weights[l], grads.weights[l], m1.weights[l], m2.weights[l], scale, bc1, bc2);
        apply(model.biases[l], grads.biases[l], m1.biases[l], m2.biases[l], scale, bc1, bc2);
      }
    }
    epoch_loss /= static_cast<double>(dataset.size());
    if (!std::isfinite(epoch_loss))
      throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1));
    result.loss_history.push_back(epoch_loss);
  }
  result.model = std::move(model);
  return result;
}

/// Post-activation output of the bottleneck layer.
inline std::vector<double> embed(const MlpModel& m, std::span<const double> x) {
  if (x.size() != m.input_dim())
    throw InputError("input has " + std::to_string(x.size()) + " dims, model expects " +
                     std::to_string(m.input_dim()));
  std::vector<double> cur(x.begin(), x.end()), next;
  for (std::size_t l = 0; l < m.bottleneck_index; ++l) {
    next.resize(m.layer_sizes[l + 1]);
    detail::layer_forward(m, l, cur, next);
    cur.swap(next);
  }
  return cur;
}

}  // namespace bmf
