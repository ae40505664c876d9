#pragma once

// Central finite-difference check of the backpropagated gradients. The
// numeric side only ever evaluates the loss through forward().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bmf/net.hpp"

namespace bmf {

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;
// Denominator floor of the relative error; the loss-difference roundoff at
// step 1e-5 is ~1e-11 in absolute terms.
inline constexpr double kGradCheckFloor = 1e-6;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed() const { return max_rel_error < kGradCheckTolerance; }
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
}

/// Compares analytic gradients against central differences. With
/// `per_tensor` == 0 every parameter is checked; otherwise that many random
/// entries of each weight matrix and bias vector.
inline GradCheckReport gradient_check(const MlpModel& model, const TrainingSample& sample,
                                      std::size_t per_tensor = 0, std::uint64_t seed = 0,
                                      double step = kGradCheckStep) {
  const auto analytic = loss_and_grad(model, sample).gradients;
  MlpModel probe = model;
  std::mt19937_64 rng(seed);
  GradCheckReport report;

  auto loss_at = [&]() { return reconstruction_loss(forward(probe, sample.input).back(), sample.targets); };
  auto check = [&](std::vector<double>& params, const std::vector<double>& grads) {
    std::vector<std::size_t> idx;
    if (per_tensor == 0 || per_tensor >= params.size()) {
      idx.resize(params.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    } else {
      for (std::size_t i = 0; i < per_tensor; ++i) idx.push_back(detail::uniform_index(rng, params.size()));
    }
    for (auto i : idx) {
      const double saved = params[i];
      params[i] = saved + step;
      const double up = loss_at();
      params[i] = saved - step;
      const double down = loss_at();
      params[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      report.max_rel_error = std::max(report.max_rel_error, relative_error(grads[i], numeric));
      ++report.checked;
    }
  };
  for (std::size_t l = 0; l < probe.n_weight_layers(); ++l) {
    check(probe.weights[l], analytic.weights[l]);
    check(probe.biases[l], analytic.biases[l]);
  }
  return report;
}

/// Random network (Glorot weights, small random biases) and random sample
/// with 1..5 Gaussian targets, checked with gradient_check().
inline GradCheckReport random_gradient_check(const std::vector<std::size_t>& layers,
                                             std::uint64_t seed, std::size_t per_tensor = 0) {
  const auto bottleneck = *std::min_element(layers.begin() + 1, layers.end() - 1);
  auto model = init_mlp(layers, seed, bottleneck);
  std::mt19937_64 rng(seed ^ 0xA5A5A5A5ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& b : model.biases)
    for (auto& x : b) x = 0.2 * (detail::uniform_unit(rng) - 0.5);
  TrainingSample s;
  s.input.resize(layers.front());
  for (auto& x : s.input) x = gauss(rng);
  const auto n_targets = 1 + detail::uniform_index(rng, 5);
  for (std::size_t t = 0; t < n_targets; ++t) {
    std::vector<double> target(layers.back());
    for (auto& x : target) x = gauss(rng);
    s.targets.push_back(std::move(target));
  }
  return gradient_check(model, s, per_tensor, seed);
}

}  // namespace bmf
