#pragma once

// Windowed statistical functionals over LLD contours, and z-score
// standardization of the resulting vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bmf/error.hpp"
#include "bmf/lld.hpp"

namespace bmf {

inline constexpr std::size_t kNumFunctionals = 6;
inline constexpr std::size_t kFeatureDim = kLldDim * kNumFunctionals;  // 420
inline constexpr double kFramesPerSecond = 100.0;
inline constexpr double kStdFloor = 1e-8;

/// Offsets of the six functionals inside each 6-wide LLD block.
enum Functional : std::size_t { kMin1 = 0, kMax99, kRange, kMean, kMedian, kStd };

struct FeatureWindow {
  std::vector<double> vector;
  std::string session_id;
  std::string group_id;
  double start_time_s = 0.0;
  double window_len_s = 0.0;
};

struct SessionMeta {
  std::string session_id;
  std::string group_id;
};

/// Percentile of an ascending-sorted array by linear interpolation at rank
/// (p/100)(n-1).
inline double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("percentile of an empty array");
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw InputError("percentile of an empty array");
  if (!(p >= 0.0 && p <= 100.0)) throw InputError("percentile p must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return percentile_sorted(sorted, p);
}

struct WindowingResult {
  std::vector<FeatureWindow> windows;
  bool too_short = false;  // session shorter than one window
};

inline std::size_t window_count(std::size_t n_frames, std::size_t window_frames,
                                std::size_t shift_frames) {
  return n_frames < window_frames ? 0 : (n_frames - window_frames) / shift_frames + 1;
}

/// Slides a window_s window with shift_s hop over the LLD sequence and emits,
/// for each LLD in layout order, [min1, max99, range, mean, median, std].
inline WindowingResult window_functionals(std::span<const LldFrame> llds, double window_s,
                                          double shift_s, const SessionMeta& meta) {
  if (!(window_s > 0.0 && shift_s > 0.0)) throw InputError("window and shift must be positive");
  const auto win = static_cast<std::size_t>(std::lround(window_s * kFramesPerSecond));
  const auto hop = static_cast<std::size_t>(std::lround(shift_s * kFramesPerSecond));
  if (win == 0 || hop == 0) throw InputError("window or shift shorter than one LLD frame");

  WindowingResult result;
  const auto count = window_count(llds.size(), win, hop);
  if (count == 0) {
    result.too_short = true;
    return result;
  }
  result.windows.reserve(count);
  std::vector<double> col(win);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * hop;
    FeatureWindow fw;
    fw.vector.resize(kFeatureDim);
    fw.session_id = meta.session_id;
    fw.group_id = meta.group_id;
    fw.start_time_s = llds[start].frame_time_s;
    fw.window_len_s = window_s;
    for (std::size_t d = 0; d < kLldDim; ++d) {
      double sum = 0.0;
      for (std::size_t i = 0; i < win; ++i) {
        col[i] = llds[start + i].values[d];
        sum += col[i];
      }
      const double mean = sum / static_cast<double>(win);
      double ss = 0.0;
      for (double x : col) ss += (x - mean) * (x - mean);
      std::sort(col.begin(), col.end());
      double* block = fw.vector.data() + d * kNumFunctionals;
      block[kMin1] = percentile_sorted(col, 1.0);
      block[kMax99] = percentile_sorted(col, 99.0);
      block[kRange] = block[kMax99] - block[kMin1];
      block[kMean] = mean;
      block[kMedian] = percentile_sorted(col, 50.0);
      block[kStd] = std::sqrt(ss / static_cast<double>(win));
    }
    result.windows.push_back(std::move(fw));
  }
  return result;
}

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> std;  // floored at kStdFloor
};

inline FeatureStats fit_stats(std::span<const FeatureWindow> windows) {
  if (windows.empty()) throw InputError("cannot fit normalization stats on zero windows");
  const std::size_t dim = windows.front().vector.size();
  const auto n = static_cast<double>(windows.size());
  FeatureStats s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (const auto& w : windows) {
    if (w.vector.size() != dim) throw InputError("inconsistent feature dimensions");
    for (std::size_t d = 0; d < dim; ++d) s.mean[d] += w.vector[d];
  }
  for (auto& m : s.mean) m /= n;
  // Second pass corrects the rounding of the first, so a constant column
  // has a mean equal to its value.
  std::vector<double> corr(dim, 0.0);
  for (const auto& w : windows)
    for (std::size_t d = 0; d < dim; ++d) corr[d] += w.vector[d] - s.mean[d];
  for (std::size_t d = 0; d < dim; ++d) s.mean[d] += corr[d] / n;
  for (const auto& w : windows)
    for (std::size_t d = 0; d < dim; ++d) {
      const double e = w.vector[d] - s.mean[d];
      s.std[d] += e * e;
    }
  for (auto& v : s.std) v = std::max(std::sqrt(v / n), kStdFloor);
  return s;
}

inline void check_dims(const FeatureWindow& w, const FeatureStats& s) {
  if (w.vector.size() != s.mean.size())
    throw InputError("feature dimension " + std::to_string(w.vector.size()) +
                     " does not match normalization stats (" + std::to_string(s.mean.size()) + ")");
}

inline std::vector<FeatureWindow> standardize(std::vector<FeatureWindow> windows,
                                              const FeatureStats& s) {
  for (auto& w : windows) {
    check_dims(w, s);
    for (std::size_t d = 0; d < w.vector.size(); ++d)
      w.vector[d] = (w.vector[d] - s.mean[d]) / s.std[d];
  }
  return windows;
}

inline std::vector<FeatureWindow> destandardize(std::vector<FeatureWindow> windows,
                                                const FeatureStats& s) {
  for (auto& w : windows) {
    check_dims(w, s);
    for (std::size_t d = 0; d < w.vector.size(); ++d)
      w.vector[d] = w.vector[d] * s.std[d] + s.mean[d];
  }
  return windows;
}

}  // namespace bmf
