#pragma once

// Frame-level low-level descriptors (LLDs): 70 values per 10 ms frame.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "bmf/corpus.hpp"
#include "bmf/error.hpp"

namespace bmf {

namespace lld_layout {
inline constexpr std::size_t kMfcc = 0;        // 13
inline constexpr std::size_t kDeltaMfcc = 13;  // 13
inline constexpr std::size_t kMfb = 26;        // 10
inline constexpr std::size_t kDeltaMfb = 36;   // 10
inline constexpr std::size_t kLpc = 46;        // 8
inline constexpr std::size_t kDeltaLpc = 54;   // 8
inline constexpr std::size_t kPitch = 62;
inline constexpr std::size_t kDeltaPitch = 63;
inline constexpr std::size_t kIntensity = 64;
inline constexpr std::size_t kDeltaIntensity = 65;
inline constexpr std::size_t kJitter = 66;
inline constexpr std::size_t kDeltaJitter = 67;
inline constexpr std::size_t kShimmer = 68;
inline constexpr std::size_t kDeltaShimmer = 69;

inline constexpr std::size_t kNumMfcc = 13;
inline constexpr std::size_t kNumMfb = 10;
inline constexpr std::size_t kLpcOrder = 8;
inline constexpr std::size_t kMfccFilters = 26;
}  // namespace lld_layout

inline constexpr std::size_t kLldDim = 70;
inline constexpr double kFrameMs = 25.0;
inline constexpr double kHopMs = 10.0;
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kPitchMinHz = 75.0;
inline constexpr double kPitchMaxHz = 500.0;
inline constexpr double kVoicingThreshold = 0.3;

struct LldFrame {
  std::array<double, kLldDim> values{};
  double frame_time_s = 0.0;
};

struct FrameGeometry {
  std::size_t length = 0;
  std::size_t hop = 0;
};

inline FrameGeometry frame_geometry(int sample_rate_hz, double frame_ms, double hop_ms) {
  if (!(hop_ms > 0.0 && frame_ms > hop_ms))
    throw InputError("framing requires frame_ms > hop_ms > 0");
  FrameGeometry g;
  g.length = static_cast<std::size_t>(std::lround(sample_rate_hz * frame_ms / 1000.0));
  g.hop = static_cast<std::size_t>(std::lround(sample_rate_hz * hop_ms / 1000.0));
  if (g.hop == 0 || g.length <= g.hop) throw InputError("frame geometry degenerates at this rate");
  return g;
}

inline std::size_t frame_count(std::size_t n_samples, FrameGeometry g) {
  return n_samples < g.length ? 0 : (n_samples - g.length) / g.hop + 1;
}

/// w[n] = 0.54 - 0.46 cos(2 pi n / (N - 1))
inline std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  return w;
}

/// Hamming-windowed frames; frame i covers samples [i*hop, i*hop + len).
/// The trailing partial frame is dropped.
inline std::vector<std::vector<double>> frame_signal(const AudioSignal& signal,
                                                     double frame_ms = kFrameMs,
                                                     double hop_ms = kHopMs) {
  const auto g = frame_geometry(signal.sample_rate_hz, frame_ms, hop_ms);
  const auto n = frame_count(signal.samples.size(), g);
  if (n == 0)
    throw InputError("signal of " + std::to_string(signal.samples.size()) +
                     " samples is shorter than one frame (" + std::to_string(g.length) + ")");
  const auto w = hamming_window(g.length);
  std::vector<std::vector<double>> frames(n, std::vector<double>(g.length));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < g.length; ++j) frames[i][j] = signal.samples[i * g.hop + j] * w[j];
  return frames;
}

/// 10 log10(mean(x^2) + 1e-10)
inline double intensity_db(std::span<const double> frame) {
  if (frame.empty()) return 10.0 * std::log10(kLogFloor);
  double ss = 0.0;
  for (double x : frame) ss += x * x;
  return 10.0 * std::log10(ss / static_cast<double>(frame.size()) + kLogFloor);
}

/// Raw (biased) autocorrelation r(0..max_lag).
inline std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  std::vector<double> r(max_lag + 1, 0.0);
  const std::size_t n = x.size();
  for (std::size_t lag = 0; lag <= max_lag && lag < n; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += x[i] * x[i + lag];
    r[lag] = acc;
  }
  return r;
}

/// Fundamental frequency from the normalized autocorrelation peak over lags
/// for 75-500 Hz. Returns 0 for unvoiced frames (peak below 0.3 or no energy).
inline double pitch_acf(std::span<const double> frame, int sample_rate_hz) {
  const std::size_t n = frame.size();
  if (n < 3) return 0.0;
  const auto min_lag = static_cast<std::size_t>(std::ceil(sample_rate_hz / kPitchMaxHz));
  const auto max_lag = std::min(static_cast<std::size_t>(std::floor(sample_rate_hz / kPitchMinHz)),
                                n - 2);
  if (min_lag > max_lag) return 0.0;
  const auto r = autocorrelation(frame, max_lag + 1);
  if (!(r[0] > 1e-12)) return 0.0;

  std::size_t best = min_lag;
  for (std::size_t lag = min_lag + 1; lag <= max_lag; ++lag)
    if (r[lag] > r[best]) best = lag;
  if (r[best] / r[0] < kVoicingThreshold) return 0.0;

  double lag = static_cast<double>(best);
  const double a = r[best - 1], b = r[best], c = r[best + 1];
  const double denom = a - 2.0 * b + c;
  if (denom < 0.0) {
    const double shift = 0.5 * (a - c) / denom;
    if (std::abs(shift) <= 1.0) lag += shift;
  }
  return std::clamp(sample_rate_hz / lag, kPitchMinHz, kPitchMaxHz);
}

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace detail

/// Radix-2 FFT with a precomputed twiddle table.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n), twiddles_(n / 2) {
    if (n == 0 || (n & (n - 1)) != 0) throw InputError("FFT length must be a power of two");
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddles_[k] = {std::cos(ang), std::sin(ang)};
    }
  }

  std::size_t size() const { return n_; }

  void transform(std::vector<std::complex<double>>& x) const {
    for (std::size_t i = 1, j = 0; i < n_; ++i) {
      std::size_t bit = n_ >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t stride = n_ / len;
      for (std::size_t i = 0; i < n_; i += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          const auto u = x[i + k];
          const auto& t = twiddles_[k * stride];
          const auto& y = x[i + k + len / 2];
          const std::complex<double> v(y.real() * t.real() - y.imag() * t.imag(),
                                       y.real() * t.imag() + y.imag() * t.real());
          x[i + k] = u + v;
          x[i + k + len / 2] = u - v;
        }
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddles_;
};

/// Transform length used for a frame: 512, or the next power of two when a
/// frame is longer than that.
inline std::size_t fft_length(std::size_t frame_len) {
  return std::max<std::size_t>(512, detail::next_pow2(frame_len));
}

/// |X_k|^2 for k = 0..fft_len/2 of the zero-padded frame.
inline std::vector<double> power_spectrum(std::span<const double> frame, const FftPlan& plan) {
  const std::size_t fft_len = plan.size();
  std::vector<std::complex<double>> buf(fft_len);
  for (std::size_t i = 0; i < frame.size() && i < fft_len; ++i) buf[i] = frame[i];
  plan.transform(buf);
  std::vector<double> p(fft_len / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(buf[k]);
  return p;
}

inline std::vector<double> power_spectrum(std::span<const double> frame, std::size_t fft_len) {
  return power_spectrum(frame, FftPlan(fft_len));
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular filters equally spaced on the mel scale between 0 and rate/2,
/// evaluated at the FFT bin frequencies. Stored sparsely.
class MelFilterbank {
 public:
  MelFilterbank(int sample_rate_hz, std::size_t n_filters, std::size_t fft_len) {
    if (n_filters < 1) throw InputError("mel filterbank needs at least one filter");
    const double mel_max = hz_to_mel(sample_rate_hz / 2.0);
    std::vector<double> edges(n_filters + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
      edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_filters + 1));
    const std::size_t n_bins = fft_len / 2 + 1;
    const double bin_hz = static_cast<double>(sample_rate_hz) / static_cast<double>(fft_len);
    filters_.resize(n_filters);
    for (std::size_t j = 0; j < n_filters; ++j) {
      const double lo = edges[j], mid = edges[j + 1], hi = edges[j + 2];
      auto& f = filters_[j];
      for (std::size_t k = 0; k < n_bins; ++k) {
        const double hz = bin_hz * static_cast<double>(k);
        double w = 0.0;
        if (hz > lo && hz <= mid) w = (hz - lo) / (mid - lo);
        else if (hz > mid && hz < hi) w = (hi - hz) / (hi - mid);
        if (w > 0.0) {
          if (f.weights.empty()) f.first_bin = k;
          f.weights.resize(k - f.first_bin + 1, 0.0);
          f.weights.back() = w;
        }
      }
    }
  }

  std::size_t size() const { return filters_.size(); }

  /// Weight of filter j at bin k (zero outside its support).
  double weight(std::size_t j, std::size_t k) const {
    const auto& f = filters_[j];
    if (k < f.first_bin || k >= f.first_bin + f.weights.size()) return 0.0;
    return f.weights[k - f.first_bin];
  }

  /// Natural-log filter energies, floored at 1e-10.
  std::vector<double> log_energies(std::span<const double> power) const {
    std::vector<double> out(filters_.size());
    for (std::size_t j = 0; j < filters_.size(); ++j) {
      const auto& f = filters_[j];
      double e = 0.0;
      for (std::size_t i = 0; i < f.weights.size() && f.first_bin + i < power.size(); ++i)
        e += f.weights[i] * power[f.first_bin + i];
      out[j] = std::log(std::max(e, kLogFloor));
    }
    return out;
  }

 private:
  struct Filter {
    std::size_t first_bin = 0;
    std::vector<double> weights;
  };
  std::vector<Filter> filters_;
};

inline std::vector<double> mel_spectrum(std::span<const double> frame, int sample_rate_hz,
                                        std::size_t n_filters) {
  const auto fft_len = fft_length(frame.size());
  MelFilterbank bank(sample_rate_hz, n_filters, fft_len);
  return bank.log_energies(power_spectrum(frame, fft_len));
}

/// Orthonormal DCT-II.
inline std::vector<double> dct_ii(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::cos(std::numbers::pi * static_cast<double>(k) *
                             (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(n)));
    const double scale = k == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                                : std::sqrt(2.0 / static_cast<double>(n));
    out[k] = scale * acc;
  }
  return out;
}

/// First 13 cepstral coefficients of a log-mel vector.
inline std::vector<double> mfcc_from_log_mel(std::span<const double> log_mel) {
  auto c = dct_ii(log_mel);
  c.resize(std::min(c.size(), lld_layout::kNumMfcc));
  return c;
}

inline std::vector<double> mfcc(std::span<const double> frame, int sample_rate_hz) {
  return mfcc_from_log_mel(mel_spectrum(frame, sample_rate_hz, lld_layout::kMfccFilters));
}

/// Linear predictor coefficients a_1..a_order (x_t ~ sum a_i x_{t-i}) by the
/// Levinson-Durbin recursion on the frame's autocorrelation. Coefficients
/// left after the error power collapses to <= 0 stay zero.
inline std::vector<double> lpc(std::span<const double> frame, std::size_t order) {
  if (order < 1 || order >= frame.size())
    throw InputError("lpc order " + std::to_string(order) + " invalid for frame of " +
                     std::to_string(frame.size()) + " samples");
  const auto r = autocorrelation(frame, order);
  std::vector<double> a(order + 1, 0.0), prev(order + 1, 0.0);
  if (!(r[0] > 1e-12)) return std::vector<double>(order, 0.0);
  double err = r[0];
  for (std::size_t i = 1; i <= order; ++i) {
    double acc = r[i];
    for (std::size_t j = 1; j < i; ++j) acc -= a[j] * r[i - j];
    const double k = acc / err;
    prev = a;
    a[i] = k;
    for (std::size_t j = 1; j < i; ++j) a[j] = prev[j] - k * prev[i - j];
    err *= (1.0 - k * k);
    if (!(err > 0.0)) break;
  }
  return {a.begin() + 1, a.end()};
}

struct VoiceQuality {
  std::vector<double> jitter;
  std::vector<double> shimmer;
};

/// Frame-to-frame jitter (relative period change between adjacent voiced
/// frames) and shimmer (relative peak-amplitude change). Index 0 is 0.
inline VoiceQuality jitter_shimmer(std::span<const double> pitch_hz,
                                   std::span<const double> peak_amplitudes) {
  if (pitch_hz.size() != peak_amplitudes.size())
    throw InputError("jitter_shimmer: contour lengths differ");
  const std::size_t n = pitch_hz.size();
  VoiceQuality vq{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t k = 1; k < n; ++k) {
    if (pitch_hz[k] > 0.0 && pitch_hz[k - 1] > 0.0) {
      const double t1 = 1.0 / pitch_hz[k], t0 = 1.0 / pitch_hz[k - 1];
      vq.jitter[k] = std::abs(t1 - t0) / ((t1 + t0) / 2.0);
    }
    const double a1 = peak_amplitudes[k], a0 = peak_amplitudes[k - 1];
    if (a1 > 0.0 && a0 > 0.0) vq.shimmer[k] = std::abs(a1 - a0) / ((a1 + a0) / 2.0);
  }
  return vq;
}

/// Regression delta over +-2 frames with edge replication:
/// d_t = sum_{n=1,2} n (x_{t+n} - x_{t-n}) / 10
inline std::vector<double> delta(std::span<const double> x) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> d(x.size(), 0.0);
  auto at = [&](std::ptrdiff_t i) { return x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, n - 1))]; };
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const double num = 1.0 * (at(t + 1) - at(t - 1)) + 2.0 * (at(t + 2) - at(t - 2));
    d[static_cast<std::size_t>(t)] = num / 10.0;
  }
  return d;
}

/// Full 70-dim LLD sequence at 100 Hz (25 ms Hamming frames, 10 ms hop).
inline std::vector<LldFrame> extract_lld(const AudioSignal& signal) {
  namespace L = lld_layout;
  validate(signal);
  const auto g = frame_geometry(signal.sample_rate_hz, kFrameMs, kHopMs);
  const auto frames = frame_signal(signal, kFrameMs, kHopMs);
  const std::size_t n = frames.size();
  const auto fft_len = fft_length(g.length);
  const MelFilterbank mfcc_bank(signal.sample_rate_hz, L::kMfccFilters, fft_len);
  const MelFilterbank mfb_bank(signal.sample_rate_hz, L::kNumMfb, fft_len);
  const FftPlan plan(fft_len);

  std::vector<LldFrame> out(n);
  std::vector<double> pitch(n), peaks(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = frames[i];
    auto& v = out[i].values;
    out[i].frame_time_s = static_cast<double>(i * g.hop) / signal.sample_rate_hz;

    const auto power = power_spectrum(f, plan);
    const auto c = mfcc_from_log_mel(mfcc_bank.log_energies(power));
    std::copy(c.begin(), c.end(), v.begin() + L::kMfcc);
    const auto mfb = mfb_bank.log_energies(power);
    std::copy(mfb.begin(), mfb.end(), v.begin() + L::kMfb);
    const auto a = lpc(f, L::kLpcOrder);
    std::copy(a.begin(), a.end(), v.begin() + L::kLpc);
    pitch[i] = pitch_acf(f, signal.sample_rate_hz);
    v[L::kPitch] = pitch[i];
    v[L::kIntensity] = intensity_db(f);

    double peak = 0.0;
    for (std::size_t j = 0; j < g.length; ++j)
      peak = std::max(peak, std::abs(signal.samples[i * g.hop + j]));
    peaks[i] = peak;
  }

  const auto vq = jitter_shimmer(pitch, peaks);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].values[L::kJitter] = vq.jitter[i];
    out[i].values[L::kShimmer] = vq.shimmer[i];
  }

  // (base column, delta column, width)
  constexpr std::array<std::array<std::size_t, 3>, 7> groups{{
      {L::kMfcc, L::kDeltaMfcc, L::kNumMfcc},
      {L::kMfb, L::kDeltaMfb, L::kNumMfb},
      {L::kLpc, L::kDeltaLpc, L::kLpcOrder},
      {L::kPitch, L::kDeltaPitch, 1},
      {L::kIntensity, L::kDeltaIntensity, 1},
      {L::kJitter, L::kDeltaJitter, 1},
      {L::kShimmer, L::kDeltaShimmer, 1},
  }};
  std::vector<double> column(n);
  for (const auto& [base, dcol, width] : groups) {
    for (std::size_t c = 0; c < width; ++c) {
      for (std::size_t i = 0; i < n; ++i) column[i] = out[i].values[base + c];
      const auto d = delta(column);
      for (std::size_t i = 0; i < n; ++i) out[i].values[dcol + c] = d[i];
    }
  }
  return out;
}

}  // namespace bmf
