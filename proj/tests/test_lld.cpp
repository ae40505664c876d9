#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "bmf/lld.hpp"
#include "oracles.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace L = bmf::lld_layout;

namespace {

bmf::AudioSignal sine(double hz, double seconds, double amp = 0.5, int rate = 16000) {
  bmf::AudioSignal s;
  s.sample_rate_hz = rate;
  s.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < s.samples.size(); ++i)
    s.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  return s;
}

}  // namespace

TEST_CASE("framing geometry", "[lld]") {
  const auto g = bmf::frame_geometry(16000, 25, 10);
  CHECK(g.length == 400);
  CHECK(g.hop == 160);
  CHECK(bmf::frame_count(399, g) == 0);
  CHECK(bmf::frame_count(400, g) == 1);
  CHECK(bmf::frame_count(16000, g) == 98);

  bmf::AudioSignal tiny{std::vector<double>(100, 0.1), 16000};
  CHECK_THROWS_AS(bmf::frame_signal(tiny), bmf::InputError);

  const auto w = bmf::hamming_window(400);
  CHECK_THAT(w.front(), WithinAbs(0.08, 1e-12));
  CHECK_THAT(w.back(), WithinAbs(0.08, 1e-12));
}

TEST_CASE("power spectrum matches a direct DFT", "[lld]") {
  std::mt19937 rng(5);
  std::normal_distribution<double> gauss;
  std::vector<double> x(400);
  for (auto& v : x) v = gauss(rng);
  const auto p = bmf::power_spectrum(x, 512);
  REQUIRE(p.size() == 257);
  for (std::size_t k : {0u, 1u, 17u, 128u, 255u, 256u}) {
    std::complex<double> acc;
    for (std::size_t n = 0; n < x.size(); ++n)
      acc += x[n] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * n) / 512.0);
    CHECK_THAT(p[k], WithinRel(std::norm(acc), 1e-9));
  }
  CHECK(bmf::fft_length(400) == 512);
  CHECK(bmf::fft_length(1000) == 1024);
}

TEST_CASE("mel scale and filterbank", "[lld]") {
  CHECK_THAT(bmf::mel_to_hz(bmf::hz_to_mel(1234.5)), WithinRel(1234.5, 1e-12));
  CHECK_THAT(bmf::hz_to_mel(700.0), WithinRel(2595.0 * std::log10(2.0), 1e-12));
  bmf::MelFilterbank bank(16000, 10, 512);
  CHECK(bank.size() == 10);
  for (std::size_t j = 0; j < 10; ++j) {
    double peak = 0;
    for (std::size_t k = 0; k <= 256; ++k) {
      CHECK(bank.weight(j, k) >= 0.0);
      CHECK(bank.weight(j, k) <= 1.0);
      peak = std::max(peak, bank.weight(j, k));
    }
    CHECK(peak > 0.5);
  }
  // Silence floors every band.
  const auto e = bank.log_energies(std::vector<double>(257, 0.0));
  for (double v : e) CHECK(v == std::log(1e-10));
}

TEST_CASE("DCT is orthonormal and kills constant input", "[lld]") {
  std::mt19937 rng(2);
  std::normal_distribution<double> gauss;
  std::vector<double> x(26);
  for (auto& v : x) v = gauss(rng);
  const auto c = bmf::dct_ii(x);
  double ex = 0, ec = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ex += x[i] * x[i];
    ec += c[i] * c[i];
  }
  CHECK_THAT(ec, WithinRel(ex, 1e-12));

  const auto m = bmf::mfcc_from_log_mel(std::vector<double>(26, -3.7));
  REQUIRE(m.size() == 13);
  CHECK_THAT(m[0], WithinRel(-3.7 * std::sqrt(26.0), 1e-12));
  for (std::size_t k = 1; k < 13; ++k) CHECK_THAT(m[k], WithinAbs(0.0, 1e-10));
}

TEST_CASE("LPC agrees with the direct normal-equation solve", "[lld][property]") {
  std::mt19937 rng(9);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(400);
    for (auto& v : x) v = gauss(rng);
    const auto a = bmf::lpc(x, 8);
    const auto ref = oracle::toeplitz_solve(x, 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK_THAT(a[i], WithinAbs(ref[i], 1e-8));
  }
  CHECK(bmf::lpc(std::vector<double>(400, 0.0), 8) == std::vector<double>(8, 0.0));
  CHECK_THROWS_AS(bmf::lpc(std::vector<double>(8, 1.0), 8), bmf::InputError);
}

TEST_CASE("LPC recovers an AR(1) coefficient", "[lld]") {
  std::mt19937 rng(4);
  std::normal_distribution<double> gauss;
  std::vector<double> x(4000);
  double prev = 0;
  for (auto& v : x) prev = v = 0.9 * prev + gauss(rng);
  const auto a = bmf::lpc(x, 1);
  CHECK_THAT(a[0], WithinAbs(0.9, 0.05));
}

TEST_CASE("pitch from autocorrelation", "[lld]") {
  const auto frames = bmf::frame_signal(sine(220.0, 0.5));
  for (const auto& f : frames) CHECK_THAT(bmf::pitch_acf(f, 16000), WithinAbs(220.0, 3.0));

  std::mt19937 rng(1);
  std::normal_distribution<double> gauss;
  std::vector<double> noise(400);
  for (auto& v : noise) v = gauss(rng);
  CHECK(bmf::pitch_acf(noise, 16000) == 0.0);
  CHECK(bmf::pitch_acf(std::vector<double>(400, 0.0), 16000) == 0.0);

  // The windowed ACF envelope biases the peak lag low; the bias grows as
  // the pitch falls (about 3% at 120 Hz).
  for (double hz : {150.0, 310.0, 450.0}) {
    const auto f = bmf::frame_signal(sine(hz, 0.1));
    CHECK_THAT(bmf::pitch_acf(f[2], 16000), WithinRel(hz, 0.03));
  }
}

TEST_CASE("intensity, jitter, shimmer, delta", "[lld]") {
  CHECK_THAT(bmf::intensity_db(std::vector<double>(100, 0.1)), WithinAbs(10 * std::log10(0.01 + 1e-10), 1e-12));
  CHECK_THAT(bmf::intensity_db(std::vector<double>(100, 0.0)), WithinAbs(-100.0, 1e-12));

  const std::vector<double> pitch{100, 125, 0, 200, 200};
  const std::vector<double> amp{0.5, 0.5, 0.3, 0.0, 0.6};
  const auto vq = bmf::jitter_shimmer(pitch, amp);
  CHECK(vq.jitter[0] == 0.0);
  CHECK_THAT(vq.jitter[1], WithinRel((0.01 - 0.008) / 0.009, 1e-12));
  CHECK(vq.jitter[2] == 0.0);
  CHECK(vq.jitter[3] == 0.0);
  CHECK(vq.jitter[4] == 0.0);
  CHECK(vq.shimmer[1] == 0.0);
  CHECK_THAT(vq.shimmer[2], WithinRel(0.2 / 0.4, 1e-12));
  CHECK(vq.shimmer[3] == 0.0);
  CHECK(vq.shimmer[4] == 0.0);

  // A linear ramp has slope 1 away from the edges.
  std::vector<double> ramp(10);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 3.0 * static_cast<double>(i);
  const auto d = bmf::delta(ramp);
  for (std::size_t i = 2; i + 2 < ramp.size(); ++i) CHECK_THAT(d[i], WithinAbs(3.0, 1e-12));
  // Edge replication: d0 = (x1 - x0 + 2 (x2 - x0)) / 10
  CHECK_THAT(d[0], WithinAbs((3.0 + 2.0 * 6.0) / 10.0, 1e-12));
}

TEST_CASE("extract_lld produces 70 finite values per 10 ms frame", "[lld]") {
  const auto s = sine(150.0, 1.0, 0.3);
  const auto llds = bmf::extract_lld(s);
  REQUIRE(llds.size() == 98);
  CHECK(llds[0].values.size() == 70);
  CHECK(bmf::kLldDim == 70);
  CHECK_THAT(llds[10].frame_time_s, WithinAbs(0.1, 1e-12));
  for (const auto& f : llds)
    for (double v : f.values) REQUIRE(std::isfinite(v));
  CHECK_THAT(llds[50].values[L::kPitch], WithinRel(150.0, 0.03));
  // A steady tone has (near) zero deltas in the interior.
  CHECK_THAT(llds[50].values[L::kDeltaPitch], WithinAbs(0.0, 0.5));
  CHECK_THAT(llds[50].values[L::kDeltaIntensity], WithinAbs(0.0, 0.5));
  // Delta columns are the delta of their base columns.
  std::vector<double> col;
  for (const auto& f : llds) col.push_back(f.values[L::kMfcc + 3]);
  const auto d = bmf::delta(col);
  for (std::size_t i = 0; i < llds.size(); ++i) CHECK(llds[i].values[L::kDeltaMfcc + 3] == d[i]);
}
