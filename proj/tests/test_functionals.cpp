#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "bmf/functionals.hpp"
#include "oracles.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<bmf::LldFrame> frames_from(const std::vector<std::vector<double>>& cols, std::size_t n) {
  std::vector<bmf::LldFrame> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].frame_time_s = static_cast<double>(i) / 100.0;
    for (std::size_t d = 0; d < cols.size(); ++d) out[i].values[d] = cols[d][i];
  }
  return out;
}

}  // namespace

TEST_CASE("percentile follows the interpolated-rank definition", "[functionals]") {
  const std::vector<double> v{4, 1, 3, 2, 5};
  CHECK(bmf::percentile(v, 0) == 1);
  CHECK(bmf::percentile(v, 100) == 5);
  CHECK(bmf::percentile(v, 50) == 3);
  CHECK_THAT(bmf::percentile(v, 1), WithinAbs(1.04, 1e-12));
  CHECK_THAT(bmf::percentile(v, 99), WithinAbs(4.96, 1e-12));
  CHECK(bmf::percentile(std::vector<double>{7.5}, 37) == 7.5);
  CHECK_THROWS_AS(bmf::percentile(std::vector<double>{}, 50), bmf::InputError);
  CHECK_THROWS_AS(bmf::percentile(v, 101), bmf::InputError);
}

TEST_CASE("percentile equals the rank-counting oracle", "[functionals][property]") {
  std::mt19937 rng(21);
  std::uniform_int_distribution<int> len(1, 300), small(-5, 5);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    // Half the arrays carry many ties.
    for (auto& x : v) x = trial % 2 ? gauss(rng) : small(rng);
    for (double p : {1.0, 50.0, 99.0}) CHECK(bmf::percentile(v, p) == oracle::percentile(v, p));
  }
}

TEST_CASE("window_functionals computes the six statistics", "[functionals]") {
  std::mt19937 rng(8);
  std::normal_distribution<double> gauss;
  const std::size_t n = 700;
  std::vector<std::vector<double>> cols(bmf::kLldDim, std::vector<double>(n));
  for (auto& c : cols)
    for (auto& x : c) x = gauss(rng);
  const auto llds = frames_from(cols, n);
  const auto r = bmf::window_functionals(llds, 5.0, 1.0, {"s1", "g1"});
  REQUIRE_FALSE(r.too_short);
  REQUIRE(r.windows.size() == 3);  // (700 - 500) / 100 + 1
  CHECK(r.windows[2].start_time_s == 2.0);
  CHECK(r.windows[0].session_id == "s1");
  CHECK(r.windows[0].group_id == "g1");
  CHECK(r.windows[0].window_len_s == 5.0);

  for (std::size_t w = 0; w < 3; ++w) {
    const auto& v = r.windows[w].vector;
    REQUIRE(v.size() == 420);
    for (std::size_t d : {0u, 33u, 69u}) {
      std::vector<double> seg(cols[d].begin() + static_cast<long>(w * 100),
                              cols[d].begin() + static_cast<long>(w * 100 + 500));
      double mean = 0, ss = 0;
      for (double x : seg) mean += x;
      mean /= 500;
      for (double x : seg) ss += (x - mean) * (x - mean);
      const double* b = v.data() + d * 6;
      CHECK(b[bmf::kMin1] == oracle::percentile(seg, 1));
      CHECK(b[bmf::kMax99] == oracle::percentile(seg, 99));
      CHECK(b[bmf::kRange] == b[bmf::kMax99] - b[bmf::kMin1]);
      CHECK_THAT(b[bmf::kMean], WithinAbs(mean, 1e-12));
      CHECK(b[bmf::kMedian] == oracle::percentile(seg, 50));
      CHECK_THAT(b[bmf::kStd], WithinRel(std::sqrt(ss / 500), 1e-12));
    }
  }
}

TEST_CASE("window boundary cases", "[functionals]") {
  std::vector<std::vector<double>> cols(bmf::kLldDim, std::vector<double>(500, 1.0));
  auto llds = frames_from(cols, 500);
  auto exact = bmf::window_functionals(llds, 5.0, 1.0, {"s", "g"});
  CHECK(exact.windows.size() == 1);
  for (std::size_t d = 0; d < 70; ++d) {
    CHECK(exact.windows[0].vector[d * 6 + bmf::kStd] == 0.0);
    CHECK(exact.windows[0].vector[d * 6 + bmf::kRange] == 0.0);
  }
  llds.pop_back();
  auto short_one = bmf::window_functionals(llds, 5.0, 1.0, {"s", "g"});
  CHECK(short_one.too_short);
  CHECK(short_one.windows.empty());
  CHECK_THROWS_AS(bmf::window_functionals(llds, 0.0, 1.0, {"s", "g"}), bmf::InputError);
}

TEST_CASE("standardization", "[functionals]") {
  std::mt19937 rng(13);
  std::normal_distribution<double> gauss(3.0, 2.0);
  std::vector<bmf::FeatureWindow> ws(50);
  for (auto& w : ws) {
    w.vector.resize(4);
    for (auto& x : w.vector) x = gauss(rng);
    w.vector[2] = 0.1;  // constant column
  }
  const auto stats = bmf::fit_stats(ws);
  CHECK(stats.mean[2] == 0.1);
  CHECK(stats.std[2] == bmf::kStdFloor);
  const auto z = bmf::standardize(ws, stats);
  for (std::size_t d : {0u, 1u, 3u}) {
    double m = 0, s = 0;
    for (const auto& w : z) m += w.vector[d];
    m /= 50;
    for (const auto& w : z) s += (w.vector[d] - m) * (w.vector[d] - m);
    CHECK_THAT(m, WithinAbs(0.0, 1e-12));
    CHECK_THAT(std::sqrt(s / 50), WithinAbs(1.0, 1e-12));
  }
  for (const auto& w : z) CHECK(w.vector[2] == 0.0);

  const auto back = bmf::destandardize(z, stats);
  for (std::size_t i = 0; i < ws.size(); ++i)
    for (std::size_t d = 0; d < 4; ++d) CHECK_THAT(back[i].vector[d], WithinAbs(ws[i].vector[d], 1e-12));

  std::vector<bmf::FeatureWindow> wrong(1);
  wrong[0].vector.resize(3);
  CHECK_THROWS_AS(bmf::standardize(wrong, stats), bmf::InputError);
  CHECK_THROWS_AS(bmf::fit_stats(std::vector<bmf::FeatureWindow>{}), bmf::InputError);
}
