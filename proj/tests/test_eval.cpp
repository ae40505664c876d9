#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "bmf/eval.hpp"
#include "oracles.hpp"

using Catch::Matchers::WithinAbs;

namespace {

bmf::FeatureWindow window(std::vector<double> v, std::string session, std::string group) {
  bmf::FeatureWindow w;
  w.vector = std::move(v);
  w.session_id = std::move(session);
  w.group_id = std::move(group);
  return w;
}

bmf::BinaryLabelSet labels(std::set<std::string> high, std::set<std::string> low) {
  bmf::BinaryLabelSet b;
  b.positive = std::move(high);
  b.negative = std::move(low);
  return b;
}

}  // namespace

TEST_CASE("nn_search agrees with brute force", "[eval][property]") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<int> count(2, 40), dim(1, 16), group(0, 3), coarse(-2, 2);
  for (int trial = 0; trial < 500; ++trial) {
    bmf::ReferenceIndex idx;
    const int n = count(rng), d = dim(rng);
    for (int i = 0; i < n; ++i) {
      std::vector<double> v(static_cast<std::size_t>(d));
      // Integer grids produce exact distance ties.
      for (auto& x : v) x = trial % 3 == 0 ? coarse(rng) : gauss(rng);
      idx.add(v, "l", "g" + std::to_string(group(rng)), "s");
    }
    std::vector<double> q(static_cast<std::size_t>(d));
    for (auto& x : q) x = trial % 3 == 0 ? coarse(rng) : gauss(rng);
    const std::string excl = "g" + std::to_string(group(rng));
    std::vector<bool> allowed(idx.size());
    bool any = false;
    for (std::size_t i = 0; i < idx.size(); ++i) any |= (allowed[i] = idx.group_ids[i] != excl);
    if (!any) {
      CHECK_THROWS_AS(bmf::nn_search(q, idx, excl), bmf::InputError);
      continue;
    }
    CHECK(bmf::nn_search(q, idx, excl) == oracle::nearest(q, idx.vectors, allowed));
    CHECK(bmf::nn_search(q, idx) == oracle::nearest(q, idx.vectors, std::vector<bool>(idx.size(), true)));
  }
}

TEST_CASE("nn_search reports distance and rejects mismatched queries", "[eval]") {
  bmf::ReferenceIndex idx;
  idx.add({0, 0}, "a", "g1", "s1");
  idx.add({3, 4}, "b", "g2", "s2");
  const auto hit = bmf::nn_search_hit(std::vector<double>{3, 4.5}, idx);
  CHECK(hit.position == 1);
  CHECK_THAT(hit.distance, WithinAbs(0.5, 1e-15));
  CHECK(bmf::nn_search(std::vector<double>{3, 4}, idx, std::string("g2")) == 0);
  CHECK_THROWS_AS(bmf::nn_search(std::vector<double>{1, 2, 3}, idx), bmf::InputError);
  CHECK_THROWS_AS(idx.add({1}, "c", "g3", "s3"), bmf::InputError);
}

TEST_CASE("vote: majority, then distance, then label", "[eval]") {
  CHECK(bmf::vote({{"high", 1.0}, {"low", 0.1}, {"high", 1.0}}).label == "high");
  CHECK(bmf::vote({{"high", 1.0}, {"low", 0.5}}).label == "low");
  CHECK(bmf::vote({{"low", 0.5}, {"high", 0.5}}).label == "high");
  const auto d = bmf::vote({{"low", 0.2}, {"high", 0.1}, {"low", 0.3}, {"high", 0.5}});
  CHECK(d.label == "low");
  CHECK(d.votes.at("low") == 2);
  CHECK_THAT(d.distance_sums.at("high"), WithinAbs(0.6, 1e-15));
  CHECK_THROWS_AS(bmf::vote({}), bmf::InputError);
}

TEST_CASE("vote does not depend on frame order", "[eval][property]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<std::string, double>> hits;
    for (int i = 0; i < 8; ++i) hits.emplace_back(u(rng) < 0.5 ? "high" : "low", u(rng));
    const auto base = bmf::vote(hits).label;
    std::shuffle(hits.begin(), hits.end(), rng);
    CHECK(bmf::vote(hits).label == base);
  }
}

TEST_CASE("leave-one-group-out never matches within the held-out group", "[eval]") {
  // Each session's own frames would be an exact match; only other groups count.
  std::vector<bmf::FeatureWindow> corpus{
      window({0.0}, "a", "g1"), window({0.1}, "a", "g1"),
      window({0.05}, "b", "g2"),
      window({10.0}, "c", "g3"), window({10.2}, "c", "g3"),
      window({9.9}, "d", "g4"),
      window({5.0}, "unlabeled", "g5"),
  };
  const auto r = bmf::leave_one_group_out(corpus, labels({"c", "d"}, {"a", "b"}));
  REQUIRE(r.predictions.size() == 4);
  CHECK(r.accuracy == 1.0);
  CHECK(r.predictions[0].session_id == "a");
  CHECK(r.predictions[0].n_frames == 2);
  CHECK(r.predictions[0].votes.at("low") == 2);

  // Sessions sharing a group hide each other: a and b now both see only c/d.
  for (auto& w : corpus)
    if (w.session_id == "b") w.group_id = "g1";
  const auto r2 = bmf::leave_one_group_out(corpus, labels({"c", "d"}, {"a", "b"}));
  CHECK(r2.predictions[0].predicted == "high");
  CHECK(r2.predictions[1].predicted == "high");
  CHECK(r2.accuracy == 0.5);

  CHECK_THROWS_AS(bmf::leave_one_group_out(std::vector<bmf::FeatureWindow>{window({0}, "a", "g1")},
                                           labels({}, {"a"})),
                  bmf::InputError);
}

TEST_CASE("similarity rows are frame fractions that sum to one", "[eval]") {
  std::vector<bmf::FileFrames> refs{
      {"r1", "debate", {{0.0}, {0.1}}},
      {"r2", "chat", {{5.0}, {5.1}, {5.2}}},
      {"r3", "debate", {{0.2}}},
  };
  std::vector<bmf::FileFrames> probes{
      {"p", "", {{0.05}, {5.05}, {4.9}, {0.3}}},
      {"r1", "", {{0.0}, {0.1}}},  // own file excluded: nearest is r3
      {"empty", "", {}},
  };
  const auto m = bmf::similarity_matrix(probes, refs);
  REQUIRE(m.scenarios == std::vector<std::string>{"debate", "chat"});
  CHECK(m.scores[0] == std::vector<double>{0.5, 0.5});
  CHECK(m.scores[1] == std::vector<double>{1.0, 0.0});
  CHECK(m.scores[2] == std::vector<double>{0.0, 0.0});

  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  std::vector<bmf::FileFrames> many;
  for (int f = 0; f < 6; ++f) {
    bmf::FileFrames ff{"f" + std::to_string(f), "sc" + std::to_string(f % 3), {}};
    for (int k = 0; k < 7; ++k) ff.frames.push_back({gauss(rng), gauss(rng), gauss(rng)});
    many.push_back(ff);
  }
  const auto mm = bmf::similarity_matrix(many, many);
  for (const auto& row : mm.scores) {
    double s = 0;
    for (double v : row) s += v;
    CHECK_THAT(s, WithinAbs(1.0, 1e-12));
  }
}
