#pragma once

// Nearest-neighbour behavior classification with leave-one-group-out
// majority voting, and per-scenario nearest-frame similarity scores.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bmf/corpus.hpp"
#include "bmf/error.hpp"
#include "bmf/functionals.hpp"

namespace bmf {

struct ReferenceIndex {
  std::vector<std::vector<double>> vectors;
  std::vector<std::string> labels;
  std::vector<std::string> group_ids;
  std::vector<std::string> session_ids;

  std::size_t size() const { return vectors.size(); }
  std::size_t dim() const { return vectors.empty() ? 0 : vectors.front().size(); }

  void add(std::vector<double> v, std::string label, std::string group, std::string session) {
    if (!vectors.empty() && v.size() != dim())
      throw InputError("reference vectors must share one dimension");
    vectors.push_back(std::move(v));
    labels.push_back(std::move(label));
    group_ids.push_back(std::move(group));
    session_ids.push_back(std::move(session));
  }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct NnHit {
  std::size_t position = 0;
  double distance = 0.0;  // Euclidean
};

/// Exhaustive Euclidean nearest neighbour, skipping references of
/// `exclude_group`. Ties go to the lowest position.
inline NnHit nn_search_hit(std::span<const double> query, const ReferenceIndex& index,
                           const std::optional<std::string>& exclude_group = std::nullopt) {
  if (index.size() > 0 && query.size() != index.dim())
    throw InputError("query dimension " + std::to_string(query.size()) +
                     " does not match index dimension " + std::to_string(index.dim()));
  std::size_t best = index.size();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (exclude_group && index.group_ids[i] == *exclude_group) continue;
    const double d = squared_distance(query, index.vectors[i]);
    if (best == index.size() || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  if (best == index.size()) throw InputError("nearest-neighbour search has no eligible references");
  return {best, std::sqrt(best_d)};
}

inline std::size_t nn_search(std::span<const double> query, const ReferenceIndex& index,
                             const std::optional<std::string>& exclude_group = std::nullopt) {
  return nn_search_hit(query, index, exclude_group).position;
}

struct SessionDecision {
  std::string label;
  std::map<std::string, std::size_t> votes;
  std::map<std::string, double> distance_sums;
};

/// Majority vote over the nearest-reference labels of each frame. Ties are
/// broken by the smaller summed nearest distance, then by the smaller label.
inline SessionDecision vote(const std::vector<std::pair<std::string, double>>& frame_hits) {
  if (frame_hits.empty()) throw InputError("cannot vote over zero frames");
  SessionDecision out;
  std::map<std::string, std::vector<double>> dists;
  for (const auto& [label, d] : frame_hits) {
    ++out.votes[label];
    dists[label].push_back(d);
  }
  // Summing in sorted order keeps the tie-break independent of frame order.
  for (auto& [label, ds] : dists) {
    std::sort(ds.begin(), ds.end());
    double s = 0.0;
    for (double d : ds) s += d;
    out.distance_sums[label] = s;
  }
  const std::string* best = nullptr;
  for (const auto& [label, count] : out.votes) {
    if (!best) {
      best = &label;
      continue;
    }
    const auto bc = out.votes[*best];
    if (count > bc || (count == bc && out.distance_sums[label] < out.distance_sums[*best]))
      best = &label;
  }
  out.label = *best;
  return out;
}

inline SessionDecision classify_session(std::span<const std::vector<double>> frames,
                                        const ReferenceIndex& index, const std::string& group) {
  if (frames.empty()) throw InputError("session has no frames to classify");
  std::vector<std::pair<std::string, double>> hits;
  hits.reserve(frames.size());
  for (const auto& f : frames) {
    const auto hit = nn_search_hit(f, index, group);
    assert(index.group_ids[hit.position] != group);
    hits.emplace_back(index.labels[hit.position], hit.distance);
  }
  return vote(hits);
}

struct SessionPrediction {
  std::string session_id;
  std::string group_id;
  std::string truth;
  std::string predicted;
  std::size_t n_frames = 0;
  std::map<std::string, std::size_t> votes;
};

struct LogoResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::vector<SessionPrediction> predictions;
};

/// Classifies every labeled session against the frames of all labeled
/// sessions outside its group. Sessions appear in corpus order.
inline LogoResult leave_one_group_out(std::span<const FeatureWindow> corpus,
                                      const BinaryLabelSet& labels) {
  ReferenceIndex index;
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<double>>> frames;
  std::map<std::string, std::string> group_of;
  for (const auto& w : corpus) {
    auto label = labels.label_of(w.session_id);
    if (!label) continue;
    index.add(w.vector, *label, w.group_id, w.session_id);
    auto [it, fresh] = group_of.emplace(w.session_id, w.group_id);
    if (fresh) order.push_back(w.session_id);
    else if (it->second != w.group_id)
      throw InputError("session '" + w.session_id + "' appears under two groups");
    frames[w.session_id].push_back(w.vector);
  }
  std::set<std::string> groups(index.group_ids.begin(), index.group_ids.end());
  if (groups.size() < 2)
    throw InputError("leave-one-group-out needs labeled sessions from at least two groups");

  LogoResult out;
  for (const auto& sid : order) {
    const auto& group = group_of[sid];
    SessionPrediction p;
    p.session_id = sid;
    p.group_id = group;
    p.truth = *labels.label_of(sid);
    p.n_frames = frames[sid].size();
    const auto decision = classify_session(frames[sid], index, group);
    p.predicted = decision.label;
    p.votes = decision.votes;
    if (p.predicted == p.truth) ++out.correct;
    out.predictions.push_back(std::move(p));
  }
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.predictions.size());
  return out;
}

struct FileFrames {
  std::string id;
  std::string scenario;
  std::vector<std::vector<double>> frames;
};

struct SimilarityMatrix {
  std::vector<std::string> probe_ids;
  std::vector<std::string> scenarios;
  std::vector<std::vector<double>> scores;  // probe x scenario
};

/// For each probe frame, the nearest frame among references other than the
/// probe's own file; a row holds the fraction of probe frames whose nearest
/// frame belongs to each scenario. Scenario columns follow first appearance
/// in `references`.
inline SimilarityMatrix similarity_matrix(std::span<const FileFrames> probes,
                                          std::span<const FileFrames> references) {
  SimilarityMatrix out;
  std::map<std::string, std::size_t> column;
  ReferenceIndex index;
  for (const auto& r : references) {
    if (!column.count(r.scenario)) {
      column.emplace(r.scenario, out.scenarios.size());
      out.scenarios.push_back(r.scenario);
    }
    // The file id doubles as the exclusion group.
    for (const auto& f : r.frames) index.add(f, r.scenario, r.id, r.id);
  }
  for (const auto& p : probes) {
    std::vector<double> row(out.scenarios.size(), 0.0);
    if (!p.frames.empty()) {
      std::vector<std::size_t> counts(out.scenarios.size(), 0);
      for (const auto& f : p.frames) {
        const auto hit = nn_search_hit(f, index, p.id);
        ++counts[column.at(index.labels[hit.position])];
      }
      for (std::size_t c = 0; c < row.size(); ++c)
        row[c] = static_cast<double>(counts[c]) / static_cast<double>(p.frames.size());
    }
    out.probe_ids.push_back(p.id);
    out.scores.push_back(std::move(row));
  }
  return out;
}

}  // namespace bmf
