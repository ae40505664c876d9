#pragma once

// End-to-end commands behind the `bmf` CLI. Each takes explicit paths and
// options and reports progress on the supplied stream.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bmf/corpus.hpp"
#include "bmf/error.hpp"
#include "bmf/eval.hpp"
#include "bmf/functionals.hpp"
#include "bmf/gradcheck.hpp"
#include "bmf/io.hpp"
#include "bmf/lld.hpp"
#include "bmf/net.hpp"

namespace bmf {

/// Shortest decimal text that round-trips the double.
inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

/// Windows grouped by session in order of first appearance.
inline std::vector<std::vector<FeatureWindow>> group_by_session(std::span<const FeatureWindow> windows) {
  std::vector<std::vector<FeatureWindow>> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& w : windows) {
    auto [it, fresh] = slot.emplace(w.session_id, out.size());
    if (fresh) out.emplace_back();
    out[it->second].push_back(w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// features

struct FeaturesOptions {
  double window_s = 5.0;
  double shift_s = 1.0;
};

struct FeaturesSummary {
  std::size_t sessions_ok = 0;
  std::size_t sessions_failed = 0;
  std::size_t sessions_too_short = 0;
  std::vector<FeatureWindow> windows;
};

inline std::vector<FeatureWindow> session_features(const AudioSignal& audio, const SessionMeta& meta,
                                                   const FeaturesOptions& opt, bool* too_short = nullptr) {
  const auto llds = extract_lld(audio);
  auto res = window_functionals(llds, opt.window_s, opt.shift_s, meta);
  if (too_short) *too_short = res.too_short;
  return std::move(res.windows);
}

/// LLD extraction and windowed functionals for every manifest session, in
/// manifest order. Sessions that fail are reported and skipped; throws only
/// if every session fails.
inline FeaturesSummary compute_features(const Manifest& manifest, const FeaturesOptions& opt,
                                        std::ostream& log) {
  FeaturesSummary s;
  for (const auto& r : manifest.records) {
    try {
      bool too_short = false;
      auto w = session_features(read_audio(r.audio_path), {r.session_id, r.group_id}, opt, &too_short);
      if (too_short) {
        ++s.sessions_too_short;
        log << "warning: session " << r.session_id << " is shorter than one " << opt.window_s
            << " s window; no windows emitted\n";
      }
      for (auto& fw : w) s.windows.push_back(std::move(fw));
      ++s.sessions_ok;
    } catch (const InputError& e) {
      ++s.sessions_failed;
      log << "error: session " << r.session_id << ": " << e.what() << '\n';
    }
  }
  if (s.sessions_ok == 0) throw InputError("feature extraction failed for every session");
  return s;
}

inline FeaturesSummary cmd_features(const std::filesystem::path& manifest_path,
                                    const FeaturesOptions& opt, const std::filesystem::path& out,
                                    std::ostream& log) {
  auto s = compute_features(load_manifest(manifest_path), opt, log);
  write_features(out, s.windows, kFeatureDim);
  log << "wrote " << s.windows.size() << " windows from " << s.sessions_ok << " sessions to "
      << out.string() << '\n';
  return s;
}

// ---------------------------------------------------------------------------
// train / embed

struct TrainOptions {
  std::vector<std::size_t> layers = kDefaultLayers;
  int context_range = kContextRange;
  int context_frames = kContextFrames;
  TrainConfig train;
  std::uint64_t dataset_seed = 1;
  std::uint64_t init_seed = 1;
};

struct TrainOutcome {
  ModelBundle bundle;
  std::vector<double> loss_history;
  std::size_t n_samples = 0;
};

/// Fits normalization stats (rounded to their on-disk precision),
/// standardizes, builds the context dataset and trains.
inline TrainOutcome train_on_windows(std::span<const FeatureWindow> windows, const TrainOptions& opt,
                                     std::ostream& log) {
  if (windows.empty()) throw InputError("no feature windows to train on");
  if (windows.front().vector.size() != kFeatureDim)
    throw InputError("training expects 420-dim features");
  const auto stats = round_to_f32(fit_stats(windows));
  const auto z = standardize(std::vector<FeatureWindow>(windows.begin(), windows.end()), stats);
  const auto sessions = group_by_session(z);
  const auto dataset = build_dataset(sessions, opt.context_range, opt.context_frames, opt.dataset_seed);
  if (dataset.empty()) throw InputError("no trainable sessions (every session has fewer than 2 windows)");
  auto model = init_mlp(opt.layers, opt.init_seed);
  if (model.input_dim() != kFeatureDim) throw InputError("network input width must be 420");
  log << "training on " << dataset.size() << " samples from " << sessions.size() << " sessions\n";
  auto res = train(std::move(model), dataset, opt.train);
  for (std::size_t e = 0; e < res.loss_history.size(); ++e)
    log << "epoch " << (e + 1) << " loss " << format_number(res.loss_history[e]) << '\n';
  TrainOutcome out;
  out.bundle.model = std::move(res.model);
  out.bundle.stats = stats;
  out.loss_history = std::move(res.loss_history);
  out.n_samples = dataset.size();
  return out;
}

inline TrainOutcome cmd_train(const std::filesystem::path& features, const TrainOptions& opt,
                              const std::filesystem::path& out, std::ostream& log) {
  const auto f = read_features(features);
  if (f.dim != kFeatureDim) throw InputError("training expects a 420-dim feature file");
  auto t = train_on_windows(f.windows, opt, log);
  write_model(out, t.bundle);
  return t;
}

/// Bottleneck embeddings of each window, standardized with the model's stats.
inline std::vector<FeatureWindow> embed_windows(const ModelBundle& b, std::span<const FeatureWindow> windows) {
  std::vector<FeatureWindow> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    if (w.vector.size() != b.model.input_dim())
      throw InputError("feature dimension " + std::to_string(w.vector.size()) +
                       " does not match model input " + std::to_string(b.model.input_dim()));
    FeatureWindow e = w;
    std::vector<double> x = w.vector;
    if (b.stats) {
      if (b.stats->mean.size() != x.size()) throw InputError("model stats dimension mismatch");
      for (std::size_t d = 0; d < x.size(); ++d) x[d] = (x[d] - b.stats->mean[d]) / b.stats->std[d];
    }
    e.vector = embed(b.model, x);
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<FeatureWindow> cmd_embed(const std::filesystem::path& model_path,
                                            const std::filesystem::path& features,
                                            const std::filesystem::path& out, std::ostream& log) {
  const auto bundle = read_model(model_path);
  const auto f = read_features(features);
  if (f.dim != bundle.model.input_dim())
    throw InputError("feature file dim " + std::to_string(f.dim) + " does not match model input " +
                     std::to_string(bundle.model.input_dim()));
  auto e = embed_windows(bundle, f.windows);
  write_features(out, e, bundle.model.embedding_dim());
  log << "wrote " << e.size() << " embeddings to " << out.string() << '\n';
  return e;
}

// ---------------------------------------------------------------------------
// classify / similarity

inline std::string classification_csv(const LogoResult& r) {
  std::ostringstream os;
  os << "session_id,group_id,truth,predicted,correct,frames,votes_high,votes_low\n";
  for (const auto& p : r.predictions) {
    auto votes = [&](const char* l) {
      auto it = p.votes.find(l);
      return it == p.votes.end() ? std::size_t{0} : it->second;
    };
    os << detail::csv_escape(p.session_id) << ',' << detail::csv_escape(p.group_id) << ',' << p.truth
       << ',' << p.predicted << ',' << (p.truth == p.predicted ? 1 : 0) << ',' << p.n_frames << ','
       << votes(BinaryLabelSet::kPositive) << ',' << votes(BinaryLabelSet::kNegative) << '\n';
  }
  os << "accuracy," << format_number(r.accuracy) << ',' << r.correct << ',' << r.predictions.size()
     << '\n';
  return os.str();
}

struct ClassifyOptions {
  std::string behavior;
  double fraction = 0.2;
};

inline LogoResult cmd_classify(const std::filesystem::path& vectors, const std::filesystem::path& manifest,
                               const ClassifyOptions& opt, const std::filesystem::path& out,
                               std::ostream& log) {
  const auto f = read_features(vectors);
  const auto labels = binarize_ratings(load_manifest(manifest), opt.behavior, opt.fraction);
  auto r = leave_one_group_out(f.windows, labels);
  write_text(out, classification_csv(r));
  log << opt.behavior << ": accuracy " << format_number(r.accuracy) << " (" << r.correct << "/"
      << r.predictions.size() << ") on " << f.dim << "-dim vectors\n";
  return r;
}

inline std::string similarity_csv(const SimilarityMatrix& m) {
  std::ostringstream os;
  os << "probe";
  for (const auto& s : m.scenarios) os << ',' << detail::csv_escape(s);
  os << '\n';
  for (std::size_t i = 0; i < m.probe_ids.size(); ++i) {
    os << detail::csv_escape(m.probe_ids[i]);
    for (double v : m.scores[i]) os << ',' << format_number(v);
    os << '\n';
  }
  return os.str();
}

/// Probes are all sessions in `windows`; references are the sessions the
/// manifest tags with a scenario.
inline SimilarityMatrix similarity_from_windows(std::span<const FeatureWindow> windows,
                                                const Manifest& manifest) {
  std::vector<FileFrames> probes;
  for (auto& session : group_by_session(windows)) {
    FileFrames p;
    p.id = session.front().session_id;
    for (auto& w : session) p.frames.push_back(std::move(w.vector));
    probes.push_back(std::move(p));
  }
  std::vector<FileFrames> refs;
  for (const auto& r : manifest.records) {
    if (!r.scenario) continue;
    for (const auto& p : probes)
      if (p.id == r.session_id) refs.push_back({p.id, *r.scenario, p.frames});
  }
  if (refs.empty()) throw InputError("no embedded session carries a scenario tag");
  return similarity_matrix(probes, refs);
}

inline SimilarityMatrix cmd_similarity(const std::filesystem::path& vectors,
                                       const std::filesystem::path& manifest,
                                       const std::filesystem::path& out, std::ostream& log) {
  const auto f = read_features(vectors);
  auto m = similarity_from_windows(f.windows, load_manifest(manifest));
  write_text(out, similarity_csv(m));
  log << "wrote " << m.probe_ids.size() << " x " << m.scenarios.size() << " similarity matrix\n";
  return m;
}

// ---------------------------------------------------------------------------
// gradcheck / synth

inline const std::vector<std::size_t> kGradCheckSmallNet{10, 8, 4, 8, 10};
inline constexpr std::size_t kGradCheckSamplesPerTensor = 24;

/// Full check of the small net and a sampled check of the default net for
/// `n_seeds` consecutive seeds. Returns the worst relative error.
inline double cmd_gradcheck(std::uint64_t seed, std::size_t n_seeds, std::ostream& log) {
  double worst = 0.0;
  for (std::uint64_t s = seed; s < seed + n_seeds; ++s) {
    const auto small = random_gradient_check(kGradCheckSmallNet, s);
    const auto big = random_gradient_check(kDefaultLayers, s, kGradCheckSamplesPerTensor);
    log << "seed " << s << ": [10,8,4,8,10] max rel err " << format_number(small.max_rel_error)
        << " (" << small.checked << " params); default net max rel err "
        << format_number(big.max_rel_error) << " (" << big.checked << " params)\n";
    worst = std::max({worst, small.max_rel_error, big.max_rel_error});
  }
  log << (worst < kGradCheckTolerance ? "PASS" : "FAIL") << ": worst relative error "
      << format_number(worst) << " (tolerance " << format_number(kGradCheckTolerance) << ")\n";
  return worst;
}

inline SynthCorpus cmd_synth(int sessions, double seconds, int classes, std::uint64_t seed,
                             const std::filesystem::path& out_dir, std::ostream& log) {
  auto c = write_synth_corpus(out_dir, sessions, seconds, classes, seed);
  log << "wrote " << sessions << " sessions to " << out_dir.string() << '\n';
  return c;
}

}  // namespace bmf
