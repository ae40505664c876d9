// Command-line front end: synth, features, train, embed, classify,
// similarity, gradcheck.

#include <cstdint>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bmf/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

std::vector<std::size_t> parse_layers(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw bmf::InputError("bad --layers entry '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior manifold toolkit: acoustic functionals, context-reconstruction "
               "bottleneck training, nearest-neighbour evaluation"};
  app.require_subcommand(1);

  // synth
  int synth_sessions = 20, synth_classes = 2;
  double synth_seconds = 60.0;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus (WAVs + manifest.csv)");
  synth->add_option("--sessions", synth_sessions, "Number of sessions")->capture_default_str();
  synth->add_option("--seconds", synth_seconds, "Session length in seconds")->capture_default_str();
  synth->add_option("--classes", synth_classes, "Number of latent classes (1-4)")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  // features
  std::string feat_manifest, feat_out;
  bmf::FeaturesOptions feat_opt;
  auto* features = app.add_subcommand("features", "Extract 420-dim windowed functionals");
  features->add_option("manifest", feat_manifest, "Manifest CSV")->required();
  features->add_option("--window", feat_opt.window_s, "Window length in seconds")
      ->check(CLI::IsMember({5.0, 20.0}))
      ->capture_default_str();
  features->add_option("--shift", feat_opt.shift_s, "Window shift in seconds")->capture_default_str();
  features->add_option("--out", feat_out, "Output feature file")->required();

  // train
  std::string train_features, train_out, train_layers = "420,300,200,64,200,300,420";
  bmf::TrainOptions train_opt;
  std::string optimizer = "adam";
  std::uint64_t train_seed = 1;
  auto* train = app.add_subcommand("train", "Train the context-reconstruction network");
  train->add_option("features", train_features, "420-dim feature file")->required();
  train->add_option("--layers", train_layers, "Comma-separated layer widths")->capture_default_str();
  train->add_option("--w", train_opt.context_range, "Context range in windows")->capture_default_str();
  train->add_option("--nctx", train_opt.context_frames, "Context targets per window")->capture_default_str();
  train->add_option("--epochs", train_opt.train.epochs, "Training epochs")->capture_default_str();
  train->add_option("--batch", train_opt.train.batch_size, "Mini-batch size")->capture_default_str();
  train->add_option("--lr", train_opt.train.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--optimizer", optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  train->add_option("--seed", train_seed, "Seed for init, context sampling and shuffling")
      ->capture_default_str();
  train->add_option("--out", train_out, "Output model file")->required();

  // embed
  std::string embed_model, embed_features, embed_out;
  auto* embed = app.add_subcommand("embed", "Embed feature windows with a trained model");
  embed->add_option("model", embed_model, "Model file")->required();
  embed->add_option("features", embed_features, "420-dim feature file")->required();
  embed->add_option("--out", embed_out, "Output 64-dim embedding file")->required();

  // classify
  std::string cls_vectors, cls_manifest, cls_out;
  bmf::ClassifyOptions cls_opt;
  auto* classify = app.add_subcommand(
      "classify", "Leave-one-group-out nearest-neighbour classification with majority voting");
  classify->add_option("vectors", cls_vectors, "Feature or embedding file")->required();
  classify->add_option("manifest", cls_manifest, "Manifest CSV with ratings")->required();
  classify->add_option("--behavior", cls_opt.behavior, "Rating code to binarize")->required();
  classify->add_option("--fraction", cls_opt.fraction, "Top/bottom fraction kept")->capture_default_str();
  classify->add_option("--out", cls_out, "Output CSV")->required();

  // similarity
  std::string sim_vectors, sim_manifest, sim_out;
  auto* similarity = app.add_subcommand("similarity", "Per-scenario nearest-frame similarity matrix");
  similarity->add_option("vectors", sim_vectors, "Embedding (or feature) file")->required();
  similarity->add_option("manifest", sim_manifest, "Manifest CSV with scenario tags")->required();
  similarity->add_option("--out", sim_out, "Output CSV")->required();

  // gradcheck
  std::uint64_t gc_seed = 1;
  std::size_t gc_seeds = 10;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gradcheck->add_option("--seed", gc_seed, "First seed")->capture_default_str();
  gradcheck->add_option("--seeds", gc_seeds, "Number of seeds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors count as input errors; --help exits 0.
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    auto& log = std::cerr;
    if (*synth) {
      bmf::cmd_synth(synth_sessions, synth_seconds, synth_classes, synth_seed, synth_out, log);
    } else if (*features) {
      bmf::cmd_features(feat_manifest, feat_opt, feat_out, log);
    } else if (*train) {
      train_opt.layers = parse_layers(train_layers);
      train_opt.train.optimizer = optimizer == "sgd" ? bmf::Optimizer::kSgd : bmf::Optimizer::kAdam;
      train_opt.train.seed = train_seed;
      train_opt.dataset_seed = train_seed;
      train_opt.init_seed = train_seed;
      bmf::cmd_train(train_features, train_opt, train_out, log);
    } else if (*embed) {
      bmf::cmd_embed(embed_model, embed_features, embed_out, log);
    } else if (*classify) {
      const auto r = bmf::cmd_classify(cls_vectors, cls_manifest, cls_opt, cls_out, log);
      std::cout << "accuracy " << bmf::format_number(r.accuracy) << '\n';
    } else if (*similarity) {
      bmf::cmd_similarity(sim_vectors, sim_manifest, sim_out, log);
    } else if (*gradcheck) {
      const double worst = bmf::cmd_gradcheck(gc_seed, gc_seeds, std::cout);
      if (!(worst < bmf::kGradCheckTolerance)) return kExitNumerical;
    }
  } catch (const bmf::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const bmf::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}
