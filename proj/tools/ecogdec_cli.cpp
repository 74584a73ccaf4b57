// ecogdec: batch front end for synthetic data generation, decoder training,
// evaluation and time-course export.
//
// Exit codes: 0 success, 1 runtime/data error, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecogdec/ecogdec.hpp"

namespace {

using namespace ecogdec;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

const std::map<std::string, Pipeline> kPipelines{{"raw", Pipeline::raw}, {"pca", Pipeline::pca}, {"fd", Pipeline::fd}};
const std::map<std::string, SynthMode> kModes{{"band", SynthMode::band}, {"raw", SynthMode::raw}};

std::vector<std::string> finger_choices(bool with_all) {
  std::vector<std::string> out;
  for (Finger f : kAllFingers) out.emplace_back(finger_name(f));
  if (with_all) out.emplace_back("all");
  return out;
}

struct SynthArgs {
  std::uint64_t seed = 42;
  std::string out;
  int channels = 48;
  double duration_s = 600.0;
  SynthMode mode = SynthMode::band;
  double noise_std = 0.05;
  bool no_trials = false;
};

struct TrainArgs {
  std::string data, out;
  Pipeline pipeline = Pipeline::fd;
  std::string finger = "all";
  int taps = kDefaultTaps;
  int bin_ms = kDefaultBinMs;
  double train_fraction = 3.0 / 5.0;
  int max_features = 10;
  double min_improvement = 0.01;
};

struct EvaluateArgs {
  std::string data, report, text;
  std::vector<std::string> models;
};

struct PlotArgs {
  std::string data, model, finger, out;
  double seconds = 60.0;
};

struct PredictArgs {
  std::string data, model, finger, out;
};

struct FeaturesArgs {
  std::string data, out;
  Pipeline pipeline = Pipeline::fd;
  int bin_ms = kDefaultBinMs;
};

int run_synth(const SynthArgs& a) {
  SynthConfig cfg;
  cfg.seed = a.seed;
  cfg.n_channels = a.channels;
  cfg.duration_s = a.duration_s;
  cfg.mode = a.mode;
  cfg.noise_std = a.noise_std;
  cfg.trials = !a.no_trials;
  const auto synth = generate_synthetic(cfg);
  save_recording(synth.recording, a.out);
  save_ground_truth(synth.truth, a.out);
  std::cout << "wrote " << a.out << ": " << synth.recording.n_channels() << " x " << synth.recording.n_ecog_samples()
            << " ECoG, 5 x " << synth.recording.n_glove_samples() << " glove\n";
  return kExitOk;
}

int run_train(const TrainArgs& a) {
  const auto rec = load_recording(a.data);
  TrainConfig cfg;
  cfg.bin_ms = a.bin_ms;
  cfg.selection.taps = a.taps;
  cfg.selection.train_fraction = a.train_fraction;
  cfg.selection.max_features = a.max_features;
  cfg.selection.min_improvement = a.min_improvement;
  std::vector<Finger> fingers;
  if (a.finger == "all")
    fingers.assign(kAllFingers.begin(), kAllFingers.end());
  else
    fingers.push_back(*parse_finger(a.finger));
  const auto bundle = train_all(rec, a.pipeline, cfg, fingers);
  save_model(bundle, a.out);
  for (const auto& tr : bundle.fingers) {
    std::cout << finger_name(tr.model.finger) << ":";
    for (const auto& s : tr.trace.steps) std::cout << ' ' << column_name(s.column) << " (r=" << format_r(s.validation_r, 3) << ")";
    std::cout << '\n';
  }
  return kExitOk;
}

int run_evaluate(const EvaluateArgs& a) {
  const auto rec = load_recording(a.data);
  std::vector<ModelBundle> bundles;
  for (const auto& m : a.models) bundles.push_back(load_model(m));
  const auto report = evaluate(bundles, rec);
  const auto text = format_report_text(report);
  std::cout << text;
  if (!a.report.empty()) {
    std::ofstream out(a.report, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + a.report);
    write_report_tsv(report, out);
  }
  if (!a.text.empty()) {
    std::ofstream out(a.text, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + a.text);
    out << text;
  }
  return kExitOk;
}

const DecoderModel& pick_model(const ModelBundle& bundle, const std::string& finger) {
  const auto* tr = bundle.find(*parse_finger(finger));
  if (!tr) throw Error(ErrorCode::Config, "model file has no decoder for " + finger);
  return tr->model;
}

int run_plot(const PlotArgs& a) {
  std::filesystem::path tsv = a.out, svg;
  if (const auto comma = a.out.find(','); comma != std::string::npos) {
    tsv = a.out.substr(0, comma);
    svg = a.out.substr(comma + 1);
  }
  const auto rec = load_recording(a.data);
  const auto bundle = load_model(a.model);
  const auto& model = pick_model(bundle, a.finger);
  const auto tc = validation_timecourse(model, rec, SplitSpec{bundle.config.selection.train_fraction});
  const auto wanted = static_cast<Eigen::Index>(std::llround(a.seconds * 1000.0 / model.recipe.bin_ms));
  const auto rows = std::min<Eigen::Index>(wanted, tc.predicted.size());
  const Eigen::VectorXd pred = tc.predicted.head(rows), truth = tc.truth.head(rows);
  write_timecourse_tsv(pred, truth, model.recipe.bin_ms, tsv);
  if (!svg.empty())
    write_timecourse_svg(pred, truth, model.recipe.bin_ms, svg,
                         rec.subject_id + " " + std::string(finger_name(model.finger)) + ", validation split");
  std::cout << "wrote " << rows << " rows to " << tsv.string() << (svg.empty() ? "" : " and " + svg.string()) << '\n';
  return kExitOk;
}

int run_predict(const PredictArgs& a) {
  const auto rec = load_recording(a.data);
  const auto bundle = load_model(a.model);
  const auto& model = pick_model(bundle, a.finger);
  const auto pred = predict(model, rec);
  std::ofstream out(a.out, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + a.out);
  out << "bin_index\tpredicted\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < pred.size(); ++i) out << i + model.taps - 1 << '\t' << pred[i] << '\n';
  return kExitOk;
}

int run_features(const FeaturesArgs& a) {
  const auto rec = load_recording(a.data);
  const auto [fm, recipe] = build_features(rec, a.pipeline, a.bin_ms);
  write_feature_tsv(fm, a.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECoG finger-flexion decoding from band-specific amplitude modulation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "write a synthetic recording container");
  cmd_synth->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  cmd_synth->add_option("--out", synth.out, "output container directory")->required();
  cmd_synth->add_option("--channels", synth.channels, "number of ECoG channels")
      ->check(CLI::PositiveNumber)->capture_default_str();
  cmd_synth->add_option("--duration-s", synth.duration_s, "recording length in seconds")
      ->check(CLI::PositiveNumber)->capture_default_str();
  cmd_synth->add_option("--mode", synth.mode, "where the informative power lives")
      ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case))->capture_default_str();
  cmd_synth->add_option("--noise-std", synth.noise_std, "target noise relative to target std")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd_synth->add_flag("--no-trials", synth.no_trials, "random envelopes instead of 2 s move / 2 s rest cycles");

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "train per-finger decoders");
  cmd_train->add_option("--data", train.data, "recording container")->required();
  cmd_train->add_option("--out", train.out, "model JSON to write")->required();
  cmd_train->add_option("--pipeline", train.pipeline, "feature pipeline")
      ->transform(CLI::CheckedTransformer(kPipelines))->capture_default_str();
  cmd_train->add_option("--finger", train.finger, "finger to train")
      ->check(CLI::IsMember(finger_choices(true)))->capture_default_str();
  cmd_train->add_option("--taps", train.taps, "tap delays")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_train->add_option("--bin-ms", train.bin_ms, "AM bin length")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_train->add_option("--train-fraction", train.train_fraction, "training share of the time axis")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  cmd_train->add_option("--max-features", train.max_features, "selection ceiling")
      ->check(CLI::PositiveNumber)->capture_default_str();
  cmd_train->add_option("--min-improvement", train.min_improvement, "minimum validation r gain per step")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();

  EvaluateArgs evaluate_args;
  auto* cmd_eval = app.add_subcommand("evaluate", "score models on the validation split");
  cmd_eval->add_option("--data", evaluate_args.data, "recording container")->required();
  cmd_eval->add_option("--model", evaluate_args.models, "model JSON (repeat for several pipelines)")->required();
  cmd_eval->add_option("--report", evaluate_args.report, "TSV report path");
  cmd_eval->add_option("--text", evaluate_args.text, "aligned text report path");

  PlotArgs plot;
  auto* cmd_plot = app.add_subcommand("plot", "export predicted vs. true validation time course");
  cmd_plot->add_option("--data", plot.data, "recording container")->required();
  cmd_plot->add_option("--model", plot.model, "model JSON")->required();
  cmd_plot->add_option("--finger", plot.finger, "finger")->required()->check(CLI::IsMember(finger_choices(false)));
  cmd_plot->add_option("--seconds", plot.seconds, "length of the exported window")
      ->check(CLI::PositiveNumber)->capture_default_str();
  cmd_plot->add_option("--out", plot.out, "TSV path, optionally ',<svg path>'")->required();

  PredictArgs predict_args;
  auto* cmd_predict = app.add_subcommand("predict", "write a finger's predicted trajectory for a recording");
  cmd_predict->add_option("--data", predict_args.data, "recording container")->required();
  cmd_predict->add_option("--model", predict_args.model, "model JSON")->required();
  cmd_predict->add_option("--finger", predict_args.finger, "finger")
      ->required()->check(CLI::IsMember(finger_choices(false)));
  cmd_predict->add_option("--out", predict_args.out, "TSV path")->required();

  FeaturesArgs features;
  auto* cmd_features = app.add_subcommand("features", "export a pipeline's AM feature matrix as TSV");
  cmd_features->add_option("--data", features.data, "recording container")->required();
  cmd_features->add_option("--pipeline", features.pipeline, "feature pipeline")
      ->transform(CLI::CheckedTransformer(kPipelines))->capture_default_str();
  cmd_features->add_option("--bin-ms", features.bin_ms, "AM bin length")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_features->add_option("--out", features.out, "TSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd_synth->parsed()) return run_synth(synth);
    if (cmd_train->parsed()) return run_train(train);
    if (cmd_eval->parsed()) return run_evaluate(evaluate_args);
    if (cmd_plot->parsed()) return run_plot(plot);
    if (cmd_predict->parsed()) return run_predict(predict_args);
    if (cmd_features->parsed()) return run_features(features);
  } catch (const Error& e) {
    std::cerr << "ecogdec: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "ecogdec: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
