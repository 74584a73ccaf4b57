#pragma once

// Per-finger tap-delay Wiener decoders: training, prediction and the JSON
// model artifact.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ecogdec/error.hpp"
#include "ecogdec/features.hpp"
#include "ecogdec/filterbank.hpp"
#include "ecogdec/recording.hpp"
#include "ecogdec/selection.hpp"
#include "ecogdec/wiener.hpp"

namespace ecogdec {

inline constexpr std::string_view kModelFormat = "ecogdec-model/1";

enum class Pipeline { raw, pca, fd };

inline std::string_view pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::raw: return "raw";
    case Pipeline::pca: return "pca";
    case Pipeline::fd: return "fd";
  }
  return "";
}

inline std::optional<Pipeline> parse_pipeline(std::string_view s) {
  for (auto p : {Pipeline::raw, Pipeline::pca, Pipeline::fd})
    if (pipeline_name(p) == s) return p;
  return std::nullopt;
}

/// Everything needed to recompute a pipeline's feature columns on new data.
struct FeatureRecipe {
  Pipeline pipeline = Pipeline::fd;
  int bin_ms = kDefaultBinMs;
  int ecog_rate = 0;
  int n_channels = 0;
  std::vector<FilterSpec> filters;  // fd only
  std::optional<PcaBasis> pca;      // pca only

  const FilterSpec& filter(const std::string& band) const {
    for (const auto& f : filters)
      if (f.band.name == band) return f;
    throw Error(ErrorCode::Format, "model has no filter for band '" + band + "'");
  }
};

/// Full feature matrix for a pipeline plus the recipe that produced it. PCA
/// is fitted on the entire recording.
inline std::pair<FeatureMatrix, FeatureRecipe> build_features(const Recording& rec, Pipeline pipeline,
                                                              int bin_ms = kDefaultBinMs) {
  FeatureRecipe recipe{pipeline, bin_ms, rec.ecog_rate, rec.n_channels(), {}, std::nullopt};
  switch (pipeline) {
    case Pipeline::raw:
      return {raw_am_features(rec, bin_ms), std::move(recipe)};
    case Pipeline::fd: {
      const auto bands = default_bands(rec.ecog_rate);
      recipe.filters = design_filterbank(bands, rec.ecog_rate);
      return {fd_am_features(rec, bands, bin_ms), std::move(recipe)};
    }
    case Pipeline::pca: {
      recipe.pca = fit_pca(rec.ecog);
      auto fm = pca_am_features(rec, *recipe.pca, bin_ms);
      return {std::move(fm), std::move(recipe)};
    }
  }
  throw Error(ErrorCode::Config, "unknown pipeline");
}

/// Recomputes only the listed columns.
inline FeatureMatrix build_columns(const FeatureRecipe& recipe, const Recording& rec,
                                   const std::vector<ColumnMeta>& columns) {
  if (rec.n_channels() != recipe.n_channels)
    throw Error(ErrorCode::Shape, "model expects " + std::to_string(recipe.n_channels) + " channels, recording has " +
                                      std::to_string(rec.n_channels()));
  if (rec.ecog_rate != recipe.ecog_rate)
    throw Error(ErrorCode::Rate, "model expects " + std::to_string(recipe.ecog_rate) + " Hz ECoG, recording is " +
                                     std::to_string(rec.ecog_rate) + " Hz");
  const auto bins = rec.n_ecog_samples() / samples_per_bin(rec.ecog_rate, recipe.bin_ms);
  FeatureMatrix fm{Eigen::MatrixXd(bins, static_cast<Eigen::Index>(columns.size())), recipe.bin_ms, columns};
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto& col = columns[j];
    auto out = fm.values.col(static_cast<Eigen::Index>(j));
    auto channel_span = [&](int c) {
      if (c < 0 || c >= rec.n_channels()) throw Error(ErrorCode::Shape, "column refers to channel " + std::to_string(c));
      return std::span<const double>(rec.ecog.row(c).data(), static_cast<std::size_t>(rec.n_ecog_samples()));
    };
    switch (col.kind) {
      case ColumnKind::raw_channel:
        out = compute_am(channel_span(col.channel.value()), rec.ecog_rate, recipe.bin_ms);
        break;
      case ColumnKind::channel_band:
        out = compute_am(apply_zero_phase(recipe.filter(col.band.value()), channel_span(col.channel.value())),
                         rec.ecog_rate, recipe.bin_ms);
        break;
      case ColumnKind::principal_component:
        if (!recipe.pca) throw Error(ErrorCode::Format, "principal-component column without a PCA basis");
        out = pca_am_features(rec, *recipe.pca, recipe.bin_ms, {col.component.value()}).values.col(0);
        break;
    }
  }
  return fm;
}

struct DecoderModel {
  Finger finger = Finger::thumb;
  int taps = kDefaultTaps;
  std::vector<ColumnMeta> columns;
  Eigen::VectorXd weights;  // taps * n_columns + 1, intercept last
  Eigen::VectorXd norm_mean;
  Eigen::VectorXd norm_std;
  FeatureRecipe recipe;
};

struct TrainConfig {
  SelectionConfig selection;
  int bin_ms = kDefaultBinMs;
};

struct TrainResult {
  DecoderModel model;
  SelectionTrace trace;
};

struct LinearFit {
  Eigen::VectorXd weights, norm_mean, norm_std;
};

/// z-scores every column with training-split statistics, embeds `taps`
/// delays and solves the Wiener system on the training rows only.
inline LinearFit fit_decoder(const Eigen::MatrixXd& features, const Eigen::VectorXd& target, int taps,
                             double train_fraction) {
  if (features.rows() != target.size())
    throw Error(ErrorCode::Shape, "features and target disagree on bin count");
  const auto cut = SplitSpec{train_fraction}.boundary(features.rows());
  if (cut < taps) throw Error(ErrorCode::TooShort, "training split shorter than the tap count");
  LinearFit fit;
  fit.norm_mean = features.topRows(cut).colwise().mean().transpose();
  fit.norm_std.resize(features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double sd = std::sqrt((features.col(c).head(cut).array() - fit.norm_mean[c]).square().sum() /
                                static_cast<double>(cut - 1));
    if (!(sd > 0.0)) throw Error(ErrorCode::DegenerateData, "feature column " + std::to_string(c) + " is constant on the training split");
    fit.norm_std[c] = sd;
  }
  const Eigen::MatrixXd z =
      ((features.topRows(cut).rowwise() - fit.norm_mean.transpose()).array().rowwise() / fit.norm_std.transpose().array())
          .matrix();
  fit.weights = fit_wiener(embed_tap_delays(z, taps), target.segment(taps - 1, cut - taps + 1));
  return fit;
}

/// Predictions for feature rows already restricted to the model's columns;
/// index i corresponds to row i + taps - 1.
inline Eigen::VectorXd predict_from_features(const DecoderModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != static_cast<Eigen::Index>(model.columns.size()))
    throw Error(ErrorCode::Shape, "feature matrix does not match the model's columns");
  const Eigen::MatrixXd z =
      ((features.rowwise() - model.norm_mean.transpose()).array().rowwise() / model.norm_std.transpose().array())
          .matrix();
  return embed_tap_delays(z, model.taps) * model.weights;
}

inline Eigen::VectorXd predict(const DecoderModel& model, const Recording& rec) {
  const auto fm = build_columns(model.recipe, rec, model.columns);
  return predict_from_features(model, fm.values.topRows(usable_bins(rec, model.recipe.bin_ms)));
}

namespace detail {

inline void require_trainable(const Recording& rec, const TrainConfig& cfg) {
  cfg.selection.validate();
  const auto bins = usable_bins(rec, cfg.bin_ms);
  if (bins < 10 * static_cast<Eigen::Index>(cfg.selection.taps))
    throw Error(ErrorCode::TooShort, "recording has " + std::to_string(bins) + " bins, need at least 10 x " +
                                         std::to_string(cfg.selection.taps));
}

inline TrainResult train_from_features(const FeatureMatrix& all, const FeatureRecipe& recipe,
                                       const Eigen::VectorXd& target, Finger finger, const TrainConfig& cfg) {
  auto trace = stepwise_select(all, target, cfg.selection);
  if (trace.steps.empty())
    throw Error(ErrorCode::SelectionFailed, std::string("no feature column improved validation correlation for ") +
                                                std::string(finger_name(finger)));
  Eigen::MatrixXd chosen(all.n_bins(), static_cast<Eigen::Index>(trace.steps.size()));
  for (std::size_t j = 0; j < trace.steps.size(); ++j)
    chosen.col(static_cast<Eigen::Index>(j)) = all.values.col(trace.steps[j].column_index);
  auto fit = fit_decoder(chosen, target, cfg.selection.taps, cfg.selection.train_fraction);
  DecoderModel model{finger,         cfg.selection.taps, trace.final_columns, std::move(fit.weights),
                     std::move(fit.norm_mean), std::move(fit.norm_std), recipe};
  return {std::move(model), std::move(trace)};
}

}  // namespace detail

struct ModelBundle {
  std::string subject_id;
  FeatureRecipe recipe;
  TrainConfig config;
  std::vector<TrainResult> fingers;

  const TrainResult* find(Finger f) const {
    for (const auto& r : fingers)
      if (r.model.finger == f) return &r;
    return nullptr;
  }
};

/// Trains one decoder per requested finger, sharing one feature build.
inline ModelBundle train_all(const Recording& rec, Pipeline pipeline, const TrainConfig& cfg = {},
                             const std::vector<Finger>& fingers = {kAllFingers.begin(), kAllFingers.end()}) {
  detail::require_trainable(rec, cfg);
  const auto target = align_glove_to_bins(rec, cfg.bin_ms);
  auto [all, recipe] = build_features(rec, pipeline, cfg.bin_ms);
  const auto features = all.head(target.cols());
  ModelBundle bundle{rec.subject_id, recipe, cfg, {}};
  for (Finger f : fingers)
    bundle.fingers.push_back(detail::train_from_features(features, recipe, target.row(static_cast<int>(f)).transpose(), f, cfg));
  return bundle;
}

inline TrainResult train(const Recording& rec, Finger finger, Pipeline pipeline, const TrainConfig& cfg = {}) {
  return std::move(train_all(rec, pipeline, cfg, {finger}).fingers.front());
}

// ---------------------------------------------------------------------------
// JSON artifact

namespace detail {

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json to_json(const ColumnMeta& c) {
  nlohmann::json j;
  j["kind"] = kind_name(c.kind);
  j["name"] = column_name(c);
  if (c.channel) j["channel"] = *c.channel;
  if (c.band) j["band"] = *c.band;
  if (c.component) j["component"] = *c.component;
  return j;
}

inline ColumnMeta column_from_json(const nlohmann::json& j) {
  ColumnMeta c;
  const auto kind = parse_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::Format, "unknown column kind " + j.at("kind").dump());
  c.kind = *kind;
  if (j.contains("channel")) c.channel = j.at("channel").get<int>();
  if (j.contains("band")) c.band = j.at("band").get<std::string>();
  if (j.contains("component")) c.component = j.at("component").get<int>();
  const bool ok = (c.kind == ColumnKind::raw_channel && c.channel && !c.band && !c.component) ||
                  (c.kind == ColumnKind::channel_band && c.channel && c.band && !c.component) ||
                  (c.kind == ColumnKind::principal_component && !c.channel && !c.band && c.component);
  if (!ok) throw Error(ErrorCode::Format, "column fields do not match kind: " + j.dump());
  return c;
}

inline nlohmann::json to_json(const SelectionConfig& c) {
  return {{"max_features", c.max_features},
          {"min_improvement", c.min_improvement},
          {"train_fraction", c.train_fraction},
          {"taps", c.taps}};
}

inline SelectionConfig selection_config_from_json(const nlohmann::json& j) {
  SelectionConfig c;
  c.max_features = j.at("max_features").get<int>();
  c.min_improvement = j.at("min_improvement").get<double>();
  c.train_fraction = j.at("train_fraction").get<double>();
  c.taps = j.at("taps").get<int>();
  return c;
}

}  // namespace detail

inline nlohmann::json to_json(const ModelBundle& bundle) {
  using nlohmann::json;
  const auto& r = bundle.recipe;
  json j;
  j["format"] = kModelFormat;
  j["subject_id"] = bundle.subject_id;
  j["pipeline"] = pipeline_name(r.pipeline);
  j["bin_ms"] = r.bin_ms;
  j["ecog_rate_hz"] = r.ecog_rate;
  j["n_channels"] = r.n_channels;
  j["selection_config"] = detail::to_json(bundle.config.selection);
  j["alignment_note"] = "prediction index i corresponds to target bin i + taps - 1 of the embedded segment";
  if (!r.filters.empty()) {
    json filters = json::array();
    for (const auto& f : r.filters) {
      json sections = json::array();
      for (const auto& s : f.sections) sections.push_back({{"b", s.b}, {"a", s.a}});
      filters.push_back({{"band", f.band.name},
                         {"low_hz", f.band.low_hz},
                         {"high_hz", f.band.high_hz},
                         {"rate_hz", f.rate_hz},
                         {"form", "sos-df2t"},
                         {"sections", sections}});
    }
    j["filters"] = filters;
  }
  if (r.pca) {
    json comps = json::array();
    for (Eigen::Index k = 0; k < r.pca->n_components(); ++k) comps.push_back(detail::to_json(r.pca->components.col(k)));
    j["pca"] = {{"mean", detail::to_json(r.pca->mean)},
                {"components", comps},
                {"explained_variance", detail::to_json(r.pca->explained_variance)},
                {"note", "basis fitted on the whole recording, validation samples included"}};
  }
  json models = json::array();
  for (const auto& tr : bundle.fingers) {
    const auto& m = tr.model;
    json cols = json::array(), steps = json::array();
    for (const auto& c : m.columns) cols.push_back(detail::to_json(c));
    for (const auto& s : tr.trace.steps)
      steps.push_back({{"column", detail::to_json(s.column)}, {"column_index", s.column_index}, {"validation_r", s.validation_r}});
    models.push_back({{"finger", finger_name(m.finger)},
                      {"taps", m.taps},
                      {"columns", cols},
                      {"weights", detail::to_json(m.weights)},
                      {"norm_mean", detail::to_json(m.norm_mean)},
                      {"norm_std", detail::to_json(m.norm_std)},
                      {"selection", {{"config", detail::to_json(tr.trace.config)}, {"steps", steps}}}});
  }
  j["models"] = models;
  return j;
}

inline ModelBundle bundle_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      throw Error(ErrorCode::Format, "unsupported model format " + j.at("format").dump());
    ModelBundle b;
    b.subject_id = j.at("subject_id").get<std::string>();
    const auto pipeline = parse_pipeline(j.at("pipeline").get<std::string>());
    if (!pipeline) throw Error(ErrorCode::Format, "unknown pipeline " + j.at("pipeline").dump());
    b.recipe.pipeline = *pipeline;
    b.recipe.bin_ms = j.at("bin_ms").get<int>();
    b.recipe.ecog_rate = j.at("ecog_rate_hz").get<int>();
    b.recipe.n_channels = j.at("n_channels").get<int>();
    b.config.bin_ms = b.recipe.bin_ms;
    b.config.selection = detail::selection_config_from_json(j.at("selection_config"));
    if (j.contains("filters")) {
      for (const auto& f : j.at("filters")) {
        FilterSpec spec{{f.at("band").get<std::string>(), f.at("low_hz").get<double>(), f.at("high_hz").get<double>()},
                        f.at("rate_hz").get<double>(),
                        {}};
        for (const auto& s : f.at("sections"))
          spec.sections.push_back({s.at("b").get<std::array<double, 3>>(), s.at("a").get<std::array<double, 3>>()});
        b.recipe.filters.push_back(std::move(spec));
      }
    }
    if (j.contains("pca")) {
      const auto& p = j.at("pca");
      PcaBasis basis;
      basis.mean = detail::vector_from_json(p.at("mean"));
      const auto& comps = p.at("components");
      basis.components.resize(basis.mean.size(), static_cast<Eigen::Index>(comps.size()));
      for (std::size_t k = 0; k < comps.size(); ++k) {
        const auto col = detail::vector_from_json(comps[k]);
        if (col.size() != basis.mean.size()) throw Error(ErrorCode::Format, "PCA component length mismatch");
        basis.components.col(static_cast<Eigen::Index>(k)) = col;
      }
      basis.explained_variance = detail::vector_from_json(p.at("explained_variance"));
      b.recipe.pca = std::move(basis);
    }
    for (const auto& mj : j.at("models")) {
      TrainResult tr;
      auto& m = tr.model;
      const auto finger = parse_finger(mj.at("finger").get<std::string>());
      if (!finger) throw Error(ErrorCode::Format, "unknown finger " + mj.at("finger").dump());
      m.finger = *finger;
      m.taps = mj.at("taps").get<int>();
      for (const auto& c : mj.at("columns")) m.columns.push_back(detail::column_from_json(c));
      m.weights = detail::vector_from_json(mj.at("weights"));
      m.norm_mean = detail::vector_from_json(mj.at("norm_mean"));
      m.norm_std = detail::vector_from_json(mj.at("norm_std"));
      m.recipe = b.recipe;
      const auto n_cols = static_cast<Eigen::Index>(m.columns.size());
      if (m.taps < 1 || m.weights.size() != m.taps * n_cols + 1 || m.norm_mean.size() != n_cols ||
          m.norm_std.size() != n_cols || (m.norm_std.array() <= 0.0).any())
        throw Error(ErrorCode::Format, "inconsistent model dimensions for " + std::string(finger_name(m.finger)));
      const auto& sel = mj.at("selection");
      tr.trace.config = detail::selection_config_from_json(sel.at("config"));
      for (const auto& s : sel.at("steps")) {
        tr.trace.steps.push_back({detail::column_from_json(s.at("column")), s.at("column_index").get<int>(),
                                  s.at("validation_r").get<double>()});
        tr.trace.final_columns.push_back(tr.trace.steps.back().column);
      }
      b.fingers.push_back(std::move(tr));
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("malformed model artifact: ") + e.what());
  }
}

inline void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json(bundle).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
}

inline ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Format, path.string() + " is not valid JSON: " + e.what());
  }
  return bundle_from_json(j);
}

}  // namespace ecogdec
