#pragma once

// Validation scoring, per-finger score tables and predicted-vs-true time
// course export (TSV + static SVG).

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecogdec/correlation.hpp"
#include "ecogdec/decoder.hpp"
#include "ecogdec/error.hpp"
#include "ecogdec/recording.hpp"

namespace ecogdec {

struct EvaluationRow {
  std::string subject_id;
  Pipeline pipeline = Pipeline::fd;
  std::array<std::optional<double>, kFingerCount> r{};
  std::optional<double> average;  // mean of the five, undefined if any is
};

struct EvaluationReport {
  std::vector<EvaluationRow> rows;
  int taps = kDefaultTaps;
  int bin_ms = kDefaultBinMs;
  double train_fraction = 3.0 / 5.0;
  std::vector<std::string> notes;
};

inline std::optional<double> row_average(const std::array<std::optional<double>, kFingerCount>& r) {
  double sum = 0.0;
  for (const auto& v : r) {
    if (!v) return std::nullopt;
    sum += *v;
  }
  return sum / kFingerCount;
}

/// Validation-split predictions and aligned truth for one finger model.
/// The validation features are embedded on their own, so prediction i
/// matches target bin (validation start + taps - 1 + i).
struct Timecourse {
  Eigen::VectorXd predicted;
  Eigen::VectorXd truth;
  Eigen::Index first_bin = 0;  // absolute bin index of element 0
};

inline Timecourse validation_timecourse(const DecoderModel& model, const Recording& rec, const SplitSpec& split) {
  const auto target = align_glove_to_bins(rec, model.recipe.bin_ms);
  const auto n = target.cols();
  const auto fm = build_columns(model.recipe, rec, model.columns);
  const auto cut = split.boundary(n);
  const auto n_val = n - cut;
  if (n_val < model.taps + 1) throw Error(ErrorCode::TooShort, "validation split shorter than taps + 1 bins");
  Timecourse tc;
  tc.predicted = predict_from_features(model, fm.values.middleRows(cut, n_val));
  tc.first_bin = cut + model.taps - 1;
  tc.truth = target.row(static_cast<int>(model.finger)).segment(tc.first_bin, tc.predicted.size()).transpose();
  return tc;
}

inline EvaluationRow evaluate(const ModelBundle& bundle, const Recording& rec, const SplitSpec& split) {
  EvaluationRow row{rec.subject_id, bundle.recipe.pipeline, {}, std::nullopt};
  for (const auto& tr : bundle.fingers) {
    const auto tc = validation_timecourse(tr.model, rec, split);
    row.r[static_cast<int>(tr.model.finger)] =
        try_pearson({tc.predicted.data(), static_cast<std::size_t>(tc.predicted.size())},
                    {tc.truth.data(), static_cast<std::size_t>(tc.truth.size())});
  }
  row.average = row_average(row.r);
  return row;
}

inline EvaluationReport evaluate(const std::vector<ModelBundle>& bundles, const Recording& rec) {
  if (bundles.empty()) throw Error(ErrorCode::Config, "no models to evaluate");
  EvaluationReport report;
  const auto& cfg = bundles.front().config;
  report.taps = cfg.selection.taps;
  report.bin_ms = cfg.bin_ms;
  report.train_fraction = cfg.selection.train_fraction;
  report.notes.push_back("scores use the validation split only; prediction i is aligned to validation bin taps - 1 + i");
  for (const auto& b : bundles) {
    report.rows.push_back(evaluate(b, rec, SplitSpec{b.config.selection.train_fraction}));
    if (b.recipe.pipeline == Pipeline::pca)
      report.notes.push_back("pca: basis fitted on the whole recording, validation samples included");
  }
  return report;
}

inline std::string format_r(const std::optional<double>& r, int precision) {
  if (!r) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *r;
  return os.str();
}

inline void write_report_tsv(const EvaluationReport& report, std::ostream& out) {
  out << "subject\tpipeline\tthumb\tindex\tmiddle\tring\tlittle\taverage\n";
  for (const auto& row : report.rows) {
    out << row.subject_id << '\t' << pipeline_name(row.pipeline);
    for (const auto& r : row.r) out << '\t' << format_r(r, 6);
    out << '\t' << format_r(row.average, 6) << '\n';
  }
}

inline std::string_view pipeline_label(Pipeline p) {
  switch (p) {
    case Pipeline::raw: return "Raw ECoG AM";
    case Pipeline::pca: return "PCA-ECoG AM";
    case Pipeline::fd: return "FD-ECoG AM";
  }
  return "";
}

/// Aligned text table in the column order Thumb..Little, Av.
inline std::string format_report_text(const EvaluationReport& report) {
  std::ostringstream os;
  std::size_t subj_w = 5;
  for (const auto& row : report.rows) subj_w = std::max(subj_w, row.subject_id.size());
  auto cell = [&](std::string_view s, std::size_t w) {
    os << std::left << std::setw(static_cast<int>(w)) << s << "  ";
  };
  cell("Subj.", subj_w);
  cell("AM feature", 11);
  for (const char* h : {"Thumb", "Index", "Middle", "Ring", "Little"}) cell(h, 6);
  os << "Av.\n";
  for (const auto& row : report.rows) {
    cell(row.subject_id, subj_w);
    cell(pipeline_label(row.pipeline), 11);
    for (const auto& r : row.r) cell(format_r(r, 2), 6);
    os << format_r(row.average, 2) << '\n';
  }
  os << "\nconfig: taps=" << report.taps << " bin_ms=" << report.bin_ms << " train_fraction=" << report.train_fraction
     << '\n';
  for (const auto& n : report.notes) os << "note: " << n << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Time course export

inline void write_timecourse_tsv(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth, int bin_ms,
                                 const std::filesystem::path& path) {
  if (pred.size() != truth.size()) throw Error(ErrorCode::Shape, "prediction and truth lengths differ");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "time_s\ttrue\tpredicted\n";
  char time_buf[32];
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const long ms = static_cast<long>(i) * bin_ms;
    std::snprintf(time_buf, sizeof time_buf, "%ld.%03ld", ms / 1000, ms % 1000);
    out << time_buf << '\t' << std::setprecision(17) << truth[i] << '\t' << pred[i] << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
}

/// Self-contained SVG: predicted solid red, true dashed blue.
inline void write_timecourse_svg(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth, int bin_ms,
                                 const std::filesystem::path& path, const std::string& title = {}) {
  if (pred.size() != truth.size() || pred.size() < 2)
    throw Error(ErrorCode::Shape, "time course needs two equal-length series of at least 2 points");
  constexpr double width = 900, height = 300, margin = 40;
  const double lo = std::min(pred.minCoeff(), truth.minCoeff());
  const double hi = std::max(pred.maxCoeff(), truth.maxCoeff());
  const double span = hi > lo ? hi - lo : 1.0;
  const double t_end = static_cast<double>(pred.size() - 1) * bin_ms / 1000.0;
  auto polyline = [&](const Eigen::VectorXd& v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double x = margin + (width - 2 * margin) * static_cast<double>(i) / static_cast<double>(v.size() - 1);
      const double y = height - margin - (height - 2 * margin) * (v[i] - lo) / span;
      os << (i ? " " : "") << x << ',' << y;
    }
    return os.str();
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n"
      << "<polyline fill=\"none\" stroke=\"blue\" stroke-dasharray=\"6,4\" stroke-width=\"1.2\" points=\""
      << polyline(truth) << "\"/>\n"
      << "<polyline fill=\"none\" stroke=\"red\" stroke-width=\"1.2\" points=\"" << polyline(pred) << "\"/>\n"
      << "<text x=\"" << margin << "\" y=\"" << height - 10 << "\" font-size=\"12\">0 s</text>\n"
      << "<text x=\"" << width - margin - 40 << "\" y=\"" << height - 10 << "\" font-size=\"12\">" << std::fixed
      << std::setprecision(1) << t_end << " s</text>\n"
      << "<text x=\"" << margin << "\" y=\"" << margin - 12 << "\" font-size=\"13\">" << title
      << " (red: predicted, blue dashed: true)</text>\n"
      << "</svg>\n";
  if (!out) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
}

inline void export_timecourse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth, int bin_ms,
                              const std::filesystem::path& tsv_path,
                              const std::optional<std::filesystem::path>& svg_path = std::nullopt) {
  write_timecourse_tsv(pred, truth, bin_ms, tsv_path);
  if (svg_path) write_timecourse_svg(pred, truth, bin_ms, *svg_path);
}

}  // namespace ecogdec
