#include <cstdlib>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace ecogdec;
using testing_support::code_of;
using testing_support::read_lines;
using testing_support::split_tabs;
using testing_support::TempDir;

namespace {

/// Noiseless recording with one planted gamma channel per finger, so each
/// finger is exactly representable by the decoder.
const SyntheticRecording& exact() {
  static const auto s = [] {
    SynthConfig cfg;
    cfg.seed = 12;
    cfg.n_channels = 10;
    cfg.duration_s = 120;
    cfg.noise_std = 0.0;
    for (Finger f : kAllFingers) cfg.informative.push_back({f, 2 * static_cast<int>(f), "gamma", 1.0});
    return generate_synthetic(cfg);
  }();
  return s;
}

const SyntheticRecording& noisy() {
  static const auto s = testing_support::small_synth(13, 120.0, 12, 0.05);
  return s;
}

}  // namespace

TEST(Evaluate, PerfectModelsScoreOne) {
  const auto bundle = train_all(exact().recording, Pipeline::fd);
  const auto report = evaluate(std::vector<ModelBundle>{bundle}, exact().recording);
  ASSERT_EQ(report.rows.size(), 1u);
  for (const auto& r : report.rows[0].r) {
    ASSERT_TRUE(r.has_value());
    EXPECT_GE(*r, 0.995);
  }
  EXPECT_EQ(format_r(report.rows[0].average, 2), "1.00");
}

TEST(Evaluate, ThreePipelineReportShapeAndOrdering) {
  const auto& rec = noisy().recording;
  std::vector<ModelBundle> bundles;
  for (auto p : {Pipeline::raw, Pipeline::pca, Pipeline::fd}) bundles.push_back(train_all(rec, p));
  const auto report = evaluate(bundles, rec);
  ASSERT_EQ(report.rows.size(), 3u);
  for (const auto& row : report.rows) {
    ASSERT_TRUE(row.average.has_value());
    double sum = 0;
    for (const auto& r : row.r) sum += r.value();
    EXPECT_NEAR(*row.average, sum / 5.0, 1e-15);
  }
  EXPECT_GT(*report.rows[2].average, *report.rows[0].average);

  std::ostringstream tsv;
  write_report_tsv(report, tsv);
  std::istringstream in(tsv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "subject\tpipeline\tthumb\tindex\tmiddle\tring\tlittle\taverage");
  int rows = 0;
  while (std::getline(in, line)) {
    const auto cells = split_tabs(line);
    ASSERT_EQ(cells.size(), 8u);
    double sum = 0;
    for (int k = 2; k < 7; ++k) sum += std::stod(cells[static_cast<std::size_t>(k)]);
    EXPECT_NEAR(std::stod(cells[7]), sum / 5.0, 5e-6);
    ++rows;
  }
  EXPECT_EQ(rows, 3);

  const auto text = format_report_text(report);
  for (const char* label : {"Raw ECoG AM", "PCA-ECoG AM", "FD-ECoG AM", "Thumb", "Av.", "taps=25"})
    EXPECT_NE(text.find(label), std::string::npos) << label;
}

TEST(Evaluate, MissingFingersAreReportedUndefined) {
  const auto bundle = train_all(noisy().recording, Pipeline::fd, {}, {Finger::thumb, Finger::ring});
  const auto row = evaluate(bundle, noisy().recording, SplitSpec{});
  EXPECT_TRUE(row.r[0].has_value());
  EXPECT_FALSE(row.r[1].has_value());
  EXPECT_TRUE(row.r[3].has_value());
  EXPECT_FALSE(row.average.has_value());
  EvaluationReport report;
  report.rows.push_back(row);
  std::ostringstream tsv;
  write_report_tsv(report, tsv);
  EXPECT_NE(tsv.str().find("n/a"), std::string::npos);
}

TEST(Evaluate, EmptyModelListIsConfigError) {
  EXPECT_EQ(code_of([] { evaluate(std::vector<ModelBundle>{}, noisy().recording); }), ErrorCode::Config);
}

TEST(Timecourse, ValidationAlignment) {
  const auto bundle = train_all(noisy().recording, Pipeline::fd, {}, {Finger::index});
  const auto& model = bundle.fingers[0].model;
  const auto& rec = noisy().recording;
  const auto tc = validation_timecourse(model, rec, SplitSpec{});
  const auto n = usable_bins(rec, 40);
  const auto cut = SplitSpec{}.boundary(n);
  EXPECT_EQ(tc.first_bin, cut + 24);
  EXPECT_EQ(tc.predicted.size(), n - cut - 24);
  EXPECT_EQ(tc.truth, rec.glove.row(1).segment(tc.first_bin, tc.truth.size()).transpose());
  const auto full = predict(model, rec);
  EXPECT_LE((full.segment(cut, tc.predicted.size()) - tc.predicted).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Timecourse, SixtySecondsGiveFifteenHundredRows) {
  TempDir dir("tc");
  const auto& rec = noisy().recording;
  const Eigen::VectorXd truth = rec.glove.row(2).head(1500).transpose();
  const Eigen::VectorXd pred = truth * 0.5;
  export_timecourse(pred, truth, 40, dir / "tc.tsv", dir / "tc.svg");
  const auto lines = read_lines(dir / "tc.tsv");
  ASSERT_EQ(lines.size(), 1501u);
  EXPECT_EQ(lines[0], "time_s\ttrue\tpredicted");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_tabs(lines[i]);
    ASSERT_EQ(cells.size(), 3u);
    const auto bin = static_cast<long>(i - 1);
    char expected_time[32];
    std::snprintf(expected_time, sizeof expected_time, "%ld.%03ld", bin * 40 / 1000, bin * 40 % 1000);
    ASSERT_EQ(cells[0], expected_time);
    ASSERT_EQ(std::strtod(cells[1].c_str(), nullptr), truth[static_cast<Eigen::Index>(i - 1)]);
    ASSERT_EQ(std::strtod(cells[2].c_str(), nullptr), pred[static_cast<Eigen::Index>(i - 1)]);
  }
  EXPECT_EQ(lines[2].substr(0, 5), "0.040");
  const auto svg = testing_support::read_bytes(dir / "tc.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("stroke=\"red\""), std::string::npos);
  EXPECT_NE(svg.find("stroke=\"blue\" stroke-dasharray"), std::string::npos);
}

TEST(Timecourse, ErrorsCarryPathContext) {
  const Eigen::VectorXd a = Eigen::VectorXd::Ones(10), b = Eigen::VectorXd::Ones(9);
  TempDir dir("tc_err");
  EXPECT_EQ(code_of([&] { write_timecourse_tsv(a, b, 40, dir / "x.tsv"); }), ErrorCode::Shape);
  try {
    write_timecourse_tsv(a, a, 40, dir / "no" / "such" / "dir.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
    EXPECT_NE(std::string(e.what()).find("dir.tsv"), std::string::npos);
  }
}

TEST(Report, RowAverageUndefinedIfAnyFingerIs) {
  std::array<std::optional<double>, kFingerCount> r = {0.1, 0.2, 0.3, 0.4, 0.5};
  EXPECT_NEAR(row_average(r).value(), 0.3, 1e-15);
  r[2].reset();
  EXPECT_FALSE(row_average(r).has_value());
  EXPECT_EQ(format_r(std::nullopt, 2), "n/a");
}
