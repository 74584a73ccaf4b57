#include <sys/wait.h>

#include <cstdlib>

#include <gtest/gtest.h>

#include "support.hpp"

using testing_support::read_bytes;
using testing_support::read_lines;
using testing_support::split_tabs;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out, err;
};

/// Runs the CLI from `cwd` with stdout/stderr captured next to it.
Run cli(const fs::path& cwd, const std::string& args) {
  const auto out = cwd.parent_path() / (cwd.filename().string() + ".stdout");
  const auto err = cwd.parent_path() / (cwd.filename().string() + ".stderr");
  const std::string cmd = "cd '" + cwd.string() + "' && '" ECOGDEC_CLI_PATH "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  Run r{WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read_bytes(out), read_bytes(err)};
  fs::remove(out);
  fs::remove(err);
  return r;
}

std::vector<std::string> listing(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(dir)) names.push_back(fs::relative(e.path(), dir).string());
  std::sort(names.begin(), names.end());
  return names;
}

/// One small trained setup shared by the CLI tests.
class CliFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    work_ = dir_->path() / "work";
    fs::create_directories(work_);
    ASSERT_EQ(cli(work_, "synth --seed 3 --out data --channels 8 --duration-s 160").status, 0);
    ASSERT_EQ(cli(work_, "train --data data --pipeline fd --finger all --out fd.json").status, 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static TempDir* dir_;
  static fs::path work_;
};

TempDir* CliFixture::dir_ = nullptr;
fs::path CliFixture::work_;

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  TempDir dir("cli_usage");
  EXPECT_EQ(cli(dir.path(), "synth --seed 42").status, 2);
  EXPECT_EQ(cli(dir.path(), "").status, 2);
  EXPECT_EQ(cli(dir.path(), "frobnicate").status, 2);
  EXPECT_EQ(cli(dir.path(), "train --data x --out m.json --pipeline wavelet").status, 2);
  EXPECT_EQ(cli(dir.path(), "train --data x --out m.json --finger pinky").status, 2);
  EXPECT_EQ(cli(dir.path(), "plot --data x --model m.json --finger thumb --seconds 0 --out tc.tsv").status, 2);
  EXPECT_EQ(cli(dir.path(), "synth --out d --mode sideways").status, 2);
}

TEST(Cli, MissingHeaderIsFormatErrorNamingFile) {
  TempDir dir("cli_header");
  fs::create_directories(dir / "empty");
  const auto r = cli(dir.path(), "train --data empty --out m.json");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("format error"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("header.json"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "m.json"));
}

TEST(Cli, SynthIsByteReproducible) {
  TempDir dir("cli_synth");
  ASSERT_EQ(cli(dir.path(), "synth --seed 9 --out a --channels 4 --duration-s 20").status, 0);
  ASSERT_EQ(cli(dir.path(), "synth --seed 9 --out b --channels 4 --duration-s 20").status, 0);
  for (const char* f : {"header.json", "ecog.bin", "glove.bin", "ground_truth.json", "ground_truth_target.bin"})
    EXPECT_EQ(read_bytes(dir / "a" / f), read_bytes(dir / "b" / f)) << f;
  const auto rec = ecogdec::load_recording(dir / "a");
  EXPECT_EQ(rec.n_channels(), 4);
  EXPECT_EQ(rec.n_ecog_samples(), 20000);
  EXPECT_EQ(listing(dir.path()).size(), 12u);  // two directories of five files, nothing else
}

TEST_F(CliFixture, EvaluateWritesEightColumnReport) {
  const auto r = cli(work_, "evaluate --data data --model fd.json --report report.tsv --text report.txt");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto lines = read_lines(work_ / "report.tsv");
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(split_tabs(lines[0]).size(), 8u);
  const auto cells = split_tabs(lines[1]);
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_EQ(cells[0], "synth-3");
  EXPECT_EQ(cells[1], "fd");
  EXPECT_NE(r.out.find("FD-ECoG AM"), std::string::npos);
  EXPECT_EQ(read_bytes(work_ / "report.txt"), r.out);
}

TEST_F(CliFixture, EvaluateIsByteReproducible) {
  ASSERT_EQ(cli(work_, "train --data data --pipeline fd --finger all --out fd2.json").status, 0);
  EXPECT_EQ(read_bytes(work_ / "fd.json"), read_bytes(work_ / "fd2.json"));
  ASSERT_EQ(cli(work_, "evaluate --data data --model fd.json --report r1.tsv").status, 0);
  ASSERT_EQ(cli(work_, "evaluate --data data --model fd2.json --report r2.tsv").status, 0);
  EXPECT_EQ(read_bytes(work_ / "r1.tsv"), read_bytes(work_ / "r2.tsv"));
}

TEST_F(CliFixture, ChannelMismatchExitsOne) {
  ASSERT_EQ(cli(work_, "synth --seed 4 --out other --channels 6 --duration-s 20").status, 0);
  const auto r = cli(work_, "evaluate --data other --model fd.json");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("shape error"), std::string::npos) << r.err;
}

TEST_F(CliFixture, PlotExportsSixtySeconds) {
  const auto r = cli(work_, "plot --data data --model fd.json --finger thumb --seconds 60 --out tc.tsv,tc.svg");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto lines = read_lines(work_ / "tc.tsv");
  ASSERT_EQ(lines.size(), 1501u);
  const auto rec = ecogdec::load_recording(work_ / "data");
  const auto bins = ecogdec::usable_bins(rec, 40);
  const auto first = ecogdec::SplitSpec{}.boundary(bins) + 24;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_tabs(lines[i]);
    ASSERT_EQ(std::strtod(cells[1].c_str(), nullptr), rec.glove(0, first + static_cast<Eigen::Index>(i) - 1));
  }
  EXPECT_TRUE(fs::exists(work_ / "tc.svg"));
}

TEST_F(CliFixture, PredictAndFeaturesExports) {
  ASSERT_EQ(cli(work_, "predict --data data --model fd.json --finger ring --out pred.tsv").status, 0);
  const auto pred = read_lines(work_ / "pred.tsv");
  ASSERT_EQ(pred.size(), 4000u - 24u + 1u);
  EXPECT_EQ(pred[0], "bin_index\tpredicted");
  EXPECT_EQ(split_tabs(pred[1])[0], "24");
  ASSERT_EQ(cli(work_, "features --data data --pipeline raw --out raw.tsv").status, 0);
  const auto feats = read_lines(work_ / "raw.tsv");
  ASSERT_EQ(feats.size(), 4001u);
  EXPECT_EQ(split_tabs(feats[0]).size(), 9u);
}

TEST_F(CliFixture, MissingFingerInModelIsRuntimeError) {
  ASSERT_EQ(cli(work_, "train --data data --pipeline raw --finger index --out raw_index.json").status, 0);
  EXPECT_EQ(cli(work_, "predict --data data --model raw_index.json --finger thumb --out p.tsv").status, 1);
}
