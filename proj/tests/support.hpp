#pragma once

// Shared helpers for the test binaries: seeded generators, scratch
// directories and brute-force reference implementations.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecogdec/ecogdec.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double normal() { return rng_.normal(); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
  int integer(int lo, int hi) { return lo + rng_.below(hi - lo + 1); }
  std::vector<double> normals(std::size_t n, double sd = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = sd * normal();
    return v;
  }
  Eigen::MatrixXd matrix(Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal();
    return m;
  }
  Eigen::VectorXd vector(Eigen::Index n) { return matrix(n, 1).col(0); }

 private:
  ecogdec::PortableRng rng_;
};

/// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("ecogdec_test_" + tag + "_" + std::to_string(std::random_device{}()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Code of the ecogdec::Error thrown by `f`, or nullopt if none is thrown.
template <typename F>
std::optional<ecogdec::ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const ecogdec::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

// ---------------------------------------------------------------------------
// Reference implementations, written independently of the library code.

inline std::vector<double> brute_force_am(const std::vector<double>& v, int spb) {
  std::vector<double> out;
  for (std::size_t start = 0; start + spb <= v.size(); start += spb) {
    long double s = 0;
    for (int i = 0; i < spb; ++i) s += static_cast<long double>(v[start + i]) * v[start + i];
    out.push_back(static_cast<double>(s));
  }
  return out;
}

/// Textbook two-pass Pearson in long double.
inline double reference_pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  long double mx = 0, my = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

/// max |Aᵀ(Aw - d)| relative to ‖A‖_F ‖d‖₂.
inline double normal_equation_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& w, const Eigen::VectorXd& d) {
  const Eigen::VectorXd g = a.transpose() * (a * w - d);
  return g.cwiseAbs().maxCoeff() / (a.norm() * d.norm());
}

inline double rms(const std::vector<double>& v, std::size_t from, std::size_t to) {
  long double s = 0;
  for (std::size_t i = from; i < to; ++i) s += static_cast<long double>(v[i]) * v[i];
  return static_cast<double>(std::sqrt(s / static_cast<long double>(to - from)));
}

inline std::vector<double> sine(double freq_hz, double rate_hz, std::size_t n, double phase = 0.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate_hz + phase);
  return v;
}

/// Validation r of a tap-delay linear decoder on `cols`, computed from
/// scratch: training-split z-scoring, explicit lag layout and a complete
/// orthogonal decomposition solve.
inline double oracle_validation_r(const Eigen::MatrixXd& features, const std::vector<int>& cols,
                                  const Eigen::VectorXd& target, int taps, double train_fraction) {
  const auto n = features.rows();
  const auto cut = static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * train_fraction));
  const auto m = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd z(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::VectorXd c = features.col(cols[static_cast<std::size_t>(j)]);
    long double mean = 0, ss = 0;
    for (Eigen::Index i = 0; i < cut; ++i) mean += c[i];
    mean /= cut;
    for (Eigen::Index i = 0; i < cut; ++i) ss += (c[i] - mean) * (c[i] - mean);
    const double sd = static_cast<double>(std::sqrt(ss / (cut - 1)));
    z.col(j) = (c.array() - static_cast<double>(mean)) / sd;
  }
  auto design = [&](Eigen::Index first, Eigen::Index len) {
    Eigen::MatrixXd x(len - taps + 1, taps * m + 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (int lag = 0; lag < taps; ++lag)
        for (Eigen::Index j = 0; j < m; ++j) x(r, lag * m + j) = z(first + r + taps - 1 - lag, j);
      x(r, taps * m) = 1.0;
    }
    return x;
  };
  const Eigen::MatrixXd train = design(0, cut);
  const Eigen::VectorXd w = train.completeOrthogonalDecomposition().solve(target.segment(taps - 1, cut - taps + 1));
  const Eigen::VectorXd pred = design(cut, n - cut) * w;
  return reference_pearson(pred, target.segment(cut + taps - 1, n - cut - taps + 1));
}

/// Small synthetic recording for fast tests.
inline ecogdec::SyntheticRecording small_synth(std::uint64_t seed, double duration_s = 120.0, int n_channels = 12,
                                               double noise_std = 0.05,
                                               ecogdec::SynthMode mode = ecogdec::SynthMode::band) {
  ecogdec::SynthConfig cfg;
  cfg.seed = seed;
  cfg.duration_s = duration_s;
  cfg.n_channels = n_channels;
  cfg.noise_std = noise_std;
  cfg.mode = mode;
  return ecogdec::generate_synthetic(cfg);
}

}  // namespace testing_support
