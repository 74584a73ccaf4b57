#pragma once

// Amplitude-modulation features: per-bin sum of squared voltage, computed on
// raw channels, on filterbank outputs, or on principal-component projections.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecogdec/error.hpp"
#include "ecogdec/filterbank.hpp"
#include "ecogdec/recording.hpp"

namespace ecogdec {

inline constexpr int kDefaultBinMs = 40;

/// Sum of squares over consecutive whole bins; a trailing partial bin is
/// dropped.
inline Eigen::VectorXd compute_am(std::span<const double> samples, int rate_hz, int bin_ms = kDefaultBinMs) {
  const auto spb = samples_per_bin(rate_hz, bin_ms);
  const auto bins = static_cast<Eigen::Index>(samples.size()) / spb;
  Eigen::VectorXd out(bins);
  for (Eigen::Index k = 0; k < bins; ++k) {
    double acc = 0.0;
    const double* p = samples.data() + k * spb;
    for (Eigen::Index i = 0; i < spb; ++i) acc += p[i] * p[i];
    out[k] = acc;
  }
  return out;
}

enum class ColumnKind { raw_channel, channel_band, principal_component };

struct ColumnMeta {
  ColumnKind kind = ColumnKind::raw_channel;
  std::optional<int> channel;
  std::optional<std::string> band;
  std::optional<int> component;

  static ColumnMeta raw(int ch) { return {ColumnKind::raw_channel, ch, std::nullopt, std::nullopt}; }
  static ColumnMeta banded(int ch, std::string band) {
    return {ColumnKind::channel_band, ch, std::move(band), std::nullopt};
  }
  static ColumnMeta pc(int comp) { return {ColumnKind::principal_component, std::nullopt, std::nullopt, comp}; }

  bool operator==(const ColumnMeta&) const = default;
};

inline std::string_view kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::raw_channel: return "raw-channel";
    case ColumnKind::channel_band: return "channel-band";
    case ColumnKind::principal_component: return "principal-component";
  }
  return "";
}

inline std::optional<ColumnKind> parse_kind(std::string_view s) {
  for (auto k : {ColumnKind::raw_channel, ColumnKind::channel_band, ColumnKind::principal_component})
    if (kind_name(k) == s) return k;
  return std::nullopt;
}

/// `chNN`, `chNN:band` or `pcNN`, numbered from 1.
inline std::string column_name(const ColumnMeta& col) {
  auto two_digits = [](int v) {
    std::ostringstream os;
    os << std::setw(2) << std::setfill('0') << v;
    return os.str();
  };
  switch (col.kind) {
    case ColumnKind::raw_channel: return "ch" + two_digits(col.channel.value() + 1);
    case ColumnKind::channel_band: return "ch" + two_digits(col.channel.value() + 1) + ":" + col.band.value();
    case ColumnKind::principal_component: return "pc" + two_digits(col.component.value() + 1);
  }
  return {};
}

struct FeatureMatrix {
  Eigen::MatrixXd values;  // n_bins x n_columns, column-major
  int bin_ms = kDefaultBinMs;
  std::vector<ColumnMeta> columns;

  Eigen::Index n_bins() const { return values.rows(); }
  Eigen::Index n_columns() const { return values.cols(); }

  FeatureMatrix head(Eigen::Index bins) const { return {values.topRows(bins), bin_ms, columns}; }
};

inline FeatureMatrix raw_am_features(const Recording& rec, int bin_ms = kDefaultBinMs) {
  const auto bins = rec.n_ecog_samples() / samples_per_bin(rec.ecog_rate, bin_ms);
  FeatureMatrix fm{Eigen::MatrixXd(bins, rec.n_channels()), bin_ms, {}};
  for (int c = 0; c < rec.n_channels(); ++c) {
    fm.values.col(c) = compute_am({rec.ecog.row(c).data(), static_cast<std::size_t>(rec.n_ecog_samples())},
                                  rec.ecog_rate, bin_ms);
    fm.columns.push_back(ColumnMeta::raw(c));
  }
  return fm;
}

inline FeatureMatrix fd_am_features(const std::vector<BandSignal>& band_signals, int rate_hz,
                                    int bin_ms = kDefaultBinMs) {
  if (band_signals.empty()) throw Error(ErrorCode::EmptyFeatures, "no band signals supplied");
  const auto len = band_signals.front().samples.size();
  const auto bins = static_cast<Eigen::Index>(len) / samples_per_bin(rate_hz, bin_ms);
  FeatureMatrix fm{Eigen::MatrixXd(bins, static_cast<Eigen::Index>(band_signals.size())), bin_ms, {}};
  for (std::size_t j = 0; j < band_signals.size(); ++j) {
    const auto& bs = band_signals[j];
    if (bs.samples.size() != len)
      throw Error(ErrorCode::Shape, "band signal " + std::to_string(j) + " has " + std::to_string(bs.samples.size()) +
                                        " samples, expected " + std::to_string(len));
    fm.values.col(static_cast<Eigen::Index>(j)) = compute_am(bs.samples, rate_hz, bin_ms);
    fm.columns.push_back(ColumnMeta::banded(bs.channel, bs.band.name));
  }
  return fm;
}

/// Same result as fd_am_features(decompose(rec, bands)) without holding every
/// band signal in memory at once.
inline FeatureMatrix fd_am_features(const Recording& rec, const std::vector<BandDefinition>& bands,
                                    int bin_ms = kDefaultBinMs) {
  if (bands.empty()) throw Error(ErrorCode::EmptyFeatures, "no bands supplied");
  const auto specs = design_filterbank(bands, rec.ecog_rate);
  const auto bins = rec.n_ecog_samples() / samples_per_bin(rec.ecog_rate, bin_ms);
  FeatureMatrix fm{Eigen::MatrixXd(bins, rec.n_channels() * static_cast<Eigen::Index>(bands.size())), bin_ms, {}};
  Eigen::Index j = 0;
  for (int c = 0; c < rec.n_channels(); ++c) {
    const std::span<const double> ch(rec.ecog.row(c).data(), static_cast<std::size_t>(rec.n_ecog_samples()));
    for (const auto& spec : specs) {
      fm.values.col(j++) = compute_am(apply_zero_phase(spec, ch), rec.ecog_rate, bin_ms);
      fm.columns.push_back(ColumnMeta::banded(c, spec.band.name));
    }
  }
  return fm;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaBasis {
  Eigen::VectorXd mean;              // n_channels
  Eigen::MatrixXd components;        // n_channels x n_components, orthonormal columns
  Eigen::VectorXd explained_variance;  // non-increasing

  Eigen::Index n_channels() const { return mean.size(); }
  Eigen::Index n_components() const { return components.cols(); }
};

/// Covariance eigendecomposition of mean-centred channels (n - 1
/// normalisation). Every component is kept; the entry of largest magnitude in
/// each component is made positive (lowest channel wins ties).
inline PcaBasis fit_pca(const SeriesMatrix& ecog) {
  const auto n_ch = ecog.rows();
  const auto n = ecog.cols();
  if (n <= n_ch)
    throw Error(ErrorCode::Shape, "PCA needs more samples (" + std::to_string(n) + ") than channels (" +
                                      std::to_string(n_ch) + ")");
  PcaBasis basis;
  basis.mean = ecog.rowwise().mean();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n_ch, n_ch);
  // Accumulate in blocks to keep the centred copy small.
  constexpr Eigen::Index block = 65536;
  for (Eigen::Index start = 0; start < n; start += block) {
    const auto len = std::min(block, n - start);
    const Eigen::MatrixXd centred = ecog.middleCols(start, len).colwise() - basis.mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centred);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n - 1);
  if (cov.trace() <= 1e-20 * std::max(1.0, basis.mean.squaredNorm()))
    throw Error(ErrorCode::DegenerateData, "all channels are constant");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::DegenerateData, "covariance eigendecomposition failed");
  basis.components = eig.eigenvectors().rowwise().reverse();
  basis.explained_variance = eig.eigenvalues().reverse().cwiseMax(0.0);
  for (Eigen::Index k = 0; k < basis.components.cols(); ++k) {
    auto col = basis.components.col(k);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < col.size(); ++i)
      if (std::abs(col[i]) > std::abs(col[arg])) arg = i;
    if (col[arg] < 0.0) col = -col;
  }
  return basis;
}

/// n_components x n_samples scores of the centred data.
inline SeriesMatrix project(const PcaBasis& basis, const SeriesMatrix& ecog) {
  if (ecog.rows() != basis.n_channels())
    throw Error(ErrorCode::Shape, "PCA basis expects " + std::to_string(basis.n_channels()) + " channels, got " +
                                      std::to_string(ecog.rows()));
  return basis.components.transpose() * (ecog.colwise() - basis.mean);
}

inline SeriesMatrix reconstruct(const PcaBasis& basis, const SeriesMatrix& scores) {
  return (basis.components * scores).colwise() + basis.mean;
}

/// AM of the projection onto each listed component (all when empty).
inline FeatureMatrix pca_am_features(const Recording& rec, const PcaBasis& basis, int bin_ms = kDefaultBinMs,
                                     const std::vector<int>& components = {}) {
  if (rec.n_channels() != basis.n_channels())
    throw Error(ErrorCode::Shape, "PCA basis expects " + std::to_string(basis.n_channels()) + " channels, got " +
                                      std::to_string(rec.n_channels()));
  std::vector<int> comps = components;
  if (comps.empty())
    for (int k = 0; k < basis.n_components(); ++k) comps.push_back(k);
  const auto bins = rec.n_ecog_samples() / samples_per_bin(rec.ecog_rate, bin_ms);
  FeatureMatrix fm{Eigen::MatrixXd(bins, static_cast<Eigen::Index>(comps.size())), bin_ms, {}};
  Eigen::VectorXd virtual_channel(rec.n_ecog_samples());
  for (std::size_t j = 0; j < comps.size(); ++j) {
    const auto w = basis.components.col(comps[j]);
    const double offset = w.dot(basis.mean);
    virtual_channel.noalias() = rec.ecog.transpose() * w;
    virtual_channel.array() -= offset;
    fm.values.col(static_cast<Eigen::Index>(j)) =
        compute_am({virtual_channel.data(), static_cast<std::size_t>(virtual_channel.size())}, rec.ecog_rate, bin_ms);
    fm.columns.push_back(ColumnMeta::pc(comps[j]));
  }
  return fm;
}

/// Debug export: `bin_index` followed by one column per feature.
inline void write_feature_tsv(const FeatureMatrix& fm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "bin_index";
  for (const auto& c : fm.columns) out << '\t' << column_name(c);
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < fm.n_bins(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < fm.n_columns(); ++c) out << '\t' << fm.values(r, c);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
}

}  // namespace ecogdec
