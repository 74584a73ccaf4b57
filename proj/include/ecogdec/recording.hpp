#pragma once

// Recording data model, the on-disk container and time splitting.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ecogdec/error.hpp"

namespace ecogdec {

/// Row-major so each channel (or finger) is one contiguous series.
using SeriesMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Finger { thumb = 0, index = 1, middle = 2, ring = 3, little = 4 };

inline constexpr int kFingerCount = 5;
inline constexpr std::array<Finger, kFingerCount> kAllFingers = {
    Finger::thumb, Finger::index, Finger::middle, Finger::ring, Finger::little};

inline std::string_view finger_name(Finger f) {
  static constexpr std::array<std::string_view, kFingerCount> names = {"thumb", "index", "middle",
                                                                       "ring", "little"};
  return names[static_cast<int>(f)];
}

inline std::optional<Finger> parse_finger(std::string_view name) {
  for (Finger f : kAllFingers) {
    if (finger_name(f) == name) return f;
  }
  return std::nullopt;
}

inline std::string default_channel_label(int channel) {
  std::ostringstream os;
  os << "ch" << (channel + 1 < 10 ? "0" : "") << channel + 1;
  return os.str();
}

struct Recording {
  std::string subject_id;
  SeriesMatrix ecog;   // n_channels x n_ecog_samples, microvolts
  int ecog_rate = 0;   // Hz
  SeriesMatrix glove;  // 5 x n_glove_samples, thumb..little
  int glove_rate = 0;  // Hz
  std::vector<std::string> channel_labels;

  int n_channels() const { return static_cast<int>(ecog.rows()); }
  Eigen::Index n_ecog_samples() const { return ecog.cols(); }
  Eigen::Index n_glove_samples() const { return glove.cols(); }

  Eigen::Map<const Eigen::VectorXd> channel(int c) const {
    return {ecog.row(c).data(), ecog.cols()};
  }
  Eigen::Map<const Eigen::VectorXd> finger(Finger f) const {
    return {glove.row(static_cast<int>(f)).data(), glove.cols()};
  }
};

/// Throws on the first violated Recording invariant. Fills default channel
/// labels when none are present.
inline void validate(Recording& rec) {
  if (rec.ecog.rows() < 1 || rec.ecog.cols() < 1)
    throw Error(ErrorCode::Validation, "recording needs at least one channel and one sample");
  if (rec.glove.rows() != kFingerCount)
    throw Error(ErrorCode::Validation, "glove must have exactly 5 rows, got " +
                                           std::to_string(rec.glove.rows()));
  if (rec.ecog_rate <= 0 || rec.glove_rate <= 0)
    throw Error(ErrorCode::Rate, "sample rates must be positive");
  if (rec.ecog_rate % rec.glove_rate != 0)
    throw Error(ErrorCode::Rate, "ecog rate " + std::to_string(rec.ecog_rate) +
                                     " Hz is not a multiple of glove rate " +
                                     std::to_string(rec.glove_rate) + " Hz");
  const auto implied = rec.n_ecog_samples() / (rec.ecog_rate / rec.glove_rate);
  if (std::abs(implied - rec.n_glove_samples()) > 1)
    throw Error(ErrorCode::Size, "glove length " + std::to_string(rec.n_glove_samples()) +
                                     " does not match ECoG duration (" + std::to_string(implied) +
                                     " samples expected, +-1)");
  if (rec.channel_labels.empty()) {
    for (int c = 0; c < rec.n_channels(); ++c) rec.channel_labels.push_back(default_channel_label(c));
  } else if (static_cast<int>(rec.channel_labels.size()) != rec.n_channels()) {
    throw Error(ErrorCode::Format, "channel_labels has " + std::to_string(rec.channel_labels.size()) +
                                       " entries for " + std::to_string(rec.n_channels()) +
                                       " channels");
  }
  auto check_finite = [](const SeriesMatrix& m, std::string_view what) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index i = 0; i < m.cols(); ++i)
        if (!std::isfinite(m(r, i)))
          throw Error(ErrorCode::Validation, "non-finite " + std::string(what) + " value at (" +
                                                 std::to_string(r) + ", " + std::to_string(i) + ")");
  };
  check_finite(rec.ecog, "ecog");
  check_finite(rec.glove, "glove");
}

// ---------------------------------------------------------------------------
// Time splitting

struct SplitSpec {
  double train_fraction = 3.0 / 5.0;

  /// Index of the first validation step for a series of `length` steps.
  Eigen::Index boundary(Eigen::Index length) const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw Error(ErrorCode::Config, "train_fraction must lie in (0, 1)");
    if (length < 5)
      throw Error(ErrorCode::TooShort, "cannot split " + std::to_string(length) +
                                           " time steps (need at least 5)");
    return static_cast<Eigen::Index>(std::floor(static_cast<double>(length) * train_fraction));
  }
};

/// Splits along rows (time is the row axis for feature matrices and vectors).
template <typename Derived>
auto split_time(const Eigen::MatrixBase<Derived>& m, const SplitSpec& spec) {
  using Plain = typename Derived::PlainObject;
  const auto cut = spec.boundary(m.rows());
  return std::pair<Plain, Plain>{m.topRows(cut), m.bottomRows(m.rows() - cut)};
}

/// Splits a recording at the bin boundary implied by `bin_ms`, so both parts
/// hold whole bins.
inline std::pair<Recording, Recording> split_time(const Recording& rec, const SplitSpec& spec,
                                                  int bin_ms = 40) {
  const long spb = static_cast<long>(rec.ecog_rate) * bin_ms;
  if (spb % 1000 != 0 || spb == 0) throw Error(ErrorCode::Rate, "bin does not hold whole samples");
  const auto samples_per_bin = spb / 1000;
  const auto bins = rec.n_ecog_samples() / samples_per_bin;
  const auto cut_bin = spec.boundary(bins);
  const auto glove_per_bin = (samples_per_bin * rec.glove_rate) / rec.ecog_rate;
  const auto ecog_cut = cut_bin * samples_per_bin;
  const auto glove_cut = std::min<Eigen::Index>(cut_bin * glove_per_bin, rec.n_glove_samples());

  Recording a = rec, b = rec;
  a.ecog = rec.ecog.leftCols(ecog_cut);
  b.ecog = rec.ecog.rightCols(rec.n_ecog_samples() - ecog_cut);
  a.glove = rec.glove.leftCols(glove_cut);
  b.glove = rec.glove.rightCols(rec.n_glove_samples() - glove_cut);
  return {std::move(a), std::move(b)};
}

inline Eigen::Index samples_per_bin(int rate_hz, int bin_ms) {
  const long prod = static_cast<long>(rate_hz) * bin_ms;
  if (bin_ms <= 0 || rate_hz <= 0 || prod % 1000 != 0)
    throw Error(ErrorCode::Rate, std::to_string(bin_ms) + " ms bins do not hold a whole number of " +
                                     std::to_string(rate_hz) + " Hz samples");
  return prod / 1000;
}

/// Number of AM bins shared by features and targets: the shorter of the
/// durations implied by the ECoG and the glove.
inline Eigen::Index usable_bins(const Recording& rec, int bin_ms) {
  const auto ecog_bins = rec.n_ecog_samples() / samples_per_bin(rec.ecog_rate, bin_ms);
  return std::min<Eigen::Index>(ecog_bins, rec.n_glove_samples());
}

/// One glove sample per AM bin per finger; returns 5 x usable_bins.
inline SeriesMatrix align_glove_to_bins(const Recording& rec, int bin_ms = 40) {
  if (static_cast<long>(bin_ms) * rec.glove_rate != 1000)
    throw Error(ErrorCode::Rate, std::to_string(bin_ms) + " ms bins at " +
                                     std::to_string(rec.glove_rate) +
                                     " Hz glove rate do not give one glove sample per bin");
  return rec.glove.leftCols(usable_bins(rec, bin_ms));
}

// ---------------------------------------------------------------------------
// Container I/O

namespace detail {

inline std::vector<float> read_f32le(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Format, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % 4 != 0)
    throw Error(ErrorCode::Size, path.string() + " holds a partial float (" + std::to_string(bytes) +
                                     " bytes)");
  std::vector<float> out(bytes / 4);
  std::vector<unsigned char> raw(bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(raw[4 * i]) |
                            static_cast<std::uint32_t>(raw[4 * i + 1]) << 8 |
                            static_cast<std::uint32_t>(raw[4 * i + 2]) << 16 |
                            static_cast<std::uint32_t>(raw[4 * i + 3]) << 24;
    out[i] = std::bit_cast<float>(u);
  }
  return out;
}

template <typename Derived>
void write_f32le(const std::filesystem::path& path, const Eigen::DenseBase<Derived>& m) {
  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c)));
      raw.push_back(static_cast<unsigned char>(u));
      raw.push_back(static_cast<unsigned char>(u >> 8));
      raw.push_back(static_cast<unsigned char>(u >> 16));
      raw.push_back(static_cast<unsigned char>(u >> 24));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

template <typename T>
T require_field(const nlohmann::json& header, const char* key) {
  if (!header.contains(key)) throw Error(ErrorCode::Format, "header.json is missing field '" + std::string(key) + "'");
  try {
    return header.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::Format, "header.json field '" + std::string(key) + "' has the wrong type");
  }
}

}  // namespace detail

/// Reads a container directory: header.json + ecog.bin + glove.bin.
inline Recording load_recording(const std::filesystem::path& dir) {
  const auto header_path = dir / "header.json";
  std::ifstream hin(header_path);
  if (!hin) throw Error(ErrorCode::Format, "missing " + header_path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hin);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Format, header_path.string() + " is not valid JSON: " + e.what());
  }
  if (!header.is_object()) throw Error(ErrorCode::Format, header_path.string() + " is not a JSON object");

  Recording rec;
  rec.subject_id = detail::require_field<std::string>(header, "subject_id");
  const auto n_channels = detail::require_field<long>(header, "n_channels");
  const auto n_ecog = detail::require_field<long>(header, "n_ecog_samples");
  const auto n_glove = detail::require_field<long>(header, "n_glove_samples");
  rec.ecog_rate = detail::require_field<int>(header, "ecog_rate_hz");
  rec.glove_rate = detail::require_field<int>(header, "glove_rate_hz");
  const auto dtype = detail::require_field<std::string>(header, "dtype");
  if (dtype != "f32le") throw Error(ErrorCode::Format, "unsupported dtype '" + dtype + "' (expected f32le)");
  if (n_channels < 1 || n_ecog < 1 || n_glove < 0)
    throw Error(ErrorCode::Format, "header.json declares non-positive dimensions");
  if (header.contains("channel_labels"))
    rec.channel_labels = detail::require_field<std::vector<std::string>>(header, "channel_labels");

  const auto ecog = detail::read_f32le(dir / "ecog.bin");
  if (ecog.size() != static_cast<std::size_t>(n_channels * n_ecog))
    throw Error(ErrorCode::Size, "ecog.bin holds " + std::to_string(ecog.size()) + " values, header implies " +
                                     std::to_string(n_channels * n_ecog));
  const auto glove = detail::read_f32le(dir / "glove.bin");
  if (glove.size() != static_cast<std::size_t>(kFingerCount * n_glove))
    throw Error(ErrorCode::Size, "glove.bin holds " + std::to_string(glove.size()) + " values, header implies " +
                                     std::to_string(kFingerCount * n_glove));

  rec.ecog = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                 ecog.data(), n_channels, n_ecog)
                 .cast<double>();
  rec.glove = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                  glove.data(), kFingerCount, n_glove)
                  .cast<double>();
  validate(rec);
  return rec;
}

/// Writes `rec` as a container. Values are narrowed to f32; the header is
/// written in canonical form (sorted keys, 2-space indent) with labels.
inline void save_recording(const Recording& rec, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json header;
  header["subject_id"] = rec.subject_id;
  header["n_channels"] = rec.n_channels();
  header["n_ecog_samples"] = rec.n_ecog_samples();
  header["n_glove_samples"] = rec.n_glove_samples();
  header["ecog_rate_hz"] = rec.ecog_rate;
  header["glove_rate_hz"] = rec.glove_rate;
  header["dtype"] = "f32le";
  if (!rec.channel_labels.empty()) header["channel_labels"] = rec.channel_labels;

  std::ofstream hout(dir / "header.json", std::ios::trunc);
  if (!hout) throw Error(ErrorCode::Io, "cannot write " + (dir / "header.json").string());
  hout << header.dump(2) << '\n';
  detail::write_f32le(dir / "ecog.bin", rec.ecog);
  detail::write_f32le(dir / "glove.bin", rec.glove);
}

}  // namespace ecogdec
