#pragma once

// Synthetic recordings with a planted linear map from AM features to finger
// targets. The generator is the ground-truth oracle for end-to-end tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ecogdec/error.hpp"
#include "ecogdec/features.hpp"
#include "ecogdec/filterbank.hpp"
#include "ecogdec/recording.hpp"

namespace ecogdec {

/// band: informative power confined to one filterbank band.
/// raw: informative power is broadband, so the raw-channel AM carries it.
enum class SynthMode { band, raw };

inline constexpr std::string_view kBroadband = "broadband";

struct Planting {
  Finger finger = Finger::thumb;
  int channel = 0;
  std::string band;  // default band name, or "broadband" in raw mode
  double weight = 1.0;
};

struct SynthConfig {
  std::uint64_t seed = 42;
  int n_channels = 48;
  double duration_s = 600.0;
  int ecog_rate = 1000;
  int glove_rate = 25;
  SynthMode mode = SynthMode::band;
  std::vector<Planting> informative;  // empty: default plantings for the mode
  double noise_std = 0.05;            // target noise, relative to target std
  bool trials = true;                 // 2 s movement + 2 s rest cycles

  // Generator amplitudes, microvolts.
  double background_std = 50.0;  // AR(1) background, coefficient 0.99
  double floor_std = 5.0;        // white noise floor
  double burst_std_band = 20.0;
  double burst_std_raw = 300.0;
  int smoothing_bins = 10;  // causal moving average applied to planted AM
};

/// Two plantings per finger, slot s in 0..9 on channel s * n / 10, so all ten
/// channels differ once n >= 10. Band mode uses gamma and fast_gamma.
inline std::vector<Planting> default_plantings(SynthMode mode, int n_channels) {
  std::vector<Planting> out;
  for (Finger f : kAllFingers) {
    const int k = static_cast<int>(f);
    const std::string first = mode == SynthMode::band ? "gamma" : std::string(kBroadband);
    const std::string second = mode == SynthMode::band ? "fast_gamma" : std::string(kBroadband);
    out.push_back({f, (2 * k) * n_channels / 10, first, 1.0});
    out.push_back({f, (2 * k + 1) * n_channels / 10, second, 0.6});
  }
  return out;
}

struct GroundTruth {
  SynthMode mode = SynthMode::band;
  std::vector<Planting> plantings;
  SeriesMatrix noiseless_target;  // 5 x n_bins
  SeriesMatrix envelope;          // 5 x n_bins, bin means of the movement envelope
  int smoothing_bins = 10;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticRecording {
  Recording recording;
  GroundTruth truth;
};

/// MT19937-64 stream (output fixed by the C++ standard) with portable
/// uniform and Box-Muller normal conversions.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, n).
  int below(int n) { return std::min(n - 1, static_cast<int>(uniform() * n)); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace detail {

inline void check_synth(const SynthConfig& cfg, const std::vector<Planting>& plantings) {
  if (cfg.n_channels < 1) throw Error(ErrorCode::Config, "n_channels must be positive");
  if (!(cfg.duration_s > 0.0)) throw Error(ErrorCode::Config, "duration must be positive");
  if (cfg.ecog_rate <= 0 || cfg.glove_rate <= 0 || cfg.ecog_rate % cfg.glove_rate != 0 || 1000 % cfg.glove_rate != 0)
    throw Error(ErrorCode::Config, "ecog rate must be a multiple of the glove rate, and the glove period whole ms");
  if (!(cfg.noise_std >= 0.0) || !std::isfinite(cfg.noise_std)) throw Error(ErrorCode::Config, "noise_std must be >= 0");
  if (cfg.smoothing_bins < 1) throw Error(ErrorCode::Config, "smoothing_bins must be positive");
  const auto bands = default_bands(cfg.ecog_rate);
  for (const auto& p : plantings) {
    if (p.channel < 0 || p.channel >= cfg.n_channels)
      throw Error(ErrorCode::Config, "planted channel " + std::to_string(p.channel) + " outside [0, " +
                                         std::to_string(cfg.n_channels) + ")");
    if (!std::isfinite(p.weight)) throw Error(ErrorCode::Config, "planted weight must be finite");
    const bool known = cfg.mode == SynthMode::raw
                           ? p.band == kBroadband
                           : std::any_of(bands.begin(), bands.end(), [&](const auto& b) { return b.name == p.band; });
    if (!known) throw Error(ErrorCode::Config, "planting band '" + p.band + "' is not valid in this mode");
  }
}

/// Per-finger movement envelope at the ECoG rate.
inline SeriesMatrix movement_envelopes(const SynthConfig& cfg, Eigen::Index n_samples, PortableRng& rng) {
  SeriesMatrix env = SeriesMatrix::Zero(kFingerCount, n_samples);
  const double rate = cfg.ecog_rate;
  if (cfg.trials) {
    const auto cycle = static_cast<Eigen::Index>(4 * cfg.ecog_rate);
    const auto move = static_cast<Eigen::Index>(2 * cfg.ecog_rate);
    std::array<int, kFingerCount> order{0, 1, 2, 3, 4};
    for (Eigen::Index c = 0; c * cycle < n_samples; ++c) {
      const auto slot = static_cast<int>(c % kFingerCount);
      if (slot == 0)
        for (int i = kFingerCount - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
      const double amp = 0.5 + 0.5 * rng.uniform();
      const int f = order[slot];
      for (Eigen::Index i = 0; i < move && c * cycle + i < n_samples; ++i)
        env(f, c * cycle + i) = amp * std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(move));
    }
  } else {
    // piecewise-linear random levels, one knot per second
    for (int f = 0; f < kFingerCount; ++f) {
      double prev = rng.uniform();
      for (Eigen::Index start = 0; start < n_samples; start += static_cast<Eigen::Index>(rate)) {
        const double next = rng.uniform();
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rate) && start + i < n_samples; ++i)
          env(f, start + i) = prev + (next - prev) * static_cast<double>(i) / rate;
        prev = next;
      }
    }
  }
  return env;
}

/// Unit-amplitude oscillation whose instantaneous frequency wanders inside
/// the band (OU process, 20 ms time constant, squashed to 70% of the half width).
/// A Gaussian band-passed carrier has too few degrees of freedom per 40 ms bin
/// in a 40 Hz band for its AM to follow the envelope closely.
inline void wandering_carrier(const FilterSpec& band, int rate, PortableRng& rng, std::vector<double>& out) {
  const double centre = 0.5 * (band.band.low_hz + band.band.high_hz);
  const double swing = 0.35 * (band.band.high_hz - band.band.low_hz);
  const double a = std::exp(-1.0 / (0.02 * rate));
  const double kick = std::sqrt(1.0 - a * a);
  double u = rng.normal(), phase = 2.0 * std::numbers::pi * rng.uniform();
  for (auto& v : out) {
    u = a * u + kick * rng.normal();
    phase += 2.0 * std::numbers::pi * (centre + swing * std::tanh(u)) / rate;
    v = std::cos(phase);
  }
}

inline Eigen::VectorXd causal_moving_average(const Eigen::VectorXd& x, int window) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const auto len = std::min<Eigen::Index>(k + 1, window);
    out[k] = x.segment(k - len + 1, len).sum() / static_cast<double>(len);
  }
  return out;
}

}  // namespace detail

/// Background per channel: AR(1) noise plus a white floor. Each planting adds
/// a burst (band-passed wandering-frequency carrier in band mode, white noise in raw mode) gated by
/// its finger's movement envelope. The target for finger f is
///   sum_p weight_p * movavg(AM_p) / mean(AM_p)
/// where AM_p is the AM feature the decoding pipeline computes for the
/// planting's (channel, band) or raw channel, plus Gaussian noise of
/// noise_std times the noiseless target's standard deviation.
inline SyntheticRecording generate_synthetic(const SynthConfig& cfg) {
  const auto plantings = cfg.informative.empty() ? default_plantings(cfg.mode, cfg.n_channels) : cfg.informative;
  detail::check_synth(cfg, plantings);

  const int bin_ms = 1000 / cfg.glove_rate;
  const auto spb = samples_per_bin(cfg.ecog_rate, bin_ms);
  const auto n_bins = static_cast<Eigen::Index>(std::llround(cfg.duration_s * cfg.glove_rate));
  if (n_bins < 1) throw Error(ErrorCode::Config, "duration shorter than one bin");
  const auto n_samples = n_bins * spb;

  PortableRng rng(cfg.seed);
  const auto env = detail::movement_envelopes(cfg, n_samples, rng);

  Recording rec;
  rec.subject_id = "synth-" + std::to_string(cfg.seed);
  rec.ecog_rate = cfg.ecog_rate;
  rec.glove_rate = cfg.glove_rate;
  rec.ecog.resize(cfg.n_channels, n_samples);

  constexpr double phi = 0.99;
  const double innovation = cfg.background_std * std::sqrt(1.0 - phi * phi);
  for (int c = 0; c < cfg.n_channels; ++c) {
    double ar = cfg.background_std * rng.normal();
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      ar = phi * ar + innovation * rng.normal();
      rec.ecog(c, i) = ar + cfg.floor_std * rng.normal();
    }
  }

  const auto bands = default_bands(cfg.ecog_rate);
  auto band_spec = [&](const std::string& name) {
    for (const auto& b : bands)
      if (b.name == name) return design_bandpass(b, cfg.ecog_rate);
    throw Error(ErrorCode::Config, "unknown band " + name);
  };

  std::vector<double> noise(static_cast<std::size_t>(n_samples));
  for (const auto& p : plantings) {
    double amp = cfg.burst_std_raw;
    if (cfg.mode == SynthMode::band) {
      const auto spec = band_spec(p.band);
      detail::wandering_carrier(spec, cfg.ecog_rate, rng, noise);
      noise = apply_zero_phase(spec, noise);
      double ss = 0.0;
      for (double v : noise) ss += v * v;
      amp = cfg.burst_std_band / std::sqrt(ss / static_cast<double>(noise.size()));
    } else {
      for (auto& v : noise) v = rng.normal();
    }
    const int f = static_cast<int>(p.finger);
    for (Eigen::Index i = 0; i < n_samples; ++i) rec.ecog(p.channel, i) += amp * env(f, i) * noise[static_cast<std::size_t>(i)];
  }

  // quantise to the container's f32 so in-memory and on-disk data agree
  rec.ecog = rec.ecog.cast<float>().cast<double>();

  GroundTruth truth;
  truth.mode = cfg.mode;
  truth.plantings = plantings;
  truth.smoothing_bins = cfg.smoothing_bins;
  truth.noise_std = cfg.noise_std;
  truth.seed = cfg.seed;
  truth.noiseless_target = SeriesMatrix::Zero(kFingerCount, n_bins);
  truth.envelope.resize(kFingerCount, n_bins);
  for (int f = 0; f < kFingerCount; ++f)
    for (Eigen::Index k = 0; k < n_bins; ++k) truth.envelope(f, k) = env.row(f).segment(k * spb, spb).mean();

  for (const auto& p : plantings) {
    const std::span<const double> ch(rec.ecog.row(p.channel).data(), static_cast<std::size_t>(n_samples));
    const Eigen::VectorXd am = cfg.mode == SynthMode::band
                                   ? compute_am(apply_zero_phase(band_spec(p.band), ch), cfg.ecog_rate, bin_ms)
                                   : compute_am(ch, cfg.ecog_rate, bin_ms);
    const double mean = am.mean();
    if (!(mean > 0.0)) throw Error(ErrorCode::Config, "planted feature has no power");
    truth.noiseless_target.row(static_cast<int>(p.finger)) +=
        (p.weight / mean) * detail::causal_moving_average(am, cfg.smoothing_bins).transpose();
  }

  rec.glove.resize(kFingerCount, n_bins);
  for (int f = 0; f < kFingerCount; ++f) {
    const auto row = truth.noiseless_target.row(f);
    const double mean = row.mean();
    const double sd = std::sqrt((row.array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(1, n_bins - 1)));
    const double noise_sd = cfg.noise_std * sd;
    for (Eigen::Index k = 0; k < n_bins; ++k) rec.glove(f, k) = row[k] + noise_sd * rng.normal();
  }
  rec.glove = rec.glove.cast<float>().cast<double>();
  validate(rec);
  return {std::move(rec), std::move(truth)};
}

inline std::string_view mode_name(SynthMode m) { return m == SynthMode::band ? "band" : "raw"; }

/// Writes ground_truth.json plus the noiseless target as an f32le sidecar.
inline void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& dir) {
  nlohmann::json plantings = nlohmann::json::array();
  for (const auto& p : truth.plantings)
    plantings.push_back({{"finger", finger_name(p.finger)}, {"channel", p.channel}, {"band", p.band}, {"weight", p.weight}});
  nlohmann::json j{{"format", "ecogdec-ground-truth/1"},
                   {"seed", truth.seed},
                   {"mode", mode_name(truth.mode)},
                   {"noise_std", truth.noise_std},
                   {"smoothing_bins", truth.smoothing_bins},
                   {"plantings", plantings},
                   {"noiseless_target_file", "ground_truth_target.bin"},
                   {"noiseless_target_shape", {kFingerCount, truth.noiseless_target.cols()}},
                   {"dtype", "f32le"}};
  std::ofstream out(dir / "ground_truth.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / "ground_truth.json").string());
  out << j.dump(2) << '\n';
  detail::write_f32le(dir / "ground_truth_target.bin", truth.noiseless_target);
}

}  // namespace ecogdec
