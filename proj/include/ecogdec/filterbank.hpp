#pragma once

// Band decomposition: Butterworth bandpass design (second-order sections)
// and forward-backward zero-phase filtering.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecogdec/error.hpp"
#include "ecogdec/recording.hpp"

namespace ecogdec {

struct BandDefinition {
  std::string name;
  double low_hz = 0.0;
  double high_hz = 0.0;

  bool operator==(const BandDefinition&) const = default;
};

inline void check_band(const BandDefinition& band, double rate_hz) {
  if (!(band.low_hz > 0.0 && band.low_hz < band.high_hz && band.high_hz < rate_hz / 2.0))
    throw Error(ErrorCode::Design, "band '" + band.name + "' [" + std::to_string(band.low_hz) + ", " +
                                       std::to_string(band.high_hz) + "] Hz is not inside (0, " +
                                       std::to_string(rate_hz / 2.0) + ")");
}

/// sub 1-60, gamma 60-100, fast_gamma 100-min(200, 0.45*rate) Hz.
inline std::vector<BandDefinition> default_bands(int ecog_rate) {
  if (ecog_rate < 400)
    throw Error(ErrorCode::UnsupportedRate,
                std::to_string(ecog_rate) + " Hz is below the 400 Hz needed for the default bands");
  return {
      {"sub", 1.0, 60.0},
      {"gamma", 60.0, 100.0},
      {"fast_gamma", 100.0, std::min(200.0, 0.45 * ecog_rate)},
  };
}

/// Direct-form-II-transposed biquad, a[0] == 1.
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};

  std::complex<double> response(std::complex<double> z) const {
    const auto zi = 1.0 / z;
    return (b[0] + zi * (b[1] + zi * b[2])) / (a[0] + zi * (a[1] + zi * a[2]));
  }
};

struct FilterSpec {
  BandDefinition band;
  double rate_hz = 0.0;
  std::vector<Biquad> sections;

  /// Polynomial order of the cascade (number of poles).
  int order() const { return 2 * static_cast<int>(sections.size()); }

  std::complex<double> response(double freq_hz) const {
    const auto z = std::polar(1.0, 2.0 * std::numbers::pi * freq_hz / rate_hz);
    std::complex<double> h = 1.0;
    for (const auto& s : sections) h *= s.response(z);
    return h;
  }

  double gain(double freq_hz) const { return std::abs(response(freq_hz)); }

  std::vector<std::complex<double>> poles() const {
    std::vector<std::complex<double>> out;
    for (const auto& s : sections) {
      const std::complex<double> disc = std::sqrt(std::complex<double>(s.a[1] * s.a[1] - 4.0 * s.a[2]));
      out.push_back((-s.a[1] + disc) / 2.0);
      out.push_back((-s.a[1] - disc) / 2.0);
    }
    return out;
  }
};

inline constexpr int kButterworthOrder = 4;

/// Butterworth bandpass of prototype order `order` (2*order poles), via the
/// lowpass-to-bandpass transform and a prewarped bilinear map. Each section
/// is normalised to unit gain at the band's (warped) geometric centre.
inline FilterSpec design_bandpass(const BandDefinition& band, double rate_hz,
                                  int order = kButterworthOrder) {
  check_band(band, rate_hz);
  if (order < 1) throw Error(ErrorCode::Design, "filter order must be positive");
  using cd = std::complex<double>;
  const double pi = std::numbers::pi;
  const double fs2 = 2.0 * rate_hz;
  const double w_lo = fs2 * std::tan(pi * band.low_hz / rate_hz);
  const double w_hi = fs2 * std::tan(pi * band.high_hz / rate_hz);
  const double bw = w_hi - w_lo;
  const double w0 = std::sqrt(w_lo * w_hi);
  const double center_rad = 2.0 * std::atan(w0 / fs2);
  const cd z_center = std::polar(1.0, center_rad);

  FilterSpec spec{band, rate_hz, {}};
  auto to_z = [&](cd s_pole) { return (fs2 + s_pole) / (fs2 - s_pole); };
  // Section with digital poles z1, z2 (either a conjugate pair or two reals).
  auto add_section = [&](cd z1, cd z2) {
    Biquad q;
    q.a = {1.0, -(z1 + z2).real(), (z1 * z2).real()};
    q.b = {1.0, 0.0, -1.0};  // zeros at z = +1 and z = -1
    const double g = 1.0 / std::abs(q.response(z_center));
    for (auto& c : q.b) c *= g;
    spec.sections.push_back(q);
  };

  for (int k = 1; k <= order; ++k) {
    const cd p = std::polar(1.0, pi * (2.0 * k + order - 1) / (2.0 * order));
    if (p.imag() < -1e-12) continue;  // conjugate partner of an upper-half pole
    const cd half = p * bw / 2.0;
    const cd root = std::sqrt(half * half - w0 * w0);
    if (std::abs(p.imag()) <= 1e-12) {
      // real prototype pole: its two bandpass poles form one section
      add_section(to_z(half + root), to_z(half - root));
    } else {
      const cd za = to_z(half + root), zb = to_z(half - root);
      add_section(za, std::conj(za));
      add_section(zb, std::conj(zb));
    }
  }

  for (const auto& p : spec.poles()) {
    if (!(std::abs(p) < 1.0))
      throw Error(ErrorCode::Design, "band '" + band.name + "' yields a pole on or outside the unit circle");
  }
  return spec;
}

namespace detail {

/// Steady-state initial conditions of the cascade for a unit step input.
inline std::vector<std::array<double, 2>> step_initial_state(const FilterSpec& spec) {
  std::vector<std::array<double, 2>> zi;
  double scale = 1.0;
  for (const auto& s : spec.sections) {
    const double dc = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[1] + s.a[2]);
    const double y = dc;
    zi.push_back({scale * (y - s.b[0]), scale * (s.b[2] - s.a[2] * y)});
    scale *= dc;
  }
  return zi;
}

inline void filter_in_place(const FilterSpec& spec, std::vector<double>& x,
                            const std::vector<std::array<double, 2>>& zi) {
  const double x0 = x.empty() ? 0.0 : x.front();
  for (std::size_t k = 0; k < spec.sections.size(); ++k) {
    const auto& s = spec.sections[k];
    double z1 = zi[k][0] * x0, z2 = zi[k][1] * x0;
    for (double& v : x) {
      const double in = v;
      const double out = s.b[0] * in + z1;
      z1 = s.b[1] * in - s.a[1] * out + z2;
      z2 = s.b[2] * in - s.a[2] * out;
      v = out;
    }
  }
}

}  // namespace detail

/// Forward-backward filtering with odd reflection padding of 3*order samples
/// and steady-state initial conditions at each end. Output length equals
/// input length.
inline std::vector<double> apply_zero_phase(const FilterSpec& spec, std::span<const double> samples) {
  const auto n = samples.size();
  const auto pad = static_cast<std::size_t>(3 * spec.order());
  if (n <= pad)
    throw Error(ErrorCode::TooShort, "series of " + std::to_string(n) + " samples is too short for a filter of order " +
                                         std::to_string(spec.order()) + " (need more than " + std::to_string(pad) + ")");

  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * samples[0] - samples[pad - i];
  std::copy(samples.begin(), samples.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[n + pad + i] = 2.0 * samples[n - 1] - samples[n - 2 - i];

  const auto zi = detail::step_initial_state(spec);
  detail::filter_in_place(spec, ext, zi);
  std::reverse(ext.begin(), ext.end());
  detail::filter_in_place(spec, ext, zi);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

struct BandSignal {
  int channel = 0;
  BandDefinition band;
  std::vector<double> samples;
};

inline std::vector<FilterSpec> design_filterbank(const std::vector<BandDefinition>& bands, double rate_hz) {
  std::vector<FilterSpec> specs;
  specs.reserve(bands.size());
  for (const auto& b : bands) specs.push_back(design_bandpass(b, rate_hz));
  return specs;
}

/// Channel-major, then band in the given order.
inline std::vector<BandSignal> decompose(const Recording& rec, const std::vector<BandDefinition>& bands) {
  const auto specs = design_filterbank(bands, rec.ecog_rate);
  std::vector<BandSignal> out;
  out.reserve(static_cast<std::size_t>(rec.n_channels()) * bands.size());
  for (int c = 0; c < rec.n_channels(); ++c) {
    const std::span<const double> ch(rec.ecog.row(c).data(), static_cast<std::size_t>(rec.n_ecog_samples()));
    for (const auto& spec : specs) out.push_back({c, spec.band, apply_zero_phase(spec, ch)});
  }
  return out;
}

}  // namespace ecogdec
