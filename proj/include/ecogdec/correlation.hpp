#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "ecogdec/error.hpp"

namespace ecogdec {

/// Sample Pearson correlation, or nullopt when either side has zero variance.
inline std::optional<double> try_pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::Shape, "pearson: lengths differ (" + std::to_string(x.size()) + " vs " +
                                      std::to_string(y.size()) + ")");
  if (x.size() < 2) throw Error(ErrorCode::TooShort, "pearson needs at least two samples");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  // Constant series leave only rounding residue after centring.
  auto negligible = [n](double ss, double m) { return !(ss > n * (1e-13 * m) * (1e-13 * m)); };
  if (negligible(sxx, mx) || negligible(syy, my)) return std::nullopt;
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

inline double pearson(std::span<const double> pred, std::span<const double> truth) {
  if (auto r = try_pearson(pred, truth)) return *r;
  throw Error(ErrorCode::DegenerateData, "correlation undefined for a zero-variance series");
}

}  // namespace ecogdec
