#pragma once

// Tap-delay embedding and the Wiener (least-squares) solution computed
// through a truncated-SVD pseudo-inverse.

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ecogdec/error.hpp"

namespace ecogdec {

inline constexpr int kDefaultTaps = 25;
inline constexpr double kPinvRtol = 1e-10;

/// Row r (for bin t = r + taps - 1) holds features at t, t-1, ..., t-taps+1
/// followed by a constant 1. Column index of (lag, col) is lag * n_cols + col.
template <typename Derived>
Eigen::MatrixXd embed_tap_delays(const Eigen::MatrixBase<Derived>& features, int taps) {
  if (taps < 1) throw Error(ErrorCode::Config, "taps must be at least 1");
  const auto n_bins = features.rows();
  const auto n_cols = features.cols();
  if (n_bins < taps)
    throw Error(ErrorCode::TooShort, std::to_string(n_bins) + " bins cannot hold " + std::to_string(taps) + " taps");
  const auto rows = n_bins - taps + 1;
  Eigen::MatrixXd design(rows, taps * n_cols + 1);
  for (int lag = 0; lag < taps; ++lag)
    design.middleCols(lag * n_cols, n_cols) = features.middleRows(taps - 1 - lag, rows);
  design.col(design.cols() - 1).setOnes();
  return design;
}

/// Minimum-norm least-squares solution of design * w = target. Singular
/// values below rtol * sigma_max are treated as zero.
inline Eigen::VectorXd fit_wiener(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                                  double rtol = kPinvRtol) {
  if (design.rows() != target.size())
    throw Error(ErrorCode::Shape, "design has " + std::to_string(design.rows()) + " rows but target has " +
                                      std::to_string(target.size()) + " entries");
  if (!design.allFinite() || !target.allFinite())
    throw Error(ErrorCode::Validation, "non-finite value in regression inputs");
  if (design.cols() == 0) return {};

  Eigen::BDCSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? rtol * sv[0] : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
  return svd.matrixV() * (inv.asDiagonal() * (svd.matrixU().transpose() * target));
}

}  // namespace ecogdec
