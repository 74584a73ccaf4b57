#pragma once

// Greedy forward selection of feature columns, scored by the validation
// correlation of a refitted tap-delay Wiener decoder.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecogdec/correlation.hpp"
#include "ecogdec/error.hpp"
#include "ecogdec/features.hpp"
#include "ecogdec/recording.hpp"
#include "ecogdec/wiener.hpp"

namespace ecogdec {

struct SelectionConfig {
  int max_features = 10;
  double min_improvement = 0.01;
  double train_fraction = 3.0 / 5.0;
  int taps = kDefaultTaps;

  void validate() const {
    if (max_features < 1) throw Error(ErrorCode::Config, "max_features must be at least 1");
    if (!(min_improvement >= 0.0 && min_improvement < 1.0))
      throw Error(ErrorCode::Config, "min_improvement must lie in [0, 1)");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw Error(ErrorCode::Config, "train_fraction must lie in (0, 1)");
    if (taps < 1) throw Error(ErrorCode::Config, "taps must be at least 1");
  }
};

struct SelectionStep {
  ColumnMeta column;
  int column_index = 0;  // position in the FeatureMatrix that was searched
  double validation_r = 0.0;
};

struct SelectionTrace {
  std::vector<SelectionStep> steps;
  std::vector<ColumnMeta> final_columns;
  SelectionConfig config;

  std::vector<int> indices() const {
    std::vector<int> out;
    for (const auto& s : steps) out.push_back(s.column_index);
    return out;
  }
};

namespace detail {

/// Symmetric pseudo-inverse; eigenvalues at or below rtol * scale are dropped.
inline Eigen::MatrixXd pinv_symmetric(const Eigen::MatrixXd& m, double scale, double rtol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const auto& ev = eig.eigenvalues();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > rtol * scale) inv[i] = 1.0 / ev[i];
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

/// Tap-delay block of one column: row r holds z(t), z(t-1), ... for
/// t = first + r + taps - 1.
inline Eigen::MatrixXd lag_block(const Eigen::VectorXd& z, Eigen::Index first, Eigen::Index bins, int taps) {
  const auto rows = bins - taps + 1;
  Eigen::MatrixXd block(rows, taps);
  for (int lag = 0; lag < taps; ++lag) block.col(lag) = z.segment(first + taps - 1 - lag, rows);
  return block;
}

/// Owns the validation targets; selection only ever sees the scalar score.
class ValidationScorer {
 public:
  explicit ValidationScorer(Eigen::VectorXd truth) : truth_(std::move(truth)) {}

  std::optional<double> score(const Eigen::VectorXd& prediction) const {
    return try_pearson({prediction.data(), static_cast<std::size_t>(prediction.size())},
                       {truth_.data(), static_cast<std::size_t>(truth_.size())});
  }

  bool degenerate() const {
    return !try_pearson({truth_.data(), static_cast<std::size_t>(truth_.size())},
                        {truth_.data(), static_cast<std::size_t>(truth_.size())})
                .has_value();
  }

 private:
  Eigen::VectorXd truth_;
};

}  // namespace detail

/// Forward stepwise selection. Each candidate set is scored by fitting the
/// Wiener normal equations on the training split (z-scored columns,
/// intercept, `taps` delays) and correlating predictions with the validation
/// split. The normal-equation system grows by one column block per round;
/// each candidate is solved through its Schur complement against the
/// already-selected block.
inline SelectionTrace stepwise_select(const FeatureMatrix& features, const Eigen::VectorXd& target,
                                      const SelectionConfig& config = {}) {
  config.validate();
  const auto n = features.n_bins();
  const int taps = config.taps;
  if (target.size() != n)
    throw Error(ErrorCode::Shape, "target has " + std::to_string(target.size()) + " bins, features have " +
                                      std::to_string(n));
  if (features.n_columns() == 0) throw Error(ErrorCode::EmptyFeatures, "no feature columns to select from");
  if (n < 10 * static_cast<Eigen::Index>(taps))
    throw Error(ErrorCode::TooShort, std::to_string(n) + " bins is fewer than 10 x " + std::to_string(taps) + " taps");
  if (!features.values.allFinite() || !target.allFinite())
    throw Error(ErrorCode::Validation, "non-finite feature or target value");

  const auto cut = SplitSpec{config.train_fraction}.boundary(n);
  const auto n_val = n - cut;
  if (cut < taps + 1 || n_val < taps + 1)
    throw Error(ErrorCode::TooShort, "split leaves fewer than taps + 1 bins on one side");

  const Eigen::VectorXd d = target.segment(taps - 1, cut - taps + 1);
  const detail::ValidationScorer scorer(target.segment(cut + taps - 1, n_val - taps + 1));
  if (scorer.degenerate())
    throw Error(ErrorCode::DegenerateTarget, "target has zero variance on the validation split");

  const auto n_cols = features.n_columns();
  const auto rows = d.size();

  // z-scored copies (training statistics) of every usable column
  std::vector<Eigen::VectorXd> z(static_cast<std::size_t>(n_cols));
  std::vector<bool> usable(static_cast<std::size_t>(n_cols), false);
  for (Eigen::Index c = 0; c < n_cols; ++c) {
    const auto train = features.values.col(c).head(cut);
    const double mean = train.mean();
    const double sd = std::sqrt((train.array() - mean).square().sum() / static_cast<double>(cut - 1));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) continue;
    z[c] = (features.values.col(c).array() - mean) / sd;
    usable[c] = true;
  }

  struct Candidate {
    Eigen::MatrixXd cross;  // X_c^T X_S  (taps x m)
    Eigen::MatrixXd gram;   // X_c^T X_c
    Eigen::VectorXd rhs;    // X_c^T d
  };
  std::vector<Candidate> cand(static_cast<std::size_t>(n_cols));
  for (Eigen::Index c = 0; c < n_cols; ++c) {
    if (!usable[c]) continue;
    const auto x = detail::lag_block(z[c], 0, cut, taps);
    cand[c].cross = x.colwise().sum().transpose();
    cand[c].gram = x.transpose() * x;
    cand[c].rhs = x.transpose() * d;
  }

  // selected system: intercept column first, then one block per selection
  Eigen::MatrixXd val_sel = Eigen::MatrixXd::Ones(n_val - taps + 1, 1);
  Eigen::MatrixXd gram_sel(1, 1);
  gram_sel(0, 0) = static_cast<double>(rows);
  Eigen::VectorXd rhs_sel(1);
  rhs_sel[0] = d.sum();

  SelectionTrace trace;
  trace.config = config;
  std::vector<bool> taken(static_cast<std::size_t>(n_cols), false);
  double current_r = 0.0;

  while (static_cast<int>(trace.steps.size()) < config.max_features) {
    const Eigen::MatrixXd p_sel = detail::pinv_symmetric(gram_sel, gram_sel.diagonal().maxCoeff());
    const Eigen::VectorXd w_sel = p_sel * rhs_sel;

    Eigen::Index best = -1;
    double best_r = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      if (!usable[c] || taken[c]) continue;
      const auto& k = cand[c];
      const Eigen::MatrixXd q = p_sel * k.cross.transpose();
      const Eigen::MatrixXd schur = k.gram - k.cross * q;
      const Eigen::VectorXd resid = k.rhs - k.cross * w_sel;
      const Eigen::VectorXd w_c = detail::pinv_symmetric(schur, k.gram.trace()) * resid;
      const Eigen::VectorXd w_s = w_sel - q * w_c;
      const Eigen::VectorXd pred = val_sel * w_s + detail::lag_block(z[c], cut, n_val, taps) * w_c;
      const auto r = scorer.score(pred);
      if (r && *r > best_r) {
        best_r = *r;
        best = c;
      }
    }
    if (best < 0 || !(best_r > current_r) || best_r - current_r < config.min_improvement) break;

    trace.steps.push_back({features.columns[best], static_cast<int>(best), best_r});
    trace.final_columns.push_back(features.columns[best]);
    taken[best] = true;
    current_r = best_r;
    if (static_cast<int>(trace.steps.size()) >= config.max_features) break;

    // grow the selected system by the winner's block
    const auto x_new = detail::lag_block(z[best], 0, cut, taps);
    const auto m = gram_sel.rows();
    Eigen::MatrixXd grown(m + taps, m + taps);
    grown.topLeftCorner(m, m) = gram_sel;
    grown.bottomLeftCorner(taps, m) = cand[best].cross;
    grown.topRightCorner(m, taps) = cand[best].cross.transpose();
    grown.bottomRightCorner(taps, taps) = cand[best].gram;
    gram_sel = std::move(grown);
    rhs_sel.conservativeResize(m + taps);
    rhs_sel.tail(taps) = cand[best].rhs;
    val_sel.conservativeResize(Eigen::NoChange, m + taps);
    val_sel.rightCols(taps) = detail::lag_block(z[best], cut, n_val, taps);

    for (Eigen::Index c = 0; c < n_cols; ++c) {
      if (!usable[c] || taken[c]) continue;
      auto& k = cand[c];
      k.cross.conservativeResize(Eigen::NoChange, m + taps);
      k.cross.rightCols(taps) = detail::lag_block(z[c], 0, cut, taps).transpose() * x_new;
    }
  }
  return trace;
}

}  // namespace ecogdec
