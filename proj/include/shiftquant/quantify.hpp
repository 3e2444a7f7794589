#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "shiftquant/common.hpp"
#include "shiftquant/types.hpp"

namespace shiftquant {

enum class ConfusionKind { Soft, Hard };

inline const char* confusion_kind_name(ConfusionKind k) {
  return k == ConfusionKind::Soft ? "soft" : "hard";
}

// C[y][y'] = mean prediction for class y over rows whose true label is y'.
// Columns with zero support are left zero and flagged via the count vector.
struct ConfusionMatrix {
  Matrix c;
  Eigen::VectorXi support;
  ConfusionKind kind = ConfusionKind::Soft;

  int classes() const { return static_cast<int>(c.cols()); }
};

// Argmax one-hot per row; ties go to the lowest class index.
inline int argmax_row(const Matrix& probs, Eigen::Index i) {
  int best = 0;
  double best_v = probs(i, 0);
  for (Eigen::Index y = 1; y < probs.cols(); ++y) {
    if (probs(i, y) > best_v) {
      best_v = probs(i, y);
      best = static_cast<int>(y);
    }
  }
  return best;
}

inline PredictionMatrix harden(const PredictionMatrix& preds) {
  PredictionMatrix out;
  out.probs = Matrix::Zero(preds.rows(), preds.classes());
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    out.probs(i, argmax_row(preds.probs, i)) = 1.0;
  }
  return out;
}

inline ConfusionMatrix soft_confusion(const PredictionMatrix& preds,
                                      const std::vector<int>& labels, int num_classes) {
  require(preds.rows() == static_cast<int>(labels.size()),
          "soft_confusion: prediction/label count mismatch");
  require(preds.classes() == num_classes, "soft_confusion: prediction width mismatch");
  ConfusionMatrix cm;
  cm.c = Matrix::Zero(num_classes, num_classes);
  cm.support = Eigen::VectorXi::Zero(num_classes);
  cm.kind = ConfusionKind::Soft;
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    require(y >= 0 && y < num_classes, "soft_confusion: label out of range");
    cm.c.col(y) += preds.probs.row(i).transpose();
    cm.support[y] += 1;
  }
  for (int y = 0; y < num_classes; ++y) {
    if (cm.support[y] > 0) cm.c.col(y) /= static_cast<double>(cm.support[y]);
  }
  return cm;
}

inline ConfusionMatrix hard_confusion(const PredictionMatrix& preds,
                                      const std::vector<int>& labels, int num_classes) {
  ConfusionMatrix cm = soft_confusion(harden(preds), labels, num_classes);
  cm.kind = ConfusionKind::Hard;
  return cm;
}

// P_hat = mean prediction row; the classifier's own estimate of the label
// distribution.
inline ClassDistribution target_mean(const PredictionMatrix& preds) {
  require(preds.rows() > 0, "target_mean: empty prediction matrix");
  ClassDistribution d;
  d.p = preds.probs.colwise().mean().transpose();
  d.provenance = Provenance::ClassifierMean;
  return d;
}

struct QuantifyOptions {
  double max_condition = 1e8;
  double conservation_tol = 1e-6;
  int min_support = 5;
};

struct QuantificationResult {
  ClassDistribution prior;        // clipped + renormalized solution
  Vector raw;                     // pre-clip solution of C P = P_hat
  double condition_number = 1.0;
  double clipped_mass = 0.0;
  std::vector<char> support_mask; // classes that entered the solve
  ConfusionKind kind = ConfusionKind::Soft;
};

// Solves C P = P_hat. Throws on singular or badly conditioned C; checks the
// column-stochastic conservation identity sum(P) = sum(P_hat) before
// clipping, so a violation flags a malformed confusion matrix.
inline QuantificationResult solve_prior(const ConfusionMatrix& cm, const ClassDistribution& p_hat,
                                        const QuantifyOptions& options = {}) {
  const int k = cm.classes();
  require(cm.c.rows() == k, "solve_prior: confusion matrix not square");
  require(p_hat.size() == k, "solve_prior: dimension mismatch");
  check_distribution(p_hat.p, 1e-9, "solve_prior: p_hat");

  Eigen::JacobiSVD<Matrix> svd(cm.c);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (smax <= 0.0 || smin <= smax * 1e-15) {
    throw NumericalError(NumericalError::Kind::Singular,
                         "solve_prior: singular confusion matrix",
                         std::numeric_limits<double>::infinity());
  }
  const double cond = smax / smin;
  if (cond > options.max_condition) {
    throw NumericalError(NumericalError::Kind::IllConditioned,
                         "solve_prior: ill-conditioned confusion matrix (cond " +
                             std::to_string(cond) + ")",
                         cond);
  }

  QuantificationResult result;
  result.raw = cm.c.partialPivLu().solve(p_hat.p);
  result.condition_number = cond;
  result.kind = cm.kind;
  result.support_mask.assign(static_cast<std::size_t>(k), 1);

  const double total = result.raw.sum();
  if (std::abs(total - 1.0) > options.conservation_tol) {
    throw NumericalError(NumericalError::Kind::Inconsistent,
                         "solve_prior: solution mass " + std::to_string(total) +
                             " violates conservation; confusion matrix is not column-stochastic",
                         cond);
  }

  Vector clipped = result.raw;
  double removed = 0.0;
  for (int y = 0; y < k; ++y) {
    if (clipped[y] < 0.0) {
      removed -= clipped[y];
      clipped[y] = 0.0;
    }
  }
  result.clipped_mass = removed;
  if (removed > 0.0) {
    const double mass = clipped.sum();
    require(mass > 0.0, "solve_prior: no positive mass after clipping");
    clipped /= mass;
  }
  result.prior.p = clipped;
  result.prior.provenance = Provenance::Quantified;
  return result;
}

struct RestrictedSystem {
  ConfusionMatrix confusion;
  ClassDistribution p_hat;
  std::vector<int> index_map;  // reduced index -> original class
};

// Drops unsupported classes from the linear system. With every class
// supported the inputs pass through untouched; otherwise the reduced
// confusion columns and p_hat are renormalized to restore stochasticity.
inline RestrictedSystem restrict_supported(const ConfusionMatrix& cm,
                                           const ClassDistribution& p_hat,
                                           const std::vector<char>& mask) {
  const int k = cm.classes();
  require(static_cast<int>(mask.size()) == k, "restrict_supported: mask length mismatch");
  require(p_hat.size() == k, "restrict_supported: p_hat length mismatch");
  std::vector<int> kept;
  for (int y = 0; y < k; ++y) {
    if (mask[static_cast<std::size_t>(y)]) kept.push_back(y);
  }
  require(!kept.empty(), "restrict_supported: all classes unsupported");

  RestrictedSystem out;
  out.index_map = kept;
  if (static_cast<int>(kept.size()) == k) {
    out.confusion = cm;
    out.p_hat = p_hat;
    return out;
  }

  const int r = static_cast<int>(kept.size());
  out.confusion.kind = cm.kind;
  out.confusion.c = Matrix(r, r);
  out.confusion.support = Eigen::VectorXi(r);
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < r; ++i) out.confusion.c(i, j) = cm.c(kept[i], kept[j]);
    out.confusion.support[j] = cm.support[kept[j]];
    const double col_sum = out.confusion.c.col(j).sum();
    if (col_sum > 0.0) out.confusion.c.col(j) /= col_sum;
  }
  Vector reduced(r);
  for (int i = 0; i < r; ++i) reduced[i] = p_hat.p[kept[i]];
  const double mass = reduced.sum();
  if (!(mass > 0.0)) {
    throw NumericalError(NumericalError::Kind::Inconsistent,
                         "restrict_supported: no prediction mass on supported classes");
  }
  out.p_hat.p = reduced / mass;
  out.p_hat.provenance = p_hat.provenance;
  return out;
}

// Re-embeds a reduced distribution over the full class set; dropped classes
// receive probability zero.
inline ClassDistribution embed_prior(const ClassDistribution& reduced,
                                     const std::vector<int>& index_map, int num_classes) {
  require(reduced.size() == static_cast<int>(index_map.size()),
          "embed_prior: index map length mismatch");
  ClassDistribution out;
  out.p = Vector::Zero(num_classes);
  for (std::size_t i = 0; i < index_map.size(); ++i) {
    require(index_map[i] >= 0 && index_map[i] < num_classes, "embed_prior: index out of range");
    out.p[index_map[i]] = reduced.p[static_cast<Eigen::Index>(i)];
  }
  out.provenance = reduced.provenance;
  return out;
}

}  // namespace shiftquant
