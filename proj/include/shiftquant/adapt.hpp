#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "shiftquant/calibrate.hpp"
#include "shiftquant/classifier.hpp"
#include "shiftquant/common.hpp"
#include "shiftquant/dataset.hpp"
#include "shiftquant/partition.hpp"
#include "shiftquant/quantify.hpp"
#include "shiftquant/types.hpp"

namespace shiftquant {

enum class Method { None, GlobalHard, GlobalSoft, SubspaceHard, SubspaceSoft };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::None: return "none";
    case Method::GlobalHard: return "global-hard";
    case Method::GlobalSoft: return "global-soft";
    case Method::SubspaceHard: return "subspace-hard";
    case Method::SubspaceSoft: return "subspace-soft";
  }
  return "none";
}

inline Method parse_method(const std::string& name) {
  if (name == "none") return Method::None;
  if (name == "global-hard" || name == "hard") return Method::GlobalHard;
  if (name == "global-soft" || name == "soft") return Method::GlobalSoft;
  if (name == "subspace-hard") return Method::SubspaceHard;
  if (name == "subspace-soft" || name == "subspace") return Method::SubspaceSoft;
  throw ValidationError("unknown method '" + name +
                        "' (expected none, global-hard, global-soft, subspace-hard, "
                        "subspace-soft)");
}

inline bool is_subspace_method(Method m) {
  return m == Method::SubspaceHard || m == Method::SubspaceSoft;
}

inline ConfusionKind confusion_kind_of(Method m) {
  require(m != Method::None, "confusion_kind_of: no confusion kind for 'none'");
  return (m == Method::GlobalHard || m == Method::SubspaceHard) ? ConfusionKind::Hard
                                                                : ConfusionKind::Soft;
}

struct SubspaceOutcome {
  int subspace = 0;
  int source_rows = 0;
  int target_rows = 0;
  std::vector<char> support;
  ClassDistribution source_prior;  // P^s in this subspace
  ClassDistribution target_prior;  // estimated P^t in this subspace
  Vector ratios;
  double weight = 0.0;             // target occupancy pi
  double condition_number = 0.0;
  double clipped_mass = 0.0;
  bool fallback = false;
  std::string note;
};

struct AdaptationReport {
  Method method = Method::None;
  ClassDistribution source_prior;   // global empirical prior of the calibration labels
  ClassDistribution target_prior;   // estimated target prior
  Vector ratios;                    // implied global target/source ratios
  PredictionMatrix calibrated;      // target predictions after recalibration
  double condition_number = 1.0;
  double clipped_mass = 0.0;
  int zero_mass_rows = 0;
  std::vector<SubspaceOutcome> subspaces;   // subspace methods only
  std::vector<std::string> fallback_log;
};

// Baseline: the classifier's own mean prediction stands in for the target
// prior and predictions pass through untouched.
inline AdaptationReport no_adaptation(const ClassDistribution& source_prior,
                                      const PredictionMatrix& target_preds) {
  AdaptationReport r;
  r.method = Method::None;
  r.source_prior = source_prior;
  r.target_prior = target_mean(target_preds);
  r.ratios = build_map(source_prior, r.target_prior).ratios;
  r.calibrated = target_preds;
  return r;
}

// Label-shift pipeline: confusion matrix on labeled source predictions,
// linear solve for the target prior, prior-ratio recalibration of the target
// predictions.
inline AdaptationReport global_da(const PredictionMatrix& source_preds,
                                  const std::vector<int>& source_labels, int num_classes,
                                  const PredictionMatrix& target_preds, ConfusionKind kind,
                                  const QuantifyOptions& options = {}) {
  AdaptationReport r;
  r.method = kind == ConfusionKind::Soft ? Method::GlobalSoft : Method::GlobalHard;
  r.source_prior = empirical_prior(source_labels, num_classes);

  const ConfusionMatrix cm = kind == ConfusionKind::Soft
                                 ? soft_confusion(source_preds, source_labels, num_classes)
                                 : hard_confusion(source_preds, source_labels, num_classes);
  const ClassDistribution p_hat =
      kind == ConfusionKind::Soft ? target_mean(target_preds) : target_mean(harden(target_preds));
  const QuantificationResult q = solve_prior(cm, p_hat, options);
  r.target_prior = q.prior;
  r.condition_number = q.condition_number;
  r.clipped_mass = q.clipped_mass;

  const CalibrationMap map = build_map(r.source_prior, r.target_prior);
  r.ratios = map.ratios;
  RecalibrationResult rec = recalibrate(target_preds, map);
  r.calibrated = std::move(rec.preds);
  r.zero_mass_rows = rec.zero_mass_rows;
  return r;
}

inline ClassDistribution combine_subspace_priors(const std::vector<ClassDistribution>& priors,
                                                 const Vector& weights) {
  require(static_cast<Eigen::Index>(priors.size()) == weights.size(),
          "combine_subspace_priors: weight/prior count mismatch");
  require(!priors.empty(), "combine_subspace_priors: empty input");
  require(std::abs(weights.sum() - 1.0) <= 1e-9,
          "combine_subspace_priors: weights do not sum to 1");
  ClassDistribution out;
  out.p = Vector::Zero(priors.front().size());
  for (std::size_t s = 0; s < priors.size(); ++s) {
    require(priors[s].size() == out.size(), "combine_subspace_priors: prior length mismatch");
    out.p += weights[static_cast<Eigen::Index>(s)] * priors[s].p;
  }
  out.provenance = Provenance::Quantified;
  check_distribution(out.p, 1e-9, "combine_subspace_priors: result");
  return out;
}

namespace detail {

// Folds subspaces below the source/target row floors into their nearest
// neighbor (centroid distance, ties to the lower index). Returns the
// original-subspace -> surviving-subspace map and appends one log line per
// merge.
inline std::vector<int> merge_small_subspaces(const Matrix& centroids,
                                              const std::vector<int>& source_assign,
                                              const std::vector<int>& target_assign,
                                              int min_source_rows, int min_target_rows,
                                              std::vector<std::string>& log) {
  const int n = static_cast<int>(centroids.rows());
  std::vector<int> group(static_cast<std::size_t>(n));
  std::iota(group.begin(), group.end(), 0);
  std::vector<char> live(static_cast<std::size_t>(n), 1);

  while (true) {
    std::vector<int> src_count(static_cast<std::size_t>(n), 0);
    std::vector<int> tgt_count(static_cast<std::size_t>(n), 0);
    for (int a : source_assign) ++src_count[static_cast<std::size_t>(group[static_cast<std::size_t>(a)])];
    for (int a : target_assign) ++tgt_count[static_cast<std::size_t>(group[static_cast<std::size_t>(a)])];

    int live_count = 0;
    for (char l : live) live_count += l;
    if (live_count <= 1) break;

    int victim = -1;
    for (int s = 0; s < n; ++s) {
      if (!live[static_cast<std::size_t>(s)]) continue;
      if (src_count[static_cast<std::size_t>(s)] < min_source_rows ||
          tgt_count[static_cast<std::size_t>(s)] < min_target_rows) {
        victim = s;
        break;
      }
    }
    if (victim < 0) break;

    int nearest = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      if (t == victim || !live[static_cast<std::size_t>(t)]) continue;
      const double d = (centroids.row(t) - centroids.row(victim)).squaredNorm();
      if (d < best) {
        best = d;
        nearest = t;
      }
    }
    for (int g = 0; g < n; ++g) {
      if (group[static_cast<std::size_t>(g)] == victim) group[static_cast<std::size_t>(g)] = nearest;
    }
    live[static_cast<std::size_t>(victim)] = 0;
    log.push_back("merged subspace " + std::to_string(victim) + " into " +
                  std::to_string(nearest) + " (source rows " +
                  std::to_string(src_count[static_cast<std::size_t>(victim)]) + ", target rows " +
                  std::to_string(tgt_count[static_cast<std::size_t>(victim)]) + ")");
  }
  return group;
}

}  // namespace detail

// Conditional-shift pipeline: partitions the input space on source data,
// quantifies and recalibrates each subspace independently against its own
// source prior, and reassembles the global prior as the target-occupancy
// weighted sum. A failed per-subspace solve falls back to that subspace's
// source prior (predictions pass through unadapted there).
inline AdaptationReport subspace_da(const Matrix& source_features,
                                    const PredictionMatrix& source_preds,
                                    const std::vector<int>& source_labels, int num_classes,
                                    const Matrix& target_features,
                                    const PredictionMatrix& target_preds,
                                    const PartitionConfig& config, ConfusionKind kind,
                                    const QuantifyOptions& options, std::uint64_t seed) {
  require(source_features.rows() == source_preds.rows(),
          "subspace_da: source feature/prediction count mismatch");
  require(target_features.rows() == target_preds.rows(),
          "subspace_da: target feature/prediction count mismatch");
  require(target_preds.rows() > 0, "subspace_da: empty target");

  AdaptationReport r;
  r.method = kind == ConfusionKind::Soft ? Method::SubspaceSoft : Method::SubspaceHard;
  r.source_prior = empirical_prior(source_labels, num_classes);
  r.calibrated.probs = Matrix(target_preds.rows(), num_classes);
  r.condition_number = 0.0;

  const SubspacePartition partition =
      fit_partition(source_features, source_labels, num_classes, config, seed);
  const std::vector<int> source_assign = partition.assign(source_features);
  const std::vector<int> target_assign = partition.assign(target_features);
  const std::vector<int> group =
      detail::merge_small_subspaces(partition.centroids, source_assign, target_assign,
                                    config.min_source_rows, config.min_target_rows,
                                    r.fallback_log);

  const int n_target = target_preds.rows();
  std::vector<ClassDistribution> combined_priors;
  std::vector<double> combined_weights;

  for (int s = 0; s < partition.num_subspaces(); ++s) {
    std::vector<int> src_rows;
    for (std::size_t i = 0; i < source_assign.size(); ++i) {
      if (group[static_cast<std::size_t>(source_assign[i])] == s) {
        src_rows.push_back(static_cast<int>(i));
      }
    }
    std::vector<int> tgt_rows;
    for (std::size_t i = 0; i < target_assign.size(); ++i) {
      if (group[static_cast<std::size_t>(target_assign[i])] == s) {
        tgt_rows.push_back(static_cast<int>(i));
      }
    }
    if (src_rows.empty() && tgt_rows.empty()) continue;  // merged away

    SubspaceOutcome out;
    out.subspace = s;
    out.source_rows = static_cast<int>(src_rows.size());
    out.target_rows = static_cast<int>(tgt_rows.size());
    out.weight = static_cast<double>(tgt_rows.size()) / n_target;

    if (src_rows.empty()) {
      out.source_prior = r.source_prior;
      out.target_prior = r.source_prior;
      out.ratios = Vector::Ones(num_classes);
      out.support.assign(static_cast<std::size_t>(num_classes), 0);
      out.fallback = true;
      out.note = "no source rows";
      for (int row : tgt_rows) r.calibrated.probs.row(row) = target_preds.probs.row(row);
      r.fallback_log.push_back("subspace " + std::to_string(s) + " not adapted: no source rows");
      combined_priors.push_back(out.target_prior);
      combined_weights.push_back(out.weight);
      r.subspaces.push_back(std::move(out));
      continue;
    }

    PredictionMatrix sub_src_preds;
    sub_src_preds.probs = Matrix(out.source_rows, num_classes);
    std::vector<int> sub_labels(src_rows.size());
    Eigen::VectorXi class_counts = Eigen::VectorXi::Zero(num_classes);
    for (std::size_t i = 0; i < src_rows.size(); ++i) {
      sub_src_preds.probs.row(static_cast<Eigen::Index>(i)) = source_preds.probs.row(src_rows[i]);
      sub_labels[i] = source_labels[static_cast<std::size_t>(src_rows[i])];
      class_counts[sub_labels[i]] += 1;
    }
    out.source_prior = empirical_prior(sub_labels, num_classes);
    out.support.resize(static_cast<std::size_t>(num_classes));
    int supported = 0;
    for (int y = 0; y < num_classes; ++y) {
      out.support[static_cast<std::size_t>(y)] = class_counts[y] >= config.min_support ? 1 : 0;
      supported += out.support[static_cast<std::size_t>(y)];
    }

    if (tgt_rows.empty()) {
      out.target_prior = out.source_prior;
      out.ratios = Vector::Ones(num_classes);
      out.note = "no target rows";
      r.subspaces.push_back(std::move(out));
      continue;
    }

    PredictionMatrix sub_tgt_preds;
    sub_tgt_preds.probs = Matrix(out.target_rows, num_classes);
    for (std::size_t i = 0; i < tgt_rows.size(); ++i) {
      sub_tgt_preds.probs.row(static_cast<Eigen::Index>(i)) = target_preds.probs.row(tgt_rows[i]);
    }

    bool adapted = false;
    if (supported > 0) {
      try {
        const ConfusionMatrix cm = kind == ConfusionKind::Soft
                                       ? soft_confusion(sub_src_preds, sub_labels, num_classes)
                                       : hard_confusion(sub_src_preds, sub_labels, num_classes);
        const ClassDistribution p_hat = kind == ConfusionKind::Soft
                                            ? target_mean(sub_tgt_preds)
                                            : target_mean(harden(sub_tgt_preds));
        const RestrictedSystem sys = restrict_supported(cm, p_hat, out.support);
        const QuantificationResult q = solve_prior(sys.confusion, sys.p_hat, options);
        out.target_prior = embed_prior(q.prior, sys.index_map, num_classes);
        out.condition_number = q.condition_number;
        out.clipped_mass = q.clipped_mass;
        adapted = true;
      } catch (const NumericalError& e) {
        out.note = e.what();
      }
    } else {
      out.note = "no supported class";
    }

    if (adapted) {
      const CalibrationMap map = build_map(out.source_prior, out.target_prior);
      out.ratios = map.ratios;
      RecalibrationResult rec = recalibrate(sub_tgt_preds, map);
      for (std::size_t i = 0; i < tgt_rows.size(); ++i) {
        r.calibrated.probs.row(tgt_rows[i]) = rec.preds.probs.row(static_cast<Eigen::Index>(i));
      }
      r.zero_mass_rows += rec.zero_mass_rows;
      r.condition_number = std::max(r.condition_number, out.condition_number);
      r.clipped_mass += out.clipped_mass;
    } else {
      out.fallback = true;
      out.target_prior = out.source_prior;
      out.ratios = Vector::Ones(num_classes);
      for (int row : tgt_rows) {
        r.calibrated.probs.row(row) = target_preds.probs.row(row);
      }
      r.fallback_log.push_back("subspace " + std::to_string(s) +
                               " not adapted: " + out.note);
    }

    combined_priors.push_back(out.target_prior);
    combined_weights.push_back(out.weight);
    r.subspaces.push_back(std::move(out));
  }

  require(!combined_priors.empty(), "subspace_da: no subspace contained target rows");
  Vector weights(static_cast<Eigen::Index>(combined_weights.size()));
  for (std::size_t i = 0; i < combined_weights.size(); ++i) {
    weights[static_cast<Eigen::Index>(i)] = combined_weights[i];
  }
  r.target_prior = combine_subspace_priors(combined_priors, weights);
  r.ratios = build_map(r.source_prior, r.target_prior).ratios;
  if (r.condition_number == 0.0) r.condition_number = 1.0;
  return r;
}

inline AdaptationReport global_da(const SoftmaxMlp& model, const LabeledDataset& source,
                                  const Matrix& target_features, Method method,
                                  const QuantifyOptions& options = {}) {
  const PredictionMatrix target_preds = predict_proba(model, target_features);
  if (method == Method::None) {
    return no_adaptation(empirical_prior(source.labels, source.num_classes), target_preds);
  }
  require(!is_subspace_method(method), "global_da: use subspace_da for subspace methods");
  const PredictionMatrix source_preds = predict_proba(model, source.features);
  return global_da(source_preds, source.labels, source.num_classes, target_preds,
                   confusion_kind_of(method), options);
}

inline AdaptationReport subspace_da(const SoftmaxMlp& model, const LabeledDataset& source,
                                    const Matrix& target_features, const PartitionConfig& config,
                                    Method method, const QuantifyOptions& options,
                                    std::uint64_t seed) {
  require(is_subspace_method(method), "subspace_da: method must be subspace-hard or subspace-soft");
  const PredictionMatrix source_preds = predict_proba(model, source.features);
  const PredictionMatrix target_preds = predict_proba(model, target_features);
  return subspace_da(source.features, source_preds, source.labels, source.num_classes,
                     target_features, target_preds, config, confusion_kind_of(method), options,
                     seed);
}

}  // namespace shiftquant
