#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shiftquant/common.hpp"
#include "shiftquant/dataset.hpp"
#include "shiftquant/partition.hpp"
#include "shiftquant/rng.hpp"
#include "shiftquant/types.hpp"

namespace shiftquant {

namespace salt {
inline constexpr std::uint64_t kSample = 0x53414D50ULL;
inline constexpr std::uint64_t kLabelShift = 0x4C534846ULL;
inline constexpr std::uint64_t kCondShift = 0x43534846ULL;
inline constexpr std::uint64_t kRatioGrid = 0x47524944ULL;
}  // namespace salt

// One mixture component of a class: per-feature Bernoulli parameters plus an
// optional numeric-feature range (uniform draw inside [lo, hi] within [0, 1]).
struct SubclassSpec {
  double weight = 1.0;
  Vector bernoulli;
  std::optional<std::array<double, 2>> numeric_range;
};

// Ground-truth data model: class priors, per-class subclass mixtures, and a
// grouping of feature indices into conditionally independent blocks.
struct GeneratorSpec {
  int num_classes = 0;
  Vector class_priors;
  std::vector<std::vector<SubclassSpec>> subclasses;
  std::vector<std::vector<int>> feature_groups;

  int num_features() const {
    if (subclasses.empty() || subclasses.front().empty()) return 0;
    return static_cast<int>(subclasses.front().front().bernoulli.size());
  }

  bool has_numeric() const {
    return !subclasses.empty() && !subclasses.front().empty() &&
           subclasses.front().front().numeric_range.has_value();
  }

  int num_columns() const { return num_features() + (has_numeric() ? 1 : 0); }

  void validate() const {
    require(num_classes >= 1, "GeneratorSpec.num_classes: must be positive");
    require(class_priors.size() == num_classes, "GeneratorSpec.class_priors: wrong length");
    require(class_priors.minCoeff() >= 0.0, "GeneratorSpec.class_priors: negative entry");
    require(std::abs(class_priors.sum() - 1.0) <= 1e-9,
            "GeneratorSpec.class_priors: does not sum to 1");
    require(static_cast<int>(subclasses.size()) == num_classes,
            "GeneratorSpec.subclasses: need one mixture per class");
    const int f = num_features();
    require(f >= 1, "GeneratorSpec.subclasses: empty feature vectors");
    const bool numeric = has_numeric();
    for (int y = 0; y < num_classes; ++y) {
      const auto& mix = subclasses[y];
      require(!mix.empty(), "GeneratorSpec.subclasses[" + std::to_string(y) + "]: empty");
      double total = 0.0;
      for (std::size_t c = 0; c < mix.size(); ++c) {
        const std::string tag =
            "GeneratorSpec.subclasses[" + std::to_string(y) + "][" + std::to_string(c) + "]";
        require(mix[c].weight >= 0.0, tag + ".weight: negative");
        total += mix[c].weight;
        require(static_cast<int>(mix[c].bernoulli.size()) == f,
                tag + ".bernoulli: wrong length");
        require(mix[c].bernoulli.minCoeff() >= 0.0 && mix[c].bernoulli.maxCoeff() <= 1.0,
                tag + ".bernoulli: parameter outside [0,1]");
        require(mix[c].numeric_range.has_value() == numeric,
                tag + ".numeric_range: must be set for all subclasses or none");
        if (numeric) {
          const auto& r = *mix[c].numeric_range;
          require(0.0 <= r[0] && r[0] < r[1] && r[1] <= 1.0,
                  tag + ".numeric_range: need 0 <= lo < hi <= 1");
        }
      }
      require(std::abs(total - 1.0) <= 1e-9,
              "GeneratorSpec.subclasses[" + std::to_string(y) +
                  "]: mixture weights do not sum to 1");
    }
    require(!feature_groups.empty(), "GeneratorSpec.feature_groups: empty");
    std::vector<int> seen(f, 0);
    for (const auto& group : feature_groups) {
      require(!group.empty(), "GeneratorSpec.feature_groups: empty group");
      for (int j : group) {
        require(j >= 0 && j < f, "GeneratorSpec.feature_groups: index out of range");
        require(seen[j] == 0, "GeneratorSpec.feature_groups: index repeated");
        seen[j] = 1;
      }
    }
    for (int j = 0; j < f; ++j) {
      require(seen[j] == 1, "GeneratorSpec.feature_groups: feature " + std::to_string(j) +
                                " not covered");
    }
  }
};

inline std::vector<std::vector<int>> single_feature_group(int num_features) {
  std::vector<int> all(num_features);
  for (int j = 0; j < num_features; ++j) all[j] = j;
  return {all};
}

// Exclusion weights keyed by the bit pattern of a small feature set: the
// probability of dropping a row of class y whose designated features spell
// pattern b is weights(y, b).
struct ConditionalExclusion {
  std::vector<int> features;  // binary feature indices, lowest bit first
  Matrix weights;             // K x 2^m
};

// Shift recipe: per-class keep ratios (label shift), feature-conditioned
// exclusions and subclass reweights (conditional shift).
struct ShiftSpec {
  std::optional<Vector> keep_ratios;
  std::vector<ConditionalExclusion> conditional_exclusion;
  std::optional<std::vector<Vector>> subclass_reweights;

  void validate(const GeneratorSpec& spec) const {
    const int k = spec.num_classes;
    const int f = spec.num_features();
    if (keep_ratios) {
      require(keep_ratios->size() == k, "ShiftSpec.keep_ratios: wrong length");
      require(keep_ratios->minCoeff() >= 0.0 && keep_ratios->maxCoeff() <= 1.0,
              "ShiftSpec.keep_ratios: ratio outside [0,1]");
    }
    for (std::size_t e = 0; e < conditional_exclusion.size(); ++e) {
      const auto& excl = conditional_exclusion[e];
      const std::string tag = "ShiftSpec.conditional_exclusion[" + std::to_string(e) + "]";
      require(!excl.features.empty() && excl.features.size() <= 16, tag + ".features: bad size");
      for (int j : excl.features) {
        require(j >= 0 && j < f, tag + ".features: index out of range");
      }
      const auto patterns = static_cast<Eigen::Index>(1) << excl.features.size();
      require(excl.weights.rows() == k && excl.weights.cols() == patterns,
              tag + ".weights: need K x 2^m matrix");
      require(excl.weights.minCoeff() >= 0.0 && excl.weights.maxCoeff() <= 1.0,
              tag + ".weights: weight outside [0,1]");
    }
    if (subclass_reweights) {
      require(static_cast<int>(subclass_reweights->size()) == k,
              "ShiftSpec.subclass_reweights: need one vector per class");
      for (int y = 0; y < k; ++y) {
        const auto& w = (*subclass_reweights)[y];
        require(w.size() == static_cast<Eigen::Index>(spec.subclasses[y].size()),
                "ShiftSpec.subclass_reweights[" + std::to_string(y) +
                    "]: weight count does not match subclass count");
        require(w.minCoeff() >= 0.0, "ShiftSpec.subclass_reweights: negative weight");
        require(std::abs(w.sum() - 1.0) <= 1e-9,
                "ShiftSpec.subclass_reweights[" + std::to_string(y) + "]: does not sum to 1");
      }
    }
  }
};

// Draws n i.i.d. rows: label from class_priors, subclass from the class
// mixture, features independently Bernoulli. Row i consumes only stream
// (seed, i), so the result does not depend on evaluation order.
inline LabeledDataset sample_dataset(const GeneratorSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  require(n >= 1, "sample_dataset: n must be positive");

  const int f = spec.num_features();
  const bool numeric = spec.has_numeric();
  LabeledDataset ds;
  ds.features = Matrix(n, spec.num_columns());
  ds.labels.resize(n);
  ds.subclass_tags.resize(n);
  ds.num_classes = spec.num_classes;
  ds.numeric_tail = numeric;

  const std::uint64_t base = derive_seed(seed, salt::kSample);
  for (int i = 0; i < n; ++i) {
    CounterRng rng(base, static_cast<std::uint64_t>(i));
    const int y = rng.categorical(spec.class_priors);
    std::vector<double> weights(spec.subclasses[y].size());
    for (std::size_t c = 0; c < weights.size(); ++c) weights[c] = spec.subclasses[y][c].weight;
    const int c = rng.categorical(weights);
    const auto& sub = spec.subclasses[y][c];
    for (int j = 0; j < f; ++j) {
      ds.features(i, j) = rng.next_unit() < sub.bernoulli[j] ? 1.0 : 0.0;
    }
    if (numeric) {
      const auto& r = *sub.numeric_range;
      ds.features(i, f) = r[0] + rng.next_unit() * (r[1] - r[0]);
    }
    ds.labels[i] = y;
    ds.subclass_tags[i] = c;
  }
  return ds;
}

namespace detail {

inline LabeledDataset keep_rows(const LabeledDataset& ds, const std::vector<char>& keep) {
  int survivors = 0;
  for (char k : keep) survivors += k;
  require(survivors > 0, "empty shifted dataset");
  LabeledDataset out;
  out.features = Matrix(survivors, ds.cols());
  out.labels.resize(survivors);
  out.num_classes = ds.num_classes;
  out.numeric_tail = ds.numeric_tail;
  const bool tags = !ds.subclass_tags.empty();
  if (tags) out.subclass_tags.resize(survivors);
  int at = 0;
  for (int i = 0; i < ds.rows(); ++i) {
    if (!keep[i]) continue;
    out.features.row(at) = ds.features.row(i);
    out.labels[at] = ds.labels[i];
    if (tags) out.subclass_tags[at] = ds.subclass_tags[i];
    ++at;
  }
  return out;
}

}  // namespace detail

// Label shift: class-y rows survive independently with probability
// keep_ratios[y]; survivor order is preserved.
inline LabeledDataset apply_label_shift(const LabeledDataset& ds, const Vector& keep_ratios,
                                        std::uint64_t seed) {
  require(keep_ratios.size() == ds.num_classes, "apply_label_shift: keep_ratios wrong length");
  require(keep_ratios.minCoeff() >= 0.0 && keep_ratios.maxCoeff() <= 1.0,
          "apply_label_shift: ratio outside [0,1]");
  const std::uint64_t base = derive_seed(seed, salt::kLabelShift);
  std::vector<char> keep(ds.rows());
  for (int i = 0; i < ds.rows(); ++i) {
    CounterRng rng(base, static_cast<std::uint64_t>(i));
    keep[i] = rng.next_unit() < keep_ratios[ds.labels[i]] ? 1 : 0;
  }
  return detail::keep_rows(ds, keep);
}

// Conditional shift: each row is dropped with the exclusion probability its
// class's weight table assigns to the row's designated feature pattern.
inline LabeledDataset apply_conditional_shift(const LabeledDataset& ds, const ShiftSpec& shift,
                                              std::uint64_t seed) {
  for (const auto& excl : shift.conditional_exclusion) {
    require(!excl.features.empty(), "apply_conditional_shift: empty feature set");
    for (int j : excl.features) {
      require(j >= 0 && j < ds.cols(), "apply_conditional_shift: feature index out of range");
    }
    require(excl.weights.rows() == ds.num_classes &&
                excl.weights.cols() == (static_cast<Eigen::Index>(1) << excl.features.size()),
            "apply_conditional_shift: weight table shape mismatch");
    require(excl.weights.minCoeff() >= 0.0 && excl.weights.maxCoeff() <= 1.0,
            "apply_conditional_shift: weight outside [0,1]");
  }
  const std::uint64_t base = derive_seed(seed, salt::kCondShift);
  std::vector<char> keep(ds.rows());
  for (int i = 0; i < ds.rows(); ++i) {
    CounterRng rng(base, static_cast<std::uint64_t>(i));
    bool survive = true;
    for (const auto& excl : shift.conditional_exclusion) {
      Eigen::Index pattern = 0;
      for (std::size_t b = 0; b < excl.features.size(); ++b) {
        if (ds.features(i, excl.features[b]) != 0.0) pattern |= Eigen::Index(1) << b;
      }
      const double u = rng.next_unit();
      if (u < excl.weights(ds.labels[i], pattern)) survive = false;
    }
    keep[i] = survive ? 1 : 0;
  }
  return detail::keep_rows(ds, keep);
}

// Returns a spec identical except for the subclass mixture weights.
inline GeneratorSpec apply_subclass_reweight(const GeneratorSpec& spec,
                                             const std::vector<Vector>& new_weights) {
  spec.validate();
  require(static_cast<int>(new_weights.size()) == spec.num_classes,
          "apply_subclass_reweight: need one weight vector per class");
  GeneratorSpec out = spec;
  for (int y = 0; y < spec.num_classes; ++y) {
    const auto& w = new_weights[y];
    require(w.size() == static_cast<Eigen::Index>(spec.subclasses[y].size()),
            "apply_subclass_reweight: weight count does not match subclass count for class " +
                std::to_string(y));
    require(w.minCoeff() >= 0.0, "apply_subclass_reweight: negative weight");
    require(std::abs(w.sum() - 1.0) <= 1e-9,
            "apply_subclass_reweight: weights for class " + std::to_string(y) +
                " do not sum to 1");
    for (std::size_t c = 0; c < spec.subclasses[y].size(); ++c) {
      out.subclasses[y][c].weight = w[c];
    }
  }
  return out;
}

// Ground-truth density p(x | y) over the binary features (numeric tail, when
// present, contributes its uniform density).
inline double class_density(const GeneratorSpec& spec, int label, const Vector& row) {
  const int f = spec.num_features();
  double total = 0.0;
  for (const auto& sub : spec.subclasses[label]) {
    double d = sub.weight;
    for (int j = 0; j < f && d > 0.0; ++j) {
      d *= row[j] != 0.0 ? sub.bernoulli[j] : 1.0 - sub.bernoulli[j];
    }
    if (spec.has_numeric() && d > 0.0) {
      const auto& r = *sub.numeric_range;
      const double x = row[f];
      d *= (x >= r[0] && x <= r[1]) ? 1.0 / (r[1] - r[0]) : 0.0;
    }
    total += d;
  }
  return total;
}

// Exact posterior p(y | x) under the generator: the Bayes-optimal
// probabilistic classifier for spec-generated data.
inline PredictionMatrix bayes_posterior(const GeneratorSpec& spec, const Matrix& features) {
  spec.validate();
  require(features.cols() == spec.num_columns(), "bayes_posterior: feature width mismatch");
  const int n = static_cast<int>(features.rows());
  const int k = spec.num_classes;
  PredictionMatrix preds;
  preds.probs = Matrix(n, k);
  for (int i = 0; i < n; ++i) {
    const Vector row = features.row(i);
    double total = 0.0;
    for (int y = 0; y < k; ++y) {
      const double joint = spec.class_priors[y] * class_density(spec, y, row);
      preds.probs(i, y) = joint;
      total += joint;
    }
    if (total <= 0.0) {
      preds.probs.row(i).setConstant(1.0 / k);  // off-support input
    } else {
      preds.probs.row(i) /= total;
    }
  }
  return preds;
}

// One (subspace, class) cell of the constant-ratio check: the spread of
// p_target(x|y) / p_source(x|y) across sampled points of the subspace.
struct RatioConditionEntry {
  int subspace = 0;
  int cls = 0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double spread = 0.0;   // max/min - 1; infinity when the ratio diverges
  int points = 0;
  bool supported = false;
  bool flagged = false;
};

struct RatioConditionReport {
  std::vector<RatioConditionEntry> entries;  // subspace-major, class-minor
  double tolerance = 0.0;
  int distinct_points = 0;

  int flagged_count() const {
    int c = 0;
    for (const auto& e : entries) c += e.flagged;
    return c;
  }

  const RatioConditionEntry& at(int subspace, int cls, int num_classes) const {
    return entries[static_cast<std::size_t>(subspace) * num_classes + cls];
  }
};

// Estimates, per subspace and class, how far the two specs are from the
// constant-conditional-ratio condition on a sampled grid of inputs. Subspaces
// a class has no mass in are reported unsupported rather than failing.
inline RatioConditionReport verify_ratio_condition(const GeneratorSpec& source_spec,
                                                   const GeneratorSpec& target_spec,
                                                   const SubspacePartition& partition,
                                                   double tolerance,
                                                   int grid_points = 512,
                                                   std::uint64_t seed = 0) {
  source_spec.validate();
  target_spec.validate();
  require(source_spec.num_classes == target_spec.num_classes,
          "verify_ratio_condition: class count mismatch");
  require(source_spec.num_features() == target_spec.num_features(),
          "verify_ratio_condition: feature count mismatch");
  require(source_spec.has_numeric() == target_spec.has_numeric(),
          "verify_ratio_condition: numeric feature mismatch");
  require(grid_points >= 2, "verify_ratio_condition: need at least 2 grid points");

  const int half = grid_points / 2;
  const LabeledDataset a = sample_dataset(source_spec, half, derive_seed(seed, salt::kRatioGrid));
  const LabeledDataset b =
      sample_dataset(target_spec, half, derive_seed(seed, salt::kRatioGrid + 1));

  // Deduplicate sampled inputs; with binary features collisions are common.
  std::map<std::vector<double>, int> unique;
  std::vector<Vector> points;
  auto add_rows = [&](const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> key(m.cols());
      for (Eigen::Index j = 0; j < m.cols(); ++j) key[j] = m(i, j);
      if (unique.emplace(std::move(key), 1).second) points.push_back(m.row(i));
    }
  };
  add_rows(a.features);
  add_rows(b.features);

  Matrix grid(static_cast<Eigen::Index>(points.size()), source_spec.num_columns());
  for (std::size_t i = 0; i < points.size(); ++i) grid.row(static_cast<Eigen::Index>(i)) = points[i];
  const std::vector<int> assignment = partition.assign(grid);

  const int num_subspaces = partition.num_subspaces();
  const int k = source_spec.num_classes;
  RatioConditionReport report;
  report.tolerance = tolerance;
  report.distinct_points = static_cast<int>(points.size());
  report.entries.resize(static_cast<std::size_t>(num_subspaces) * k);

  const double inf = std::numeric_limits<double>::infinity();
  for (int s = 0; s < num_subspaces; ++s) {
    for (int y = 0; y < k; ++y) {
      RatioConditionEntry entry;
      entry.subspace = s;
      entry.cls = y;
      entry.min_ratio = inf;
      entry.max_ratio = 0.0;
      bool diverged = false;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (assignment[i] != s) continue;
        const double ps = class_density(source_spec, y, points[i]);
        const double pt = class_density(target_spec, y, points[i]);
        if (ps <= 0.0 && pt <= 0.0) continue;
        ++entry.points;
        if (ps <= 0.0) {
          diverged = true;
          continue;
        }
        const double ratio = pt / ps;
        entry.min_ratio = std::min(entry.min_ratio, ratio);
        entry.max_ratio = std::max(entry.max_ratio, ratio);
      }
      entry.supported = entry.points > 0;
      if (!entry.supported) {
        entry.min_ratio = 0.0;
        entry.spread = 0.0;
      } else if (diverged || entry.min_ratio <= 0.0) {
        entry.spread = inf;
      } else {
        entry.spread = entry.max_ratio / entry.min_ratio - 1.0;
      }
      entry.flagged = entry.supported && entry.spread > tolerance;
      report.entries[static_cast<std::size_t>(s) * k + y] = entry;
    }
  }
  return report;
}

}  // namespace shiftquant
