#pragma once

#include <map>
#include <string>
#include <vector>

#include "shiftquant/adapt.hpp"
#include "shiftquant/classifier.hpp"
#include "shiftquant/common.hpp"
#include "shiftquant/datagen.hpp"
#include "shiftquant/metrics.hpp"
#include "shiftquant/rng.hpp"

namespace shiftquant {

namespace salt {
inline constexpr std::uint64_t kSplit = 0x53504C54ULL;
inline constexpr std::uint64_t kKeepDraw = 0x4B454550ULL;
}  // namespace salt

// Geometric class priors: largest/smallest = span.
inline Vector geometric_priors(int num_classes, double span) {
  require(num_classes >= 1, "geometric_priors: need at least one class");
  require(span >= 1.0, "geometric_priors: span must be >= 1");
  Vector p(num_classes);
  const double r = num_classes > 1 ? std::pow(span, -1.0 / (num_classes - 1)) : 1.0;
  double v = 1.0;
  for (int y = 0; y < num_classes; ++y) {
    p[y] = v;
    v *= r;
  }
  p /= p.sum();
  return p;
}

// Seeded shuffle split into train and calibration subsets.
inline std::pair<LabeledDataset, LabeledDataset> split_train_calibration(const LabeledDataset& ds,
                                                                         double train_fraction,
                                                                         std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "split_train_calibration: fraction must be in (0,1)");
  std::vector<int> order(static_cast<std::size_t>(ds.rows()));
  for (int i = 0; i < ds.rows(); ++i) order[static_cast<std::size_t>(i)] = i;
  CounterRng rng(derive_seed(seed, salt::kSplit), 0);
  shuffle(order, rng);
  const int n_train = static_cast<int>(train_fraction * ds.rows());
  require(n_train >= 1 && n_train < ds.rows(), "split_train_calibration: degenerate split");

  auto take = [&](int from, int count) {
    LabeledDataset part;
    part.features = Matrix(count, ds.cols());
    part.labels.resize(static_cast<std::size_t>(count));
    part.num_classes = ds.num_classes;
    part.numeric_tail = ds.numeric_tail;
    if (!ds.subclass_tags.empty()) part.subclass_tags.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const int row = order[static_cast<std::size_t>(from + i)];
      part.features.row(i) = ds.features.row(row);
      part.labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(row)];
      if (!ds.subclass_tags.empty()) {
        part.subclass_tags[static_cast<std::size_t>(i)] =
            ds.subclass_tags[static_cast<std::size_t>(row)];
      }
    }
    return part;
  };
  return {take(0, n_train), take(n_train, ds.rows() - n_train)};
}

struct LabelShiftConfig {
  int num_classes = 10;
  int features = 32;
  double prior_span = 100.0;
  double background_rate = 0.08;
  double signature_rate = 0.6;
  double mimic_rate = 0.18;  // weak echo of the mirror class's signature
  int signature_width = 5;
  int signature_stride = 3;  // adjacent classes share width - stride features
  int n_source = 48000;
  int n_target = 36000;  // pre-shift pool
  double keep_lo = 0.2;
  double keep_hi = 1.0;
  double train_fraction = 0.7;
  MlpConfig classifier{32, 16, 128, 0.1};
  QuantifyOptions quantify;
  std::vector<Method> methods{Method::None, Method::GlobalHard, Method::GlobalSoft};
  int runs = 20;
  std::uint64_t seed = 1;
};

// Imbalanced overlapping generator: each class raises a short block of
// signature features above the background rate; neighboring blocks overlap
// (width > stride), and each class weakly echoes the signature of its mirror
// class (y <-> K-1-y), so frequent classes bleed into rare ones.
inline GeneratorSpec make_label_shift_spec(const LabelShiftConfig& config) {
  require(config.features >=
              (config.num_classes - 1) * config.signature_stride + config.signature_width,
          "make_label_shift_spec: features too few for the signature layout");
  GeneratorSpec spec;
  spec.num_classes = config.num_classes;
  spec.class_priors = geometric_priors(config.num_classes, config.prior_span);
  spec.subclasses.resize(static_cast<std::size_t>(config.num_classes));
  for (int y = 0; y < config.num_classes; ++y) {
    SubclassSpec sub;
    sub.weight = 1.0;
    sub.bernoulli = Vector::Constant(config.features, config.background_rate);
    const int mirror = config.num_classes - 1 - y;
    for (int t = 0; t < config.signature_width; ++t) {
      const int j = mirror * config.signature_stride + t;
      sub.bernoulli[j] = std::max(sub.bernoulli[j], config.mimic_rate);
    }
    for (int t = 0; t < config.signature_width; ++t) {
      sub.bernoulli[y * config.signature_stride + t] = config.signature_rate;
    }
    spec.subclasses[static_cast<std::size_t>(y)] = {sub};
  }
  spec.feature_groups = single_feature_group(config.features);
  return spec;
}

struct LabelShiftRun {
  std::uint64_t seed = 0;
  Vector keep_ratios;
  ClassDistribution source_prior;   // calibration-split empirical prior
  ClassDistribution actual_target;  // realized target empirical prior
  Vector act_ratios;
  std::map<std::string, double> scores;
  std::map<std::string, Vector> est_ratios;
  std::map<std::string, ClassDistribution> est_priors;
};

struct LabelShiftResult {
  LabelShiftConfig config;
  std::vector<LabelShiftRun> runs;
  std::map<std::string, double> median_scores;
};

inline LabelShiftRun run_label_shift_once(const LabelShiftConfig& config, std::uint64_t run_seed) {
  const GeneratorSpec spec = make_label_shift_spec(config);
  const LabeledDataset source = sample_dataset(spec, config.n_source, derive_seed(run_seed, 1));
  auto [train_ds, cal_ds] =
      split_train_calibration(source, config.train_fraction, derive_seed(run_seed, 2));
  const SoftmaxMlp model = train(train_ds, config.classifier, derive_seed(run_seed, 3));

  const LabeledDataset pool = sample_dataset(spec, config.n_target, derive_seed(run_seed, 4));
  CounterRng keep_rng(derive_seed(run_seed, salt::kKeepDraw), 0);
  Vector keep(config.num_classes);
  for (int y = 0; y < config.num_classes; ++y) {
    keep[y] = config.keep_lo + keep_rng.next_unit() * (config.keep_hi - config.keep_lo);
  }
  const LabeledDataset target = apply_label_shift(pool, keep, derive_seed(run_seed, 5));

  LabelShiftRun run;
  run.seed = run_seed;
  run.keep_ratios = keep;
  run.source_prior = empirical_prior(cal_ds.labels, config.num_classes);
  run.actual_target = empirical_prior(target.labels, config.num_classes);

  for (Method method : config.methods) {
    AdaptationReport report = is_subspace_method(method)
                                  ? subspace_da(model, cal_ds, target.features, PartitionConfig{},
                                                method, config.quantify, run_seed)
                                  : global_da(model, cal_ds, target.features, method,
                                              config.quantify);
    const ScoreResult score =
        quantification_score(report.target_prior, run.actual_target, run.source_prior);
    const std::string name = method_name(method);
    run.scores[name] = score.value;
    run.est_ratios[name] = score.est_ratios;
    run.est_priors[name] = report.target_prior;
    run.act_ratios = score.act_ratios;
  }
  return run;
}

inline LabelShiftResult run_label_shift_experiment(const LabelShiftConfig& config) {
  require(config.runs >= 1, "label-shift experiment: runs must be positive");
  require(!config.methods.empty(), "label-shift experiment: no methods selected");
  LabelShiftResult result;
  result.config = config;
  for (int r = 0; r < config.runs; ++r) {
    result.runs.push_back(
        run_label_shift_once(config, derive_seed(config.seed, static_cast<std::uint64_t>(r))));
  }
  for (Method method : config.methods) {
    const std::string name = method_name(method);
    std::vector<double> scores;
    for (const auto& run : result.runs) scores.push_back(run.scores.at(name));
    result.median_scores[name] = median(scores);
  }
  return result;
}

}  // namespace shiftquant
