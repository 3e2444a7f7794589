#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shiftquant/adapt.hpp"
#include "shiftquant/classifier.hpp"
#include "shiftquant/common.hpp"
#include "shiftquant/datagen.hpp"
#include "shiftquant/exp_label_shift.hpp"
#include "shiftquant/metrics.hpp"
#include "shiftquant/rng.hpp"

namespace shiftquant {

struct CondShiftConfig {
  int num_classes = 6;
  int regions = 3;
  int region_width = 5;
  int class_width = 4;
  int class_stride = 2;  // adjacent classes share class_width - class_stride features
  double background_rate = 0.05;
  double region_rate = 0.85;
  // Class separability differs by region, so shifting the region mixture of a
  // class changes its confusion pattern and invalidates the global matrix.
  std::vector<double> class_rate_by_region = {0.35, 0.55, 0.75};
  double population_span = 8.0;  // raw imbalance before source balancing
  double source_span = 2.0;      // imbalance kept in the balanced source
  std::vector<double> target_skew = {0.65, 0.25, 0.10};
  double keep_lo = 0.2;
  double keep_hi = 1.0;
  int n_population = 30000;
  int n_target = 12000;
  int n_oracle = 20000;
  double train_fraction = 0.7;
  MlpConfig classifier{32, 10, 128, 0.1};
  PartitionConfig partition;
  QuantifyOptions quantify;
  std::vector<Method> methods{Method::None, Method::GlobalHard, Method::GlobalSoft,
                              Method::SubspaceSoft};
  std::optional<ShiftSpec> exclusion_shift;  // feature-conditioned exclusion instead of
                                             // subclass reweighting
  int runs = 20;
  std::uint64_t seed = 2;
};

// Every class is a mixture of one subclass per region: a shared region block
// plus a class signature block. Reweighting the region mixture per class
// realizes a conditional shift that reduces to a per-region label shift.
inline GeneratorSpec make_cond_shift_spec(const CondShiftConfig& config) {
  require(config.regions >= 2, "make_cond_shift_spec: need at least 2 regions");
  require(static_cast<int>(config.target_skew.size()) == config.regions,
          "make_cond_shift_spec: target_skew length must equal regions");
  require(static_cast<int>(config.class_rate_by_region.size()) == config.regions,
          "make_cond_shift_spec: class_rate_by_region length must equal regions");
  const int class_span = config.num_classes * config.class_stride;
  require(config.class_width <= class_span,
          "make_cond_shift_spec: class_width exceeds the class feature span");
  const int f = config.regions * config.region_width + class_span;

  GeneratorSpec spec;
  spec.num_classes = config.num_classes;
  spec.class_priors = geometric_priors(config.num_classes, config.population_span);
  spec.subclasses.resize(static_cast<std::size_t>(config.num_classes));
  const int class_base = config.regions * config.region_width;
  for (int y = 0; y < config.num_classes; ++y) {
    for (int g = 0; g < config.regions; ++g) {
      SubclassSpec sub;
      sub.weight = 1.0 / config.regions;
      sub.bernoulli = Vector::Constant(f, config.background_rate);
      for (int t = 0; t < config.class_width; ++t) {
        sub.bernoulli[class_base + (y * config.class_stride + t) % class_span] =
            config.class_rate_by_region[static_cast<std::size_t>(g)];
      }
      for (int t = 0; t < config.region_width; ++t) {
        sub.bernoulli[g * config.region_width + t] = config.region_rate;
      }
      spec.subclasses[static_cast<std::size_t>(y)].push_back(sub);
    }
  }
  spec.feature_groups = single_feature_group(f);
  return spec;
}

// Per-class region weights for the target: the skew profile rotated by the
// class index, so every class shifts toward a different region.
inline std::vector<Vector> rotated_region_weights(const CondShiftConfig& config) {
  std::vector<Vector> weights(static_cast<std::size_t>(config.num_classes));
  for (int y = 0; y < config.num_classes; ++y) {
    Vector w(config.regions);
    for (int g = 0; g < config.regions; ++g) {
      w[g] = config.target_skew[static_cast<std::size_t>((g + y) % config.regions)];
    }
    w /= w.sum();
    weights[static_cast<std::size_t>(y)] = w;
  }
  return weights;
}

// Keep-ratios that flatten the population priors to the requested span.
inline Vector balance_keep_ratios(const Vector& population_priors, double target_span) {
  const int k = static_cast<int>(population_priors.size());
  const Vector profile = geometric_priors(k, target_span);
  Vector keep(k);
  double top = 0.0;
  for (int y = 0; y < k; ++y) {
    require(population_priors[y] > 0.0, "balance_keep_ratios: zero population prior");
    keep[y] = profile[y] / population_priors[y];
    top = std::max(top, keep[y]);
  }
  keep /= top;
  return keep;
}

struct CondShiftRun {
  std::uint64_t seed = 0;
  Vector balance_keep;
  Vector target_keep;
  ClassDistribution source_prior;
  ClassDistribution actual_target;
  std::map<std::string, double> scores;
  std::map<std::string, double> top1;
  std::map<std::string, double> top3;
  std::map<std::string, ClassDistribution> est_priors;
  std::map<std::string, std::string> failures;
  double oracle_top1 = 0.0;
  double oracle_top3 = 0.0;
  int fallback_subspaces = 0;
};

struct CondShiftResult {
  CondShiftConfig config;
  std::vector<CondShiftRun> runs;
  std::map<std::string, double> median_scores;
  std::map<std::string, double> median_top1;
  std::map<std::string, double> median_top3;
  double median_oracle_top1 = 0.0;
  double median_oracle_top3 = 0.0;
};

inline CondShiftRun run_cond_shift_once(const CondShiftConfig& config, std::uint64_t run_seed) {
  const GeneratorSpec spec = make_cond_shift_spec(config);

  const LabeledDataset population =
      sample_dataset(spec, config.n_population, derive_seed(run_seed, 1));
  const Vector balance_keep = balance_keep_ratios(spec.class_priors, config.source_span);
  const LabeledDataset source =
      apply_label_shift(population, balance_keep, derive_seed(run_seed, 2));
  auto [train_ds, cal_ds] =
      split_train_calibration(source, config.train_fraction, derive_seed(run_seed, 3));
  const SoftmaxMlp model = train(train_ds, config.classifier, derive_seed(run_seed, 4));

  CounterRng keep_rng(derive_seed(run_seed, salt::kKeepDraw), 0);
  Vector target_keep(config.num_classes);
  for (int y = 0; y < config.num_classes; ++y) {
    target_keep[y] = config.keep_lo + keep_rng.next_unit() * (config.keep_hi - config.keep_lo);
  }

  // Target distribution: conditional shift (subclass reweight by default,
  // feature-conditioned exclusion when configured) plus label shift.
  GeneratorSpec target_spec = spec;
  auto draw_shifted = [&](int n, std::uint64_t pool_salt, std::uint64_t shift_salt) {
    LabeledDataset pool = sample_dataset(target_spec, n, derive_seed(run_seed, pool_salt));
    if (config.exclusion_shift) {
      pool = apply_conditional_shift(pool, *config.exclusion_shift,
                                     derive_seed(run_seed, pool_salt + 100));
    }
    return apply_label_shift(pool, target_keep, derive_seed(run_seed, shift_salt));
  };
  if (!config.exclusion_shift) {
    target_spec = apply_subclass_reweight(spec, rotated_region_weights(config));
  }
  const LabeledDataset target = draw_shifted(config.n_target, 5, 6);
  const LabeledDataset oracle_ds = draw_shifted(config.n_oracle, 7, 8);
  const SoftmaxMlp oracle_model = train(oracle_ds, config.classifier, derive_seed(run_seed, 9));

  CondShiftRun run;
  run.seed = run_seed;
  run.balance_keep = balance_keep;
  run.target_keep = target_keep;
  run.source_prior = empirical_prior(cal_ds.labels, config.num_classes);
  run.actual_target = empirical_prior(target.labels, config.num_classes);

  const PredictionMatrix oracle_preds = predict_proba(oracle_model, target.features);
  run.oracle_top1 = topk_accuracy(oracle_preds, target.labels, 1);
  run.oracle_top3 = topk_accuracy(oracle_preds, target.labels, 3);

  for (Method method : config.methods) {
    const std::string name = method_name(method);
    try {
      AdaptationReport report =
          is_subspace_method(method)
              ? subspace_da(model, cal_ds, target.features, config.partition, method,
                            config.quantify, run_seed)
              : global_da(model, cal_ds, target.features, method, config.quantify);
      run.scores[name] =
          quantification_score(report.target_prior, run.actual_target, run.source_prior).value;
      run.top1[name] = topk_accuracy(report.calibrated, target.labels, 1);
      run.top3[name] = topk_accuracy(report.calibrated, target.labels, 3);
      run.est_priors[name] = report.target_prior;
      for (const auto& outcome : report.subspaces) run.fallback_subspaces += outcome.fallback;
    } catch (const NumericalError& e) {
      run.failures[name] = e.what();  // recorded as a result row, not an abort
    }
  }
  return run;
}

inline CondShiftResult run_cond_shift_experiment(const CondShiftConfig& config) {
  require(config.runs >= 1, "conditional-shift experiment: runs must be positive");
  require(!config.methods.empty(), "conditional-shift experiment: no methods selected");
  CondShiftResult result;
  result.config = config;
  for (int r = 0; r < config.runs; ++r) {
    result.runs.push_back(
        run_cond_shift_once(config, derive_seed(config.seed, static_cast<std::uint64_t>(r))));
  }
  std::vector<double> otop1, otop3;
  for (const auto& run : result.runs) {
    otop1.push_back(run.oracle_top1);
    otop3.push_back(run.oracle_top3);
  }
  result.median_oracle_top1 = median(otop1);
  result.median_oracle_top3 = median(otop3);
  for (Method method : config.methods) {
    const std::string name = method_name(method);
    std::vector<double> scores, t1, t3;
    for (const auto& run : result.runs) {
      if (run.failures.count(name)) continue;
      scores.push_back(run.scores.at(name));
      t1.push_back(run.top1.at(name));
      t3.push_back(run.top3.at(name));
    }
    if (scores.empty()) continue;  // method failed on every run
    result.median_scores[name] = median(scores);
    result.median_top1[name] = median(t1);
    result.median_top3[name] = median(t3);
  }
  return result;
}

}  // namespace shiftquant
