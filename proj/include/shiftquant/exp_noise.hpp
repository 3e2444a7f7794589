#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "shiftquant/common.hpp"
#include "shiftquant/datagen.hpp"
#include "shiftquant/metrics.hpp"
#include "shiftquant/quantify.hpp"
#include "shiftquant/rng.hpp"

namespace shiftquant {

struct NoiseScalingConfig {
  int signature_features = 14;
  int background_features = 6;
  double theta0 = 0.15;
  std::vector<double> epsilons{0.3, 0.1, 0.03};
  double p_fixed = 0.08;  // rare-class prior for the overlap sweep
  std::vector<double> p_sweep{0.02, 0.08, 0.32};
  double epsilon_fixed = 0.1;  // overlap level for the prior sweep
  bool include_separable = true;
  int resamples = 200;
  int n_target = 4000;
  int n_calibration = 30000;
  QuantifyOptions quantify;
  std::uint64_t seed = 3;
};

// Two classes sharing every feature rate except a signature block whose rate
// separates them; the rare class's signature rate theta1 controls how often
// the Bayes classifier argmax-identifies it (the overlap level epsilon).
inline GeneratorSpec make_noise_spec(const NoiseScalingConfig& config, double rare_prior,
                                     double theta1) {
  GeneratorSpec spec;
  spec.num_classes = 2;
  spec.class_priors = Vector(2);
  spec.class_priors << 1.0 - rare_prior, rare_prior;
  const int f = config.signature_features + config.background_features;
  SubclassSpec common;
  common.weight = 1.0;
  common.bernoulli = Vector::Constant(f, config.theta0);
  SubclassSpec rare = common;
  for (int j = 0; j < config.signature_features; ++j) rare.bernoulli[j] = theta1;
  spec.subclasses = {{common}, {rare}};
  spec.feature_groups = single_feature_group(f);
  return spec;
}

namespace detail {

// Smallest active-signature count at which the posterior flips to the rare
// class; m+1 when no count suffices.
inline int posterior_flip_count(int m, double theta0, double theta1, double rare_prior) {
  if (theta1 >= 1.0) return m;
  const double bias = std::log(rare_prior / (1.0 - rare_prior));
  const double gain = std::log(theta1 / theta0);
  const double drop = std::log((1.0 - theta1) / (1.0 - theta0));
  for (int c = 0; c <= m; ++c) {
    if (bias + c * gain + (m - c) * drop > 0.0) return c;
  }
  return m + 1;
}

inline double binomial_tail(int m, double theta, int from) {
  if (from <= 0) return 1.0;
  if (from > m) return 0.0;
  double total = 0.0;
  for (int c = from; c <= m; ++c) {
    const double log_term = std::lgamma(m + 1.0) - std::lgamma(c + 1.0) -
                            std::lgamma(m - c + 1.0) + c * std::log(theta) +
                            (m - c) * std::log1p(-theta);
    total += std::exp(log_term);
  }
  return std::min(total, 1.0);
}

// Probability that a rare-class point is argmax-classified as rare.
inline double achieved_epsilon(int m, double theta0, double theta1, double rare_prior) {
  const int flip = posterior_flip_count(m, theta0, theta1, rare_prior);
  if (theta1 >= 1.0) return 1.0;
  return binomial_tail(m, theta1, flip);
}

// Grid search for the signature rate hitting the requested overlap level.
inline double calibrate_theta1(int m, double theta0, double rare_prior, double epsilon_target) {
  double best_theta = theta0 + 1e-3;
  double best_err = std::numeric_limits<double>::infinity();
  for (double t = theta0 + 1e-3; t < 0.9995; t += 5e-4) {
    const double err = std::abs(achieved_epsilon(m, theta0, t, rare_prior) - epsilon_target);
    if (err < best_err) {
      best_err = err;
      best_theta = t;
    }
  }
  return best_theta;
}

}  // namespace detail

struct NoiseSetting {
  double rare_prior = 0.0;
  double epsilon_target = 0.0;
  double epsilon_achieved = 0.0;
  double theta1 = 0.0;
  int flip_count = 0;
  double mean_soft = 0.0;
  double mean_hard = 0.0;
  double std_soft = 0.0;
  double std_hard = 0.0;
  double ratio = 0.0;         // std_hard / std_soft
  double rel_std_soft = 0.0;  // std_soft / rare_prior
  bool excluded = false;
  std::string note;
};

// Monte Carlo at one (prior, overlap) point: fixed confusion matrices from a
// large calibration draw, repeated target resamples quantified both ways,
// spread of the rare-class prior estimate recorded. The classifier is the
// exact posterior under the generator, so overlap is controlled analytically.
inline NoiseSetting run_noise_setting(const NoiseScalingConfig& config, double rare_prior,
                                      double epsilon_target, std::uint64_t seed) {
  NoiseSetting s;
  s.rare_prior = rare_prior;
  s.epsilon_target = epsilon_target;
  const int m = config.signature_features;
  s.theta1 = epsilon_target >= 1.0
                 ? 1.0
                 : detail::calibrate_theta1(m, config.theta0, rare_prior, epsilon_target);
  s.flip_count = detail::posterior_flip_count(m, config.theta0, s.theta1, rare_prior);
  s.epsilon_achieved = detail::achieved_epsilon(m, config.theta0, s.theta1, rare_prior);

  if (s.epsilon_achieved <= 0.0) {
    s.excluded = true;
    s.note = "no point is ever classified as the rare class; hard confusion matrix singular";
    return s;
  }

  const GeneratorSpec spec = make_noise_spec(config, rare_prior, s.theta1);
  const LabeledDataset cal = sample_dataset(spec, config.n_calibration, derive_seed(seed, 1));
  const PredictionMatrix cal_preds = bayes_posterior(spec, cal.features);
  const ConfusionMatrix c_soft = soft_confusion(cal_preds, cal.labels, 2);
  const ConfusionMatrix c_hard = hard_confusion(cal_preds, cal.labels, 2);

  std::vector<double> soft_estimates, hard_estimates;
  soft_estimates.reserve(static_cast<std::size_t>(config.resamples));
  hard_estimates.reserve(static_cast<std::size_t>(config.resamples));
  for (int r = 0; r < config.resamples; ++r) {
    const LabeledDataset target =
        sample_dataset(spec, config.n_target, derive_seed(seed, 1000 + static_cast<std::uint64_t>(r)));
    const PredictionMatrix preds = bayes_posterior(spec, target.features);
    soft_estimates.push_back(
        solve_prior(c_soft, target_mean(preds), config.quantify).prior.p[1]);
    hard_estimates.push_back(
        solve_prior(c_hard, target_mean(harden(preds)), config.quantify).prior.p[1]);
  }
  s.mean_soft = mean(soft_estimates);
  s.mean_hard = mean(hard_estimates);
  s.std_soft = sample_stddev(soft_estimates);
  s.std_hard = sample_stddev(hard_estimates);
  s.ratio = s.std_hard / s.std_soft;
  s.rel_std_soft = s.std_soft / rare_prior;
  return s;
}

struct NoiseScalingResult {
  NoiseScalingConfig config;
  std::vector<NoiseSetting> epsilon_sweep;
  std::optional<NoiseSetting> separable;
  std::vector<NoiseSetting> prior_sweep;
  bool trend_ok = false;          // std ratio non-decreasing as overlap worsens
  bool separable_ok = false;      // separable case: ratio within [0.5, 2]
  bool prior_scaling_ok = false;  // soft rel. std tracks 1/sqrt(p) within 2x
};

inline NoiseScalingResult run_noise_scaling(const NoiseScalingConfig& config) {
  require(config.resamples >= 2, "noise scaling: need at least 2 resamples");
  require(!config.epsilons.empty(), "noise scaling: empty epsilon list");
  NoiseScalingResult result;
  result.config = config;

  std::vector<double> eps_sorted = config.epsilons;
  std::sort(eps_sorted.begin(), eps_sorted.end(), std::greater<>());
  std::uint64_t setting_id = 0;
  for (double eps : eps_sorted) {
    result.epsilon_sweep.push_back(run_noise_setting(
        config, config.p_fixed, eps, derive_seed(config.seed, setting_id++)));
  }
  if (config.include_separable) {
    result.separable =
        run_noise_setting(config, config.p_fixed, 1.0, derive_seed(config.seed, setting_id++));
  }
  for (double p : config.p_sweep) {
    result.prior_sweep.push_back(run_noise_setting(config, p, config.epsilon_fixed,
                                                   derive_seed(config.seed, setting_id++)));
  }

  result.trend_ok = true;
  const NoiseSetting* prev = nullptr;
  for (const auto& s : result.epsilon_sweep) {
    if (s.excluded) continue;
    if (prev && s.ratio < prev->ratio - 1e-9) result.trend_ok = false;
    prev = &s;
  }
  result.separable_ok = result.separable && !result.separable->excluded &&
                        result.separable->ratio >= 0.5 && result.separable->ratio <= 2.0;

  result.prior_scaling_ok = true;
  for (std::size_t i = 0; i + 1 < result.prior_sweep.size(); ++i) {
    const auto& a = result.prior_sweep[i];
    const auto& b = result.prior_sweep[i + 1];
    if (a.excluded || b.excluded) continue;
    const double observed = a.rel_std_soft / b.rel_std_soft;
    const double predicted = std::sqrt(b.rare_prior / a.rare_prior);
    const double off = observed / predicted;
    if (off < 0.5 || off > 2.0) result.prior_scaling_ok = false;
  }
  return result;
}

}  // namespace shiftquant
