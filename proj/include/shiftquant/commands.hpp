#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "shiftquant/adapt.hpp"
#include "shiftquant/classifier.hpp"
#include "shiftquant/common.hpp"
#include "shiftquant/datagen.hpp"
#include "shiftquant/dataset.hpp"
#include "shiftquant/exp_cond_shift.hpp"
#include "shiftquant/exp_label_shift.hpp"
#include "shiftquant/exp_noise.hpp"
#include "shiftquant/metrics.hpp"
#include "shiftquant/serialize.hpp"

namespace shiftquant {

// Command-line overrides that beat the corresponding config fields.
struct CommandOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<int> dims;
  std::optional<int> clusters;
};

namespace detail {

inline std::string resolve_path(const std::filesystem::path& base_dir, const std::string& path) {
  require(!path.empty(), "empty path in config");
  std::filesystem::path p(path);
  if (p.is_absolute()) return p.string();
  return (base_dir / p).string();
}

inline std::filesystem::path prepare_out_dir(const std::string& out_dir) {
  std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string display(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string display(const Vector& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) s += ", ";
    s += display(v[i]);
  }
  s += ")";
  return s;
}

inline void write_predictions_csv(const PredictionMatrix& preds, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  for (int k = 0; k < preds.classes(); ++k) out << 'p' << k << (k + 1 < preds.classes() ? ',' : '\n');
  for (int i = 0; i < preds.rows(); ++i) {
    for (int k = 0; k < preds.classes(); ++k) {
      out << format_double(preds.probs(i, k)) << (k + 1 < preds.classes() ? ',' : '\n');
    }
  }
  require(out.good(), "write failed for " + path);
}

inline PredictionMatrix read_predictions_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "missing header in " + path);
  int columns = 1;
  for (char ch : line) columns += ch == ',';
  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    int col = 0;
    while (std::getline(row, field, ',')) {
      try {
        values.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw ValidationError(path + ": bad value '" + field + "' at line " +
                              std::to_string(line_no));
      }
      ++col;
    }
    require(col == columns, path + ": wrong field count at line " + std::to_string(line_no));
  }
  require(!values.empty(), path + ": no data rows");
  const int n = static_cast<int>(values.size()) / columns;
  PredictionMatrix preds;
  preds.probs = Matrix(n, columns);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < columns; ++k) {
      preds.probs(i, k) = values[static_cast<std::size_t>(i) * columns + k];
    }
  }
  check_rows_normalized(preds.probs, 1e-6, path);
  return preds;
}

}  // namespace detail

// Samples a dataset from a generator spec, optionally shifted, and writes the
// CSV plus a metadata sidecar with the configured and realized priors.
inline void cmd_generate(const std::string& config_path, const std::string& out_dir,
                         const CommandOverrides& ov, std::ostream& os = std::cout) {
  const json cfg = load_json(config_path);
  GeneratorSpec spec = cfg.at("generator").get<GeneratorSpec>();
  spec.validate();
  const int n = cfg.at("n").get<int>();
  const std::uint64_t seed = ov.seed.value_or(cfg.value<std::uint64_t>("seed", 0));

  std::optional<ShiftSpec> shift;
  if (cfg.contains("shift") && !cfg.at("shift").is_null()) {
    shift = cfg.at("shift").get<ShiftSpec>();
    shift->validate(spec);
  }
  GeneratorSpec sample_spec = spec;
  if (shift && shift->subclass_reweights) {
    sample_spec = apply_subclass_reweight(spec, *shift->subclass_reweights);
  }
  LabeledDataset ds = sample_dataset(sample_spec, n, derive_seed(seed, 1));
  if (shift && !shift->conditional_exclusion.empty()) {
    ds = apply_conditional_shift(ds, *shift, derive_seed(seed, 2));
  }
  if (shift && shift->keep_ratios) {
    ds = apply_label_shift(ds, *shift->keep_ratios, derive_seed(seed, 3));
  }

  const auto out = detail::prepare_out_dir(out_dir);
  write_csv(ds, (out / "dataset.csv").string());
  json meta{{"generator", spec},
            {"n", n},
            {"seed", seed},
            {"configured_priors", Vector(spec.class_priors)},
            {"realized_priors", empirical_prior(ds.labels, spec.num_classes)},
            {"rows", ds.rows()}};
  if (shift) meta["shift"] = *shift;
  save_json((out / "meta.json").string(), meta);
  os << "wrote " << (out / "dataset.csv").string() << " (" << ds.rows() << " rows, "
     << ds.cols() << " features)\n";
}

// Trains the softmax classifier on a labeled CSV and writes the model JSON.
inline void cmd_train(const std::string& config_path, const std::string& out_dir,
                      const CommandOverrides& ov, std::ostream& os = std::cout) {
  const json cfg = load_json(config_path);
  const auto base = std::filesystem::path(config_path).parent_path();
  const LabeledDataset ds = read_csv(detail::resolve_path(base, cfg.at("data").get<std::string>()),
                                     cfg.value("num_classes", 0));
  const MlpConfig mlp_config = cfg.value("classifier", MlpConfig{});
  const std::uint64_t seed = ov.seed.value_or(cfg.value<std::uint64_t>("seed", 0));
  const SoftmaxMlp model = train(ds, mlp_config, seed);
  const auto out = detail::prepare_out_dir(out_dir);
  save_json((out / "model.json").string(), json(model));
  os << "trained on " << ds.rows() << " rows; final epoch loss "
     << detail::display(model.epoch_losses.back()) << "\n";
}

// Estimates the target class prior. Fixture mode solves a given confusion
// matrix and classifier mean directly; model mode derives both from a model,
// a labeled calibration CSV, and an unlabeled target CSV.
inline void cmd_quantify(const std::string& config_path, const std::string& out_dir,
                         const CommandOverrides& ov, std::ostream& os = std::cout) {
  const json cfg = load_json(config_path);
  const auto base = std::filesystem::path(config_path).parent_path();
  const QuantifyOptions options = cfg.value("quantify", QuantifyOptions{});
  const Method method = parse_method(ov.method.value_or(cfg.value("method", "global-soft")));
  require(method != Method::None, "quantify: method 'none' does not estimate a prior");
  const ConfusionKind kind = confusion_kind_of(method);

  QuantificationResult result;
  json out_doc;
  if (cfg.contains("confusion")) {
    const ConfusionMatrix cm = cfg.at("confusion").get<ConfusionMatrix>();
    const ClassDistribution p_hat{cfg.at("p_hat").get<Vector>(), Provenance::ClassifierMean};
    result = solve_prior(cm, p_hat, options);
    out_doc = json{{"mode", "fixture"}, {"result", result}};
  } else {
    SoftmaxMlp model;
    load_json(detail::resolve_path(base, cfg.at("model").get<std::string>())).get_to(model);
    const LabeledDataset cal = read_csv(
        detail::resolve_path(base, cfg.at("calibration").get<std::string>()),
        cfg.value("num_classes", model.num_classes()));
    const LabeledDataset target =
        read_csv(detail::resolve_path(base, cfg.at("target").get<std::string>()), cal.num_classes);
    const PredictionMatrix cal_preds = predict_proba(model, cal.features);
    const PredictionMatrix target_preds = predict_proba(model, target.features);
    const ConfusionMatrix cm = kind == ConfusionKind::Hard
                                   ? hard_confusion(cal_preds, cal.labels, cal.num_classes)
                                   : soft_confusion(cal_preds, cal.labels, cal.num_classes);
    const ClassDistribution p_hat =
        target_mean(kind == ConfusionKind::Hard ? harden(target_preds) : target_preds);
    result = solve_prior(cm, p_hat, options);
    out_doc = json{{"mode", "model"},
                   {"method", method_name(method)},
                   {"confusion", cm},
                   {"p_hat", p_hat},
                   {"result", result}};
  }
  const auto out = detail::prepare_out_dir(out_dir);
  save_json((out / "quantify.json").string(), out_doc);
  os << "estimated prior: " << detail::display(result.prior.p) << "\n";
}

// Full adaptation step: quantify the target prior and recalibrate the
// classifier outputs; writes the report and the calibrated predictions.
inline void cmd_adapt(const std::string& config_path, const std::string& out_dir,
                      const CommandOverrides& ov, std::ostream& os = std::cout) {
  const json cfg = load_json(config_path);
  const auto base = std::filesystem::path(config_path).parent_path();
  SoftmaxMlp model;
  load_json(detail::resolve_path(base, cfg.at("model").get<std::string>())).get_to(model);
  const LabeledDataset source =
      read_csv(detail::resolve_path(base, cfg.at("source").get<std::string>()),
               cfg.value("num_classes", model.num_classes()));
  const LabeledDataset target = read_csv(
      detail::resolve_path(base, cfg.at("target").get<std::string>()), source.num_classes);
  const Method method = parse_method(ov.method.value_or(cfg.value("method", "global-soft")));
  const QuantifyOptions options = cfg.value("quantify", QuantifyOptions{});
  PartitionConfig partition = cfg.value("partition", PartitionConfig{});
  if (ov.dims) partition.dims = *ov.dims;
  if (ov.clusters) partition.clusters = *ov.clusters;
  const std::uint64_t seed = ov.seed.value_or(cfg.value<std::uint64_t>("seed", 0));
  const double threshold = cfg.value("shift_threshold", 0.02);

  const AdaptationReport report =
      is_subspace_method(method)
          ? subspace_da(model, source, target.features, partition, method, options, seed)
          : global_da(model, source, target.features, method, options);

  // Distance between the estimated target prior and the source prior on the
  // quantification-score scale; below threshold means the estimate is
  // indistinguishable from "no shift".
  const double shift_score =
      quantification_score(report.target_prior, report.source_prior, report.source_prior).value;
  const bool no_shift = shift_score < threshold;

  const auto out = detail::prepare_out_dir(out_dir);
  json doc(report);
  doc["shift_score"] = shift_score;
  doc["shift_threshold"] = threshold;
  doc["no_significant_shift"] = no_shift;
  save_json((out / "adapt.json").string(), doc);
  detail::write_predictions_csv(report.calibrated, (out / "calibrated.csv").string());
  os << "estimated target prior: " << detail::display(report.target_prior.p) << "\n";
  if (no_shift) {
    os << "no significant shift detected (score " << detail::display(shift_score) << " < "
       << detail::display(threshold) << ")\n";
  }
}

// Scores an estimated prior against a labeled target; optionally also scores
// calibrated predictions with Top-1/Top-3 accuracy.
inline void cmd_eval(const std::string& config_path, const std::string& out_dir,
                     const CommandOverrides& ov, std::ostream& os = std::cout) {
  const json cfg = load_json(config_path);
  const auto base = std::filesystem::path(config_path).parent_path();

  ClassDistribution estimated;
  std::string method = cfg.value("method", "");
  if (cfg.contains("adapt_report")) {
    const json rep =
        load_json(detail::resolve_path(base, cfg.at("adapt_report").get<std::string>()));
    rep.at("target_prior").get_to(estimated);
    if (method.empty()) method = rep.value("method", "");
  } else {
    estimated.p = cfg.at("estimated_prior").get<Vector>();
    estimated.provenance = Provenance::Quantified;
  }

  ClassDistribution actual;
  std::optional<LabeledDataset> target;
  if (cfg.contains("actual")) {
    target = read_csv(detail::resolve_path(base, cfg.at("actual").get<std::string>()),
                      static_cast<int>(estimated.p.size()));
    actual = empirical_prior(target->labels, target->num_classes);
  } else {
    actual.p = cfg.at("actual_prior").get<Vector>();
    actual.provenance = Provenance::True;
  }

  ClassDistribution source;
  if (cfg.contains("source")) {
    const LabeledDataset src =
        read_csv(detail::resolve_path(base, cfg.at("source").get<std::string>()),
                 static_cast<int>(estimated.p.size()));
    source = empirical_prior(src.labels, src.num_classes);
  } else {
    source.p = cfg.at("source_prior").get<Vector>();
    source.provenance = Provenance::True;
  }

  const ScoreResult score = quantification_score(estimated, actual, source);
  EvalReport report;
  report.method = method;
  report.seed = ov.seed.value_or(cfg.value<std::uint64_t>("seed", 0));
  report.score = score.value;
  report.est_ratios = score.est_ratios;
  report.act_ratios = score.act_ratios;
  report.estimated_prior = estimated;
  report.actual_prior = actual;
  report.source_prior = source;
  if (cfg.contains("predictions")) {
    require(target.has_value(), "eval: Top-k needs 'actual' as a labeled CSV");
    const PredictionMatrix preds = detail::read_predictions_csv(
        detail::resolve_path(base, cfg.at("predictions").get<std::string>()));
    report.top1 = topk_accuracy(preds, target->labels, 1);
    report.top3 = topk_accuracy(preds, target->labels, std::min(3, preds.classes()));
  }
  const auto out = detail::prepare_out_dir(out_dir);
  save_json((out / "eval.json").string(), json(report));
  os << "score: " << detail::display(report.score) << "\n";
}

namespace detail {

inline void write_label_shift_csvs(const LabelShiftResult& result,
                                   const std::filesystem::path& out) {
  {
    std::ofstream f(out / "label_shift_scores.csv");
    f << "run,seed,method,score\n";
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      for (const auto& [name, score] : result.runs[r].scores) {
        f << r << ',' << result.runs[r].seed << ',' << name << ',' << format_double(score)
          << '\n';
      }
    }
  }
  {
    std::ofstream f(out / "label_shift_medians.csv");
    f << "method,median_score\n";
    for (const auto& [name, score] : result.median_scores) {
      f << name << ',' << format_double(score) << '\n';
    }
  }
  {
    std::ofstream f(out / "label_shift_ratios.csv");
    f << "run,class,actual";
    std::vector<std::string> names;
    for (Method m : result.config.methods) names.push_back(method_name(m));
    for (const auto& name : names) f << ',' << name;
    f << '\n';
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      const auto& run = result.runs[r];
      for (int y = 0; y < static_cast<int>(run.act_ratios.size()); ++y) {
        f << r << ',' << y << ',' << format_double(run.act_ratios[y]);
        for (const auto& name : names) f << ',' << format_double(run.est_ratios.at(name)[y]);
        f << '\n';
      }
    }
  }
}

inline void write_cond_shift_csvs(const CondShiftResult& result,
                                  const std::filesystem::path& out) {
  {
    std::ofstream f(out / "cond_shift_scores.csv");
    f << "run,seed,method,score,top1,top3,failed\n";
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      const auto& run = result.runs[r];
      for (Method m : result.config.methods) {
        const std::string name = method_name(m);
        f << r << ',' << run.seed << ',' << name << ',';
        if (run.failures.count(name)) {
          f << ",,,1\n";
        } else {
          f << format_double(run.scores.at(name)) << ',' << format_double(run.top1.at(name))
            << ',' << format_double(run.top3.at(name)) << ",0\n";
        }
      }
      f << r << ',' << run.seed << ",oracle,," << format_double(run.oracle_top1) << ','
        << format_double(run.oracle_top3) << ",0\n";
    }
  }
  {
    std::ofstream f(out / "cond_shift_medians.csv");
    f << "method,median_score,median_top1,median_top3\n";
    for (const auto& [name, score] : result.median_scores) {
      f << name << ',' << format_double(score) << ',' << format_double(result.median_top1.at(name))
        << ',' << format_double(result.median_top3.at(name)) << '\n';
    }
    f << "oracle,," << format_double(result.median_oracle_top1) << ','
      << format_double(result.median_oracle_top3) << '\n';
  }
}

inline void write_noise_csv(const NoiseScalingResult& result, const std::filesystem::path& out) {
  std::ofstream f(out / "noise_scaling.csv");
  f << "sweep,rare_prior,epsilon_target,epsilon_achieved,theta1,flip_count,mean_soft,mean_hard,"
       "std_soft,std_hard,ratio,rel_std_soft,excluded\n";
  auto row = [&](const char* sweep, const NoiseSetting& s) {
    f << sweep << ',' << format_double(s.rare_prior) << ',' << format_double(s.epsilon_target)
      << ',' << format_double(s.epsilon_achieved) << ',' << format_double(s.theta1) << ','
      << s.flip_count << ',' << format_double(s.mean_soft) << ',' << format_double(s.mean_hard)
      << ',' << format_double(s.std_soft) << ',' << format_double(s.std_hard) << ','
      << format_double(s.ratio) << ',' << format_double(s.rel_std_soft) << ','
      << (s.excluded ? 1 : 0) << '\n';
  };
  for (const auto& s : result.epsilon_sweep) row("epsilon", s);
  if (result.separable) row("separable", *result.separable);
  for (const auto& s : result.prior_sweep) row("prior", s);
}

}  // namespace detail

inline void cmd_exp_label_shift(const std::optional<std::string>& config_path,
                                const std::string& out_dir, const CommandOverrides& ov,
                                std::ostream& os = std::cout) {
  LabelShiftConfig config;
  if (config_path) load_json(*config_path).get_to(config);
  if (ov.seed) config.seed = *ov.seed;
  const LabelShiftResult result = run_label_shift_experiment(config);
  const auto out = detail::prepare_out_dir(out_dir);
  save_json((out / "label_shift.json").string(), json(result));
  detail::write_label_shift_csvs(result, out);
  os << "label-shift experiment: " << result.runs.size() << " runs\n";
  for (const auto& [name, score] : result.median_scores) {
    os << "  median score " << name << ": " << detail::display(score) << "\n";
  }
}

inline void cmd_exp_cond_shift(const std::optional<std::string>& config_path,
                               const std::string& out_dir, const CommandOverrides& ov,
                               std::ostream& os = std::cout) {
  CondShiftConfig config;
  if (config_path) load_json(*config_path).get_to(config);
  if (ov.seed) config.seed = *ov.seed;
  if (ov.dims) config.partition.dims = *ov.dims;
  if (ov.clusters) config.partition.clusters = *ov.clusters;
  const CondShiftResult result = run_cond_shift_experiment(config);
  const auto out = detail::prepare_out_dir(out_dir);
  save_json((out / "cond_shift.json").string(), json(result));
  detail::write_cond_shift_csvs(result, out);
  os << "conditional-shift experiment: " << result.runs.size() << " runs\n";
  for (const auto& [name, score] : result.median_scores) {
    os << "  " << name << ": median score " << detail::display(score) << ", top1 "
       << detail::display(result.median_top1.at(name)) << ", top3 "
       << detail::display(result.median_top3.at(name)) << "\n";
  }
  os << "  oracle: top1 " << detail::display(result.median_oracle_top1) << ", top3 "
     << detail::display(result.median_oracle_top3) << "\n";
}

inline void cmd_noise_scaling(const std::optional<std::string>& config_path,
                              const std::string& out_dir, const CommandOverrides& ov,
                              std::ostream& os = std::cout) {
  NoiseScalingConfig config;
  if (config_path) load_json(*config_path).get_to(config);
  if (ov.seed) config.seed = *ov.seed;
  const NoiseScalingResult result = run_noise_scaling(config);
  const auto out = detail::prepare_out_dir(out_dir);
  save_json((out / "noise_scaling.json").string(), json(result));
  detail::write_noise_csv(result, out);
  for (const auto& s : result.epsilon_sweep) {
    os << "  epsilon " << detail::display(s.epsilon_target) << ": std ratio hard/soft "
       << (s.excluded ? "excluded (" + s.note + ")" : detail::display(s.ratio)) << "\n";
  }
  os << "trend (ratio non-decreasing as overlap worsens): " << (result.trend_ok ? "ok" : "VIOLATED")
     << "\n";
  if (result.separable) {
    os << "separable case ratio " << detail::display(result.separable->ratio) << ": "
       << (result.separable_ok ? "comparable" : "OUTSIDE [0.5,2]") << "\n";
  }
  os << "soft relative-std prior scaling ~ 1/sqrt(p): "
     << (result.prior_scaling_ok ? "ok" : "VIOLATED") << "\n";
}

}  // namespace shiftquant
