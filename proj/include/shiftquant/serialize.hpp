#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftquant/adapt.hpp"
#include "shiftquant/calibrate.hpp"
#include "shiftquant/classifier.hpp"
#include "shiftquant/common.hpp"
#include "shiftquant/datagen.hpp"
#include "shiftquant/exp_cond_shift.hpp"
#include "shiftquant/exp_label_shift.hpp"
#include "shiftquant/exp_noise.hpp"
#include "shiftquant/metrics.hpp"
#include "shiftquant/partition.hpp"
#include "shiftquant/quantify.hpp"
#include "shiftquant/types.hpp"

namespace nlohmann {

template <>
struct adl_serializer<Eigen::MatrixXd> {
  static void to_json(json& j, const Eigen::MatrixXd& m) {
    std::vector<double> data(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        data[static_cast<std::size_t>(i * m.cols() + c)] = m(i, c);
      }
    }
    j = json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
  }

  static void from_json(const json& j, Eigen::MatrixXd& m) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    shiftquant::require(rows >= 0 && cols >= 0 &&
                            data.size() == static_cast<std::size_t>(rows * cols),
                        "matrix JSON: data length does not match rows*cols");
    m.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(i, c) = data[static_cast<std::size_t>(i * cols + c)];
      }
    }
  }
};

template <>
struct adl_serializer<Eigen::VectorXd> {
  static void to_json(json& j, const Eigen::VectorXd& v) {
    j = std::vector<double>(v.data(), v.data() + v.size());
  }

  static void from_json(const json& j, Eigen::VectorXd& v) {
    const auto data = j.get<std::vector<double>>();
    v = Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
  }
};

template <>
struct adl_serializer<Eigen::VectorXi> {
  static void to_json(json& j, const Eigen::VectorXi& v) {
    j = std::vector<int>(v.data(), v.data() + v.size());
  }

  static void from_json(const json& j, Eigen::VectorXi& v) {
    const auto data = j.get<std::vector<int>>();
    v = Eigen::Map<const Eigen::VectorXi>(data.data(), static_cast<Eigen::Index>(data.size()));
  }
};

}  // namespace nlohmann

namespace shiftquant {

using nlohmann::json;

inline void to_json(json& j, const Provenance& p) { j = to_string(p); }

inline void from_json(const json& j, Provenance& p) {
  const auto s = j.get<std::string>();
  if (s == "true") {
    p = Provenance::True;
  } else if (s == "classifier-mean") {
    p = Provenance::ClassifierMean;
  } else if (s == "quantified") {
    p = Provenance::Quantified;
  } else {
    throw ValidationError("unknown provenance '" + s + "'");
  }
}

inline void to_json(json& j, const ClassDistribution& d) {
  j = json{{"p", d.p}, {"provenance", d.provenance}};
}

inline void from_json(const json& j, ClassDistribution& d) {
  j.at("p").get_to(d.p);
  if (j.contains("provenance")) j.at("provenance").get_to(d.provenance);
}

inline void to_json(json& j, const SubclassSpec& s) {
  j = json{{"weight", s.weight}, {"bernoulli", s.bernoulli}};
  if (s.numeric_range) j["numeric_range"] = *s.numeric_range;
}

inline void from_json(const json& j, SubclassSpec& s) {
  j.at("weight").get_to(s.weight);
  j.at("bernoulli").get_to(s.bernoulli);
  if (j.contains("numeric_range") && !j.at("numeric_range").is_null()) {
    s.numeric_range = j.at("numeric_range").get<std::array<double, 2>>();
  } else {
    s.numeric_range.reset();
  }
}

inline void to_json(json& j, const GeneratorSpec& s) {
  j = json{{"num_classes", s.num_classes},
           {"class_priors", s.class_priors},
           {"subclasses", s.subclasses},
           {"feature_groups", s.feature_groups}};
}

inline void from_json(const json& j, GeneratorSpec& s) {
  j.at("num_classes").get_to(s.num_classes);
  j.at("class_priors").get_to(s.class_priors);
  j.at("subclasses").get_to(s.subclasses);
  if (j.contains("feature_groups")) {
    j.at("feature_groups").get_to(s.feature_groups);
  } else {
    s.feature_groups = single_feature_group(s.num_features());
  }
}

inline void to_json(json& j, const ConditionalExclusion& e) {
  j = json{{"features", e.features}, {"weights", e.weights}};
}

inline void from_json(const json& j, ConditionalExclusion& e) {
  j.at("features").get_to(e.features);
  j.at("weights").get_to(e.weights);
}

inline void to_json(json& j, const ShiftSpec& s) {
  j = json::object();
  if (s.keep_ratios) j["keep_ratios"] = *s.keep_ratios;
  if (!s.conditional_exclusion.empty()) j["conditional_exclusion"] = s.conditional_exclusion;
  if (s.subclass_reweights) j["subclass_reweights"] = *s.subclass_reweights;
}

inline void from_json(const json& j, ShiftSpec& s) {
  s = ShiftSpec{};
  if (j.contains("keep_ratios") && !j.at("keep_ratios").is_null()) {
    s.keep_ratios = j.at("keep_ratios").get<Vector>();
  }
  if (j.contains("conditional_exclusion")) {
    j.at("conditional_exclusion").get_to(s.conditional_exclusion);
  }
  if (j.contains("subclass_reweights") && !j.at("subclass_reweights").is_null()) {
    s.subclass_reweights = j.at("subclass_reweights").get<std::vector<Vector>>();
  }
}

inline void to_json(json& j, const MlpConfig& c) {
  j = json{{"hidden_units", c.hidden_units},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate}};
}

inline void from_json(const json& j, MlpConfig& c) {
  c = MlpConfig{};
  if (j.contains("hidden_units")) j.at("hidden_units").get_to(c.hidden_units);
  if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
  if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
  if (j.contains("learning_rate")) j.at("learning_rate").get_to(c.learning_rate);
}

inline void to_json(json& j, const SoftmaxMlp& m) {
  j = json{{"input_width", m.input_width()},
           {"hidden_units", m.hidden_units()},
           {"num_classes", m.num_classes()},
           {"w1", m.w1},
           {"b1", m.b1},
           {"w2", m.w2},
           {"b2", m.b2},
           {"config", m.config},
           {"seed", m.seed},
           {"epoch_losses", m.epoch_losses}};
}

inline void from_json(const json& j, SoftmaxMlp& m) {
  j.at("w1").get_to(m.w1);
  j.at("b1").get_to(m.b1);
  j.at("w2").get_to(m.w2);
  j.at("b2").get_to(m.b2);
  if (j.contains("config")) j.at("config").get_to(m.config);
  if (j.contains("seed")) j.at("seed").get_to(m.seed);
  if (j.contains("epoch_losses")) j.at("epoch_losses").get_to(m.epoch_losses);
  require(m.w1.cols() == m.b1.size() && m.w1.cols() == m.w2.rows() &&
              m.w2.cols() == m.b2.size(),
          "model JSON: inconsistent layer shapes");
}

inline void to_json(json& j, const PartitionConfig& c) {
  j = json{{"dims", c.dims},
           {"clusters", c.clusters},
           {"min_support", c.min_support},
           {"kmeans_restarts", c.kmeans_restarts},
           {"kmeans_max_iters", c.kmeans_max_iters},
           {"kmeans_tol", c.kmeans_tol},
           {"min_source_rows", c.min_source_rows},
           {"min_target_rows", c.min_target_rows}};
}

inline void from_json(const json& j, PartitionConfig& c) {
  c = PartitionConfig{};
  if (j.contains("dims")) j.at("dims").get_to(c.dims);
  if (j.contains("clusters")) j.at("clusters").get_to(c.clusters);
  if (j.contains("min_support")) j.at("min_support").get_to(c.min_support);
  if (j.contains("kmeans_restarts")) j.at("kmeans_restarts").get_to(c.kmeans_restarts);
  if (j.contains("kmeans_max_iters")) j.at("kmeans_max_iters").get_to(c.kmeans_max_iters);
  if (j.contains("kmeans_tol")) j.at("kmeans_tol").get_to(c.kmeans_tol);
  if (j.contains("min_source_rows")) j.at("min_source_rows").get_to(c.min_source_rows);
  if (j.contains("min_target_rows")) j.at("min_target_rows").get_to(c.min_target_rows);
}

inline void to_json(json& j, const PcaProjection& p) {
  j = json{{"mean", p.mean},
           {"components", p.components},
           {"explained_variance", p.explained_variance}};
}

inline void from_json(const json& j, PcaProjection& p) {
  j.at("mean").get_to(p.mean);
  j.at("components").get_to(p.components);
  j.at("explained_variance").get_to(p.explained_variance);
  p.all_eigenvalues = p.explained_variance;
  p.requested_dims = static_cast<int>(p.components.cols());
}

inline void to_json(json& j, const SupportInfo& s) {
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(s.counts.rows()));
  for (Eigen::Index r = 0; r < s.counts.rows(); ++r) {
    counts[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(s.counts.cols()));
    for (Eigen::Index c = 0; c < s.counts.cols(); ++c) {
      counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = s.counts(r, c);
    }
  }
  j = json{{"counts", counts},
           {"mask", s.mask},
           {"subspace_sizes", s.subspace_sizes},
           {"usable", s.usable}};
}

inline void from_json(const json& j, SupportInfo& s) {
  const auto counts = j.at("counts").get<std::vector<std::vector<int>>>();
  const auto rows = static_cast<Eigen::Index>(counts.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(counts.front().size()) : 0;
  s.counts.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    require(static_cast<Eigen::Index>(counts[static_cast<std::size_t>(r)].size()) == cols,
            "support JSON: ragged counts");
    for (Eigen::Index c = 0; c < cols; ++c) {
      s.counts(r, c) = counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
  }
  s.mask = j.at("mask").get<std::vector<std::vector<bool>>>();
  j.at("subspace_sizes").get_to(s.subspace_sizes);
  const auto usable = j.at("usable").get<std::vector<bool>>();
  s.usable.assign(usable.begin(), usable.end());
}

inline void to_json(json& j, const SubspacePartition& p) {
  j = json{{"pca", p.pca},
           {"centroids", p.centroids},
           {"support", p.support},
           {"config", p.config}};
}

inline void from_json(const json& j, SubspacePartition& p) {
  j.at("pca").get_to(p.pca);
  j.at("centroids").get_to(p.centroids);
  j.at("support").get_to(p.support);
  j.at("config").get_to(p.config);
}

inline void to_json(json& j, const ConfusionKind& k) { j = confusion_kind_name(k); }

inline void from_json(const json& j, ConfusionKind& k) {
  const auto s = j.get<std::string>();
  if (s == "soft") {
    k = ConfusionKind::Soft;
  } else if (s == "hard") {
    k = ConfusionKind::Hard;
  } else {
    throw ValidationError("unknown confusion kind '" + s + "'");
  }
}

inline void to_json(json& j, const ConfusionMatrix& c) {
  j = json{{"matrix", c.c}, {"support", c.support}, {"kind", c.kind}};
}

inline void from_json(const json& j, ConfusionMatrix& c) {
  j.at("matrix").get_to(c.c);
  if (j.contains("support")) {
    j.at("support").get_to(c.support);
  } else {
    c.support = Eigen::VectorXi::Constant(c.c.cols(), 1);
  }
  if (j.contains("kind")) j.at("kind").get_to(c.kind);
}

inline void to_json(json& j, const QuantifyOptions& o) {
  j = json{{"max_condition", o.max_condition},
           {"conservation_tol", o.conservation_tol},
           {"min_support", o.min_support}};
}

inline void from_json(const json& j, QuantifyOptions& o) {
  o = QuantifyOptions{};
  if (j.contains("max_condition")) j.at("max_condition").get_to(o.max_condition);
  if (j.contains("conservation_tol")) j.at("conservation_tol").get_to(o.conservation_tol);
  if (j.contains("min_support")) j.at("min_support").get_to(o.min_support);
}

inline void to_json(json& j, const QuantificationResult& q) {
  j = json{{"prior", q.prior},
           {"raw", q.raw},
           {"condition_number", q.condition_number},
           {"clipped_mass", q.clipped_mass},
           {"support_mask", q.support_mask},
           {"kind", q.kind}};
}

inline void to_json(json& j, const CalibrationMap& m) {
  j = json{{"source", m.source}, {"target", m.target}, {"ratios", m.ratios},
           {"masked", m.masked}};
}

inline void to_json(json& j, const SubspaceOutcome& o) {
  j = json{{"subspace", o.subspace},
           {"source_rows", o.source_rows},
           {"target_rows", o.target_rows},
           {"support", o.support},
           {"source_prior", o.source_prior},
           {"target_prior", o.target_prior},
           {"ratios", o.ratios},
           {"weight", o.weight},
           {"condition_number", o.condition_number},
           {"clipped_mass", o.clipped_mass},
           {"fallback", o.fallback},
           {"note", o.note}};
}

inline void to_json(json& j, const AdaptationReport& r) {
  j = json{{"method", method_name(r.method)},
           {"source_prior", r.source_prior},
           {"target_prior", r.target_prior},
           {"ratios", r.ratios},
           {"condition_number", r.condition_number},
           {"clipped_mass", r.clipped_mass},
           {"zero_mass_rows", r.zero_mass_rows},
           {"fallback_log", r.fallback_log}};
  if (!r.subspaces.empty()) j["subspaces"] = r.subspaces;
}

inline void to_json(json& j, const EvalReport& r) {
  j = json{{"method", r.method},
           {"seed", r.seed},
           {"score", r.score},
           {"est_ratios", r.est_ratios},
           {"act_ratios", r.act_ratios},
           {"estimated_prior", r.estimated_prior},
           {"actual_prior", r.actual_prior},
           {"source_prior", r.source_prior},
           {"top1", r.top1},
           {"top3", r.top3}};
}

inline void to_json(json& j, const RatioConditionEntry& e) {
  j = json{{"subspace", e.subspace},
           {"class", e.cls},
           {"min_ratio", e.min_ratio},
           {"max_ratio", e.max_ratio},
           {"spread", e.spread},
           {"points", e.points},
           {"supported", e.supported},
           {"flagged", e.flagged}};
}

inline void to_json(json& j, const RatioConditionReport& r) {
  j = json{{"entries", r.entries},
           {"tolerance", r.tolerance},
           {"distinct_points", r.distinct_points},
           {"flagged_count", r.flagged_count()}};
}

inline void to_json(json& j, const Method& m) { j = method_name(m); }

inline void from_json(const json& j, Method& m) { m = parse_method(j.get<std::string>()); }

inline void to_json(json& j, const LabelShiftConfig& c) {
  j = json{{"num_classes", c.num_classes},
           {"features", c.features},
           {"prior_span", c.prior_span},
           {"background_rate", c.background_rate},
           {"signature_rate", c.signature_rate},
           {"mimic_rate", c.mimic_rate},
           {"signature_width", c.signature_width},
           {"signature_stride", c.signature_stride},
           {"n_source", c.n_source},
           {"n_target", c.n_target},
           {"keep_lo", c.keep_lo},
           {"keep_hi", c.keep_hi},
           {"train_fraction", c.train_fraction},
           {"classifier", c.classifier},
           {"quantify", c.quantify},
           {"methods", c.methods},
           {"runs", c.runs},
           {"seed", c.seed}};
}

inline void from_json(const json& j, LabelShiftConfig& c) {
  c = LabelShiftConfig{};
  if (j.contains("num_classes")) j.at("num_classes").get_to(c.num_classes);
  if (j.contains("features")) j.at("features").get_to(c.features);
  if (j.contains("prior_span")) j.at("prior_span").get_to(c.prior_span);
  if (j.contains("background_rate")) j.at("background_rate").get_to(c.background_rate);
  if (j.contains("signature_rate")) j.at("signature_rate").get_to(c.signature_rate);
  if (j.contains("mimic_rate")) j.at("mimic_rate").get_to(c.mimic_rate);
  if (j.contains("signature_width")) j.at("signature_width").get_to(c.signature_width);
  if (j.contains("signature_stride")) j.at("signature_stride").get_to(c.signature_stride);
  if (j.contains("n_source")) j.at("n_source").get_to(c.n_source);
  if (j.contains("n_target")) j.at("n_target").get_to(c.n_target);
  if (j.contains("keep_lo")) j.at("keep_lo").get_to(c.keep_lo);
  if (j.contains("keep_hi")) j.at("keep_hi").get_to(c.keep_hi);
  if (j.contains("train_fraction")) j.at("train_fraction").get_to(c.train_fraction);
  if (j.contains("classifier")) j.at("classifier").get_to(c.classifier);
  if (j.contains("quantify")) j.at("quantify").get_to(c.quantify);
  if (j.contains("methods")) j.at("methods").get_to(c.methods);
  if (j.contains("runs")) j.at("runs").get_to(c.runs);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
}

inline void to_json(json& j, const LabelShiftRun& r) {
  j = json{{"seed", r.seed},
           {"keep_ratios", r.keep_ratios},
           {"source_prior", r.source_prior},
           {"actual_target", r.actual_target},
           {"act_ratios", r.act_ratios},
           {"scores", r.scores},
           {"est_ratios", r.est_ratios},
           {"est_priors", r.est_priors}};
}

inline void to_json(json& j, const LabelShiftResult& r) {
  j = json{{"config", r.config}, {"runs", r.runs}, {"median_scores", r.median_scores}};
}

inline void to_json(json& j, const CondShiftConfig& c) {
  j = json{{"num_classes", c.num_classes},
           {"regions", c.regions},
           {"region_width", c.region_width},
           {"class_width", c.class_width},
           {"class_stride", c.class_stride},
           {"background_rate", c.background_rate},
           {"region_rate", c.region_rate},
           {"class_rate_by_region", c.class_rate_by_region},
           {"population_span", c.population_span},
           {"source_span", c.source_span},
           {"target_skew", c.target_skew},
           {"keep_lo", c.keep_lo},
           {"keep_hi", c.keep_hi},
           {"n_population", c.n_population},
           {"n_target", c.n_target},
           {"n_oracle", c.n_oracle},
           {"train_fraction", c.train_fraction},
           {"classifier", c.classifier},
           {"partition", c.partition},
           {"quantify", c.quantify},
           {"methods", c.methods},
           {"runs", c.runs},
           {"seed", c.seed}};
  if (c.exclusion_shift) j["exclusion_shift"] = *c.exclusion_shift;
}

inline void from_json(const json& j, CondShiftConfig& c) {
  c = CondShiftConfig{};
  if (j.contains("num_classes")) j.at("num_classes").get_to(c.num_classes);
  if (j.contains("regions")) j.at("regions").get_to(c.regions);
  if (j.contains("region_width")) j.at("region_width").get_to(c.region_width);
  if (j.contains("class_width")) j.at("class_width").get_to(c.class_width);
  if (j.contains("class_stride")) j.at("class_stride").get_to(c.class_stride);
  if (j.contains("background_rate")) j.at("background_rate").get_to(c.background_rate);
  if (j.contains("region_rate")) j.at("region_rate").get_to(c.region_rate);
  if (j.contains("class_rate_by_region")) j.at("class_rate_by_region").get_to(c.class_rate_by_region);
  if (j.contains("population_span")) j.at("population_span").get_to(c.population_span);
  if (j.contains("source_span")) j.at("source_span").get_to(c.source_span);
  if (j.contains("target_skew")) j.at("target_skew").get_to(c.target_skew);
  if (j.contains("keep_lo")) j.at("keep_lo").get_to(c.keep_lo);
  if (j.contains("keep_hi")) j.at("keep_hi").get_to(c.keep_hi);
  if (j.contains("n_population")) j.at("n_population").get_to(c.n_population);
  if (j.contains("n_target")) j.at("n_target").get_to(c.n_target);
  if (j.contains("n_oracle")) j.at("n_oracle").get_to(c.n_oracle);
  if (j.contains("train_fraction")) j.at("train_fraction").get_to(c.train_fraction);
  if (j.contains("classifier")) j.at("classifier").get_to(c.classifier);
  if (j.contains("partition")) j.at("partition").get_to(c.partition);
  if (j.contains("quantify")) j.at("quantify").get_to(c.quantify);
  if (j.contains("methods")) j.at("methods").get_to(c.methods);
  if (j.contains("exclusion_shift") && !j.at("exclusion_shift").is_null()) {
    c.exclusion_shift = j.at("exclusion_shift").get<ShiftSpec>();
  }
  if (j.contains("runs")) j.at("runs").get_to(c.runs);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
}

inline void to_json(json& j, const CondShiftRun& r) {
  j = json{{"seed", r.seed},
           {"balance_keep", r.balance_keep},
           {"target_keep", r.target_keep},
           {"source_prior", r.source_prior},
           {"actual_target", r.actual_target},
           {"scores", r.scores},
           {"top1", r.top1},
           {"top3", r.top3},
           {"est_priors", r.est_priors},
           {"oracle_top1", r.oracle_top1},
           {"oracle_top3", r.oracle_top3},
           {"fallback_subspaces", r.fallback_subspaces}};
  if (!r.failures.empty()) j["failures"] = r.failures;
}

inline void to_json(json& j, const CondShiftResult& r) {
  j = json{{"config", r.config},
           {"runs", r.runs},
           {"median_scores", r.median_scores},
           {"median_top1", r.median_top1},
           {"median_top3", r.median_top3},
           {"median_oracle_top1", r.median_oracle_top1},
           {"median_oracle_top3", r.median_oracle_top3}};
}

inline void to_json(json& j, const NoiseScalingConfig& c) {
  j = json{{"signature_features", c.signature_features},
           {"background_features", c.background_features},
           {"theta0", c.theta0},
           {"epsilons", c.epsilons},
           {"p_fixed", c.p_fixed},
           {"p_sweep", c.p_sweep},
           {"epsilon_fixed", c.epsilon_fixed},
           {"include_separable", c.include_separable},
           {"resamples", c.resamples},
           {"n_target", c.n_target},
           {"n_calibration", c.n_calibration},
           {"quantify", c.quantify},
           {"seed", c.seed}};
}

inline void from_json(const json& j, NoiseScalingConfig& c) {
  c = NoiseScalingConfig{};
  if (j.contains("signature_features")) j.at("signature_features").get_to(c.signature_features);
  if (j.contains("background_features")) j.at("background_features").get_to(c.background_features);
  if (j.contains("theta0")) j.at("theta0").get_to(c.theta0);
  if (j.contains("epsilons")) j.at("epsilons").get_to(c.epsilons);
  if (j.contains("p_fixed")) j.at("p_fixed").get_to(c.p_fixed);
  if (j.contains("p_sweep")) j.at("p_sweep").get_to(c.p_sweep);
  if (j.contains("epsilon_fixed")) j.at("epsilon_fixed").get_to(c.epsilon_fixed);
  if (j.contains("include_separable")) j.at("include_separable").get_to(c.include_separable);
  if (j.contains("resamples")) j.at("resamples").get_to(c.resamples);
  if (j.contains("n_target")) j.at("n_target").get_to(c.n_target);
  if (j.contains("n_calibration")) j.at("n_calibration").get_to(c.n_calibration);
  if (j.contains("quantify")) j.at("quantify").get_to(c.quantify);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
}

inline void to_json(json& j, const NoiseSetting& s) {
  j = json{{"rare_prior", s.rare_prior},
           {"epsilon_target", s.epsilon_target},
           {"epsilon_achieved", s.epsilon_achieved},
           {"theta1", s.theta1},
           {"flip_count", s.flip_count},
           {"mean_soft", s.mean_soft},
           {"mean_hard", s.mean_hard},
           {"std_soft", s.std_soft},
           {"std_hard", s.std_hard},
           {"ratio", s.ratio},
           {"rel_std_soft", s.rel_std_soft},
           {"excluded", s.excluded},
           {"note", s.note}};
}

inline void to_json(json& j, const NoiseScalingResult& r) {
  j = json{{"config", r.config},
           {"epsilon_sweep", r.epsilon_sweep},
           {"prior_sweep", r.prior_sweep},
           {"trend_ok", r.trend_ok},
           {"separable_ok", r.separable_ok},
           {"prior_scaling_ok", r.prior_scaling_ok}};
  if (r.separable) j["separable"] = *r.separable;
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace shiftquant
