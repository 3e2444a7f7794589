#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "shiftquant/calibrate.hpp"
#include "shiftquant/common.hpp"
#include "shiftquant/types.hpp"

namespace shiftquant {

struct ScoreResult {
  double value = 0.0;
  Vector est_ratios;            // over scored classes, original order
  Vector act_ratios;
  std::vector<int> scored;      // class indices that entered the score
  std::vector<int> excluded;    // classes skipped for zero source prior
};

// L2 distance between estimated and actual per-class target/source
// prevalence ratios, divided by the number of scored classes.
inline ScoreResult quantification_score(const ClassDistribution& estimated,
                                        const ClassDistribution& actual,
                                        const ClassDistribution& source) {
  require(estimated.size() == actual.size() && actual.size() == source.size(),
          "quantification_score: prior length mismatch");
  ScoreResult r;
  for (int y = 0; y < source.size(); ++y) {
    if (source.p[y] > 0.0) {
      r.scored.push_back(y);
    } else {
      r.excluded.push_back(y);
    }
  }
  require(!r.scored.empty(), "quantification_score: all classes excluded");
  const int n = static_cast<int>(r.scored.size());
  r.est_ratios = Vector(n);
  r.act_ratios = Vector(n);
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = r.scored[static_cast<std::size_t>(i)];
    r.est_ratios[i] = estimated.p[y] / source.p[y];
    r.act_ratios[i] = actual.p[y] / source.p[y];
    const double d = r.est_ratios[i] - r.act_ratios[i];
    sq += d * d;
  }
  r.value = std::sqrt(sq) / n;
  return r;
}

inline double topk_accuracy(const PredictionMatrix& preds, const std::vector<int>& labels,
                            int k) {
  require(preds.rows() == static_cast<int>(labels.size()),
          "topk_accuracy: prediction/label count mismatch");
  require(preds.rows() > 0, "topk_accuracy: empty input");
  const auto ranked = top_k(preds, k);
  int hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    for (int y : ranked[i]) {
      if (y == labels[i]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(ranked.size());
}

struct EvalReport {
  std::string method;
  std::uint64_t seed = 0;
  double score = 0.0;
  Vector est_ratios;
  Vector act_ratios;
  ClassDistribution estimated_prior;
  ClassDistribution actual_prior;
  ClassDistribution source_prior;
  double top1 = 0.0;
  double top3 = 0.0;
};

inline double mean(const std::vector<double>& xs) {
  require(!xs.empty(), "mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_stddev(const std::vector<double>& xs) {
  require(xs.size() >= 2, "sample_stddev: need at least 2 values");
  const double m = mean(xs);
  double sq = 0.0;
  for (double x : xs) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

inline double median(std::vector<double> xs) {
  require(!xs.empty(), "median: empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline double pearson_correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size() && xs.size() >= 2, "pearson_correlation: bad sample");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, "pearson_correlation: degenerate sample");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace shiftquant
