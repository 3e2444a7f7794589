#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "shiftquant/common.hpp"
#include "shiftquant/types.hpp"

namespace shiftquant {

// Per-class ratios P^t_y / P^s_y. Classes with zero source prior are masked
// (ratio 0) instead of erroring; they lose all mass under recalibration.
struct CalibrationMap {
  ClassDistribution source;
  ClassDistribution target;
  Vector ratios;
  std::vector<char> masked;

  int size() const { return static_cast<int>(ratios.size()); }

  int masked_count() const {
    int c = 0;
    for (char m : masked) c += m;
    return c;
  }
};

inline CalibrationMap build_map(const ClassDistribution& p_source,
                                const ClassDistribution& p_target) {
  require(p_source.size() == p_target.size(), "build_map: prior length mismatch");
  check_distribution(p_source.p, 1e-9, "build_map: source prior");
  check_distribution(p_target.p, 1e-9, "build_map: target prior");
  CalibrationMap map;
  map.source = p_source;
  map.target = p_target;
  map.ratios = Vector(p_source.size());
  map.masked.assign(static_cast<std::size_t>(p_source.size()), 0);
  for (Eigen::Index y = 0; y < p_source.size(); ++y) {
    if (p_source.p[y] > 0.0) {
      map.ratios[y] = p_target.p[y] / p_source.p[y];
    } else {
      map.ratios[y] = 0.0;
      map.masked[static_cast<std::size_t>(y)] = 1;
    }
  }
  return map;
}

struct RecalibrationResult {
  PredictionMatrix preds;
  int zero_mass_rows = 0;  // rows that lost all mass and were reset to uniform
};

// Multiplies each prediction row elementwise by the ratios and renormalizes.
// A row whose rescaled mass vanishes falls back to uniform over unmasked
// classes and is counted.
inline RecalibrationResult recalibrate(const PredictionMatrix& preds, const CalibrationMap& map) {
  require(preds.classes() == map.size(), "recalibrate: width mismatch");
  RecalibrationResult out;
  out.preds.probs = Matrix(preds.rows(), preds.classes());
  const int k = preds.classes();
  int unmasked = 0;
  for (char m : map.masked) unmasked += !m;
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    double mass = 0.0;
    for (int y = 0; y < k; ++y) {
      const double v = preds.probs(i, y) * map.ratios[y];
      out.preds.probs(i, y) = v;
      mass += v;
    }
    if (mass > 0.0) {
      for (int y = 0; y < k; ++y) out.preds.probs(i, y) /= mass;
    } else {
      ++out.zero_mass_rows;
      require(unmasked > 0, "recalibrate: every class masked");
      const double u = 1.0 / unmasked;
      for (int y = 0; y < k; ++y) {
        out.preds.probs(i, y) = map.masked[static_cast<std::size_t>(y)] ? 0.0 : u;
      }
    }
  }
  return out;
}

// Indices of the k largest entries per row, descending; ties resolved toward
// the lower class index.
inline std::vector<std::vector<int>> top_k(const PredictionMatrix& preds, int k) {
  require(k >= 1 && k <= preds.classes(), "top_k: k out of range");
  std::vector<std::vector<int>> out(static_cast<std::size_t>(preds.rows()));
  std::vector<int> order(static_cast<std::size_t>(preds.classes()));
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return preds.probs(i, a) > preds.probs(i, b);
    });
    out[static_cast<std::size_t>(i)].assign(order.begin(), order.begin() + k);
  }
  return out;
}

}  // namespace shiftquant
