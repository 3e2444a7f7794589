#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "shiftquant/common.hpp"

namespace shiftquant {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Where a class distribution came from.
enum class Provenance { True, ClassifierMean, Quantified };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::True: return "true";
    case Provenance::ClassifierMean: return "classifier-mean";
    case Provenance::Quantified: return "quantified";
  }
  return "unknown";
}

// Length-K probability vector.
struct ClassDistribution {
  Vector p;
  Provenance provenance = Provenance::True;

  int size() const { return static_cast<int>(p.size()); }
};

// n x K matrix of per-example class probabilities; rows sum to one.
struct PredictionMatrix {
  Matrix probs;

  int rows() const { return static_cast<int>(probs.rows()); }
  int classes() const { return static_cast<int>(probs.cols()); }
};

inline void check_distribution(const Vector& p, double tol = 1e-9,
                               const std::string& what = "distribution") {
  require(p.size() > 0, what + ": empty vector");
  require(p.minCoeff() >= -tol, what + ": negative entry");
  require(std::abs(p.sum() - 1.0) <= tol, what + ": does not sum to 1");
}

inline void check_rows_normalized(const Matrix& m, double tol = 1e-9,
                                  const std::string& what = "predictions") {
  require(m.rows() > 0 && m.cols() > 0, what + ": empty matrix");
  require(m.minCoeff() >= 0.0, what + ": negative entry");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    require(std::abs(m.row(i).sum() - 1.0) <= tol,
            what + ": row " + std::to_string(i) + " does not sum to 1");
  }
}

// Empirical label distribution of an integer label vector.
inline ClassDistribution empirical_prior(const std::vector<int>& labels, int num_classes) {
  require(num_classes >= 1, "empirical_prior: num_classes must be positive");
  require(!labels.empty(), "empirical_prior: empty label vector");
  Vector counts = Vector::Zero(num_classes);
  for (int y : labels) {
    require(y >= 0 && y < num_classes, "empirical_prior: label out of range");
    counts[y] += 1.0;
  }
  return ClassDistribution{counts / static_cast<double>(labels.size()), Provenance::True};
}

}  // namespace shiftquant
