#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <iostream>
#include <limits>
#include <vector>

#include "shiftquant/common.hpp"
#include "shiftquant/rng.hpp"
#include "shiftquant/types.hpp"

namespace shiftquant {

// Mean-centering PCA projection. Components are orthonormal columns ordered
// by descending eigenvalue; each column's largest-magnitude entry is positive.
struct PcaProjection {
  Vector mean;                 // length F
  Matrix components;           // F x d
  Vector explained_variance;   // d retained eigenvalues, non-increasing
  Vector all_eigenvalues;      // full spectrum, descending
  int requested_dims = 0;

  int dims() const { return static_cast<int>(components.cols()); }
  int input_width() const { return static_cast<int>(mean.size()); }

  Matrix project(const Matrix& features) const {
    require(features.cols() == mean.size(), "pca: feature width mismatch");
    return (features.rowwise() - mean.transpose()) * components;
  }

  Matrix reconstruct(const Matrix& projected) const {
    return (projected * components.transpose()).rowwise() + mean.transpose();
  }
};

inline PcaProjection fit_pca(const Matrix& features, int dims) {
  const int n = static_cast<int>(features.rows());
  const int width = static_cast<int>(features.cols());
  require(n >= 2, "fit_pca: need at least 2 rows");
  require(dims >= 1 && dims <= width, "fit_pca: dims must be in [1, F]");

  PcaProjection pca;
  pca.requested_dims = dims;
  pca.mean = features.colwise().mean();
  Matrix centered = features.rowwise() - pca.mean.transpose();
  Matrix cov = centered.adjoint() * centered / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  require(solver.info() == Eigen::Success, "fit_pca: eigendecomposition failed");

  // Eigen reports ascending order; flip to descending.
  Vector eigenvalues = solver.eigenvalues().reverse();
  Matrix eigenvectors = solver.eigenvectors().rowwise().reverse();
  for (int j = 0; j < eigenvalues.size(); ++j) {
    if (eigenvalues[j] < 0.0) eigenvalues[j] = 0.0;  // rounding on rank-deficient input
  }
  pca.all_eigenvalues = eigenvalues;

  const double cutoff = eigenvalues[0] * 1e-12;
  int rank = 0;
  for (int j = 0; j < eigenvalues.size(); ++j) {
    if (eigenvalues[j] > cutoff) ++rank;
  }
  rank = std::max(rank, 1);
  if (dims > rank) {
    std::cerr << "[fit_pca] warning: requested " << dims
              << " dims but data rank is " << rank << "; reducing\n";
    dims = rank;
  }

  pca.components = eigenvectors.leftCols(dims);
  pca.explained_variance = eigenvalues.head(dims);

  // Sign convention: largest-magnitude entry of each component is positive.
  for (int j = 0; j < dims; ++j) {
    int arg = 0;
    pca.components.col(j).cwiseAbs().maxCoeff(&arg);
    if (pca.components(arg, j) < 0.0) pca.components.col(j) *= -1.0;
  }
  return pca;
}

// Nearest-centroid assignment in the projected space; ties go to the lowest
// centroid index.
inline std::vector<int> assign_to_centroids(const Matrix& points, const Matrix& centroids) {
  require(points.cols() == centroids.cols(), "assign: width mismatch");
  std::vector<int> assignment(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d2 = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d2 < best) {
        best = d2;
        arg = static_cast<int>(c);
      }
    }
    assignment[i] = arg;
  }
  return assignment;
}

struct KMeansResult {
  Matrix centroids;  // k x d
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_history;  // one entry per Lloyd iteration
};

namespace detail {

inline double kmeans_inertia(const Matrix& points, const Matrix& centroids,
                             const std::vector<int>& assignment) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += (points.row(i) - centroids.row(assignment[i])).squaredNorm();
  }
  return total;
}

inline Matrix kmeans_plus_plus(const Matrix& points, int k, CounterRng& rng) {
  const int n = static_cast<int>(points.rows());
  Matrix centroids(k, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.next_below(n)));
  Vector dist2(n);
  for (int i = 0; i < n; ++i) {
    dist2[i] = (points.row(i) - centroids.row(0)).squaredNorm();
  }
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.next_below(n));
    } else {
      const double r = rng.next_unit() * total;
      double cum = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        cum += dist2[i];
        if (r < cum) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = points.row(pick);
    for (int i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], (points.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

inline KMeansResult lloyd(const Matrix& points, Matrix centroids, int max_iters, double tol) {
  const int n = static_cast<int>(points.rows());
  const int k = static_cast<int>(centroids.rows());
  double prev_inertia = std::numeric_limits<double>::infinity();
  int iter = 0;
  std::vector<int> assignment;
  std::vector<double> history;
  for (; iter < max_iters; ++iter) {
    assignment = assign_to_centroids(points, centroids);
    const double inertia = kmeans_inertia(points, centroids, assignment);
    if (inertia > prev_inertia * (1.0 + 1e-9) + 1e-12) {
      throw NumericalError(NumericalError::Kind::Inconsistent,
                           "fit_kmeans: inertia increased across Lloyd iterations");
    }
    prev_inertia = inertia;
    history.push_back(inertia);

    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assignment[i]) += points.row(i);
      ++counts[assignment[i]];
    }
    Matrix updated(k, points.cols());
    std::vector<int> empties;
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        updated.row(c) = sums.row(c) / counts[c];
      } else {
        empties.push_back(c);
      }
    }
    if (!empties.empty()) {
      // Re-seed each empty cluster to the point farthest from its centroid.
      std::vector<int> order(n);
      for (int i = 0; i < n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = (points.row(a) - centroids.row(assignment[a])).squaredNorm();
        const double db = (points.row(b) - centroids.row(assignment[b])).squaredNorm();
        if (da != db) return da > db;
        return a < b;
      });
      std::size_t next = 0;
      for (int c : empties) {
        updated.row(c) = points.row(order[next % order.size()]);
        ++next;
      }
    }

    const double move = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = updated;
    if (move < tol) {
      ++iter;
      break;
    }
  }
  assignment = assign_to_centroids(points, centroids);
  const double final_inertia = kmeans_inertia(points, centroids, assignment);
  history.push_back(final_inertia);
  return KMeansResult{std::move(centroids), final_inertia, iter, std::move(history)};
}

}  // namespace detail

// Seeded k-means++ followed by Lloyd iterations; keeps the lowest-inertia run
// across restarts. Deterministic given (points, k, seed).
inline KMeansResult fit_kmeans(const Matrix& points, int k, std::uint64_t seed,
                               int max_iters = 100, double tol = 1e-7, int restarts = 10) {
  const int n = static_cast<int>(points.rows());
  require(k >= 1, "fit_kmeans: k must be positive");
  require(n >= k, "fit_kmeans: fewer points than clusters");
  require(restarts >= 1, "fit_kmeans: restarts must be positive");

  KMeansResult best;
  bool have_best = false;
  for (int r = 0; r < restarts; ++r) {
    CounterRng rng(derive_seed(seed, 0x6B6D6565ULL), static_cast<std::uint64_t>(r));
    KMeansResult run = detail::lloyd(points, detail::kmeans_plus_plus(points, k, rng),
                                     max_iters, tol);
    if (!have_best || run.inertia < best.inertia) {
      best = std::move(run);
      have_best = true;
    }
  }
  return best;
}

struct PartitionConfig {
  int dims = 6;
  int clusters = 5;
  int min_support = 5;
  int kmeans_restarts = 10;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-7;
  // Subspaces smaller than these floors are merged into their nearest
  // neighbor before any per-subspace solve.
  int min_source_rows = 50;
  int min_target_rows = 20;
};

// Per-(subspace, class) source presence.
struct SupportInfo {
  Eigen::MatrixXi counts;                // N x K
  std::vector<std::vector<bool>> mask;   // N x K, count >= min_support
  std::vector<int> subspace_sizes;       // source points per subspace
  std::vector<bool> usable;              // subspace has any source point
};

inline SupportInfo compute_support(const std::vector<int>& assignments,
                                   const std::vector<int>& labels,
                                   int num_subspaces, int num_classes, int min_support) {
  require(assignments.size() == labels.size(), "compute_support: size mismatch");
  require(num_subspaces >= 1 && num_classes >= 1, "compute_support: bad dimensions");
  SupportInfo info;
  info.counts = Eigen::MatrixXi::Zero(num_subspaces, num_classes);
  info.subspace_sizes.assign(num_subspaces, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(assignments[i] >= 0 && assignments[i] < num_subspaces,
            "compute_support: assignment out of range");
    require(labels[i] >= 0 && labels[i] < num_classes,
            "compute_support: label out of range");
    info.counts(assignments[i], labels[i]) += 1;
    ++info.subspace_sizes[assignments[i]];
  }
  info.mask.resize(num_subspaces);
  info.usable.resize(num_subspaces);
  for (int s = 0; s < num_subspaces; ++s) {
    info.mask[s].resize(num_classes);
    for (int y = 0; y < num_classes; ++y) {
      info.mask[s][y] = info.counts(s, y) >= min_support;
    }
    info.usable[s] = info.subspace_sizes[s] > 0;
  }
  return info;
}

// PCA projection + K-Means centroids + per-subspace class support, fitted on
// source data only.
struct SubspacePartition {
  PcaProjection pca;
  Matrix centroids;      // N x d
  SupportInfo support;
  PartitionConfig config;

  int num_subspaces() const { return static_cast<int>(centroids.rows()); }

  std::vector<int> assign(const Matrix& features) const {
    return assign_to_centroids(pca.project(features), centroids);
  }
};

inline SubspacePartition fit_partition(const Matrix& features, const std::vector<int>& labels,
                                       int num_classes, const PartitionConfig& config,
                                       std::uint64_t seed) {
  SubspacePartition part;
  part.config = config;
  part.pca = fit_pca(features, config.dims);
  Matrix projected = part.pca.project(features);
  part.centroids = fit_kmeans(projected, config.clusters, seed, config.kmeans_max_iters,
                              config.kmeans_tol, config.kmeans_restarts)
                       .centroids;
  const std::vector<int> assignment = assign_to_centroids(projected, part.centroids);
  part.support = compute_support(assignment, labels, part.num_subspaces(), num_classes,
                                 config.min_support);
  return part;
}

}  // namespace shiftquant
