#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "shiftquant/common.hpp"
#include "shiftquant/dataset.hpp"
#include "shiftquant/rng.hpp"
#include "shiftquant/types.hpp"

namespace shiftquant {

namespace salt {
inline constexpr std::uint64_t kMlpInit = 0x494E4954ULL;
inline constexpr std::uint64_t kMlpShuffle = 0x53484C46ULL;
}  // namespace salt

struct MlpConfig {
  int hidden_units = 64;
  int epochs = 12;
  int batch_size = 256;
  double learning_rate = 0.05;

  void validate() const {
    require(hidden_units >= 1, "MlpConfig.hidden_units: must be positive");
    require(epochs >= 1, "MlpConfig.epochs: must be positive");
    require(batch_size >= 1, "MlpConfig.batch_size: must be positive");
    require(learning_rate > 0.0, "MlpConfig.learning_rate: must be positive");
  }
};

// One hidden rectifier layer followed by a softmax readout.
struct SoftmaxMlp {
  Matrix w1;  // F x H
  Vector b1;  // H
  Matrix w2;  // H x K
  Vector b2;  // K
  MlpConfig config;
  std::uint64_t seed = 0;
  std::vector<double> epoch_losses;

  int input_width() const { return static_cast<int>(w1.rows()); }
  int hidden_units() const { return static_cast<int>(w1.cols()); }
  int num_classes() const { return static_cast<int>(w2.cols()); }
};

inline SoftmaxMlp init_mlp(int input_width, int hidden_units, int num_classes,
                           std::uint64_t seed) {
  require(input_width >= 1 && hidden_units >= 1 && num_classes >= 1,
          "init_mlp: dimensions must be positive");
  SoftmaxMlp m;
  m.seed = seed;
  CounterRng rng(derive_seed(seed, salt::kMlpInit), 0);
  auto glorot = [&](Matrix& w, int fan_in, int fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    w = Matrix(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = a * (2.0 * rng.next_unit() - 1.0);
      }
    }
  };
  glorot(m.w1, input_width, hidden_units);
  glorot(m.w2, hidden_units, num_classes);
  m.b1 = Vector::Zero(hidden_units);
  m.b2 = Vector::Zero(num_classes);
  return m;
}

namespace detail {

inline Matrix softmax_rows(Matrix logits) {
  const Vector row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  Matrix out = logits.array().exp();
  const Vector row_sum = out.rowwise().sum();
  out.array().colwise() /= row_sum.array();
  return out;
}

struct MlpForward {
  Matrix hidden;  // post-rectifier activations
  Matrix probs;
};

inline MlpForward mlp_forward(const SoftmaxMlp& m, const Matrix& x) {
  MlpForward f;
  f.hidden = ((x * m.w1).rowwise() + m.b1.transpose()).cwiseMax(0.0);
  f.probs = softmax_rows((f.hidden * m.w2).rowwise() + m.b2.transpose());
  return f;
}

}  // namespace detail

inline PredictionMatrix predict_proba(const SoftmaxMlp& m, const Matrix& features) {
  require(static_cast<int>(features.cols()) == m.input_width(),
          "predict_proba: feature width mismatch");
  PredictionMatrix preds;
  preds.probs = detail::mlp_forward(m, features).probs;
  return preds;
}

inline double mean_cross_entropy(const SoftmaxMlp& m, const Matrix& x,
                                 const std::vector<int>& labels) {
  require(x.rows() == static_cast<Eigen::Index>(labels.size()),
          "mean_cross_entropy: row/label count mismatch");
  require(x.rows() > 0, "mean_cross_entropy: empty batch");
  const Matrix probs = detail::mlp_forward(m, x).probs;
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    total -= std::log(std::max(probs(i, labels[static_cast<std::size_t>(i)]), 1e-300));
  }
  return total / static_cast<double>(x.rows());
}

struct MlpGradients {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

// Analytic gradient of mean cross-entropy over the batch.
inline MlpGradients compute_gradients(const SoftmaxMlp& m, const Matrix& x,
                                      const std::vector<int>& labels) {
  require(x.rows() == static_cast<Eigen::Index>(labels.size()),
          "compute_gradients: row/label count mismatch");
  require(x.rows() > 0, "compute_gradients: empty batch");
  const detail::MlpForward f = detail::mlp_forward(m, x);
  Matrix dlogits = f.probs;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    dlogits(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  dlogits /= static_cast<double>(x.rows());

  MlpGradients g;
  g.w2 = f.hidden.transpose() * dlogits;
  g.b2 = dlogits.colwise().sum().transpose();
  Matrix dhidden = dlogits * m.w2.transpose();
  dhidden = (f.hidden.array() > 0.0).select(dhidden, 0.0);
  g.w1 = x.transpose() * dhidden;
  g.b1 = dhidden.colwise().sum().transpose();
  return g;
}

// Mini-batch gradient descent with a seeded per-epoch shuffle.
inline SoftmaxMlp train(const LabeledDataset& ds, const MlpConfig& config, std::uint64_t seed) {
  ds.validate();
  config.validate();
  SoftmaxMlp m = init_mlp(ds.cols(), config.hidden_units, ds.num_classes, seed);
  m.config = config;

  std::vector<int> order(static_cast<std::size_t>(ds.rows()));
  for (int i = 0; i < ds.rows(); ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    CounterRng rng(derive_seed(seed, salt::kMlpShuffle), static_cast<std::uint64_t>(epoch));
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (int start = 0; start < ds.rows(); start += config.batch_size) {
      const int b = std::min(config.batch_size, ds.rows() - start);
      Matrix xb(b, ds.cols());
      std::vector<int> yb(static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i) {
        const int row = order[static_cast<std::size_t>(start + i)];
        xb.row(i) = ds.features.row(row);
        yb[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(row)];
      }
      const double batch_loss = mean_cross_entropy(m, xb, yb);
      if (!std::isfinite(batch_loss)) {
        throw NumericalError(
            NumericalError::Kind::Diverged,
            "train: non-finite loss at epoch " + std::to_string(epoch) + " (learning rate " +
                std::to_string(config.learning_rate) + ")");
      }
      const MlpGradients g = compute_gradients(m, xb, yb);
      m.w1 -= config.learning_rate * g.w1;
      m.b1 -= config.learning_rate * g.b1;
      m.w2 -= config.learning_rate * g.w2;
      m.b2 -= config.learning_rate * g.b2;
      epoch_loss += batch_loss * b;
    }
    m.epoch_losses.push_back(epoch_loss / ds.rows());
  }
  return m;
}

// Max relative error between analytic gradients and central finite
// differences over a deterministic sample of parameters.
inline double gradient_check(const SoftmaxMlp& model, const Matrix& x,
                             const std::vector<int>& labels, double epsilon,
                             int max_params = 256) {
  require(epsilon > 0.0 && epsilon <= 1e-2, "gradient_check: epsilon out of range");
  if (x.rows() == 0) {
    std::cerr << "gradient_check: empty batch, returning 0\n";
    return 0.0;
  }
  const MlpGradients analytic = compute_gradients(model, x, labels);

  struct Slot {
    double* value;
    double grad;
  };
  SoftmaxMlp probe = model;
  MlpGradients grads = analytic;
  std::vector<Slot> slots;
  auto collect = [&](double* data, const double* grad, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) slots.push_back({data + i, grad[i]});
  };
  collect(probe.w1.data(), grads.w1.data(), probe.w1.size());
  collect(probe.b1.data(), grads.b1.data(), probe.b1.size());
  collect(probe.w2.data(), grads.w2.data(), probe.w2.size());
  collect(probe.b2.data(), grads.b2.data(), probe.b2.size());

  const std::size_t stride = std::max<std::size_t>(1, slots.size() / max_params);
  double worst = 0.0;
  for (std::size_t i = 0; i < slots.size(); i += stride) {
    double* p = slots[i].value;
    const double saved = *p;
    *p = saved + epsilon;
    const double up = mean_cross_entropy(probe, x, labels);
    *p = saved - epsilon;
    const double down = mean_cross_entropy(probe, x, labels);
    *p = saved;
    const double fd = (up - down) / (2.0 * epsilon);
    const double denom = std::max(1e-12, std::abs(fd) + std::abs(slots[i].grad));
    worst = std::max(worst, std::abs(fd - slots[i].grad) / denom);
  }
  return worst;
}

}  // namespace shiftquant
