#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "shiftquant/classifier.hpp"
#include "shiftquant/datagen.hpp"

using namespace shiftquant;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(values.size());
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

// Two well-separated classes over four binary features.
LabeledDataset blob_dataset(int n, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.num_classes = 2;
  spec.class_priors = vec({0.5, 0.5});
  spec.subclasses = {{SubclassSpec{1.0, vec({0.9, 0.9, 0.1, 0.1}), std::nullopt}},
                     {SubclassSpec{1.0, vec({0.1, 0.1, 0.9, 0.9}), std::nullopt}}};
  spec.feature_groups = single_feature_group(4);
  return sample_dataset(spec, n, seed);
}

}  // namespace

TEST_CASE("zeroed hidden layer reduces the network to softmax of the output bias") {
  SoftmaxMlp m = init_mlp(3, 2, 2, 1);
  m.w1.setZero();
  m.b1.setZero();
  m.b2 = vec({std::log(2.0), 0.0});
  Matrix x(1, 3);
  x << 1.0, 0.0, 1.0;
  const PredictionMatrix preds = predict_proba(m, x);
  REQUIRE(preds.probs(0, 0) == Catch::Approx(2.0 / 3.0).margin(1e-12));
  REQUIRE(preds.probs(0, 1) == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("compute_gradients matches a hand-derived single-example chain") {
  // One input, one hidden unit, two classes: small enough to differentiate
  // by hand. h = relu(x*w1 + b1), logits = h*w2 + b2.
  SoftmaxMlp m = init_mlp(1, 1, 2, 1);
  m.w1(0, 0) = 1.0;
  m.b1[0] = 0.5;
  m.w2(0, 0) = 0.8;
  m.w2(0, 1) = -0.3;
  m.b2 = vec({0.1, -0.1});

  Matrix x(1, 1);
  x << 1.0;
  const std::vector<int> labels{0};

  const double h = 1.0 * 1.0 + 0.5;
  const double l0 = h * 0.8 + 0.1;
  const double l1 = h * -0.3 - 0.1;
  const double p0 = std::exp(l0) / (std::exp(l0) + std::exp(l1));
  const double p1 = 1.0 - p0;
  const double dl0 = p0 - 1.0;
  const double dl1 = p1;
  const double dh = dl0 * 0.8 + dl1 * -0.3;

  const MlpGradients g = compute_gradients(m, x, labels);
  REQUIRE(g.w2(0, 0) == Catch::Approx(h * dl0).margin(1e-12));
  REQUIRE(g.w2(0, 1) == Catch::Approx(h * dl1).margin(1e-12));
  REQUIRE(g.b2[0] == Catch::Approx(dl0).margin(1e-12));
  REQUIRE(g.b2[1] == Catch::Approx(dl1).margin(1e-12));
  REQUIRE(g.w1(0, 0) == Catch::Approx(1.0 * dh).margin(1e-12));
  REQUIRE(g.b1[0] == Catch::Approx(dh).margin(1e-12));
}

TEST_CASE("a dead rectifier blocks the upstream gradient") {
  SoftmaxMlp m = init_mlp(1, 1, 2, 1);
  m.w1(0, 0) = -2.0;
  m.b1[0] = 0.5;  // pre-activation -1.5 < 0
  m.w2(0, 0) = 0.8;
  m.w2(0, 1) = -0.3;
  m.b2 = vec({0.0, 0.0});
  Matrix x(1, 1);
  x << 1.0;
  const MlpGradients g = compute_gradients(m, x, {0});
  REQUIRE(g.w1(0, 0) == 0.0);
  REQUIRE(g.b1[0] == 0.0);
  REQUIRE(g.w2(0, 0) == 0.0);  // hidden activation is zero
  REQUIRE(g.b2[0] != 0.0);
}

TEST_CASE("analytic gradients agree with central finite differences") {
  const LabeledDataset ds = blob_dataset(64, 5);
  SoftmaxMlp fresh = init_mlp(ds.cols(), 6, ds.num_classes, 7);
  REQUIRE(gradient_check(fresh, ds.features, ds.labels, 1e-5) < 1e-4);

  MlpConfig cfg;
  cfg.hidden_units = 6;
  cfg.epochs = 4;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.1;
  const SoftmaxMlp trained = train(ds, cfg, 7);
  REQUIRE(gradient_check(trained, ds.features, ds.labels, 1e-5) < 1e-4);
}

TEST_CASE("the finite-difference check detects a corrupted gradient") {
  const LabeledDataset ds = blob_dataset(32, 9);
  SoftmaxMlp m = init_mlp(ds.cols(), 4, ds.num_classes, 11);
  const MlpGradients g = compute_gradients(m, ds.features, ds.labels);

  // Central difference on one weight, computed inline.
  const double eps = 1e-5;
  SoftmaxMlp probe = m;
  probe.w2(0, 0) = m.w2(0, 0) + eps;
  const double up = mean_cross_entropy(probe, ds.features, ds.labels);
  probe.w2(0, 0) = m.w2(0, 0) - eps;
  const double down = mean_cross_entropy(probe, ds.features, ds.labels);
  const double fd = (up - down) / (2.0 * eps);

  REQUIRE(std::abs(fd - g.w2(0, 0)) < 1e-7);
  REQUIRE(std::abs(fd - (g.w2(0, 0) + 0.05)) > 1e-3);  // a biased gradient would fail
}

TEST_CASE("predictions are row-normalized and permutation-equivariant") {
  const LabeledDataset ds = blob_dataset(50, 13);
  MlpConfig cfg;
  cfg.hidden_units = 8;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.1;
  const SoftmaxMlp m = train(ds, cfg, 13);

  const PredictionMatrix preds = predict_proba(m, ds.features);
  check_rows_normalized(preds.probs, 1e-9);

  Matrix reversed = ds.features.colwise().reverse();
  const PredictionMatrix rev = predict_proba(m, reversed);
  for (int i = 0; i < ds.rows(); ++i) {
    for (int y = 0; y < 2; ++y) {
      REQUIRE(rev.probs(ds.rows() - 1 - i, y) == preds.probs(i, y));
    }
  }
}

TEST_CASE("training is deterministic in the seed") {
  const LabeledDataset ds = blob_dataset(128, 17);
  MlpConfig cfg;
  cfg.hidden_units = 8;
  cfg.epochs = 5;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.1;
  const SoftmaxMlp a = train(ds, cfg, 21);
  const SoftmaxMlp b = train(ds, cfg, 21);
  REQUIRE((a.w1.array() == b.w1.array()).all());
  REQUIRE((a.w2.array() == b.w2.array()).all());
  REQUIRE(a.epoch_losses == b.epoch_losses);

  const SoftmaxMlp c = train(ds, cfg, 22);
  REQUIRE(!(a.w1.array() == c.w1.array()).all());
}

TEST_CASE("training reduces the loss and separates the blobs") {
  const LabeledDataset ds = blob_dataset(600, 19);
  MlpConfig cfg;
  cfg.hidden_units = 16;
  cfg.epochs = 12;
  cfg.batch_size = 64;
  cfg.learning_rate = 0.1;
  const SoftmaxMlp m = train(ds, cfg, 23);
  REQUIRE(m.epoch_losses.size() == 12);
  REQUIRE(m.epoch_losses.back() < 0.5 * m.epoch_losses.front());

  const PredictionMatrix preds = predict_proba(m, ds.features);
  int correct = 0;
  for (int i = 0; i < ds.rows(); ++i) {
    const int hat = preds.probs(i, 0) >= preds.probs(i, 1) ? 0 : 1;
    correct += hat == ds.labels[static_cast<std::size_t>(i)];
  }
  REQUIRE(correct / double(ds.rows()) > 0.9);
}

TEST_CASE("an exploding step is reported as divergence") {
  const LabeledDataset ds = blob_dataset(64, 25);
  MlpConfig cfg;
  cfg.hidden_units = 4;
  cfg.epochs = 3;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e200;
  try {
    train(ds, cfg, 27);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    REQUIRE(e.kind() == NumericalError::Kind::Diverged);
  }
}

TEST_CASE("configuration and dimension errors are rejected") {
  const LabeledDataset ds = blob_dataset(32, 29);
  MlpConfig bad;
  bad.epochs = 0;
  REQUIRE_THROWS_AS(train(ds, bad, 1), ValidationError);

  const SoftmaxMlp m = init_mlp(4, 4, 2, 1);
  Matrix wrong(1, 3);
  wrong << 1.0, 0.0, 1.0;
  REQUIRE_THROWS_AS(predict_proba(m, wrong), ValidationError);
  REQUIRE_THROWS_AS(init_mlp(0, 4, 2, 1), ValidationError);
}
