#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "shiftquant/quantify.hpp"
#include "shiftquant/rng.hpp"

using namespace shiftquant;

namespace {

// Gauss-Jordan inverse with partial pivoting on plain nested vectors.
// Deliberately avoids the Eigen solver used by solve_prior so the two
// routes share no code.
std::vector<std::vector<double>> gauss_jordan_inverse(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    REQUIRE(std::abs(a[pivot][col]) > 1e-12);
    std::swap(a[col], a[pivot]);
    std::swap(inv[col], inv[pivot]);
    const double d = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= d;
      inv[col][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

Matrix to_eigen(const std::vector<std::vector<double>>& a) {
  Matrix m(a.size(), a.front().size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) m(i, j) = a[i][j];
  }
  return m;
}

// Random column-stochastic, diagonally dominant confusion matrix.
std::vector<std::vector<double>> random_confusion(int k, CounterRng& rng) {
  std::vector<std::vector<double>> c(k, std::vector<double>(k));
  for (int col = 0; col < k; ++col) {
    double total = 0.0;
    for (int row = 0; row < k; ++row) {
      c[row][col] = (row == col ? 2.0 : 0.0) + rng.next_unit();
      total += c[row][col];
    }
    for (int row = 0; row < k; ++row) c[row][col] /= total;
  }
  return c;
}

Vector random_prior(int k, CounterRng& rng) {
  Vector p(k);
  double total = 0.0;
  for (int y = 0; y < k; ++y) {
    p[y] = 0.05 + rng.next_unit();
    total += p[y];
  }
  return p / total;
}

PredictionMatrix preds_from(std::initializer_list<std::initializer_list<double>> rows) {
  PredictionMatrix pm;
  pm.probs = Matrix(rows.size(), rows.begin()->size());
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) pm.probs(i, j++) = v;
    ++i;
  }
  return pm;
}

}  // namespace

TEST_CASE("solve_prior matches a Gauss-Jordan inverse on random instances") {
  CounterRng rng(41, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.next_below(3));
    const auto c = random_confusion(k, rng);
    const Vector truth = random_prior(k, rng);

    ConfusionMatrix cm;
    cm.c = to_eigen(c);
    cm.support = Eigen::VectorXi::Constant(k, 100);
    const ClassDistribution p_hat{cm.c * truth, Provenance::ClassifierMean};

    const QuantificationResult got = solve_prior(cm, p_hat);

    const auto inv = gauss_jordan_inverse(c);
    Vector expect = Vector::Zero(k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) expect[i] += inv[i][j] * p_hat.p[j];
    }
    for (int y = 0; y < k; ++y) {
      REQUIRE(got.raw[y] == Catch::Approx(expect[y]).margin(1e-9));
      REQUIRE(got.prior.p[y] == Catch::Approx(truth[y]).margin(1e-9));
    }
    REQUIRE(got.clipped_mass == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(got.prior.provenance == Provenance::Quantified);
  }
}

TEST_CASE("solve_prior hand example") {
  ConfusionMatrix cm;
  cm.c = Matrix(2, 2);
  cm.c << 0.7, 0.3, 0.3, 0.7;
  cm.support = Eigen::VectorXi::Constant(2, 10);
  const ClassDistribution p_hat{(Vector(2) << 0.6, 0.4).finished(),
                                Provenance::ClassifierMean};
  const QuantificationResult r = solve_prior(cm, p_hat);
  REQUIRE(r.prior.p[0] == Catch::Approx(0.75).margin(1e-12));
  REQUIRE(r.prior.p[1] == Catch::Approx(0.25).margin(1e-12));
  REQUIRE(r.clipped_mass == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("solve_prior clips negative solutions and reports the removed mass") {
  ConfusionMatrix cm;
  cm.c = Matrix(2, 2);
  cm.c << 0.9, 0.5, 0.1, 0.5;
  cm.support = Eigen::VectorXi::Constant(2, 10);
  const ClassDistribution p_hat{(Vector(2) << 0.95, 0.05).finished(),
                                Provenance::ClassifierMean};
  const QuantificationResult r = solve_prior(cm, p_hat);
  REQUIRE(r.raw[0] == Catch::Approx(1.125).margin(1e-12));
  REQUIRE(r.raw[1] == Catch::Approx(-0.125).margin(1e-12));
  REQUIRE(r.prior.p[0] == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(r.prior.p[1] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(r.clipped_mass == Catch::Approx(0.125).margin(1e-12));
}

TEST_CASE("soft_confusion averages predicted columns per true class") {
  const PredictionMatrix preds = preds_from({{0.8, 0.2}, {0.6, 0.4}, {0.3, 0.7}});
  const std::vector<int> labels{0, 0, 1};
  const ConfusionMatrix cm = soft_confusion(preds, labels, 2);
  REQUIRE(cm.c(0, 0) == Catch::Approx(0.7).margin(1e-12));
  REQUIRE(cm.c(1, 0) == Catch::Approx(0.3).margin(1e-12));
  REQUIRE(cm.c(0, 1) == Catch::Approx(0.3).margin(1e-12));
  REQUIRE(cm.c(1, 1) == Catch::Approx(0.7).margin(1e-12));
  REQUIRE(cm.support[0] == 2);
  REQUIRE(cm.support[1] == 1);
  REQUIRE(cm.kind == ConfusionKind::Soft);
  for (int col = 0; col < 2; ++col) {
    REQUIRE(cm.c.col(col).sum() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("hard_confusion uses argmax one-hots") {
  const PredictionMatrix preds = preds_from({{0.8, 0.2}, {0.6, 0.4}, {0.3, 0.7}, {0.4, 0.6}});
  const std::vector<int> labels{0, 1, 1, 1};
  const ConfusionMatrix cm = hard_confusion(preds, labels, 2);
  REQUIRE(cm.c(0, 0) == Catch::Approx(1.0));
  REQUIRE(cm.c(1, 0) == Catch::Approx(0.0));
  REQUIRE(cm.c(0, 1) == Catch::Approx(1.0 / 3.0).margin(1e-12));
  REQUIRE(cm.c(1, 1) == Catch::Approx(2.0 / 3.0).margin(1e-12));
  REQUIRE(cm.kind == ConfusionKind::Hard);
}

TEST_CASE("harden breaks ties toward the lowest class index") {
  const PredictionMatrix preds = preds_from({{0.4, 0.4, 0.2}, {0.2, 0.4, 0.4}, {0.1, 0.2, 0.7}});
  const PredictionMatrix hard = harden(preds);
  REQUIRE(hard.probs(0, 0) == 1.0);
  REQUIRE(hard.probs(1, 1) == 1.0);
  REQUIRE(hard.probs(2, 2) == 1.0);
  REQUIRE(hard.probs.sum() == Catch::Approx(3.0));
  check_rows_normalized(hard.probs);
}

TEST_CASE("target_mean is the column mean with classifier provenance") {
  const PredictionMatrix preds = preds_from({{0.8, 0.2}, {0.4, 0.6}});
  const ClassDistribution d = target_mean(preds);
  REQUIRE(d.p[0] == Catch::Approx(0.6).margin(1e-12));
  REQUIRE(d.p[1] == Catch::Approx(0.4).margin(1e-12));
  REQUIRE(d.provenance == Provenance::ClassifierMean);
}

TEST_CASE("solve_prior rejects a singular confusion matrix") {
  ConfusionMatrix cm;
  cm.c = Matrix(2, 2);
  cm.c << 0.5, 0.5, 0.5, 0.5;
  cm.support = Eigen::VectorXi::Constant(2, 10);
  const ClassDistribution p_hat{(Vector(2) << 0.5, 0.5).finished(),
                                Provenance::ClassifierMean};
  try {
    solve_prior(cm, p_hat);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    REQUIRE(e.kind() == NumericalError::Kind::Singular);
  }
}

TEST_CASE("solve_prior rejects an ill-conditioned matrix with its condition number") {
  ConfusionMatrix cm;
  cm.c = Matrix(2, 2);
  const double eps = 1e-10;
  cm.c << 0.5 + eps, 0.5, 0.5 - eps, 0.5;
  cm.support = Eigen::VectorXi::Constant(2, 10);
  const ClassDistribution p_hat{(Vector(2) << 0.5, 0.5).finished(),
                                Provenance::ClassifierMean};
  try {
    solve_prior(cm, p_hat);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    REQUIRE(e.kind() == NumericalError::Kind::IllConditioned);
    REQUIRE(e.condition_number() > 1e8);
  }
}

TEST_CASE("solve_prior rejects a non-column-stochastic matrix as inconsistent") {
  ConfusionMatrix cm;
  cm.c = Matrix(2, 2);
  cm.c << 0.7, 0.2, 0.1, 0.6;  // columns sum to 0.8, violating conservation
  cm.support = Eigen::VectorXi::Constant(2, 10);
  const ClassDistribution p_hat{(Vector(2) << 0.5, 0.5).finished(),
                                Provenance::ClassifierMean};
  try {
    solve_prior(cm, p_hat);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    REQUIRE(e.kind() == NumericalError::Kind::Inconsistent);
  }
}

TEST_CASE("restrict_supported passes fully supported systems through untouched") {
  const PredictionMatrix preds = preds_from({{0.8, 0.2}, {0.3, 0.7}});
  const std::vector<int> labels{0, 1};
  const ConfusionMatrix cm = soft_confusion(preds, labels, 2);
  const ClassDistribution p_hat{(Vector(2) << 0.6, 0.4).finished(),
                                Provenance::ClassifierMean};
  const RestrictedSystem sys = restrict_supported(cm, p_hat, {1, 1});
  REQUIRE((sys.confusion.c.array() == cm.c.array()).all());
  REQUIRE((sys.p_hat.p.array() == p_hat.p.array()).all());
  REQUIRE(sys.index_map == std::vector<int>{0, 1});
}

TEST_CASE("restrict_supported drops unsupported classes and renormalizes") {
  ConfusionMatrix cm;
  cm.c = Matrix(3, 3);
  cm.c << 0.7, 0.2, 0.0,
          0.2, 0.7, 0.0,
          0.1, 0.1, 1.0;
  cm.support = (Eigen::VectorXi(3) << 10, 10, 0).finished();
  const ClassDistribution p_hat{(Vector(3) << 0.5, 0.4, 0.1).finished(),
                                Provenance::ClassifierMean};
  const RestrictedSystem sys = restrict_supported(cm, p_hat, {1, 1, 0});
  REQUIRE(sys.index_map == std::vector<int>{0, 1});
  REQUIRE(sys.confusion.classes() == 2);
  // Kept columns renormalized to sum 1 over the kept rows.
  for (int col = 0; col < 2; ++col) {
    REQUIRE(sys.confusion.c.col(col).sum() == Catch::Approx(1.0).margin(1e-12));
  }
  REQUIRE(sys.p_hat.p.sum() == Catch::Approx(1.0).margin(1e-12));

  const QuantificationResult q = solve_prior(sys.confusion, sys.p_hat);
  const ClassDistribution full = embed_prior(q.prior, sys.index_map, 3);
  REQUIRE(full.size() == 3);
  REQUIRE(full.p[2] == 0.0);
  REQUIRE(full.p.sum() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("zero-support class yields a singular full system but a solvable restriction") {
  const PredictionMatrix preds = preds_from(
      {{0.9, 0.05, 0.05}, {0.8, 0.15, 0.05}, {0.2, 0.7, 0.1}, {0.1, 0.8, 0.1}});
  const std::vector<int> labels{0, 0, 1, 1};  // class 2 never appears
  const ConfusionMatrix cm = soft_confusion(preds, labels, 3);
  REQUIRE(cm.support[2] == 0);
  REQUIRE(cm.c.col(2).sum() == 0.0);

  const ClassDistribution p_hat{(Vector(3) << 0.5, 0.4, 0.1).finished(),
                                Provenance::ClassifierMean};
  REQUIRE_THROWS_AS(solve_prior(cm, p_hat), NumericalError);

  std::vector<char> mask{1, 1, 0};
  const RestrictedSystem sys = restrict_supported(cm, p_hat, mask);
  REQUIRE_NOTHROW(solve_prior(sys.confusion, sys.p_hat));
}
