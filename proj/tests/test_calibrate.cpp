#include <catch_amalgamated.hpp>

#include <vector>

#include "shiftquant/calibrate.hpp"
#include "shiftquant/rng.hpp"

using namespace shiftquant;

namespace {

ClassDistribution dist(std::initializer_list<double> probs) {
  Vector p(probs.size());
  Eigen::Index i = 0;
  for (double v : probs) p[i++] = v;
  return ClassDistribution{p, Provenance::True};
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

PredictionMatrix random_preds(int n, int k, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  PredictionMatrix pm;
  pm.probs = Matrix(n, k);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int y = 0; y < k; ++y) {
      pm.probs(i, y) = 0.01 + rng.next_unit();
      total += pm.probs(i, y);
    }
    pm.probs.row(i) /= total;
  }
  return pm;
}

}  // namespace

TEST_CASE("build_map computes target/source ratios") {
  const CalibrationMap map = build_map(dist({0.8, 0.2}), dist({0.4, 0.6}));
  REQUIRE(map.ratios[0] == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(map.ratios[1] == Catch::Approx(3.0).margin(1e-12));
  REQUIRE(map.masked_count() == 0);
}

TEST_CASE("recalibrate hand example") {
  // Row (0.9, 0.1) under ratios (0.5, 1.5): rescaled (0.45, 0.15), sum 0.6,
  // normalized (0.75, 0.25).
  CalibrationMap map;
  map.source = dist({0.5, 0.5});
  map.target = dist({0.25, 0.75});
  map.ratios = (Vector(2) << 0.5, 1.5).finished();
  map.masked = {0, 0};
  const RecalibrationResult r = recalibrate(preds_from({{0.9, 0.1}}), map);
  REQUIRE(r.preds.probs(0, 0) == Catch::Approx(0.75).margin(1e-12));
  REQUIRE(r.preds.probs(0, 1) == Catch::Approx(0.25).margin(1e-12));
  REQUIRE(r.zero_mass_rows == 0);
}

TEST_CASE("identical priors leave predictions unchanged") {
  const PredictionMatrix preds = random_preds(64, 4, 7);
  const ClassDistribution p = dist({0.4, 0.3, 0.2, 0.1});
  const CalibrationMap map = build_map(p, p);
  const RecalibrationResult r = recalibrate(preds, map);
  for (int i = 0; i < preds.rows(); ++i) {
    for (int y = 0; y < preds.classes(); ++y) {
      REQUIRE(r.preds.probs(i, y) == Catch::Approx(preds.probs(i, y)).margin(1e-12));
    }
  }
}

TEST_CASE("recalibrating twice equals recalibrating with the product ratios") {
  const PredictionMatrix preds = random_preds(32, 3, 11);
  const ClassDistribution a = dist({0.5, 0.3, 0.2});
  const ClassDistribution b = dist({0.3, 0.4, 0.3});
  const ClassDistribution c = dist({0.2, 0.3, 0.5});

  const RecalibrationResult two_step =
      recalibrate(recalibrate(preds, build_map(a, b)).preds, build_map(b, c));
  const RecalibrationResult one_step = recalibrate(preds, build_map(a, c));
  for (int i = 0; i < preds.rows(); ++i) {
    for (int y = 0; y < preds.classes(); ++y) {
      REQUIRE(two_step.preds.probs(i, y) ==
              Catch::Approx(one_step.preds.probs(i, y)).margin(1e-12));
    }
  }
}

TEST_CASE("zero source prior masks the class and removes its mass") {
  const CalibrationMap map = build_map(dist({0.6, 0.4, 0.0}), dist({0.3, 0.6, 0.1}));
  REQUIRE(map.masked == std::vector<char>{0, 0, 1});
  REQUIRE(map.ratios[2] == 0.0);

  const RecalibrationResult r = recalibrate(preds_from({{0.2, 0.3, 0.5}}), map);
  REQUIRE(r.preds.probs(0, 2) == 0.0);
  REQUIRE(r.preds.probs.row(0).sum() == Catch::Approx(1.0).margin(1e-12));
  // Rescaled row: (0.2 * 0.5, 0.3 * 1.5, 0) = (0.1, 0.45, 0), mass 0.55.
  REQUIRE(r.preds.probs(0, 0) == Catch::Approx(0.1 / 0.55).margin(1e-12));
  REQUIRE(r.preds.probs(0, 1) == Catch::Approx(0.45 / 0.55).margin(1e-12));
}

TEST_CASE("a row with all its mass on masked classes resets to uniform") {
  const CalibrationMap map = build_map(dist({0.5, 0.5, 0.0}), dist({0.4, 0.6, 0.0}));
  const RecalibrationResult r = recalibrate(preds_from({{0.0, 0.0, 1.0}, {0.5, 0.5, 0.0}}), map);
  REQUIRE(r.zero_mass_rows == 1);
  REQUIRE(r.preds.probs(0, 0) == Catch::Approx(0.5));
  REQUIRE(r.preds.probs(0, 1) == Catch::Approx(0.5));
  REQUIRE(r.preds.probs(0, 2) == 0.0);
  REQUIRE(r.preds.probs(1, 0) == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("uniform ratios preserve the argmax") {
  const PredictionMatrix preds = random_preds(64, 5, 13);
  const ClassDistribution p = dist({0.2, 0.2, 0.2, 0.2, 0.2});
  const RecalibrationResult r = recalibrate(preds, build_map(p, p));
  const auto before = top_k(preds, 1);
  const auto after = top_k(r.preds, 1);
  REQUIRE(before == after);
}

TEST_CASE("raising one class's ratio never lowers its rank") {
  const PredictionMatrix preds = random_preds(64, 4, 17);
  const ClassDistribution src = dist({0.25, 0.25, 0.25, 0.25});
  const ClassDistribution tgt = dist({0.4, 0.2, 0.2, 0.2});
  const RecalibrationResult r = recalibrate(preds, build_map(src, tgt));
  const auto before = top_k(preds, 4);
  const auto after = top_k(r.preds, 4);
  for (std::size_t i = 0; i < before.size(); ++i) {
    int rank_before = 0, rank_after = 0;
    for (int j = 0; j < 4; ++j) {
      if (before[i][j] == 0) rank_before = j;
      if (after[i][j] == 0) rank_after = j;
    }
    REQUIRE(rank_after <= rank_before);
  }
}

TEST_CASE("top_k resolves ties toward the lower class index") {
  const PredictionMatrix preds = preds_from({{0.4, 0.4, 0.2}});
  REQUIRE(top_k(preds, 1) == std::vector<std::vector<int>>{{0}});
  REQUIRE(top_k(preds, 3) == std::vector<std::vector<int>>{{0, 1, 2}});
}

TEST_CASE("top_k orders descending and rejects bad k") {
  const PredictionMatrix preds = preds_from({{0.1, 0.5, 0.4}});
  REQUIRE(top_k(preds, 2) == std::vector<std::vector<int>>{{1, 2}});
  REQUIRE_THROWS_AS(top_k(preds, 0), ValidationError);
  REQUIRE_THROWS_AS(top_k(preds, 4), ValidationError);
}

TEST_CASE("build_map rejects mismatched or invalid priors") {
  REQUIRE_THROWS_AS(build_map(dist({0.5, 0.5}), dist({0.3, 0.3, 0.4})), ValidationError);
  REQUIRE_THROWS_AS(build_map(dist({0.5, 0.6}), dist({0.5, 0.5})), ValidationError);
}
