#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "shiftquant/rng.hpp"

using namespace shiftquant;

TEST_CASE("identical seed and stream reproduce the sequence") {
  CounterRng a(123, 5);
  CounterRng b(123, 5);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different streams from one seed are unrelated") {
  CounterRng a(123, 0);
  CounterRng b(123, 1);
  int collisions = 0;
  for (int i = 0; i < 100; ++i) collisions += a.next_u64() == b.next_u64();
  REQUIRE(collisions == 0);
}

TEST_CASE("derive_seed separates salts") {
  REQUIRE(derive_seed(7, 1) != derive_seed(7, 2));
  REQUIRE(derive_seed(7, 1) != derive_seed(8, 1));
  REQUIRE(derive_seed(7, 1) == derive_seed(7, 1));
}

TEST_CASE("next_unit lies in [0, 1) with the expected moments") {
  CounterRng rng(9, 0);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  // Uniform(0,1): mean 1/2 (sd of the estimate ~ 0.0009), variance 1/12.
  REQUIRE(mean == Catch::Approx(0.5).margin(0.005));
  REQUIRE(var == Catch::Approx(1.0 / 12.0).margin(0.005));
}

TEST_CASE("next_below stays in range and covers all residues") {
  CounterRng rng(11, 0);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const std::uint64_t v = rng.next_below(7);
    REQUIRE(v < 7);
    counts[static_cast<std::size_t>(v)] += 1;
  }
  for (int c : counts) {
    // Binomial(7000, 1/7): mean 1000, sd ~ 29.
    REQUIRE(c > 850);
    REQUIRE(c < 1150);
  }
}

TEST_CASE("categorical matches the requested distribution") {
  CounterRng rng(13, 0);
  const std::vector<double> probs{0.5, 0.3, 0.15, 0.05};
  std::vector<int> counts(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(rng.categorical(probs))] += 1;
  for (int y = 0; y < 4; ++y) {
    const double p = probs[static_cast<std::size_t>(y)];
    const double sd = std::sqrt(p * (1 - p) / n);
    REQUIRE(std::abs(counts[static_cast<std::size_t>(y)] / double(n) - p) < 5 * sd);
  }
}

TEST_CASE("categorical never lands on a zero-probability class") {
  CounterRng rng(17, 0);
  const std::vector<double> probs{0.0, 0.6, 0.0, 0.4, 0.0};
  for (int i = 0; i < 5000; ++i) {
    const int y = rng.categorical(probs);
    REQUIRE((y == 1 || y == 3));
  }
}

TEST_CASE("shuffle produces permutations, near-uniformly") {
  std::map<std::vector<int>, int> counts;
  const int n = 12000;
  for (int trial = 0; trial < n; ++trial) {
    CounterRng rng(19, static_cast<std::uint64_t>(trial));
    std::vector<int> v{0, 1, 2};
    shuffle(v, rng);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(sorted == std::vector<int>{0, 1, 2});
    counts[v] += 1;
  }
  REQUIRE(counts.size() == 6);
  for (const auto& [perm, c] : counts) {
    // Binomial(12000, 1/6): mean 2000, sd ~ 41.
    REQUIRE(c > 1750);
    REQUIRE(c < 2250);
  }
}

TEST_CASE("counter streams make row draws independent of batch size") {
  const std::uint64_t base = derive_seed(23, 1);
  std::vector<double> first;
  for (int i = 0; i < 10; ++i) {
    CounterRng rng(base, static_cast<std::uint64_t>(i));
    first.push_back(rng.next_unit());
  }
  // Re-draw rows in reverse order; per-row streams must not interact.
  for (int i = 9; i >= 0; --i) {
    CounterRng rng(base, static_cast<std::uint64_t>(i));
    REQUIRE(rng.next_unit() == first[static_cast<std::size_t>(i)]);
  }
}
