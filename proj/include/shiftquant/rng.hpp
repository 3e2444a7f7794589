#pragma once

#include <cstdint>
#include <vector>

namespace shiftquant {

// SplitMix64 finalizer: full-avalanche 64-bit mix.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derives an independent sub-seed for a pipeline stage. Stages salt their
// streams so the same user seed never aliases draws across operations.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return mix64(mix64(seed) ^ mix64(salt ^ 0x6A09E667F3BCC909ULL));
}

// Counter-based generator. The n-th value of stream (seed, stream) is a pure
// function of (seed, stream, n): per-row streams make sampling independent of
// iteration order and thread count.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(mix64(seed) ^ mix64(stream ^ 0xBB67AE8584CAA73BULL))) {}

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); multiply-shift reduction.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Index drawn from a normalized probability vector by inverse CDF.
  template <typename Container>
  int categorical(const Container& probs) {
    double u = next_unit();
    double cum = 0.0;
    int last = 0;
    int i = 0;
    for (double p : probs) {
      cum += p;
      if (p > 0.0) last = i;
      if (u < cum) return p > 0.0 ? i : last;
      ++i;
    }
    return last;  // guards against cum < 1 from rounding
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Seeded Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& values, CounterRng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[rng.next_below(i)]);
  }
}

}  // namespace shiftquant
