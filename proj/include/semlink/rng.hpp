#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace semlink {

/// Named sub-streams. A consumer never draws from a parent stream directly;
/// it derives its own seed with derive_seed(run_seed, stream, index), where
/// `index` is the layer index, epoch, fold or call counter.
enum class Stream : std::uint64_t {
  kInit = 1,
  kDropout = 2,
  kShuffle = 3,
  kValidationSplit = 4,
  kEpoch = 5,
  kFold = 6,
  kNegatives = 7,
  kKbSplit = 8,
  kSynthetic = 9,
  kGradCheck = 10,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

/// mt19937_64 (bit-exact across standard libraries) with hand-written
/// conversions, since std:: distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Seeded permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

}  // namespace semlink
