#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace patchscope {

/// Mixes a parent seed with a stream name and index into an independent child seed.
/// Stable across platforms (FNV-1a over the name, splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view name, std::uint64_t index = 0);

/// Seeded random stream. The engine is mt19937_64; the conversions below are
/// written out so that sequences do not depend on the standard library's
/// distribution implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  int uniform_int(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1)); }
  bool bernoulli(double p = 0.5) { return uniform() < p; }
  /// Standard normal via Box-Muller.
  double normal();

  RandomStream child(std::string_view name, std::uint64_t index = 0) {
    return RandomStream(derive_seed(engine_(), name, index));
  }

  /// Fisher-Yates shuffle driven by this stream.
  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::iter_swap(first + (i - 1), first + j);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace patchscope
