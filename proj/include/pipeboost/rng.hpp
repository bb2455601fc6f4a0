#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace pipeboost {

/// Seeded generator whose derived samples are identical on every platform.
///
/// The raw std::mt19937_64 sequence is fixed by the standard but the
/// std::*_distribution adaptors are implementation-defined, so all
/// integer/real sampling is implemented here on top of the raw words.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t between(std::int64_t lo, std::int64_t hi);

  /// Uniform double in [0, 1).
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Mixes a base seed with a stream index (splitmix64 finalizer) so that
  /// independent sub-streams can be seeded by sample/epoch/mix index.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

}  // namespace pipeboost
