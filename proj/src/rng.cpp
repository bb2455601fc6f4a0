#include "pipeboost/rng.hpp"

#include "pipeboost/error.hpp"

namespace pipeboost {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "invalid-argument";
    case Errc::ProfileCorrupt: return "profile-corrupt";
    case Errc::InvalidMapping: return "invalid-mapping";
    case Errc::TooLarge: return "too-large";
    case Errc::DimensionMismatch: return "dimension-mismatch";
    case Errc::Overflow: return "overflow";
    case Errc::NotTrained: return "not-trained";
    case Errc::Io: return "io";
  }
  return "unknown";
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(Errc::InvalidArgument, "Rng::below: empty range");
  // Rejection sampling on the top of the 64-bit range keeps it unbiased.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw Error(Errc::InvalidArgument, "Rng::between: hi < lo");
  auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(below(span));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace pipeboost
