#pragma once

#include <cstdint>
#include <string_view>

namespace qdra {

// splitmix64: small, fast, deterministic across platforms.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over a tag, folded with a seed. Used to derive independent
// per-stage and per-record streams from one master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  // one extra mix so tag/seed bits diffuse
  std::uint64_t s = h;
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {
    // burn a few outputs so nearby seeds decorrelate
    next();
    next();
  }

  std::uint64_t next() { return splitmix64(state_); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // uniform integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) {
    // rejection-free modulo bias is negligible for the small n used here,
    // but keep it exact anyway
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % n;
  }

  // Streams are derived from the construction seed, not the mutable state,
  // so derivation is independent of how many values were drawn.
  Rng stream(std::string_view tag) const { return Rng(derive_seed(seed_, tag)); }
  Rng stream(std::uint64_t index) const { return Rng(derive_seed(seed_, index)); }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace qdra
