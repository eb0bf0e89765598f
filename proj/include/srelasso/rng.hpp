#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace srelasso::rng {

// Counter-based stream derivation: every independent piece of randomness is
// keyed by (master seed, purpose tag, up to three counters), so results never
// depend on the order in which parallel workers run.

enum class Tag : std::uint64_t {
  PenaltyBootstrap = 0x70656e,
  PivotBootstrap = 0x707669,
  ResidualBootstrap = 0x726573,
  Replication = 0x726570,
  Generator = 0x67656e,
  Test = 0x747374,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** seeded from a hashed key. Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, Tag tag, std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = seed;
    for (std::uint64_t key : {static_cast<std::uint64_t>(tag), a, b, c}) {
      std::uint64_t s = h ^ (key * 0xd1342543de82ef95ULL);
      h = splitmix64(s);
    }
    for (auto& word : s_) word = splitmix64(h);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    for (;;) {
      const double u = static_cast<double>((*this)() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double normal() { return normal_(*this); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4]{};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Derives the seed of replication `rep` from a master seed.
inline std::uint64_t replication_seed(std::uint64_t master, std::uint64_t rep) {
  Stream s(master, Tag::Replication, rep);
  return s();
}

}  // namespace srelasso::rng
