#pragma once

#include <cstdint>
#include <random>

namespace labeldist {

// Deterministic random source with a pinned draw order, so seeded runs
// reproduce bit-for-bit across platforms.  std::mt19937_64 output is fully
// specified by the standard; the wrappers below deliberately avoid
// std::uniform_real_distribution / std::normal_distribution, whose algorithms
// are implementation-defined.
//
// Draw-order contract:
//   next_u64()  one raw engine output.
//   uniform()   one engine output, mapped as (x >> 11) * 2^-53, in [0, 1).
//   normal()    Box-Muller; consumes exactly two uniforms per pair and caches
//               the second deviate for the next call.
//   split(k)    independent child stream keyed by (seed, k) via SplitMix64
//               hashing; does not consume draws and is stable: the same k
//               always yields the same child.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal();

  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace labeldist
