#ifndef SYNTHVQA_RNG_HPP
#define SYNTHVQA_RNG_HPP

#include <cstdint>
#include <string_view>

namespace synthvqa {

// Portable seedable generator (splitmix64 core). std::uniform_*_distribution
// output differs across standard libraries, so all draws are hand-rolled to
// keep datasets byte-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_u64(std::uint64_t bound);

  // Integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Double in [0, 1) with 53 bits of entropy.
  double uniform_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform_double(double lo, double hi) { return lo + (hi - lo) * uniform_double(); }

  bool bernoulli(double p) { return uniform_double() < p; }

  // Standard normal via Box-Muller (no cached spare, for reproducibility
  // independent of interleaved call patterns).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Derived stream, decorrelated from the parent and from other keys.
  // Splitting does not advance the parent state.
  Rng split(std::uint64_t key) const;
  Rng split(std::string_view key) const;

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// Stable 64-bit hash (FNV-1a) used for seed derivation and config hashing.
std::uint64_t hash64(std::string_view data);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

}  // namespace synthvqa

#endif
