#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace qtag {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Disjoint per-trial stream derived from the master seed.
inline std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial_index) {
  return splitmix64(master_seed ^ splitmix64(trial_index + 1));
}

// Seeded RNG with a draw counter, so traces can record how much randomness
// each step consumed and replay can check it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  int bit() { return static_cast<int>(next() & 1); }

  std::uint64_t uniform_u64() { return next(); }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                          std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do { v = next(); } while (v >= limit);
    return v % n;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(next() >> 11) * 0x1.0p-53);
  }

  std::uint64_t draws() const { return draws_; }

 private:
  std::uint64_t next() {
    ++draws_;
    return gen_();
  }
  std::mt19937_64 gen_;
  std::uint64_t draws_ = 0;
};

}  // namespace qtag
