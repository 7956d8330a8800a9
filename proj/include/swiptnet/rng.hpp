#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace swiptnet {

// splitmix64; used to derive independent stream seeds from (seed, index) pairs.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t index) {
  uint64_t s = seed;
  uint64_t a = splitmix64(s);
  s ^= index * 0x2545f4914f6cdd1dULL;
  uint64_t b = splitmix64(s);
  return a ^ (b + 0x9e3779b97f4a7c15ULL);
}

// mt19937_64 with explicit double/gaussian mappings so that sequences do not
// depend on the standard library's distribution implementations.
class Prng {
 public:
  explicit Prng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // standard normal via Box-Muller
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // uniform index in [0, n); modulo bias is irrelevant for shuffling
  uint64_t index(uint64_t n) { return gen_() % n; }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Deterministic Fisher-Yates permutation of {0, ..., n-1}.
template <typename IndexT>
void shuffled_indices(std::vector<IndexT>& out, size_t n, uint64_t seed) {
  out.resize(n);
  for (size_t i = 0; i < n; ++i) out[i] = static_cast<IndexT>(i);
  Prng rng(seed);
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.index(i));
    std::swap(out[i - 1], out[j]);
  }
}

}  // namespace swiptnet
