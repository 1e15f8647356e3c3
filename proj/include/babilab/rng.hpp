#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace babilab {

// Deterministic RNG used everywhere. All draws go through the helpers below
// so that reseeding with the same value reproduces every artifact byte.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Inclusive range [lo, hi].
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  // [0, 1)
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // [-scale, scale]
  double uniform_symmetric(double scale) {
    return (uniform_real() * 2.0 - 1.0) * scale;
  }

  bool bernoulli(double p) { return uniform_real() < p; }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<size_t>(uniform_int(0, static_cast<int>(v.size()) - 1))];
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

inline uint64_t mix_seed(uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Child seed for stream `a`, element `b` of a master seed.
inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b) {
  return mix_seed(mix_seed(master ^ mix_seed(a)) ^ mix_seed(b));
}

}  // namespace babilab
