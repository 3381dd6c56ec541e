#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace dan {

/// Deterministic pseudo-random source. All randomness in the library flows
/// through this class so that a seed fully pins every run, independent of
/// the platform's std::distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // warm up so that small seeds decorrelate
    next_u64();
    next_u64();
  }

  /// splitmix64 step
  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// uniform double in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// uniform integer in [0, n), n > 0
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  /// standard normal via Box-Muller (one value per call, deterministic)
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[j]);
    }
  }

  /// Independent stream derived from (seed, stream, substream). Used to make
  /// sampling at iteration k a pure function of the key, not of call order.
  static Rng derive(uint64_t seed, uint64_t stream, uint64_t substream = 0);

 private:
  uint64_t state_;
};

}  // namespace dan
