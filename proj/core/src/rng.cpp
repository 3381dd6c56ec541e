#include "dan/rng.hpp"

#include <cmath>

namespace dan {

double Rng::normal() {
  // Box-Muller, cosine branch only. u1 in (0,1] to keep the log finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

Rng Rng::derive(uint64_t seed, uint64_t stream, uint64_t substream) {
  Rng mixer(seed);
  uint64_t a = mixer.next_u64();
  // fold the stream keys through one more splitmix round each
  Rng s1(a ^ (stream * 0x9e3779b97f4a7c15ULL + 0x517cc1b727220a95ULL));
  uint64_t b = s1.next_u64();
  Rng s2(b ^ (substream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
  return Rng(s2.next_u64());
}

}  // namespace dan
