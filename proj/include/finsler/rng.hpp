#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace finsler {

// Deterministic random source: the raw engine is the standard mt19937_64, but
// the real-valued draws are derived by hand so results do not depend on the
// standard library's distribution implementations.
class Rng {
public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform01() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal() {  // Marsaglia polar
    for (;;) {
      double u = 2.0 * uniform01() - 1.0;
      double v = 2.0 * uniform01() - 1.0;
      double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
  uint64_t raw() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

}  // namespace finsler
