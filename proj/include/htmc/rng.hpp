#ifndef HTMC_RNG_HPP
#define HTMC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace htmc {

// Seeded mt19937_64 with hand-rolled uniform/normal transforms. The engine
// output is pinned by the standard, and doing the transforms ourselves keeps
// streams bit-identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one deviate cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  // Derives an independent stream; useful for fanning out workers.
  Rng spawn() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ull); }

private:
  std::mt19937_64 engine_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace htmc

#endif
