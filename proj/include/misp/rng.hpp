#pragma once

#include <cstdint>
#include <string_view>

namespace misp {

// Deterministic counter-free PRNG (xoshiro256++) with hand-rolled variate
// transforms. We avoid <random> distributions on purpose: their output is
// implementation-defined, and reproducibility of runs from the manifest
// depends on the exact draw sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; consumes exactly two uniforms per draw.
  double normal();
  double normal(double mean, double sd);

  // Marsaglia-Tsang; shape > 0, rate > 0.
  double gamma(double shape, double rate);

  // 1/Gamma(shape, rate=scale): mean scale/(shape-1) for shape > 1.
  double inv_gamma(double shape, double scale);

  double exponential(double rate);

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

 private:
  std::uint64_t s_[4];
};

// Stable derivation of sub-stream seeds from one root seed. Every random
// consumer (chain, fold, prediction draw, ...) gets
// derive_seed(root, purpose, index) so runs are reproducible regardless of
// thread scheduling.
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                          std::uint64_t index);

}  // namespace misp
