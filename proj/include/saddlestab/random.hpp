// Seeded random source with platform-independent output.
//
// std::normal_distribution and friends are implementation-defined, so draws
// are derived here directly from the raw 64-bit std::mt19937_64 stream,
// which the standard pins down exactly.
#pragma once

#include <cstdint>
#include <random>

#include "saddlestab/numerics.hpp"

namespace saddlestab {

/// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Child seed for stream `index` of a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box–Muller.
  double normal();
  /// ±1 with equal probability.
  double rademacher() { return (next_u64() >> 63) != 0 ? 1.0 : -1.0; }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  Vector normal_vector(std::size_t dim);
  Vector rademacher_vector(std::size_t dim);
  /// Uniform on the unit sphere in ℝ^dim.
  Vector unit_sphere(std::size_t dim);
  /// Haar-distributed orthonormal matrix (Gram–Schmidt on a Gaussian matrix).
  Matrix orthonormal_matrix(std::size_t dim);
  /// Symmetric matrix with i.i.d. standard normal entries on and above the diagonal.
  SymMatrix symmetric_gaussian(std::size_t dim);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace saddlestab
