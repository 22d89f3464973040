#include "saddlestab/random.hpp"

#include <cmath>
#include <numbers>

namespace saddlestab {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return root + mix_seed(index ^ mix_seed(root));
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw NumericsError("Rng::index: empty range");
  // Rejection sampling keeps the distribution exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<std::size_t>(x % n);
}

Vector Rng::normal_vector(std::size_t dim) {
  Vector v(dim);
  for (double& x : v) x = normal();
  return v;
}

Vector Rng::rademacher_vector(std::size_t dim) {
  Vector v(dim);
  for (double& x : v) x = rademacher();
  return v;
}

Vector Rng::unit_sphere(std::size_t dim) {
  for (;;) {
    Vector v = normal_vector(dim);
    const double n = norm(v);
    if (n > 1e-300) return scaled(v, 1.0 / n);
  }
}

Matrix Rng::orthonormal_matrix(std::size_t dim) {
  Matrix g(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) g(i, j) = normal();
  return orthonormalize_columns(g);
}

SymMatrix Rng::symmetric_gaussian(std::size_t dim) {
  SymMatrix s(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j <= i; ++j) s.set(i, j, normal());
  return s;
}

}  // namespace saddlestab
