// Small helpers shared by the unit test binaries.
#pragma once

#include <gtest/gtest.h>

#include <cmath>

#include "saddlestab/numerics.hpp"

namespace saddlestab::testing {

inline void expect_vector_near(const Vector& a, const Vector& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

/// Equal up to an overall sign.
inline void expect_vector_near_up_to_sign(const Vector& a, const Vector& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  const double s = dot(a, b) >= 0.0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], s * b[i], tol) << "index " << i;
}

inline double max_abs_diff(const SymMatrix& a, const SymMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

}  // namespace saddlestab::testing
