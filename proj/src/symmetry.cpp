#include "saddlestab/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace saddlestab {

std::string_view to_string(Symmetry s) {
  switch (s) {
    case Symmetry::kNone: return "none";
    case Symmetry::kSignFlip: return "sign-flip";
    case Symmetry::kSignedPermutation: return "signed-permutation";
  }
  return "unknown";
}

Vector align_minimizer(const Vector& w, const Vector& reference, Symmetry symmetry) {
  if (w.size() != reference.size()) throw NumericsError("align_minimizer: dimension mismatch");
  switch (symmetry) {
    case Symmetry::kNone:
      return w;
    case Symmetry::kSignFlip: {
      const Vector flipped = scaled(w, -1.0);
      return distance(flipped, reference) < distance(w, reference) ? flipped : w;
    }
    case Symmetry::kSignedPermutation: {
      // min ‖Pw − r‖ ⇔ max Σ r_i s_i w_π(i); by rearrangement the optimum
      // pairs magnitudes in sorted order and copies the sign of r.
      const std::size_t d = w.size();
      std::vector<std::size_t> by_ref(d);
      std::vector<std::size_t> by_w(d);
      std::iota(by_ref.begin(), by_ref.end(), 0);
      std::iota(by_w.begin(), by_w.end(), 0);
      std::stable_sort(by_ref.begin(), by_ref.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(reference[a]) > std::abs(reference[b]);
      });
      std::stable_sort(by_w.begin(), by_w.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(w[a]) > std::abs(w[b]);
      });
      Vector out(d);
      for (std::size_t k = 0; k < d; ++k) {
        const double r = reference[by_ref[k]];
        const double x = w[by_w[k]];
        const double sign = r != 0.0 ? (r > 0.0 ? 1.0 : -1.0) : (x >= 0.0 ? 1.0 : -1.0);
        out[by_ref[k]] = sign * std::abs(x);
      }
      return out;
    }
  }
  return w;
}

std::vector<Vector> symmetric_images(const Vector& point, Symmetry symmetry) {
  if (symmetry == Symmetry::kNone) return {point};
  return {point, scaled(point, -1.0)};
}

}  // namespace saddlestab
