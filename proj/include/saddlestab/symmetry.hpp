// Symmetry groups under which equivalent minimizers are identified.
#pragma once

#include <string_view>
#include <vector>

#include "saddlestab/numerics.hpp"

namespace saddlestab {

enum class Symmetry {
  kNone,
  kSignFlip,            ///< w ~ −w (PCA, single tensor component)
  kSignedPermutation,   ///< coordinate permutations with sign flips
};

std::string_view to_string(Symmetry s);

/// The group element applied to w that is closest to `reference`.
/// For the sign flip, w is kept unless −w is strictly closer.
Vector align_minimizer(const Vector& w, const Vector& reference, Symmetry symmetry);

/// The images of `point` that matter for nearest-minimum searches:
/// {p} for kNone, {p, −p} otherwise (a list of minima is expected to
/// already contain each permuted component).
std::vector<Vector> symmetric_images(const Vector& point, Symmetry symmetry);

}  // namespace saddlestab
