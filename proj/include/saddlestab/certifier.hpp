// Strict-saddle regime classification and empirical certification.
//
// A point is classified by the first condition that holds, in order:
//   1. large projected gradient        ‖∇L̂(w)‖ ≥ τ
//   2. negative tangent curvature      λ_min(Bᵀ∇²L̂(w)B) ≤ −γ
//   3. sandwich around a minimum w⋆    ‖∇L̂(w)‖²/(2α) ≥ L̂(w) − L̂(w⋆) ≥ (α/2)‖w − w⋆‖²
// With no constraints the same code path gives the unconstrained gradient
// and Hessian; unconstrained_classify instead tests ∇²F̂ ⪰ αI on the
// segment to the nearest minimum.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "saddlestab/objective.hpp"
#include "saddlestab/random.hpp"
#include "saddlestab/symmetry.hpp"

namespace saddlestab {

struct SaddleParams {
  double alpha = 0.0;
  double gamma = 0.0;
  double tau = 0.0;
  std::optional<double> nu;

  /// Throws std::invalid_argument unless alpha, gamma, tau (and nu if set) are > 0.
  void validate() const;
  SaddleParams scaled_by(double s) const;
};

enum class Regime { kLargeGradient, kNegativeCurvature, kStronglyConvexRegion, kUnclassified };
std::string_view to_string(Regime r);

struct KnownMinimum {
  Vector point;
  double value = 0.0;
};

/// Pairs each point with its objective value.
std::vector<KnownMinimum> evaluate_minima(const Objective& objective,
                                          const std::vector<Vector>& points);

struct SaddleClassification {
  Regime regime = Regime::kUnclassified;
  /// Gradient norm, minimum curvature, or the smaller sandwich slack,
  /// depending on the regime. For kUnclassified: the largest (least
  /// negative) of the three condition slacks.
  double witness = 0.0;
  std::optional<Vector> nearest_minimum;

  double gradient_norm = 0.0;
  double min_curvature = 0.0;
  /// ‖∇L̂‖²/(2α) − (L̂(w) − L̂(w⋆)); NaN when no minimum was supplied.
  double upper_slack = 0.0;
  /// (L̂(w) − L̂(w⋆)) − (α/2)‖w − w⋆‖²; NaN when no minimum was supplied.
  double lower_slack = 0.0;
};

/// Absolute roundoff allowance (times max(1, |L̂(w)|)) for the sandwich
/// inequalities. Exact zeros at w = w⋆ otherwise flip on the last bit.
inline constexpr double kSlackTolerance = 1e-12;

/// Whether a sandwich slack counts as satisfied at objective scale `value_scale`.
bool sandwich_holds(double slack, double value_scale);

SaddleClassification classify_point(const LagrangianState& state, const SaddleParams& params,
                                    std::span<const KnownMinimum> minima, Symmetry symmetry);

/// Number of points sampled along [w, w⋆] for the unconstrained convexity test.
inline constexpr int kSegmentSamples = 32;

SaddleClassification unconstrained_classify(const Vector& w, const Objective& objective,
                                            const SaddleParams& params,
                                            std::span<const KnownMinimum> minima,
                                            Symmetry symmetry);

using PointSampler = std::function<Vector(Rng&)>;

/// With probability ½ a uniform point of the unit sphere; otherwise one of
/// `minima` (chosen uniformly, with a random sign) moved by a uniform
/// direction at a log-uniform radius in [1e-3, 1] and renormalized.
PointSampler sphere_sampler_near_minima(std::size_t dim, std::vector<Vector> minima);

struct Counterexample {
  Vector point;
  SaddleClassification classification;
};

struct CertificationReport {
  std::size_t sampled = 0;
  std::size_t large_gradient = 0;
  std::size_t negative_curvature = 0;
  std::size_t strongly_convex = 0;
  std::size_t unclassified = 0;
  std::vector<Counterexample> counterexamples;

  bool certified() const { return unclassified == 0; }
  nlohmann::json to_json() const;
};

struct CertifyOptions {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  Symmetry symmetry = Symmetry::kSignFlip;
};

/// Draws N points (point k uses the stream derive_seed(seed, k)) and
/// classifies each one. Every unclassified point is a counterexample.
CertificationReport certify_region(const Objective& objective, const ConstraintSet& constraints,
                                   const SaddleParams& params, const PointSampler& sampler,
                                   std::size_t count, std::span<const KnownMinimum> minima,
                                   const CertifyOptions& options = {});

class NoFeasibleParams : public NumericsError {
 public:
  NoFeasibleParams(const std::string& what, Vector worst_point)
      : NumericsError(what), worst_point_(std::move(worst_point)) {}
  const Vector& worst_point() const { return worst_point_; }

 private:
  Vector worst_point_;
};

/// Log-spaced steps per parameter and the span relative to the natural scale.
inline constexpr int kParamGridSteps = 24;
inline constexpr double kParamGridLow = 1e-4;
inline constexpr double kParamGridHigh = 10.0;

/// Grid search over (τ, γ) for the triple maximizing min(τ, γ, α) such that
/// every sampled point is classified; α is the largest value passing the
/// sandwich at all points not covered by conditions 1–2. The natural scales
/// are the largest sampled gradient norm and curvature magnitude.
SaddleParams estimate_saddle_params(const Objective& objective, const ConstraintSet& constraints,
                                    const PointSampler& sampler, std::size_t count,
                                    std::span<const KnownMinimum> minima,
                                    const CertifyOptions& options = {});

}  // namespace saddlestab
