// PCA on the unit sphere: data generation with a prescribed spectrum, the
// empirical correlation and its gap event, the per-datum losses, and the
// eigenbasis classifier that checks every inequality of the strict-saddle
// argument at a point with small projected gradient.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "saddlestab/certifier.hpp"
#include "saddlestab/objective.hpp"
#include "saddlestab/stability.hpp"

namespace saddlestab {

/// z = Q·diag(√λ)·r with r uniform on {±1}ᵈ. Then E[zzᵀ] = QΛQᵀ and
/// ‖z‖² = Σλᵢ for every draw.
class PcaDistribution final : public Distribution {
 public:
  /// eigenvalues must be nonnegative, strictly decreasing at the top
  /// (λ₁ > λ₂), non-increasing after, and sum to at most 1.
  PcaDistribution(Vector eigenvalues, Matrix q);

  std::size_t dim() const override { return eigenvalues_.size(); }
  Sample sample(std::size_t n, Rng& rng) const override;
  /// F(w) = −½wᵀΣw for the reduced loss.
  double population_risk(const Vector& w) const override;
  double optimal_risk() const override { return -0.5 * eigenvalues_[0]; }
  Symmetry symmetry() const override { return Symmetry::kSignFlip; }
  /// The gap event ‖A − Σ‖ ≤ G₁₂/2.
  std::optional<bool> event(const Sample& sample) const override;

  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& basis() const { return q_; }
  const SymMatrix& sigma() const { return sigma_; }
  double gap() const { return eigenvalues_[0] - eigenvalues_[1]; }
  Vector leading_eigenvector() const { return q_.column(0); }

  /// Every one of the 2ᵈ sign patterns r, each once.
  Sample exhaustive_sample() const;

 private:
  Vector eigenvalues_;
  Matrix q_;
  Vector scale_;  // √λ
  SymMatrix sigma_;
};

/// Random orthonormal Q drawn from `seed`.
PcaDistribution gen_pca_distribution(std::size_t d, const Vector& eigenvalues, std::uint64_t seed);

/// (1/n)Σ zᵢzᵢᵀ
SymMatrix empirical_correlation(const Sample& sample);

struct GapEvent {
  bool event = false;
  double norm_diff = 0.0;
  double empirical_gap = 0.0;
  /// Weyl: empirical_gap ≥ G₁₂ − 2‖A − Σ‖ − 1e-10. Always true for exact arithmetic.
  bool weyl_ok = true;
  /// event ⇒ empirical_gap ≥ G₁₂/2 − 1e-10. Weyl only guarantees a
  /// nonnegative gap under the event, so this can fail.
  bool half_gap_ok = true;
};

GapEvent gap_event(const SymMatrix& a, const SymMatrix& sigma, double g12);

/// Sample size ⌈8·log(2d)/G₁₂²⌉.
std::size_t gap_event_sample_size(std::size_t d, double g12);

/// f(w, z) = −½(wᵀz)². On the unit sphere with ‖z‖ ≤ 1: ρ = β₁ = 1, β₂ = 0.
class PcaLoss final : public DatumLoss {
 public:
  double value(const Vector& w, const Datum& z) const override;
  Vector gradient(const Vector& w, const Datum& z) const override;
  SymMatrix hessian(const Vector& w, const Datum& z) const override;
  LossConstants constants() const override { return {1.0, 1.0, 0.0, 1.0}; }
};

/// f(w, z) = ½‖z − wwᵀz‖², the reconstruction form. Differs from PcaLoss
/// by ½‖z‖² on the sphere.
class ProjectionLoss final : public DatumLoss {
 public:
  double value(const Vector& w, const Datum& z) const override;
  Vector gradient(const Vector& w, const Datum& z) const override;
  SymMatrix hessian(const Vector& w, const Datum& z) const override;
  LossConstants constants() const override;
};

/// Empirical objective of PcaLoss over the sample.
EmpiricalObjective pca_objective(std::shared_ptr<const Sample> sample);

/// −½wᵀAw as a quadratic objective, with PcaLoss constants.
QuadraticObjective reduced_pca_objective(const SymMatrix& a);

/// α = G/4, γ = 6cG, τ = cG.
SaddleParams theorem4_params(double gap, double c);

inline constexpr double kDefaultC = 1.0 / 64.0;

// ---------------------------------------------------------------------------
// Eigenbasis classifier

enum class AppendixABranch { kStronglyConvex, kStrictSaddle };
std::string_view to_string(AppendixABranch b);

/// One checked inequality: `slack` is (allowed side − measured side), so
/// a nonnegative slack means the inequality holds.
struct ChainCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool holds() const { return slack >= 0.0; }
};

struct AppendixAWitness {
  Vector point;
  Vector eigenvalues;     ///< of A, descending
  Vector coefficients;    ///< αᵢ = uᵢᵀw
  double multiplier = 0.0;  ///< λ = wᵀAw
  double gap = 0.0;       ///< G = λ₁(A) − λ₂(A)
  double c = 0.0;
  double tau = 0.0;       ///< cG
  double gradient_norm = 0.0;
  /// tails[t] = Σ_{i ∉ I_t} αᵢ²
  std::vector<double> tails;
  AppendixABranch branch = AppendixABranch::kStrictSaddle;
  std::vector<ChainCheck> checks;
  /// Saddle branch: v = u₁ − α₁w and vᵀ∇²L̂v/‖v‖².
  std::optional<Vector> curvature_direction;
  std::optional<double> curvature_ratio;

  bool all_hold() const;
  const ChainCheck* find(std::string_view name) const;
  nlohmann::json to_json() const;
};

class NotAdmissible : public std::invalid_argument {
 public:
  NotAdmissible(const std::string& what, double gradient_norm)
      : std::invalid_argument(what), gradient_norm_(gradient_norm) {}
  double gradient_norm() const { return gradient_norm_; }

 private:
  double gradient_norm_;
};

/// Classifies a unit w with ‖∇L̂(w)‖ ≤ cG, c ∈ (0, 1/32), G the gap of A.
/// Throws NotAdmissible when the gradient is too large.
AppendixAWitness appendix_a_classify(const Vector& w, const SymMatrix& a, double c = kDefaultC);
/// Same with a precomputed eigendecomposition of A.
AppendixAWitness appendix_a_classify(const Vector& w, const SymMatrix& a, const EigenPairs& eig,
                                     double c = kDefaultC);

/// Number of I_t levels: t = 0..⌈log₂((λ₁ − λ_d)/τ)⌉ + 1.
std::size_t appendix_a_levels(const Vector& eigenvalues, double tau);

/// Points with ‖∇L̂(w)‖ ≤ cG for the eigensystem of A: eigenvectors
/// perturbed at radius 1e-3, 1e-2 or 1e-1, unit combinations of
/// eigenvectors whose eigenvalues lie within a few multiples of cG of each
/// other (plus a 1e-3 perturbation), and uniform
/// sphere points, each kept only if it is admissible. Falls back to a
/// random eigenvector after a bounded number of rejections.
PointSampler admissible_sampler(SymMatrix a, double c = kDefaultC);

/// Random nonnegative spectrum in dimension d with λ₁ − λ₂ ≥ min_gap and
/// a tail below λ₂ mixing tight clusters with spacings of a few multiples
/// of min_gap/64.
Vector random_gapped_spectrum(std::size_t d, double min_gap, Rng& rng);

}  // namespace saddlestab
