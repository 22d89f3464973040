// Losses, empirical risks, equality constraints and the Lagrangian quantities
// evaluated at a feasible point.
#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "saddlestab/numerics.hpp"

namespace saddlestab {

using Datum = Vector;
using Sample = std::vector<Datum>;

/// Bounds on a per-datum loss: gradient norm (rho), Hessian spectrum (beta1),
/// Hessian Lipschitz constant (beta2), and a radius containing the domain.
struct LossConstants {
  double rho = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double domain_bound = 0.0;
};

/// f(w, z) with first and second derivatives in w. Implementations are pure.
class DatumLoss {
 public:
  virtual ~DatumLoss() = default;
  virtual double value(const Vector& w, const Datum& z) const = 0;
  virtual Vector gradient(const Vector& w, const Datum& z) const = 0;
  virtual SymMatrix hessian(const Vector& w, const Datum& z) const = 0;
  virtual LossConstants constants() const = 0;
};

/// A twice differentiable function of w. Everything the solvers and the
/// certifier consume goes through this interface.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(const Vector& w) const = 0;
  virtual Vector gradient(const Vector& w) const = 0;
  virtual SymMatrix hessian(const Vector& w) const = 0;
  virtual LossConstants constants() const = 0;
};

/// ½ wᵀHw.
class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(SymMatrix h, LossConstants constants = {});
  std::size_t dim() const override { return h_.dim(); }
  double value(const Vector& w) const override;
  Vector gradient(const Vector& w) const override;
  SymMatrix hessian(const Vector&) const override { return h_; }
  LossConstants constants() const override { return constants_; }
  const SymMatrix& matrix() const { return h_; }

 private:
  SymMatrix h_;
  LossConstants constants_;
};

/// s · g(w) for a positive constant s.
class ScaledObjective final : public Objective {
 public:
  ScaledObjective(std::shared_ptr<const Objective> inner, double scale);
  std::size_t dim() const override { return inner_->dim(); }
  double value(const Vector& w) const override { return scale_ * inner_->value(w); }
  Vector gradient(const Vector& w) const override { return scaled(inner_->gradient(w), scale_); }
  SymMatrix hessian(const Vector& w) const override { return scale_ * inner_->hessian(w); }
  LossConstants constants() const override;

 private:
  std::shared_ptr<const Objective> inner_;
  double scale_;
};

/// Sample average of a per-datum loss, optionally leaving one datum out.
///
/// The view with an excluded index averages over the n−1 included terms.
/// Copies share the loss and the sample; a view never mutates either.
class EmpiricalObjective final : public Objective {
 public:
  EmpiricalObjective(std::shared_ptr<const DatumLoss> loss, std::shared_ptr<const Sample> sample,
                     std::size_t dim);

  std::size_t dim() const override { return dim_; }
  double value(const Vector& w) const override;
  Vector gradient(const Vector& w) const override;
  SymMatrix hessian(const Vector& w) const override;
  LossConstants constants() const override { return loss_->constants(); }

  /// View excluding datum i (0-based). Excluding the already-excluded index
  /// is a no-op; excluding a second, different index is rejected.
  EmpiricalObjective leave_one_out(std::size_t i) const;

  std::size_t sample_size() const { return sample_->size(); }
  std::size_t effective_size() const { return sample_->size() - (excluded_ ? 1 : 0); }
  std::optional<std::size_t> excluded_index() const { return excluded_; }
  bool includes(std::size_t i) const { return !excluded_ || *excluded_ != i; }

  const DatumLoss& loss() const { return *loss_; }
  const std::shared_ptr<const DatumLoss>& loss_ptr() const { return loss_; }
  const Sample& sample() const { return *sample_; }
  const std::shared_ptr<const Sample>& sample_ptr() const { return sample_; }

  /// f_i(w) for any datum of the underlying sample, excluded or not.
  double datum_value(std::size_t i, const Vector& w) const;
  Vector datum_gradient(std::size_t i, const Vector& w) const;

 private:
  void require_nonempty() const;

  std::shared_ptr<const DatumLoss> loss_;
  std::shared_ptr<const Sample> sample_;
  std::size_t dim_;
  std::optional<std::size_t> excluded_;
};

/// Splits ∇F̂(w) over the full sample into (1/n)Σ_{j≠i}∇f_j(w) and
/// (1/n)∇f_i(w), the two weights used by the leave-one-out exclusion bounds.
struct ExclusionSplit {
  Vector rest;
  Vector single;
};
ExclusionSplit exclusion_split(const EmpiricalObjective& full, std::size_t i, const Vector& w);

// ---------------------------------------------------------------------------
// Constraints

/// Equality constraints c_s(w) = 0, s = 1..m.
class ConstraintSet {
 public:
  virtual ~ConstraintSet() = default;
  virtual std::size_t count() const = 0;
  virtual Vector values(const Vector& w) const = 0;
  /// d×m matrix with columns ∇c_s(w).
  virtual Matrix gradients(const Vector& w) const = 0;
  virtual std::vector<SymMatrix> hessians(const Vector& w) const = 0;
  /// Maps a nearly feasible point back onto the feasible set.
  virtual Vector project(const Vector& w) const = 0;
};

/// No constraints: 𝒲 = ℝᵈ.
class Unconstrained final : public ConstraintSet {
 public:
  std::size_t count() const override { return 0; }
  Vector values(const Vector&) const override { return {}; }
  Matrix gradients(const Vector& w) const override { return Matrix(w.size(), 0); }
  std::vector<SymMatrix> hessians(const Vector&) const override { return {}; }
  Vector project(const Vector& w) const override { return w; }
};

/// c(w) = ½(‖w‖² − 1).
class UnitSphere final : public ConstraintSet {
 public:
  std::size_t count() const override { return 1; }
  Vector values(const Vector& w) const override;
  Matrix gradients(const Vector& w) const override;
  std::vector<SymMatrix> hessians(const Vector& w) const override;
  Vector project(const Vector& w) const override { return normalized(w); }
};

class InfeasiblePoint : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

inline constexpr double kFeasibilityTolerance = 1e-8;

/// Lagrangian quantities at a feasible point, with λ = λ(w) the
/// least-squares multipliers.
struct LagrangianState {
  Vector point;
  Vector multipliers;
  double objective_value = 0.0;
  double lagrangian_value = 0.0;
  Vector projected_gradient;
  Matrix tangent_basis;
  SymMatrix restricted_hessian;
  /// Smallest eigenvalue of the restricted Hessian (+inf if the tangent space is {0}).
  double min_curvature = 0.0;
  /// Unit tangent direction (in ℝᵈ) attaining min_curvature.
  Vector min_curvature_direction;

  double gradient_norm() const { return norm(projected_gradient); }
};

/// Evaluates the Lagrangian state at w. The point is first checked against
/// kFeasibilityTolerance (InfeasiblePoint otherwise) and then projected.
/// Throws LicqViolation if the constraint gradients are dependent.
LagrangianState lagrangian_state(const Objective& objective, const ConstraintSet& constraints,
                                 const Vector& w);

// ---------------------------------------------------------------------------
// Derivative validation

struct DerivativeCheck {
  double gradient_error = 0.0;  ///< max-abs error / max(1, ‖g‖∞)
  double hessian_error = 0.0;   ///< max-abs error / max(1, ‖H‖max)
};

inline constexpr double kGradientCheckTolerance = 1e-5;
inline constexpr double kHessianCheckTolerance = 1e-4;

/// Central finite differences of value (for the gradient) and of gradient
/// (for the Hessian), compared against the analytic derivatives.
DerivativeCheck check_derivatives(const Objective& objective, const Vector& w, double step = 1e-5);
DerivativeCheck check_derivatives(const DatumLoss& loss, const Vector& w, const Datum& z,
                                  double step = 1e-5);

/// Empirical lower estimate of the Hessian Lipschitz constant: the largest
/// ‖∇²f(a) − ∇²f(b)‖ / ‖a − b‖ over consecutive pairs of the given points.
double estimate_hessian_lipschitz(const Objective& objective, const std::vector<Vector>& points);

}  // namespace saddlestab
