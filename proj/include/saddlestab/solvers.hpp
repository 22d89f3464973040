// ERM solvers: the exact eigen-solver for PCA, projected gradient descent
// with negative-curvature escape for sphere-constrained objectives, and the
// leave-one-out sweep.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "saddlestab/objective.hpp"
#include "saddlestab/symmetry.hpp"

namespace saddlestab {

struct SolverConfig {
  /// Largest trial step of the backtracking line search.
  double step_size = 0.25;
  std::size_t max_iters = 50000;
  double grad_tol = 1e-10;
  bool curvature_escape = true;
  double escape_threshold = 1e-3;
  /// Extra random starts for multistart solves.
  std::size_t restarts = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PcaErmResult {
  Vector w;
  /// λ₁ and λ₂ of the correlation matrix agree within 1e-12.
  bool degenerate = false;
};

/// Leading eigenvector of A, largest-magnitude entry positive.
PcaErmResult leading_eigenvector(const SymMatrix& a);

/// Leading eigenvector of (1/n) Σ z zᵀ.
PcaErmResult pca_erm(const Sample& sample);

class SolverFailure : public NumericsError {
 public:
  SolverFailure(const std::string& what, Vector last_iterate, std::size_t iterations,
                double gradient_norm)
      : NumericsError(what),
        last_iterate_(std::move(last_iterate)),
        iterations_(iterations),
        gradient_norm_(gradient_norm) {}
  const Vector& last_iterate() const { return last_iterate_; }
  std::size_t iterations() const { return iterations_; }
  double gradient_norm() const { return gradient_norm_; }

 private:
  Vector last_iterate_;
  std::size_t iterations_;
  double gradient_norm_;
};

struct PgdResult {
  Vector w;
  double value = 0.0;
  double gradient_norm = 0.0;
  double min_curvature = 0.0;
  std::size_t iterations = 0;
  std::size_t escapes = 0;
};

/// Projected gradient of the Lagrangian, ∇F̂(w) + C(w)λ(w), without the
/// second-order work lagrangian_state does.
Vector projected_gradient(const Objective& objective, const ConstraintSet& constraints,
                          const Vector& w);

/// Projected gradient descent with Armijo backtracking. When the projected
/// gradient drops below grad_tol while the restricted Hessian has an
/// eigenvalue below −escape_threshold, the iterate moves a step of
/// min(escape_threshold/β₂, 0.1) along that eigenvector (the better of the
/// two signs). Iterates are re-projected after every step.
/// Throws SolverFailure when the iteration budget runs out.
PgdResult sphere_pgd(const Objective& objective, const ConstraintSet& constraints,
                     const Vector& w0, const SolverConfig& config);

/// sphere_pgd from `restarts + 1` uniformly random unit starts drawn from
/// config.seed; returns the run with the lowest objective value.
PgdResult sphere_pgd_multistart(const Objective& objective, const ConstraintSet& constraints,
                                const SolverConfig& config);

/// Produces a minimizer of an empirical objective or one of its
/// leave-one-out views. Must be deterministic and thread-safe.
class ErmOracle {
 public:
  virtual ~ErmOracle() = default;
  virtual Vector minimize(const EmpiricalObjective& view, const Vector& warm_start) const = 0;
  /// An objective equal to `view` (up to floating-point roundoff) that may be
  /// cheaper to evaluate than the per-datum average.
  virtual std::shared_ptr<const Objective> view_objective(const EmpiricalObjective& view) const {
    return std::make_shared<EmpiricalObjective>(view);
  }
};

/// Exact PCA minimizer. The full-sample correlation sum is cached so that a
/// leave-one-out view costs one rank-one downdate and a d×d eigensolve.
class PcaEigenOracle final : public ErmOracle {
 public:
  explicit PcaEigenOracle(std::shared_ptr<const Sample> sample);
  Vector minimize(const EmpiricalObjective& view, const Vector& warm_start) const override;
  /// −½wᵀA_view w with A_view the correlation of the included data.
  std::shared_ptr<const Objective> view_objective(const EmpiricalObjective& view) const override;
  const SymMatrix& correlation_sum() const { return sum_; }

 private:
  SymMatrix view_correlation(const EmpiricalObjective& view) const;

  std::shared_ptr<const Sample> sample_;
  SymMatrix sum_;
};

/// sphere_pgd started at the warm start (or multistart if it is empty).
class PgdOracle final : public ErmOracle {
 public:
  PgdOracle(std::shared_ptr<const ConstraintSet> constraints, SolverConfig config)
      : constraints_(std::move(constraints)), config_(config) {}
  Vector minimize(const EmpiricalObjective& view, const Vector& warm_start) const override;

 private:
  std::shared_ptr<const ConstraintSet> constraints_;
  SolverConfig config_;
};

class LooFailure : public NumericsError {
 public:
  LooFailure(const std::string& what, std::size_t index) : NumericsError(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// ŵᵢ for every i, warm-started at ŵ and aligned to it under `symmetry`.
std::vector<Vector> loo_minimizers(const EmpiricalObjective& full, const ErmOracle& oracle,
                                   const Vector& hat_w, Symmetry symmetry, unsigned jobs = 1);

}  // namespace saddlestab
