#include "saddlestab/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "saddlestab/parallel.hpp"
#include "saddlestab/random.hpp"

namespace saddlestab {

void SolverConfig::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("solver step_size must be positive");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("solver grad_tol must be positive");
  if (!(escape_threshold >= 0.0)) throw std::invalid_argument("escape_threshold must be >= 0");
  if (max_iters == 0) throw std::invalid_argument("solver max_iters must be positive");
}

PcaErmResult leading_eigenvector(const SymMatrix& a) {
  const EigenPairs e = sym_eig(a);
  PcaErmResult out;
  out.w = e.vector(0);
  out.degenerate = e.values.size() > 1 && e.values[0] - e.values[1] <= 1e-12;
  return out;
}

PcaErmResult pca_erm(const Sample& sample) {
  if (sample.empty()) throw NumericsError("pca_erm: empty sample");
  SymMatrix a = outer_product_sum(sample, sample.front().size());
  a *= 1.0 / static_cast<double>(sample.size());
  return leading_eigenvector(a);
}

Vector projected_gradient(const Objective& objective, const ConstraintSet& constraints,
                          const Vector& w) {
  Vector g = objective.gradient(w);
  if (constraints.count() == 0) return g;
  const Matrix c = constraints.gradients(w);
  const Vector mu = least_squares_multipliers(c, g);
  for (std::size_t s = 0; s < mu.size(); ++s) axpy(mu[s], c.column(s), g);
  return g;
}

PgdResult sphere_pgd(const Objective& objective, const ConstraintSet& constraints,
                     const Vector& w0, const SolverConfig& config) {
  config.validate();
  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-30;

  Vector w = constraints.project(w0);
  double value = objective.value(w);
  Vector g = projected_gradient(objective, constraints, w);
  double gnorm = norm(g);
  double step = config.step_size;

  const double beta2 = objective.constants().beta2;
  const double escape_step =
      beta2 > 0.0 ? std::min(config.escape_threshold / beta2, 0.1) : 0.1;

  PgdResult out;
  for (std::size_t it = 0; it < config.max_iters; ++it) {
    out.iterations = it;
    if (gnorm <= config.grad_tol) {
      const LagrangianState st = lagrangian_state(objective, constraints, w);
      if (!config.curvature_escape || !(st.min_curvature < -config.escape_threshold)) {
        out.w = w;
        out.value = value;
        out.gradient_norm = gnorm;
        out.min_curvature = st.min_curvature;
        return out;
      }
      // Second-order step out of the saddle.
      const Vector& v = st.min_curvature_direction;
      Vector plus = w;
      Vector minus = w;
      axpy(escape_step, v, plus);
      axpy(-escape_step, v, minus);
      plus = constraints.project(plus);
      minus = constraints.project(minus);
      const double fp = objective.value(plus);
      const double fm = objective.value(minus);
      w = fp <= fm ? plus : minus;
      value = std::min(fp, fm);
      g = projected_gradient(objective, constraints, w);
      gnorm = norm(g);
      step = config.step_size;
      ++out.escapes;
      continue;
    }

    // Backtracking line search along the projected gradient.
    bool accepted = false;
    double trial = std::min(2.0 * step, config.step_size);
    while (trial >= kMinStep) {
      Vector candidate = w;
      axpy(-trial, g, candidate);
      candidate = constraints.project(candidate);
      const double cv = objective.value(candidate);
      const bool armijo = cv <= value - kArmijo * trial * gnorm * gnorm;
      bool flat_progress = false;
      Vector cg;
      if (!armijo && cv <= value + 1e-14 * std::max(1.0, std::abs(value))) {
        // Values no longer resolve the decrease; accept if the gradient shrinks.
        cg = projected_gradient(objective, constraints, candidate);
        flat_progress = norm(cg) < gnorm;
      }
      if (armijo || flat_progress) {
        w = std::move(candidate);
        value = std::min(cv, value);
        g = flat_progress ? std::move(cg) : projected_gradient(objective, constraints, w);
        gnorm = norm(g);
        step = trial;
        accepted = true;
        break;
      }
      trial *= 0.5;
    }
    if (!accepted) {
      throw SolverFailure("sphere_pgd: line search stalled at gradient norm " +
                              std::to_string(gnorm),
                          w, it, gnorm);
    }
  }
  throw SolverFailure("sphere_pgd: iteration budget of " + std::to_string(config.max_iters) +
                          " exhausted at gradient norm " + std::to_string(gnorm),
                      w, config.max_iters, gnorm);
}

PgdResult sphere_pgd_multistart(const Objective& objective, const ConstraintSet& constraints,
                                const SolverConfig& config) {
  Rng rng(config.seed);
  PgdResult best;
  bool have = false;
  for (std::size_t r = 0; r <= config.restarts; ++r) {
    const Vector start = rng.unit_sphere(objective.dim());
    PgdResult res = sphere_pgd(objective, constraints, start, config);
    if (!have || res.value < best.value) {
      best = std::move(res);
      have = true;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Oracles

PcaEigenOracle::PcaEigenOracle(std::shared_ptr<const Sample> sample)
    : sample_(std::move(sample)) {
  if (!sample_ || sample_->empty()) throw NumericsError("PcaEigenOracle: empty sample");
  sum_ = outer_product_sum(*sample_, sample_->front().size());
}

SymMatrix PcaEigenOracle::view_correlation(const EmpiricalObjective& view) const {
  SymMatrix a;
  if (view.sample_ptr() == sample_) {
    a = sum_;
    if (const auto i = view.excluded_index()) a.add_outer((*sample_)[*i], -1.0);
  } else {
    a = SymMatrix(view.dim());
    for (std::size_t j = 0; j < view.sample_size(); ++j)
      if (view.includes(j)) a.add_outer(view.sample()[j]);
  }
  a *= 1.0 / static_cast<double>(view.effective_size());
  return a;
}

Vector PcaEigenOracle::minimize(const EmpiricalObjective& view, const Vector&) const {
  return leading_eigenvector(view_correlation(view)).w;
}

std::shared_ptr<const Objective> PcaEigenOracle::view_objective(
    const EmpiricalObjective& view) const {
  SymMatrix a = view_correlation(view);
  a *= -1.0;
  return std::make_shared<QuadraticObjective>(std::move(a), view.constants());
}

Vector PgdOracle::minimize(const EmpiricalObjective& view, const Vector& warm_start) const {
  if (warm_start.empty()) return sphere_pgd_multistart(view, *constraints_, config_).w;
  return sphere_pgd(view, *constraints_, warm_start, config_).w;
}

std::vector<Vector> loo_minimizers(const EmpiricalObjective& full, const ErmOracle& oracle,
                                   const Vector& hat_w, Symmetry symmetry, unsigned jobs) {
  const std::size_t n = full.sample_size();
  std::vector<Vector> out(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    try {
      const Vector wi = oracle.minimize(full.leave_one_out(i), hat_w);
      out[i] = align_minimizer(wi, hat_w, symmetry);
    } catch (const NumericsError& e) {
      throw LooFailure("leave-one-out solve " + std::to_string(i) + " failed: " + e.what(), i);
    }
  });
  return out;
}

}  // namespace saddlestab
