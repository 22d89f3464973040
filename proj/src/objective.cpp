#include "saddlestab/objective.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace saddlestab {

QuadraticObjective::QuadraticObjective(SymMatrix h, LossConstants constants)
    : h_(std::move(h)), constants_(constants) {}

double QuadraticObjective::value(const Vector& w) const { return 0.5 * h_.quadratic_form(w); }

Vector QuadraticObjective::gradient(const Vector& w) const { return h_ * w; }

ScaledObjective::ScaledObjective(std::shared_ptr<const Objective> inner, double scale)
    : inner_(std::move(inner)), scale_(scale) {
  if (!(scale_ > 0.0)) throw NumericsError("ScaledObjective: scale must be positive");
}

LossConstants ScaledObjective::constants() const {
  LossConstants c = inner_->constants();
  c.rho *= scale_;
  c.beta1 *= scale_;
  c.beta2 *= scale_;
  return c;
}

// ---------------------------------------------------------------------------
// EmpiricalObjective

EmpiricalObjective::EmpiricalObjective(std::shared_ptr<const DatumLoss> loss,
                                       std::shared_ptr<const Sample> sample, std::size_t dim)
    : loss_(std::move(loss)), sample_(std::move(sample)), dim_(dim) {
  if (!loss_ || !sample_) throw NumericsError("EmpiricalObjective: null loss or sample");
  if (sample_->empty()) throw NumericsError("EmpiricalObjective: empty sample");
}

void EmpiricalObjective::require_nonempty() const {
  if (effective_size() == 0) throw NumericsError("EmpiricalObjective: empty effective sample");
}

double EmpiricalObjective::value(const Vector& w) const {
  require_nonempty();
  double s = 0.0;
  for (std::size_t i = 0; i < sample_->size(); ++i)
    if (includes(i)) s += loss_->value(w, (*sample_)[i]);
  return s / static_cast<double>(effective_size());
}

Vector EmpiricalObjective::gradient(const Vector& w) const {
  require_nonempty();
  Vector g(dim_, 0.0);
  for (std::size_t i = 0; i < sample_->size(); ++i)
    if (includes(i)) axpy(1.0, loss_->gradient(w, (*sample_)[i]), g);
  return scaled(g, 1.0 / static_cast<double>(effective_size()));
}

SymMatrix EmpiricalObjective::hessian(const Vector& w) const {
  require_nonempty();
  SymMatrix h(dim_);
  for (std::size_t i = 0; i < sample_->size(); ++i)
    if (includes(i)) h += loss_->hessian(w, (*sample_)[i]);
  h *= 1.0 / static_cast<double>(effective_size());
  return h;
}

EmpiricalObjective EmpiricalObjective::leave_one_out(std::size_t i) const {
  if (i >= sample_->size()) {
    throw std::out_of_range("leave_one_out: index " + std::to_string(i) + " out of range for n=" +
                            std::to_string(sample_->size()));
  }
  if (excluded_ && *excluded_ != i) {
    throw NumericsError("leave_one_out: view already excludes index " + std::to_string(*excluded_));
  }
  EmpiricalObjective view(*this);
  view.excluded_ = i;
  return view;
}

double EmpiricalObjective::datum_value(std::size_t i, const Vector& w) const {
  return loss_->value(w, sample_->at(i));
}

Vector EmpiricalObjective::datum_gradient(std::size_t i, const Vector& w) const {
  return loss_->gradient(w, sample_->at(i));
}

ExclusionSplit exclusion_split(const EmpiricalObjective& full, std::size_t i, const Vector& w) {
  if (full.excluded_index()) throw NumericsError("exclusion_split expects the full objective");
  const double n = static_cast<double>(full.sample_size());
  ExclusionSplit split{Vector(full.dim(), 0.0), Vector(full.dim(), 0.0)};
  for (std::size_t j = 0; j < full.sample_size(); ++j) {
    const Vector g = full.datum_gradient(j, w);
    axpy(1.0 / n, g, j == i ? split.single : split.rest);
  }
  return split;
}

// ---------------------------------------------------------------------------
// UnitSphere

Vector UnitSphere::values(const Vector& w) const { return {0.5 * (dot(w, w) - 1.0)}; }

Matrix UnitSphere::gradients(const Vector& w) const {
  Matrix c(w.size(), 1);
  c.set_column(0, w);
  return c;
}

std::vector<SymMatrix> UnitSphere::hessians(const Vector& w) const {
  return {SymMatrix::identity(w.size())};
}

// ---------------------------------------------------------------------------
// Lagrangian

LagrangianState lagrangian_state(const Objective& objective, const ConstraintSet& constraints,
                                 const Vector& w_in) {
  if (w_in.size() != objective.dim()) throw NumericsError("lagrangian_state: dimension mismatch");
  if (!all_finite(w_in)) throw NumericsError("lagrangian_state: non-finite point");
  for (double c : constraints.values(w_in)) {
    if (std::abs(c) > kFeasibilityTolerance) {
      throw InfeasiblePoint("lagrangian_state: constraint violation " + std::to_string(c));
    }
  }

  LagrangianState st;
  st.point = constraints.project(w_in);
  const Vector& w = st.point;
  const Vector g = objective.gradient(w);
  const Matrix c = constraints.gradients(w);

  st.multipliers = least_squares_multipliers(c, g);
  st.objective_value = objective.value(w);
  st.lagrangian_value = st.objective_value;
  const Vector cv = constraints.values(w);
  for (std::size_t s = 0; s < cv.size(); ++s) st.lagrangian_value += st.multipliers[s] * cv[s];

  st.projected_gradient = g;
  SymMatrix h = objective.hessian(w);
  const std::vector<SymMatrix> ch = constraints.hessians(w);
  for (std::size_t s = 0; s < st.multipliers.size(); ++s) {
    axpy(st.multipliers[s], c.column(s), st.projected_gradient);
    h += st.multipliers[s] * ch[s];
  }

  st.tangent_basis = tangent_basis(c);
  st.restricted_hessian = h.congruence(st.tangent_basis);
  if (st.restricted_hessian.dim() == 0) {
    st.min_curvature = std::numeric_limits<double>::infinity();
    st.min_curvature_direction = Vector(w.size(), 0.0);
  } else {
    const EigenPairs e = sym_eig(st.restricted_hessian);
    st.min_curvature = e.values.back();
    st.min_curvature_direction = st.tangent_basis * e.vector(e.values.size() - 1);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Derivative validation

namespace {

double max_abs(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

DerivativeCheck check_generic(std::size_t d, const std::function<double(const Vector&)>& f,
                              const std::function<Vector(const Vector&)>& grad,
                              const std::function<SymMatrix(const Vector&)>& hess,
                              const Vector& w, double h) {
  const Vector g = grad(w);
  const SymMatrix hm = hess(w);
  DerivativeCheck out;
  double gerr = 0.0;
  double herr = 0.0;
  double hscale = 1.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) hscale = std::max(hscale, std::abs(hm(i, j)));

  for (std::size_t k = 0; k < d; ++k) {
    Vector wp = w;
    Vector wm = w;
    wp[k] += h;
    wm[k] -= h;
    const double fd = (f(wp) - f(wm)) / (2.0 * h);
    gerr = std::max(gerr, std::abs(fd - g[k]));
    const Vector gp = grad(wp);
    const Vector gm = grad(wm);
    for (std::size_t i = 0; i < d; ++i) {
      const double fdh = (gp[i] - gm[i]) / (2.0 * h);
      herr = std::max(herr, std::abs(fdh - hm(i, k)));
    }
  }
  out.gradient_error = gerr / std::max(1.0, max_abs(g));
  out.hessian_error = herr / hscale;
  return out;
}

}  // namespace

DerivativeCheck check_derivatives(const Objective& objective, const Vector& w, double step) {
  return check_generic(
      objective.dim(), [&](const Vector& x) { return objective.value(x); },
      [&](const Vector& x) { return objective.gradient(x); },
      [&](const Vector& x) { return objective.hessian(x); }, w, step);
}

DerivativeCheck check_derivatives(const DatumLoss& loss, const Vector& w, const Datum& z,
                                  double step) {
  return check_generic(
      w.size(), [&](const Vector& x) { return loss.value(x, z); },
      [&](const Vector& x) { return loss.gradient(x, z); },
      [&](const Vector& x) { return loss.hessian(x, z); }, w, step);
}

double estimate_hessian_lipschitz(const Objective& objective, const std::vector<Vector>& points) {
  double best = 0.0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    const double dist = distance(points[k], points[k - 1]);
    if (dist <= 0.0) continue;
    const double diff =
        spectral_norm(objective.hessian(points[k]) - objective.hessian(points[k - 1]));
    best = std::max(best, diff / dist);
  }
  return best;
}

}  // namespace saddlestab
