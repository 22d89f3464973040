#include "saddlestab/ica.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "saddlestab/random.hpp"

namespace saddlestab {

// ---------------------------------------------------------------------------
// SymTensor4

SymTensor4::SymTensor4(std::size_t dim) : dim_(dim) {
  if (dim == 0 || dim > kMaxTensorDim) {
    throw std::invalid_argument("SymTensor4: dimension must be in [1, " +
                                std::to_string(kMaxTensorDim) + "]");
  }
  data_.assign(dim * dim * dim * dim, 0.0);
}

SymTensor4 SymTensor4::symmetrized(std::size_t dim, std::vector<double> entries) {
  SymTensor4 out(dim);
  if (entries.size() != out.data_.size()) throw std::invalid_argument("SymTensor4: wrong entry count");
  const std::size_t d = dim;
  auto at = [&](const std::array<std::size_t, 4>& ix) {
    return entries[((ix[0] * d + ix[1]) * d + ix[2]) * d + ix[3]];
  };
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
          const std::array<std::size_t, 4> base{i, j, k, l};
          std::array<int, 4> p{0, 1, 2, 3};
          double sum = 0.0;
          do {
            sum += at({base[p[0]], base[p[1]], base[p[2]], base[p[3]]});
          } while (std::next_permutation(p.begin(), p.end()));
          out.data_[((i * d + j) * d + k) * d + l] = sum / 24.0;
        }
  return out;
}

SymTensor4 SymTensor4::rank_one(const Vector& u, double s) {
  SymTensor4 out(u.size());
  out.add_rank_one(u, s);
  return out;
}

void SymTensor4::require_dim(std::size_t n) const {
  if (n != dim_) throw std::invalid_argument("SymTensor4: dimension mismatch");
}

void SymTensor4::add_rank_one(const Vector& u, double s) {
  require_dim(u.size());
  const std::size_t d = dim_;
  std::size_t idx = 0;
  for (std::size_t i = 0; i < d; ++i) {
    const double a = s * u[i];
    for (std::size_t j = 0; j < d; ++j) {
      const double b = a * u[j];
      for (std::size_t k = 0; k < d; ++k) {
        const double c = b * u[k];
        for (std::size_t l = 0; l < d; ++l) data_[idx++] += c * u[l];
      }
    }
  }
}

SymTensor4& SymTensor4::operator+=(const SymTensor4& other) {
  require_dim(other.dim_);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

SymTensor4& SymTensor4::operator-=(const SymTensor4& other) {
  require_dim(other.dim_);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

SymTensor4& SymTensor4::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

SymTensor4 operator-(SymTensor4 a, const SymTensor4& b) { return a -= b; }

Vector SymTensor4::contract3(const Vector& u) const {
  require_dim(u.size());
  const std::size_t d = dim_;
  Vector out(d, 0.0);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double uij = u[i] * u[j];
      for (std::size_t k = 0; k < d; ++k) {
        const double c = uij * u[k];
        for (std::size_t l = 0; l < d; ++l) out[l] += c * data_[idx++];
      }
    }
  return out;
}

double SymTensor4::eval(const Vector& u) const { return dot(contract3(u), u); }

SymMatrix SymTensor4::contract2(const Vector& u) const {
  require_dim(u.size());
  const std::size_t d = dim_;
  std::vector<double> m(d * d, 0.0);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double uij = u[i] * u[j];
      for (std::size_t kl = 0; kl < d * d; ++kl) m[kl] += uij * data_[idx++];
    }
  SymMatrix out(d);
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t l = 0; l <= k; ++l) out.set(k, l, 0.5 * (m[k * d + l] + m[l * d + k]));
  return out;
}

double SymTensor4::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

double SymTensor4::frobenius_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

double SymTensor4::asymmetry() const {
  const std::size_t d = dim_;
  double worst = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
          const std::array<std::size_t, 4> base{i, j, k, l};
          std::array<int, 4> p{0, 1, 2, 3};
          const double ref = (*this)(i, j, k, l);
          do {
            worst = std::max(worst, std::abs(ref - (*this)(base[p[0]], base[p[1]], base[p[2]], base[p[3]])));
          } while (std::next_permutation(p.begin(), p.end()));
        }
  return worst;
}

double max_abs_diff(const SymTensor4& a, const SymTensor4& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("max_abs_diff: dimension mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

SymTensor4 make_Z(std::size_t d) {
  SymTensor4 probe(d);  // validates d
  std::vector<double> z(d * d * d * d, 0.0);
  auto at = [&](std::size_t i, std::size_t j, std::size_t k, std::size_t l) -> double& {
    return z[((i * d + j) * d + k) * d + l];
  };
  for (std::size_t i = 0; i < d; ++i) {
    at(i, i, i, i) = 3.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      at(i, i, j, j) = 1.0;
      at(i, j, i, j) = 1.0;
      at(i, j, j, i) = 1.0;
    }
  }
  return SymTensor4::symmetrized(d, std::move(z));
}

// ---------------------------------------------------------------------------
// Instances and samples

IcaInstance make_ica_instance(Matrix mixing) {
  const std::size_t d = mixing.rows();
  if (d == 0 || mixing.cols() != d) throw std::invalid_argument("make_ica_instance: mixing must be square");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += mixing(k, i) * mixing(k, j);
      if (std::abs(s - (i == j ? 1.0 : 0.0)) > 1e-10) {
        throw std::invalid_argument("make_ica_instance: mixing matrix is not orthonormal");
      }
    }
  IcaInstance out{std::move(mixing), SymTensor4(d)};
  for (std::size_t i = 0; i < d; ++i) out.tensor.add_rank_one(out.mixing.column(i));
  return out;
}

IcaInstance random_ica_instance(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  return make_ica_instance(rng.orthonormal_matrix(d));
}

Sample sample_ica(const IcaInstance& instance, std::size_t n, Rng& rng) {
  Sample out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(instance.mixing * rng.rademacher_vector(instance.dim()));
  return out;
}

Sample sample_ica(const IcaInstance& instance, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_ica(instance, n, rng);
}

Sample exhaustive_ica_sample(const Matrix& mixing) {
  const std::size_t d = mixing.cols();
  if (d > 20) throw std::invalid_argument("exhaustive_ica_sample: dimension too large");
  Sample out;
  Vector x(d);
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    for (std::size_t i = 0; i < d; ++i) x[i] = ((mask >> i) & 1u) ? -1.0 : 1.0;
    out.push_back(mixing * x);
  }
  return out;
}

SymTensor4 fourth_moment(const Sample& sample) {
  if (sample.empty()) throw std::invalid_argument("fourth_moment: empty sample");
  SymTensor4 m(sample.front().size());
  for (const Datum& y : sample) m.add_rank_one(y);
  m *= 1.0 / static_cast<double>(sample.size());
  return m;
}

SymTensor4 empirical_tensor(const Sample& sample, const SymTensor4& z) {
  SymTensor4 t = z;
  t -= fourth_moment(sample);
  t *= 0.5;
  return t;
}

// ---------------------------------------------------------------------------
// Objectives

TensorObjective::TensorObjective(SymTensor4 t) : t_(std::move(t)) {
  const double f = t_.frobenius_norm();
  constants_ = {4.0 * f, 12.0 * f, 24.0 * f, 1.0};
}

double IcaDatumLoss::value(const Vector& u, const Datum& y) const {
  const double q = dot(u, u);
  const double s = dot(u, y);
  return -0.5 * (3.0 * q * q - s * s * s * s);
}

Vector IcaDatumLoss::gradient(const Vector& u, const Datum& y) const {
  const double q = dot(u, u);
  const double s = dot(u, y);
  Vector g = scaled(u, -6.0 * q);
  axpy(2.0 * s * s * s, y, g);
  return g;
}

SymMatrix IcaDatumLoss::hessian(const Vector& u, const Datum& y) const {
  const double q = dot(u, u);
  const double s = dot(u, y);
  SymMatrix h = SymMatrix::outer(u, -12.0);
  h.add_outer(y, 6.0 * s * s);
  for (std::size_t i = 0; i < u.size(); ++i) h.add_to(i, i, -6.0 * q);
  return h;
}

LossConstants IcaDatumLoss::constants() const {
  const double d2 = static_cast<double>(dim_ * dim_);
  return {6.0 + 2.0 * d2, 18.0 + 6.0 * d2, 36.0 + 12.0 * d2, 1.0};
}

EmpiricalObjective ica_objective(std::shared_ptr<const Sample> sample) {
  if (!sample || sample->empty()) throw std::invalid_argument("ica_objective: empty sample");
  const std::size_t d = sample->front().size();
  return EmpiricalObjective(std::make_shared<IcaDatumLoss>(d), std::move(sample), d);
}

SymTensor4 deflate(const SymTensor4& t, const Vector& u) {
  if (std::abs(norm(u) - 1.0) > 1e-8) throw std::invalid_argument("deflate: u must be a unit vector");
  SymTensor4 out = t;
  out.add_rank_one(u, -1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Matching and recovery

namespace {

double signed_cost(const Vector& est, const Vector& truth, double* sign) {
  const double plus = distance(est, truth);
  const double minus = distance(est, scaled(truth, -1.0));
  if (sign) *sign = minus < plus ? -1.0 : 1.0;
  return std::min(plus, minus);
}

std::vector<double> cost_matrix(const Matrix& est, const Matrix& truth) {
  const std::size_t d = truth.cols();
  if (est.rows() != truth.rows() || est.cols() != d) {
    throw std::invalid_argument("signed matching: shape mismatch");
  }
  std::vector<double> c(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) c[i * d + j] = signed_cost(est.column(i), truth.column(j), nullptr);
  return c;
}

SignedMatch finish_match(const Matrix& est, const Matrix& truth, std::vector<std::size_t> perm) {
  SignedMatch m;
  m.perm = std::move(perm);
  m.signs.resize(m.perm.size());
  for (std::size_t i = 0; i < m.perm.size(); ++i) {
    m.error = std::max(m.error, signed_cost(est.column(i), truth.column(m.perm[i]), &m.signs[i]));
  }
  return m;
}

}  // namespace

SignedMatch greedy_signed_match(const Matrix& estimate, const Matrix& truth) {
  const std::size_t d = truth.cols();
  const std::vector<double> c = cost_matrix(estimate, truth);
  std::vector<bool> est_used(d, false);
  std::vector<bool> truth_used(d, false);
  std::vector<std::size_t> perm(d, 0);
  for (std::size_t round = 0; round < d; ++round) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (est_used[i]) continue;
      for (std::size_t j = 0; j < d; ++j) {
        if (truth_used[j]) continue;
        if (c[i * d + j] < best) {
          best = c[i * d + j];
          bi = i;
          bj = j;
        }
      }
    }
    est_used[bi] = true;
    truth_used[bj] = true;
    perm[bi] = bj;
  }
  return finish_match(estimate, truth, std::move(perm));
}

SignedMatch brute_force_signed_match(const Matrix& estimate, const Matrix& truth) {
  const std::size_t d = truth.cols();
  if (d > 8) throw std::invalid_argument("brute_force_signed_match: dimension too large");
  const std::vector<double> c = cost_matrix(estimate, truth);
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best_perm = perm;
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i) worst = std::max(worst, c[i * d + perm[i]]);
    if (worst < best) {
      best = worst;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return finish_match(estimate, truth, std::move(best_perm));
}

RecoveryResult recover_components(const SymTensor4& t, const SolverConfig& config, const Matrix* truth) {
  const std::size_t d = t.dim();
  const UnitSphere sphere;
  const TensorObjective original(t);
  RecoveryResult out;
  out.components = Matrix(d, d);
  SymTensor4 current = t;
  for (std::size_t r = 0; r < d; ++r) {
    try {
      SolverConfig round_config = config;
      round_config.seed = derive_seed(config.seed, r);
      const PgdResult found = sphere_pgd_multistart(TensorObjective(current), sphere, round_config);
      const PgdResult polished = sphere_pgd(original, sphere, found.w, config);
      out.components.set_column(r, polished.w);
      current = deflate(current, polished.w);
      out.rounds_completed = r + 1;
    } catch (const NumericsError& e) {
      out.failed_round = r;
      out.failure = e.what();
      break;
    }
  }
  if (truth && !out.failed_round) out.match = greedy_signed_match(out.components, *truth);
  return out;
}

// ---------------------------------------------------------------------------
// Tensor ERM oracle

IcaTensorOracle::IcaTensorOracle(std::shared_ptr<const Sample> sample, SolverConfig config)
    : sample_(std::move(sample)), config_(config) {
  if (!sample_ || sample_->empty()) throw std::invalid_argument("IcaTensorOracle: empty sample");
  const std::size_t d = sample_->front().size();
  z_ = make_Z(d);
  sum_ = SymTensor4(d);
  for (const Datum& y : *sample_) sum_.add_rank_one(y);
}

std::shared_ptr<const TensorObjective> IcaTensorOracle::view_tensor(const EmpiricalObjective& view) const {
  SymTensor4 m;
  if (view.sample_ptr() == sample_) {
    m = sum_;
    if (const auto i = view.excluded_index()) m.add_rank_one((*sample_)[*i], -1.0);
  } else {
    m = SymTensor4(view.dim());
    for (std::size_t j = 0; j < view.sample_size(); ++j)
      if (view.includes(j)) m.add_rank_one(view.sample()[j]);
  }
  m *= 1.0 / static_cast<double>(view.effective_size());
  SymTensor4 t = z_;
  t -= m;
  t *= 0.5;
  return std::make_shared<TensorObjective>(std::move(t));
}

Vector IcaTensorOracle::minimize(const EmpiricalObjective& view, const Vector& warm_start) const {
  const auto obj = view_tensor(view);
  const UnitSphere sphere;
  if (warm_start.empty()) return sphere_pgd_multistart(*obj, sphere, config_).w;
  return sphere_pgd(*obj, sphere, warm_start, config_).w;
}

std::shared_ptr<const Objective> IcaTensorOracle::view_objective(const EmpiricalObjective& view) const {
  return view_tensor(view);
}

// ---------------------------------------------------------------------------
// Strong-convexity region

AppendixBConstants appendix_b_constants(std::size_t d) {
  AppendixBConstants k;
  k.tau0 = std::pow(10.0 * static_cast<double>(d), -4.0);
  k.tau = 4.0 * k.tau0 * k.tau0;
  k.D = 2.0 * static_cast<double>(d) * k.tau0;
  return k;
}

// With k = (1 + s²)^{-1/2} and S₄ = Σ_{i≥2} vᵢ⁴ the coordinates are
// c₁ = k, cᵢ = k·s·vᵢ, and F(c) = −Σcᵢ⁴.
AppendixBPoint appendix_b_point(double s, const Vector& v_in, double tau0) {
  const std::size_t d = v_in.size();
  if (d < 2) throw std::invalid_argument("appendix_b_point: need d >= 2");
  Vector v = v_in;
  v[0] = 0.0;
  const double vn = norm(v);
  if (!(vn > 0.0)) throw std::invalid_argument("appendix_b_point: tangent direction is zero");
  for (double& x : v) x /= vn;

  AppendixBPoint p;
  p.s = s;
  const double s2 = s * s;
  const double root = std::sqrt(1.0 + s2);
  const double k = 1.0 / root;
  const double k5 = k * k * k * k * k;
  double s4v = 0.0;
  for (std::size_t i = 1; i < d; ++i) s4v += v[i] * v[i] * v[i] * v[i];

  p.coords.assign(d, 0.0);
  p.coords[0] = k;
  for (std::size_t i = 1; i < d; ++i) p.coords[i] = k * s * v[i];

  p.suboptimality = (2.0 * s2 + s2 * s2 * (1.0 - s4v)) / ((1.0 + s2) * (1.0 + s2));
  p.distance2 = 2.0 * s2 / (root * (root + 1.0));

  Vector g(d);
  g[0] = 4.0 * k5 * (-s2 + s2 * s2 * s4v);
  for (std::size_t i = 1; i < d; ++i) {
    g[i] = 4.0 * k5 * s * v[i] * (1.0 + s2 * s2 * s4v - s2 * v[i] * v[i] * (1.0 + s2));
  }
  p.gradient_norm = norm(g);
  for (double c : p.coords)
    if (std::abs(c) > tau0) ++p.support;
  return p;
}

double balanced_saddle_curvature(const IcaInstance& instance, std::size_t i, std::size_t j) {
  if (i == j || i >= instance.dim() || j >= instance.dim()) {
    throw std::invalid_argument("balanced_saddle_curvature: need two distinct component indices");
  }
  Vector w = instance.component(i);
  axpy(1.0, instance.component(j), w);
  w = scaled(w, 1.0 / std::sqrt(2.0));
  const TensorObjective obj(instance.tensor);
  return lagrangian_state(obj, UnitSphere(), w).min_curvature;
}

}  // namespace saddlestab
