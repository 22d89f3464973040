#include "saddlestab/pca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace saddlestab {

// ---------------------------------------------------------------------------
// Distribution

PcaDistribution::PcaDistribution(Vector eigenvalues, Matrix q)
    : eigenvalues_(std::move(eigenvalues)), q_(std::move(q)) {
  const std::size_t d = eigenvalues_.size();
  if (d < 2) throw std::invalid_argument("PcaDistribution: need dimension >= 2");
  if (q_.rows() != d || q_.cols() != d) {
    throw std::invalid_argument("PcaDistribution: basis must be d x d");
  }
  if (!(eigenvalues_[0] > eigenvalues_[1])) {
    throw std::invalid_argument("PcaDistribution: need lambda_1 > lambda_2");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    if (!(eigenvalues_[i] >= 0.0)) throw std::invalid_argument("PcaDistribution: negative eigenvalue");
    if (i > 0 && eigenvalues_[i] > eigenvalues_[i - 1]) {
      throw std::invalid_argument("PcaDistribution: eigenvalues must be non-increasing");
    }
    total += eigenvalues_[i];
  }
  if (total > 1.0 + 1e-12) throw std::invalid_argument("PcaDistribution: eigenvalues sum above 1");
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += q_(k, i) * q_(k, j);
      if (std::abs(s - (i == j ? 1.0 : 0.0)) > 1e-10) {
        throw std::invalid_argument("PcaDistribution: basis is not orthonormal");
      }
    }
  }
  scale_.resize(d);
  for (std::size_t i = 0; i < d; ++i) scale_[i] = std::sqrt(eigenvalues_[i]);
  sigma_ = SymMatrix(d);
  for (std::size_t i = 0; i < d; ++i) sigma_.add_outer(q_.column(i), eigenvalues_[i]);
}

Sample PcaDistribution::sample(std::size_t n, Rng& rng) const {
  const std::size_t d = dim();
  Sample out;
  out.reserve(n);
  Vector r(d);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < d; ++i) r[i] = scale_[i] * rng.rademacher();
    out.push_back(q_ * r);
  }
  return out;
}

Sample PcaDistribution::exhaustive_sample() const {
  const std::size_t d = dim();
  if (d > 20) throw std::invalid_argument("exhaustive_sample: dimension too large");
  Sample out;
  Vector r(d);
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    for (std::size_t i = 0; i < d; ++i) r[i] = scale_[i] * (((mask >> i) & 1u) ? -1.0 : 1.0);
    out.push_back(q_ * r);
  }
  return out;
}

double PcaDistribution::population_risk(const Vector& w) const {
  return -0.5 * sigma_.quadratic_form(w);
}

std::optional<bool> PcaDistribution::event(const Sample& sample) const {
  return gap_event(empirical_correlation(sample), sigma_, gap()).event;
}

PcaDistribution gen_pca_distribution(std::size_t d, const Vector& eigenvalues, std::uint64_t seed) {
  if (eigenvalues.size() != d) {
    throw std::invalid_argument("gen_pca_distribution: need exactly d eigenvalues");
  }
  Rng rng(seed);
  return PcaDistribution(eigenvalues, rng.orthonormal_matrix(d));
}

SymMatrix empirical_correlation(const Sample& sample) {
  if (sample.empty()) throw std::invalid_argument("empirical_correlation: empty sample");
  SymMatrix a = outer_product_sum(sample, sample.front().size());
  a *= 1.0 / static_cast<double>(sample.size());
  return a;
}

GapEvent gap_event(const SymMatrix& a, const SymMatrix& sigma, double g12) {
  GapEvent out;
  out.norm_diff = operator_norm_diff(a, sigma);
  const EigenPairs e = sym_eig(a);
  out.empirical_gap = e.values.size() > 1 ? e.values[0] - e.values[1] : 0.0;
  out.event = out.norm_diff <= 0.5 * g12;
  out.weyl_ok = out.empirical_gap >= g12 - 2.0 * out.norm_diff - 1e-10;
  out.half_gap_ok = !out.event || out.empirical_gap >= 0.5 * g12 - 1e-10;
  return out;
}

std::size_t gap_event_sample_size(std::size_t d, double g12) {
  return static_cast<std::size_t>(std::ceil(8.0 * std::log(2.0 * static_cast<double>(d)) / (g12 * g12)));
}

// ---------------------------------------------------------------------------
// Losses

double PcaLoss::value(const Vector& w, const Datum& z) const {
  const double s = dot(w, z);
  return -0.5 * s * s;
}

Vector PcaLoss::gradient(const Vector& w, const Datum& z) const { return scaled(z, -dot(w, z)); }

SymMatrix PcaLoss::hessian(const Vector&, const Datum& z) const { return SymMatrix::outer(z, -1.0); }

double ProjectionLoss::value(const Vector& w, const Datum& z) const {
  Vector r = z;
  axpy(-dot(w, z), w, r);
  const double n = norm(r);
  return 0.5 * n * n;
}

// With s = wᵀz and q = ‖w‖²: f = ½‖z‖² − s² + ½s²q.
Vector ProjectionLoss::gradient(const Vector& w, const Datum& z) const {
  const double s = dot(w, z);
  const double q = dot(w, w);
  Vector g = scaled(z, s * (q - 2.0));
  axpy(s * s, w, g);
  return g;
}

SymMatrix ProjectionLoss::hessian(const Vector& w, const Datum& z) const {
  const std::size_t d = w.size();
  const double s = dot(w, z);
  const double q = dot(w, w);
  SymMatrix h(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double v = (q - 2.0) * z[i] * z[j] + 2.0 * s * (z[i] * w[j] + w[i] * z[j]);
      if (i == j) v += s * s;
      h.set(i, j, v);
    }
  }
  return h;
}

LossConstants ProjectionLoss::constants() const { return {2.0, 6.0, 12.0, 1.0}; }

EmpiricalObjective pca_objective(std::shared_ptr<const Sample> sample) {
  if (!sample || sample->empty()) throw std::invalid_argument("pca_objective: empty sample");
  const std::size_t d = sample->front().size();
  return EmpiricalObjective(std::make_shared<PcaLoss>(), std::move(sample), d);
}

QuadraticObjective reduced_pca_objective(const SymMatrix& a) {
  SymMatrix h = a;
  h *= -1.0;
  return QuadraticObjective(std::move(h), PcaLoss().constants());
}

SaddleParams theorem4_params(double gap, double c) {
  if (!(gap > 0.0) || !(c > 0.0)) throw std::invalid_argument("theorem4_params: need gap, c > 0");
  return SaddleParams{gap / 4.0, 6.0 * c * gap, c * gap, std::nullopt};
}

// ---------------------------------------------------------------------------
// Eigenbasis classifier

namespace {

// Absolute allowance for floating-point roundoff in the checked inequalities;
// all quantities involved are O(1).
constexpr double kRoundoff = 1e-12;

void add_check(std::vector<ChainCheck>& checks, std::string name, double lhs, double rhs,
               bool less_equal) {
  const double slack = less_equal ? rhs - lhs : lhs - rhs;
  checks.push_back({std::move(name), lhs, rhs, slack});
}

}  // namespace

std::string_view to_string(AppendixABranch b) {
  return b == AppendixABranch::kStronglyConvex ? "strongly-convex" : "strict-saddle";
}

bool AppendixAWitness::all_hold() const {
  return std::all_of(checks.begin(), checks.end(), [](const ChainCheck& c) { return c.holds(); });
}

const ChainCheck* AppendixAWitness::find(std::string_view name) const {
  for (const ChainCheck& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

nlohmann::json AppendixAWitness::to_json() const {
  nlohmann::json j;
  j["branch"] = std::string(to_string(branch));
  j["multiplier"] = multiplier;
  j["gap"] = gap;
  j["tau"] = tau;
  j["gradient_norm"] = gradient_norm;
  j["tails"] = tails;
  if (curvature_ratio) j["curvature_ratio"] = *curvature_ratio;
  nlohmann::json list = nlohmann::json::array();
  for (const ChainCheck& c : checks) {
    list.push_back({{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"slack", c.slack}});
  }
  j["checks"] = std::move(list);
  return j;
}

std::size_t appendix_a_levels(const Vector& eigenvalues, double tau) {
  const double spread = eigenvalues.front() - eigenvalues.back();
  if (!(spread > tau)) return 2;
  return static_cast<std::size_t>(std::ceil(std::log2(spread / tau))) + 2;
}

AppendixAWitness appendix_a_classify(const Vector& w, const SymMatrix& a, double c) {
  return appendix_a_classify(w, a, sym_eig(a), c);
}

AppendixAWitness appendix_a_classify(const Vector& w_in, const SymMatrix& a, const EigenPairs& eig,
                                     double c) {
  if (!(c > 0.0 && c < 1.0 / 32.0)) throw std::invalid_argument("appendix_a_classify: c must lie in (0, 1/32)");
  const std::size_t d = a.dim();
  if (w_in.size() != d || d < 2) throw std::invalid_argument("appendix_a_classify: dimension mismatch");

  AppendixAWitness out;
  out.point = w_in;
  out.c = c;
  out.eigenvalues = eig.values;
  const Vector& lam = eig.values;
  out.gap = lam[0] - lam[1];
  if (!(out.gap > 0.0)) throw std::invalid_argument("appendix_a_classify: A has no eigengap");
  out.tau = c * out.gap;
  const double tau = out.tau;

  // Direct quantities.
  const Vector aw = a * w_in;
  out.multiplier = dot(w_in, aw);
  Vector grad = scaled(w_in, out.multiplier);
  axpy(-1.0, aw, grad);
  out.gradient_norm = norm(grad);
  if (out.gradient_norm > tau) {
    throw NotAdmissible("appendix_a_classify: projected gradient norm exceeds c*G", out.gradient_norm);
  }

  // Coefficient form. With Σαᵢ² = 1, δ = λ₁ − λ = Σ_{i≥2} αᵢ²(λ₁ − λᵢ) and
  // λ − λᵢ = (λ₁ − λᵢ) − δ avoid cancellation near u₁.
  out.coefficients = eig.vectors.transpose_times(w_in);
  Vector alpha = out.coefficients;
  double mass = 0.0;
  for (double x : alpha) mass += x * x;
  const double unit = std::sqrt(mass);
  for (double& x : alpha) x /= unit;
  double rest = 0.0;  // Σ_{i≥2} αᵢ²
  double delta = 0.0;
  for (std::size_t i = 1; i < d; ++i) {
    rest += alpha[i] * alpha[i];
    delta += alpha[i] * alpha[i] * (lam[0] - lam[i]);
  }
  Vector dev(d);  // λ − λᵢ
  dev[0] = -delta;
  for (std::size_t i = 1; i < d; ++i) dev[i] = (lam[0] - lam[i]) - delta;
  double grad2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) grad2 += alpha[i] * alpha[i] * dev[i] * dev[i];

  auto& checks = out.checks;
  add_check(checks, "unit_norm", std::abs(mass - 1.0), 1e-10, true);
  add_check(checks, "gradient_identity", std::abs(out.gradient_norm * out.gradient_norm - grad2),
            kRoundoff, true);
  add_check(checks, "admissible", out.gradient_norm, tau, true);
  add_check(checks, "multiplier_bound", out.multiplier, lam[0] + kRoundoff, true);

  const std::size_t levels = std::max<std::size_t>(appendix_a_levels(lam, tau), 5);
  out.tails.resize(levels);
  for (std::size_t t = 0; t < levels; ++t) {
    const double radius = std::ldexp(tau, static_cast<int>(t));
    double tail = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      if (std::abs(dev[i]) > radius) tail += alpha[i] * alpha[i];
    out.tails[t] = tail;
    add_check(checks, "tail_" + std::to_string(t), tail,
              std::ldexp(1.0, -2 * static_cast<int>(t)) + kRoundoff, true);
  }

  const bool leading_in_i4 = delta <= 16.0 * tau;
  const double g = out.gap;
  if (leading_in_i4) {
    out.branch = AppendixABranch::kStronglyConvex;
    const double a1 = std::abs(alpha[0]);  // compare against the sign-aligned u₁
    add_check(checks, "branch_mass", rest, 16.0 * c + kRoundoff, true);
    add_check(checks, "leading_weight", a1 * a1 + kRoundoff, 0.5, false);
    add_check(checks, "multiplier_window", delta, 0.5 * g + kRoundoff, true);
    double separation = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < d; ++i) separation = std::min(separation, dev[i]);
    add_check(checks, "separation", separation + kRoundoff, 0.5 * g, false);
    const double suboptimality = 0.5 * delta;  // F̂(w) − F̂(u₁)
    const double one_minus_a1 = rest / (1.0 + a1);
    const double dist2 = one_minus_a1 * one_minus_a1 + rest;
    add_check(checks, "lower_sandwich", suboptimality + kRoundoff, 0.25 * g * dist2, false);
    add_check(checks, "upper_sandwich", suboptimality, grad2 / (2.0 * (0.25 * g)) + kRoundoff, true);
  } else {
    out.branch = AppendixABranch::kStrictSaddle;
    const double a1 = alpha[0];
    add_check(checks, "leading_weight_small", a1 * a1, std::ldexp(1.0, -8) + kRoundoff, true);
    const Vector u1 = eig.vector(0);
    Vector v = u1;
    axpy(-out.coefficients[0], w_in, v);
    add_check(checks, "tangent", std::abs(dot(v, w_in)), kRoundoff, true);
    double tail_term = 0.0;
    for (std::size_t i = 1; i < d; ++i) tail_term += alpha[i] * alpha[i] * dev[i];
    const double leading_term = (1.0 - a1 * a1) * dev[0];
    add_check(checks, "leading_term", leading_term, -15.0 * tau + kRoundoff, true);
    add_check(checks, "tail_term", tail_term, 2.0 * tau + kRoundoff, true);
    // vᵀ(λI − A)v, directly and in coefficients.
    const Vector av = a * v;
    const double direct = out.multiplier * dot(v, v) - dot(v, av);
    const double coeff = (1.0 - a1 * a1) * (1.0 - a1 * a1) * dev[0] + a1 * a1 * tail_term;
    add_check(checks, "curvature_identity", std::abs(direct - coeff), kRoundoff, true);
    const double ratio = direct / dot(v, v);
    add_check(checks, "curvature_ratio", ratio, -6.5 * tau + kRoundoff, true);
    add_check(checks, "curvature_bound", ratio, -6.0 * c * g + kRoundoff, true);
    out.curvature_direction = std::move(v);
    out.curvature_ratio = ratio;
  }
  return out;
}

PointSampler admissible_sampler(SymMatrix a, double c) {
  auto eig = std::make_shared<const EigenPairs>(sym_eig(a));
  auto mat = std::make_shared<const SymMatrix>(std::move(a));
  const double tau = c * (eig->values[0] - eig->values[1]);
  return [eig, mat, tau](Rng& rng) -> Vector {
    const std::size_t d = mat->dim();
    auto admissible = [&](const Vector& w) {
      const Vector aw = *mat * w;
      Vector g = scaled(w, dot(w, aw));
      axpy(-1.0, aw, g);
      return norm(g) <= tau;
    };
    constexpr double kRadii[] = {1e-3, 1e-2, 1e-1};
    for (int attempt = 0; attempt < 64; ++attempt) {
      const std::size_t mode = rng.index(3);
      Vector w;
      if (mode == 0) {
        w = eig->vector(rng.index(d));
        axpy(kRadii[rng.index(3)], rng.unit_sphere(d), w);
      } else if (mode == 1) {
        const std::size_t i = rng.index(d);
        const double width = tau * rng.uniform(0.5, 4.0);
        w.assign(d, 0.0);
        for (std::size_t j = 0; j < d; ++j)
          if (std::abs(eig->values[j] - eig->values[i]) <= width) axpy(rng.normal(), eig->vector(j), w);
        if (!(norm(w) > 0.0)) w = eig->vector(i);
        axpy(1e-3 * rng.uniform(), rng.unit_sphere(d), w);
      } else {
        w = rng.unit_sphere(d);
      }
      w = normalized(w);
      if (admissible(w)) return w;
    }
    return eig->vector(rng.index(d));
  };
}

Vector random_gapped_spectrum(std::size_t d, double min_gap, Rng& rng) {
  if (d < 2 || !(min_gap > 0.0)) throw std::invalid_argument("random_gapped_spectrum: bad arguments");
  Vector lam(d);
  lam[1] = rng.uniform(0.02, 0.2);
  lam[0] = lam[1] + min_gap + rng.uniform(0.0, 0.1);
  const double unit = min_gap / 64.0;
  for (std::size_t i = 2; i < d; ++i) {
    const double u = rng.uniform();
    double step;
    if (u < 0.35) {
      step = rng.uniform(0.0, 0.3 * unit);
    } else if (u < 0.7) {
      step = rng.uniform(unit, 8.0 * unit);
    } else {
      step = rng.uniform(0.0, 0.25 * lam[1]);
    }
    lam[i] = std::max(0.0, lam[i - 1] - step);
  }
  return lam;
}

}  // namespace saddlestab
