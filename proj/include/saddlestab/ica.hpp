// ICA through orthogonal 4th-order tensor decomposition.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "saddlestab/objective.hpp"
#include "saddlestab/solvers.hpp"
#include "saddlestab/stability.hpp"

namespace saddlestab {

inline constexpr std::size_t kMaxTensorDim = 16;

/// Dense symmetric d×d×d×d tensor.
class SymTensor4 {
 public:
  SymTensor4() = default;
  explicit SymTensor4(std::size_t dim);

  /// Takes a dense row-major d⁴ array and averages it over all 24 index
  /// permutations.
  static SymTensor4 symmetrized(std::size_t dim, std::vector<double> entries);
  /// s · u^⊗4
  static SymTensor4 rank_one(const Vector& u, double s = 1.0);

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * dim_ + j) * dim_ + k) * dim_ + l];
  }
  const std::vector<double>& data() const { return data_; }

  /// this += s · u^⊗4
  void add_rank_one(const Vector& u, double s = 1.0);
  SymTensor4& operator+=(const SymTensor4& other);
  SymTensor4& operator-=(const SymTensor4& other);
  SymTensor4& operator*=(double s);

  /// T(u,u,u,u)
  double eval(const Vector& u) const;
  /// T(u,u,u,·)
  Vector contract3(const Vector& u) const;
  /// T(u,u,·,·)
  SymMatrix contract2(const Vector& u) const;

  double max_abs() const;
  double frobenius_norm() const;
  /// Largest deviation of any entry from its 23 permuted copies.
  double asymmetry() const;

 private:
  void require_dim(std::size_t n) const;

  std::size_t dim_ = 0;
  std::vector<double> data_;
};

SymTensor4 operator-(SymTensor4 a, const SymTensor4& b);
double max_abs_diff(const SymTensor4& a, const SymTensor4& b);

/// Z(i,i,i,i) = 3, Z(i,i,j,j) = Z(i,j,i,j) = Z(i,j,j,i) = 1 for i ≠ j, else 0.
SymTensor4 make_Z(std::size_t d);

struct IcaInstance {
  Matrix mixing;      ///< orthonormal, columns aᵢ
  SymTensor4 tensor;  ///< Σ aᵢ^⊗4

  std::size_t dim() const { return mixing.rows(); }
  Vector component(std::size_t i) const { return mixing.column(i); }
};

/// Throws std::invalid_argument unless AᵀA = I within 1e-10.
IcaInstance make_ica_instance(Matrix mixing);
IcaInstance random_ica_instance(std::size_t d, std::uint64_t seed);

/// y = Ax with x uniform on {±1}ᵈ.
Sample sample_ica(const IcaInstance& instance, std::size_t n, Rng& rng);
Sample sample_ica(const IcaInstance& instance, std::size_t n, std::uint64_t seed);
/// A·x for every one of the 2ᵈ sign vectors x.
Sample exhaustive_ica_sample(const Matrix& mixing);

/// mean of y^⊗4
SymTensor4 fourth_moment(const Sample& sample);
/// ½(Z − mean y^⊗4)
SymTensor4 empirical_tensor(const Sample& sample, const SymTensor4& z);

/// Minimizes −T(u,u,u,u). Constants bound the derivatives on the unit
/// ball through the Frobenius norm: ρ = 4‖T‖, β₁ = 12‖T‖, β₂ = 24‖T‖.
class TensorObjective final : public Objective {
 public:
  explicit TensorObjective(SymTensor4 t);
  std::size_t dim() const override { return t_.dim(); }
  double value(const Vector& u) const override { return -t_.eval(u); }
  Vector gradient(const Vector& u) const override { return scaled(t_.contract3(u), -4.0); }
  SymMatrix hessian(const Vector& u) const override { return -12.0 * t_.contract2(u); }
  LossConstants constants() const override { return constants_; }
  const SymTensor4& tensor() const { return t_; }

 private:
  SymTensor4 t_;
  LossConstants constants_;
};

/// f(u, y) = −½(Z(u,u,u,u) − (uᵀy)⁴) = −½(3‖u‖⁴ − (uᵀy)⁴).
/// With ‖y‖² = d and ‖u‖ ≤ 1: ρ = 6 + 2d², β₁ = 18 + 6d², β₂ = 36 + 12d².
class IcaDatumLoss final : public DatumLoss {
 public:
  explicit IcaDatumLoss(std::size_t dim) : dim_(dim) {}
  double value(const Vector& u, const Datum& y) const override;
  Vector gradient(const Vector& u, const Datum& y) const override;
  SymMatrix hessian(const Vector& u, const Datum& y) const override;
  LossConstants constants() const override;

 private:
  std::size_t dim_;
};

EmpiricalObjective ica_objective(std::shared_ptr<const Sample> sample);

/// T − u^⊗4. Requires ‖u‖ = 1 within 1e-8.
SymTensor4 deflate(const SymTensor4& t, const Vector& u);

// ---------------------------------------------------------------------------
// Recovery

struct SignedMatch {
  /// Estimated column i is matched to true column perm[i] with sign signs[i].
  std::vector<std::size_t> perm;
  std::vector<double> signs;
  /// max over i of min_± ‖âᵢ ∓ a_perm[i]‖
  double error = 0.0;
};

/// Repeatedly pairs the closest unmatched (estimate, truth) columns under
/// either sign; ties go to the lower indices.
SignedMatch greedy_signed_match(const Matrix& estimate, const Matrix& truth);
/// Exhaustive search for the matching with the smallest maximum error (d ≤ 8).
SignedMatch brute_force_signed_match(const Matrix& estimate, const Matrix& truth);

struct RecoveryResult {
  Matrix components;  ///< recovered columns (only the first `rounds_completed` are set)
  std::size_t rounds_completed = 0;
  std::optional<std::size_t> failed_round;
  std::string failure;
  std::optional<SignedMatch> match;
};

/// d rounds of: multistart sphere_pgd on the current tensor, a polishing
/// sphere_pgd on the original tensor from that point, and deflation by
/// the polished component. Round r seeds its starts with
/// derive_seed(config.seed, r). When `truth` is given the result carries
/// the greedy match against it.
RecoveryResult recover_components(const SymTensor4& t, const SolverConfig& config,
                                  const Matrix* truth = nullptr);

// ---------------------------------------------------------------------------
// Stability trials

/// y = Ax, with exact population risk F(u) = −Σ(aᵢᵀu)⁴.
class IcaDistribution final : public Distribution {
 public:
  explicit IcaDistribution(IcaInstance instance) : instance_(std::move(instance)) {}
  std::size_t dim() const override { return instance_.dim(); }
  Sample sample(std::size_t n, Rng& rng) const override { return sample_ica(instance_, n, rng); }
  double population_risk(const Vector& u) const override { return -instance_.tensor.eval(u); }
  double optimal_risk() const override { return -1.0; }
  Symmetry symmetry() const override { return Symmetry::kSignFlip; }
  const IcaInstance& instance() const { return instance_; }

 private:
  IcaInstance instance_;
};

/// Tensor-based ERM for IcaDatumLoss views: the view objective is the
/// TensorObjective of ½(Z − M_view) with M_view the included fourth moment,
/// obtained from a cached sum by one rank-one downdate.
class IcaTensorOracle final : public ErmOracle {
 public:
  IcaTensorOracle(std::shared_ptr<const Sample> sample, SolverConfig config);
  Vector minimize(const EmpiricalObjective& view, const Vector& warm_start) const override;
  std::shared_ptr<const Objective> view_objective(const EmpiricalObjective& view) const override;

 private:
  std::shared_ptr<const TensorObjective> view_tensor(const EmpiricalObjective& view) const;

  std::shared_ptr<const Sample> sample_;
  SolverConfig config_;
  SymTensor4 z_;
  SymTensor4 sum_;  ///< Σ y^⊗4
};

// ---------------------------------------------------------------------------
// Strong-convexity region around a component (exact tensor)

struct AppendixBConstants {
  double tau0 = 0.0;  ///< (10d)⁻⁴
  double tau = 0.0;   ///< 4τ₀²
  double D = 0.0;     ///< 2dτ₀
};
AppendixBConstants appendix_b_constants(std::size_t d);

/// The point w ∝ a₁ + s·Σ_{i≥2} vᵢaᵢ of the exact instance (v unit, with
/// v[0] ignored), evaluated in closed form in the coordinates c = Aᵀw so
/// that quantities of size s² survive next to F(a₁) = −1.
struct AppendixBPoint {
  double s = 0.0;
  Vector coords;             ///< c = Aᵀw
  double gradient_norm = 0.0;  ///< ‖∇L(w)‖
  double suboptimality = 0.0;  ///< F(w) − F(a₁)
  double distance2 = 0.0;      ///< ‖w − a₁‖²
  std::size_t support = 0;     ///< |I(w)|, I(w) = {i : |cᵢ| > τ₀}

  /// F(w) − F(a₁) − ¼‖w − a₁‖²
  double lower_slack() const { return suboptimality - 0.25 * distance2; }
  /// (F(w) − F(a₁)) / ‖∇L(w)‖²
  double upper_ratio() const { return suboptimality / (gradient_norm * gradient_norm); }
};

AppendixBPoint appendix_b_point(double s, const Vector& v, double tau0);

/// Minimum restricted curvature of the exact objective at (aᵢ + aⱼ)/√2.
double balanced_saddle_curvature(const IcaInstance& instance, std::size_t i, std::size_t j);

}  // namespace saddlestab
