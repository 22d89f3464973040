// Dense linear algebra used throughout the toolkit: symmetric matrices,
// a cyclic Jacobi eigensolver, least-squares multipliers, tangent bases
// and spectral norms. Sizes are small (d up to a few hundred), so all
// storage is plain contiguous std::vector<double>.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace saddlestab {

using Vector = std::vector<double>;

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when constraint gradients are (numerically) linearly dependent.
class LicqViolation : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

class NonConvergence : public NumericsError {
 public:
  NonConvergence(const std::string& what, double residual)
      : NumericsError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// ---------------------------------------------------------------------------
// Vector helpers

double dot(const Vector& a, const Vector& b);
double norm(const Vector& a);
double distance(const Vector& a, const Vector& b);
Vector add(const Vector& a, const Vector& b);
Vector subtract(const Vector& a, const Vector& b);
Vector scaled(const Vector& a, double s);
/// a += s * b
void axpy(double s, const Vector& b, Vector& a);
Vector normalized(const Vector& a);
Vector unit_vector(std::size_t dim, std::size_t index);
bool all_finite(const Vector& a);

// ---------------------------------------------------------------------------
// General dense matrix, row-major.

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  /// Builds a matrix whose columns are the given vectors (all of equal length).
  static Matrix from_columns(const std::vector<Vector>& columns, std::size_t rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  Vector column(std::size_t c) const;
  void set_column(std::size_t c, const Vector& v);

  Matrix transposed() const;
  Vector operator*(const Vector& x) const;
  Matrix operator*(const Matrix& other) const;
  /// Aᵀx without forming the transpose.
  Vector transpose_times(const Vector& x) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Symmetric matrix. Only the lower triangle is stored, so (i,j) and (j,i)
// always refer to the same value.

class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim, double fill = 0.0)
      : dim_(dim), data_(dim * (dim + 1) / 2, fill) {}

  static SymMatrix identity(std::size_t n);
  static SymMatrix diagonal(const Vector& diag);
  /// ½(M + Mᵀ) of a square matrix.
  static SymMatrix symmetrize(const Matrix& m);
  /// s · v vᵀ
  static SymMatrix outer(const Vector& v, double s = 1.0);

  std::size_t dim() const noexcept { return dim_; }

  double operator()(std::size_t i, std::size_t j) const { return data_[index(i, j)]; }
  void set(std::size_t i, std::size_t j, double value) { data_[index(i, j)] = value; }
  void add_to(std::size_t i, std::size_t j, double value) { data_[index(i, j)] += value; }

  /// this += s · v vᵀ
  void add_outer(const Vector& v, double s = 1.0);
  SymMatrix& operator+=(const SymMatrix& other);
  SymMatrix& operator-=(const SymMatrix& other);
  SymMatrix& operator*=(double s);

  Vector operator*(const Vector& x) const;
  double quadratic_form(const Vector& x) const;
  /// Bᵀ · this · B for a dim×k matrix B.
  SymMatrix congruence(const Matrix& basis) const;
  Matrix to_dense() const;
  double frobenius_norm() const;
  bool all_finite() const;

 private:
  static std::size_t packed(std::size_t hi, std::size_t lo) { return hi * (hi + 1) / 2 + lo; }
  std::size_t index(std::size_t i, std::size_t j) const { return i >= j ? packed(i, j) : packed(j, i); }

  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Σ v vᵀ over the given vectors, all of length `dim`.
SymMatrix outer_product_sum(const std::vector<Vector>& vectors, std::size_t dim);

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator-(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(double s, SymMatrix a);

// ---------------------------------------------------------------------------
// Eigendecomposition

struct EigenPairs {
  /// Sorted descending.
  Vector values;
  /// Column i is the unit eigenvector for values[i].
  Matrix vectors;

  Vector vector(std::size_t i) const { return vectors.column(i); }
};

struct JacobiOptions {
  double relative_tolerance = 1e-14;
  int max_sweeps = 100;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Eigenvalues come back in descending order; equal values keep the order in
/// which Jacobi left them on the diagonal. Each eigenvector is signed so its
/// largest-magnitude component (first one on ties) is positive.
///
/// Throws NumericsError on non-finite input and NonConvergence if the
/// off-diagonal mass does not drop below tolerance·‖A‖_F within max_sweeps.
EigenPairs sym_eig(const SymMatrix& a, const JacobiOptions& options = {});

/// Largest-magnitude eigenvalue of a symmetric matrix.
double spectral_norm(const SymMatrix& a);

/// max |λᵢ(A − B)|
double operator_norm_diff(const SymMatrix& a, const SymMatrix& b);

/// Smallest eigenvalue; +inf for an empty matrix.
double min_eigenvalue(const SymMatrix& a);

// ---------------------------------------------------------------------------
// Constraint geometry helpers

/// Relative cutoff on eigenvalues of CᵀC below which C is treated as rank
/// deficient.
inline constexpr double kLicqCutoff = 1e-12;

/// Returns μ = −C⁺g, the minimizer of ‖g + Cμ‖, for a d×m matrix C with
/// linearly independent columns. Throws LicqViolation otherwise.
Vector least_squares_multipliers(const Matrix& c, const Vector& g);

/// Orthonormal basis (d×(d−m)) of the orthogonal complement of the column
/// span of C. Throws LicqViolation when C is rank deficient.
Matrix tangent_basis(const Matrix& c);

/// Modified Gram–Schmidt on the columns of m (must have full column rank).
Matrix orthonormalize_columns(const Matrix& m);

}  // namespace saddlestab
