#include "saddlestab/numerics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

namespace saddlestab {

namespace {

void require_same_size(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw NumericsError("vector size mismatch: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  }
}

}  // namespace

double dot(const Vector& a, const Vector& b) {
  require_same_size(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vector& a) {
  // Scaled accumulation so tiny witnesses (~1e-15) keep full precision.
  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double x : a) {
    const double r = x / scale;
    s += r * r;
  }
  return scale * std::sqrt(s);
}

double distance(const Vector& a, const Vector& b) { return norm(subtract(a, b)); }

Vector add(const Vector& a, const Vector& b) {
  require_same_size(a, b);
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector subtract(const Vector& a, const Vector& b) {
  require_same_size(a, b);
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector scaled(const Vector& a, double s) {
  Vector out(a);
  for (double& x : out) x *= s;
  return out;
}

void axpy(double s, const Vector& b, Vector& a) {
  require_same_size(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

Vector normalized(const Vector& a) {
  const double n = norm(a);
  if (n == 0.0) throw NumericsError("cannot normalize the zero vector");
  return scaled(a, 1.0 / n);
}

Vector unit_vector(std::size_t dim, std::size_t index) {
  Vector e(dim, 0.0);
  e.at(index) = 1.0;
  return e;
}

bool all_finite(const Vector& a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// Matrix

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_columns(const std::vector<Vector>& columns, std::size_t rows) {
  Matrix m(rows, columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) m.set_column(c, columns[c]);
  return m;
}

Vector Matrix::column(std::size_t c) const {
  Vector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

void Matrix::set_column(std::size_t c, const Vector& v) {
  if (v.size() != rows_) throw NumericsError("column length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Vector Matrix::operator*(const Vector& x) const {
  if (x.size() != cols_) throw NumericsError("matrix-vector size mismatch");
  Vector y(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) s += (*this)(r, c) * x[c];
    y[r] = s;
  }
  return y;
}

Matrix Matrix::operator*(const Matrix& other) const {
  if (cols_ != other.rows_) throw NumericsError("matrix-matrix size mismatch");
  Matrix out(rows_, other.cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(r, k);
      if (a == 0.0) continue;
      for (std::size_t c = 0; c < other.cols_; ++c) out(r, c) += a * other(k, c);
    }
  return out;
}

Vector Matrix::transpose_times(const Vector& x) const {
  if (x.size() != rows_) throw NumericsError("transpose-vector size mismatch");
  Vector y(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) y[c] += (*this)(r, c) * x[r];
  return y;
}

// ---------------------------------------------------------------------------
// SymMatrix

SymMatrix SymMatrix::identity(std::size_t n) {
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
  return m;
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
  SymMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m.set(i, i, diag[i]);
  return m;
}

SymMatrix SymMatrix::symmetrize(const Matrix& m) {
  if (m.rows() != m.cols()) throw NumericsError("symmetrize requires a square matrix");
  SymMatrix s(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) s.set(i, j, 0.5 * (m(i, j) + m(j, i)));
  return s;
}

SymMatrix SymMatrix::outer(const Vector& v, double s) {
  SymMatrix m(v.size());
  m.add_outer(v, s);
  return m;
}

void SymMatrix::add_outer(const Vector& v, double s) {
  if (v.size() != dim_) throw NumericsError("outer product size mismatch");
  for (std::size_t i = 0; i < dim_; ++i) {
    const double vi = s * v[i];
    double* row = &data_[packed(i, 0)];
    for (std::size_t j = 0; j <= i; ++j) row[j] += vi * v[j];
  }
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
  if (other.dim_ != dim_) throw NumericsError("matrix dimension mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) {
  if (other.dim_ != dim_) throw NumericsError("matrix dimension mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Vector SymMatrix::operator*(const Vector& x) const {
  if (x.size() != dim_) throw NumericsError("matrix-vector size mismatch");
  Vector y(dim_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i) {
    const double* row = &data_[packed(i, 0)];
    for (std::size_t j = 0; j < i; ++j) {
      y[i] += row[j] * x[j];
      y[j] += row[j] * x[i];
    }
    y[i] += row[i] * x[i];
  }
  return y;
}

double SymMatrix::quadratic_form(const Vector& x) const { return dot(x, (*this) * x); }

SymMatrix SymMatrix::congruence(const Matrix& basis) const {
  if (basis.rows() != dim_) throw NumericsError("congruence basis has wrong row count");
  const std::size_t k = basis.cols();
  // HB column by column, then Bᵀ(HB).
  Matrix hb(dim_, k);
  for (std::size_t c = 0; c < k; ++c) hb.set_column(c, (*this) * basis.column(c));
  SymMatrix out(k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      double s = 0.0;
      for (std::size_t r = 0; r < dim_; ++r) s += basis(r, a) * hb(r, b);
      out.set(a, b, s);
    }
  return out;
}

Matrix SymMatrix::to_dense() const {
  Matrix m(dim_, dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) m(i, j) = (*this)(i, j);
  return m;
}

double SymMatrix::frobenius_norm() const {
  double s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = (*this)(i, j);
      s += (i == j ? 1.0 : 2.0) * v * v;
    }
  return std::sqrt(s);
}

bool SymMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

SymMatrix outer_product_sum(const std::vector<Vector>& vectors, std::size_t dim) {
  SymMatrix s(dim);
  for (const Vector& v : vectors) s.add_outer(v);
  return s;
}

SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

// ---------------------------------------------------------------------------
// Jacobi eigensolver

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

void rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t;
  if (std::abs(theta) > 1e150) {
    t = 0.5 / theta;
  } else {
    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  }
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const std::size_t n = a.rows();

  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const double arp = a(r, p);
    const double arq = a(r, q);
    const double new_rp = c * arp - s * arq;
    const double new_rq = s * arp + c * arq;
    a(r, p) = new_rp;
    a(p, r) = new_rp;
    a(r, q) = new_rq;
    a(q, r) = new_rq;
  }
  for (std::size_t r = 0; r < n; ++r) {
    const double vrp = v(r, p);
    const double vrq = v(r, q);
    v(r, p) = c * vrp - s * vrq;
    v(r, q) = s * vrp + c * vrq;
  }
}

void canonicalize_sign(Vector& v) {
  double biggest = 0.0;
  for (double x : v) biggest = std::max(biggest, std::abs(x));
  if (biggest == 0.0) return;
  // Near-equal magnitudes count as ties and go to the first index.
  for (double x : v) {
    if (std::abs(x) >= biggest * (1.0 - 1e-12)) {
      if (x < 0.0)
        for (double& y : v) y = -y;
      return;
    }
  }
}

}  // namespace

EigenPairs sym_eig(const SymMatrix& input, const JacobiOptions& options) {
  if (!input.all_finite()) throw NumericsError("sym_eig: non-finite matrix entry");
  const std::size_t n = input.dim();
  Matrix a = input.to_dense();
  Matrix v = Matrix::identity(n);

  const double scale = input.frobenius_norm();
  const double threshold = options.relative_tolerance * scale;
  bool converged = false;
  double off = off_diagonal_norm(a);
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    if (off <= threshold) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        if (a(p, q) != 0.0) rotate(a, v, p, q);
    off = off_diagonal_norm(a);
  }
  if (!converged && off > threshold) {
    throw NonConvergence("sym_eig: Jacobi did not converge in " +
                             std::to_string(options.max_sweeps) + " sweeps",
                         off);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenPairs out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    Vector col = v.column(order[k]);
    canonicalize_sign(col);
    out.vectors.set_column(k, col);
  }
  return out;
}

double spectral_norm(const SymMatrix& a) {
  if (a.dim() == 0) return 0.0;
  const EigenPairs e = sym_eig(a);
  return std::max(std::abs(e.values.front()), std::abs(e.values.back()));
}

double operator_norm_diff(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) {
    throw NumericsError("operator_norm_diff: dimension mismatch " + std::to_string(a.dim()) +
                        " vs " + std::to_string(b.dim()));
  }
  return spectral_norm(a - b);
}

double min_eigenvalue(const SymMatrix& a) {
  if (a.dim() == 0) return std::numeric_limits<double>::infinity();
  return sym_eig(a).values.back();
}

// ---------------------------------------------------------------------------
// Constraint geometry

namespace {

SymMatrix gram(const Matrix& c) {
  SymMatrix g(c.cols());
  for (std::size_t a = 0; a < c.cols(); ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      double s = 0.0;
      for (std::size_t r = 0; r < c.rows(); ++r) s += c(r, a) * c(r, b);
      g.set(a, b, s);
    }
  return g;
}

/// Eigendecomposition of CᵀC, rejecting rank deficiency.
EigenPairs checked_gram_eig(const Matrix& c) {
  const EigenPairs e = sym_eig(gram(c));
  const double top = e.values.empty() ? 0.0 : e.values.front();
  for (double lam : e.values) {
    if (!(lam > kLicqCutoff * top) || top <= 0.0) {
      throw LicqViolation("constraint gradients are linearly dependent (LICQ violated)");
    }
  }
  return e;
}

}  // namespace

Vector least_squares_multipliers(const Matrix& c, const Vector& g) {
  if (g.size() != c.rows()) throw NumericsError("least_squares_multipliers: size mismatch");
  const std::size_t m = c.cols();
  if (m == 0) return {};
  const EigenPairs e = checked_gram_eig(c);
  // μ = −(CᵀC)⁻¹ Cᵀ g
  const Vector ctg = c.transpose_times(g);
  Vector mu(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const Vector vk = e.vector(k);
    axpy(-dot(vk, ctg) / e.values[k], vk, mu);
  }
  return mu;
}

Matrix tangent_basis(const Matrix& c) {
  const std::size_t d = c.rows();
  const std::size_t m = c.cols();
  if (m == 0) return Matrix::identity(d);
  if (m > d) throw LicqViolation("more constraints than dimensions");
  const EigenPairs e = checked_gram_eig(c);

  // P = I − C (CᵀC)⁻¹ Cᵀ; its unit eigenspace is the tangent space.
  SymMatrix projector = SymMatrix::identity(d);
  for (std::size_t k = 0; k < m; ++k) {
    const Vector ck = c * e.vector(k);
    projector.add_outer(ck, -1.0 / e.values[k]);
  }
  const EigenPairs p = sym_eig(projector);
  Matrix basis(d, d - m);
  for (std::size_t k = 0; k < d - m; ++k) basis.set_column(k, p.vector(k));
  return basis;
}

Matrix orthonormalize_columns(const Matrix& m) {
  Matrix q(m.rows(), m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    Vector v = m.column(c);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < c; ++k) {
        const Vector qk = q.column(k);
        axpy(-dot(qk, v), qk, v);
      }
    }
    const double n = norm(v);
    if (n <= 1e-12) throw NumericsError("orthonormalize_columns: rank-deficient input");
    q.set_column(c, scaled(v, 1.0 / n));
  }
  return q;
}

}  // namespace saddlestab
