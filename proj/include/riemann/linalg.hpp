// Copyright 2026 The Riemann Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RIEMANN_LINALG_HPP
#define RIEMANN_LINALG_HPP

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "riemann/errors.hpp"

namespace riemann::linalg {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. All numerical work in the project is
/// done in 64-bit floating point; the verification tolerances (1e-8 to
/// 1e-12) are not reachable in single precision.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), entries_(static_cast<std::size_t>(rows) * cols, 0.0) {}
  DenseMatrix(int rows, int cols, Vector entries);

  static DenseMatrix identity(int n);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(int i, int j) { return entries_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const {
    return entries_[static_cast<std::size_t>(i) * cols_ + j];
  }

  std::span<double> row(int i) { return {entries_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int i) const {
    return {entries_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
  }

  double* data() { return entries_.data(); }
  const double* data() const { return entries_.data(); }
  const Vector& entries() const { return entries_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  Vector entries_;
};

/// Upper-triangular Cholesky factor L with M = L^T L. Diagonal entries are
/// strictly positive and everything below the diagonal is exactly zero.
class UpperTriangularFactor {
 public:
  UpperTriangularFactor() = default;
  /// Validates the triangular shape and positive diagonal.
  explicit UpperTriangularFactor(DenseMatrix entries);

  static UpperTriangularFactor identity(int n);

  int dim() const { return matrix_.rows(); }
  double operator()(int i, int j) const { return matrix_(i, j); }
  const DenseMatrix& matrix() const { return matrix_; }

 private:
  DenseMatrix matrix_;
};

/// Diagonal matrix with strictly positive entries (a mass matrix).
class DiagonalMatrix {
 public:
  DiagonalMatrix() = default;
  /// Throws NotPositiveDefinite unless every entry is > 0 and finite.
  explicit DiagonalMatrix(Vector diagonal);

  static DiagonalMatrix uniform(int dim, double value);

  int dim() const { return static_cast<int>(diagonal_.size()); }
  double operator()(int i) const { return diagonal_[i]; }
  const Vector& diagonal() const { return diagonal_; }
  double min_entry() const;

 private:
  Vector diagonal_;
};

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
bool all_finite(std::span<const double> a);
bool all_finite(const DenseMatrix& m);

// ---------------------------------------------------------------------------
// Matrix helpers
// ---------------------------------------------------------------------------

Vector matvec(const DenseMatrix& a, std::span<const double> x);
/// a^T x without forming the transpose.
Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
/// a^T a, the (cols x cols) Gram matrix.
DenseMatrix gram(const DenseMatrix& a);
/// a a^T, the (rows x rows) Gram matrix.
DenseMatrix outer_gram(const DenseMatrix& a);
double frobenius_norm(const DenseMatrix& a);
DenseMatrix symmetrized(const DenseMatrix& a);
/// max_{ij} |a_{ij} - a_{ji}|-style asymmetry measured in Frobenius norm.
double asymmetry(const DenseMatrix& a);

// ---------------------------------------------------------------------------
// Factorizations and solves
// ---------------------------------------------------------------------------

/// Cholesky factorization m = L^T L with L upper triangular.
///
/// Inputs whose asymmetry exceeds 1e-10 * ||m||_F raise NotSymmetric;
/// smaller asymmetry (roundoff from J^T M J products) is absorbed by
/// factoring (m + m^T) / 2. A non-positive pivot raises NotPositiveDefinite.
UpperTriangularFactor cholesky_upper(const DenseMatrix& m);

/// Back substitution for L x = b (L upper triangular).
Vector solve_upper(const UpperTriangularFactor& factor, std::span<const double> b);
/// Forward substitution for L^T x = b.
Vector solve_upper_transposed(const UpperTriangularFactor& factor, std::span<const double> b);
/// (L^T L) x = b given the factor.
Vector solve_cholesky(const UpperTriangularFactor& factor, std::span<const double> b);
/// m x = rhs for symmetric positive definite m.
Vector solve_spd(const DenseMatrix& m, std::span<const double> rhs);

// ---------------------------------------------------------------------------
// Eigenvalues
// ---------------------------------------------------------------------------

/// All eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi
/// rotations. Accurate to roughly machine precision relative to ||m||.
Vector symmetric_eigenvalues(const DenseMatrix& m);
double min_eigenvalue(const DenseMatrix& m);
double max_eigenvalue(const DenseMatrix& m);
/// Largest singular value; computed from the smaller of the two Gram
/// matrices.
double spectral_norm(const DenseMatrix& a);

// ---------------------------------------------------------------------------
// Instrumentation
// ---------------------------------------------------------------------------

/// Counts Cholesky factorizations and the largest dimension factored.
/// Used by tests to certify that the Woodbury path never factors anything
/// bigger than the (stacked) output dimension.
namespace instrumentation {
void reset();
std::int64_t factorization_count();
int max_factorization_dim();
}  // namespace instrumentation

}  // namespace riemann::linalg

#endif  // RIEMANN_LINALG_HPP
