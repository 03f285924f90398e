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

#include "riemann/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

namespace riemann::linalg {

namespace {

std::atomic<std::int64_t> g_factorization_count{0};
std::atomic<int> g_max_factorization_dim{0};

void record_factorization(int dim) {
  g_factorization_count.fetch_add(1, std::memory_order_relaxed);
  int seen = g_max_factorization_dim.load(std::memory_order_relaxed);
  while (dim > seen &&
         !g_max_factorization_dim.compare_exchange_weak(seen, dim, std::memory_order_relaxed)) {
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw DimensionMismatch(what);
}

}  // namespace

namespace instrumentation {

void reset() {
  g_factorization_count.store(0, std::memory_order_relaxed);
  g_max_factorization_dim.store(0, std::memory_order_relaxed);
}

std::int64_t factorization_count() {
  return g_factorization_count.load(std::memory_order_relaxed);
}

int max_factorization_dim() {
  return g_max_factorization_dim.load(std::memory_order_relaxed);
}

}  // namespace instrumentation

DenseMatrix::DenseMatrix(int rows, int cols, Vector entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != static_cast<std::size_t>(rows) * cols) {
    throw DimensionMismatch("DenseMatrix: entry count does not match rows x cols");
  }
}

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
  DenseMatrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) {
      throw DimensionMismatch("DenseMatrix::from_rows: ragged rows");
    }
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

UpperTriangularFactor::UpperTriangularFactor(DenseMatrix entries) : matrix_(std::move(entries)) {
  if (matrix_.rows() != matrix_.cols()) {
    throw DimensionMismatch("UpperTriangularFactor: matrix must be square");
  }
  for (int i = 0; i < matrix_.rows(); ++i) {
    if (!(matrix_(i, i) > 0.0)) {
      throw NotPositiveDefinite("UpperTriangularFactor: diagonal entry " + std::to_string(i) +
                                " is not positive");
    }
    for (int j = 0; j < i; ++j) {
      if (matrix_(i, j) != 0.0) {
        throw DimensionMismatch("UpperTriangularFactor: nonzero entry below the diagonal");
      }
    }
  }
}

UpperTriangularFactor UpperTriangularFactor::identity(int n) {
  UpperTriangularFactor f;
  f.matrix_ = DenseMatrix::identity(n);
  return f;
}

DiagonalMatrix::DiagonalMatrix(Vector diagonal) : diagonal_(std::move(diagonal)) {
  for (std::size_t i = 0; i < diagonal_.size(); ++i) {
    if (!(diagonal_[i] > 0.0) || !std::isfinite(diagonal_[i])) {
      throw NotPositiveDefinite("DiagonalMatrix: entry " + std::to_string(i) +
                                " is not strictly positive");
    }
  }
}

DiagonalMatrix DiagonalMatrix::uniform(int dim, double value) {
  return DiagonalMatrix(Vector(static_cast<std::size_t>(dim), value));
}

double DiagonalMatrix::min_entry() const {
  return *std::min_element(diagonal_.begin(), diagonal_.end());
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

bool all_finite(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool all_finite(const DenseMatrix& m) { return all_finite(std::span<const double>(m.entries())); }

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  require(static_cast<int>(x.size()) == a.cols(), "matvec: size mismatch");
  Vector y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x) {
  require(static_cast<int>(x.size()) == a.rows(), "matvec_transposed: size mismatch");
  Vector y(a.cols(), 0.0);
  for (int i = 0; i < a.rows(); ++i) axpy(x[i], a.row(i), y);
  return y;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  DenseMatrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      axpy(aik, b.row(k), c.row(i));
    }
  }
  return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

DenseMatrix gram(const DenseMatrix& a) {
  DenseMatrix g(a.cols(), a.cols());
  for (int k = 0; k < a.rows(); ++k) {
    const auto row = a.row(k);
    for (int i = 0; i < a.cols(); ++i) {
      const double rki = row[i];
      if (rki == 0.0) continue;
      double* gi = &g(i, 0);
      for (int j = 0; j < a.cols(); ++j) gi[j] += rki * row[j];
    }
  }
  return g;
}

DenseMatrix outer_gram(const DenseMatrix& a) {
  DenseMatrix g(a.rows(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = i; j < a.rows(); ++j) {
      const double v = dot(a.row(i), a.row(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

double frobenius_norm(const DenseMatrix& a) {
  return norm2(std::span<const double>(a.entries()));
}

DenseMatrix symmetrized(const DenseMatrix& a) {
  require(a.rows() == a.cols(), "symmetrized: matrix must be square");
  DenseMatrix s(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  }
  return s;
}

double asymmetry(const DenseMatrix& a) {
  require(a.rows() == a.cols(), "asymmetry: matrix must be square");
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = i + 1; j < a.cols(); ++j) {
      const double d = a(i, j) - a(j, i);
      s += 2.0 * d * d;
    }
  }
  return std::sqrt(s);
}

UpperTriangularFactor cholesky_upper(const DenseMatrix& m) {
  require(m.rows() == m.cols(), "cholesky_upper: matrix must be square");
  const int n = m.rows();
  if (!all_finite(m)) throw NonFinite("cholesky_upper: non-finite entries");
  const double scale = frobenius_norm(m);
  if (asymmetry(m) > 1e-10 * std::max(scale, 1e-300)) {
    throw NotSymmetric("cholesky_upper: asymmetry exceeds 1e-10 * ||m||_F");
  }

  // Work on the symmetrized input. The lower factor is built row by row
  // (contiguous accesses in row-major storage) and transposed at the end
  // to the m = L^T L convention with L upper triangular.
  DenseMatrix lower(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = 0.5 * (m(i, j) + m(j, i));
      const double* li = &lower(i, 0);
      const double* lj = &lower(j, 0);
      for (int k = 0; k < j; ++k) sum -= li[k] * lj[k];
      if (i == j) {
        if (!(sum > 0.0)) {
          throw NotPositiveDefinite("cholesky_upper: pivot " + std::to_string(i) +
                                    " is not positive");
        }
        lower(i, j) = std::sqrt(sum);
      } else {
        lower(i, j) = sum / lower(j, j);
      }
    }
  }
  record_factorization(n);

  DenseMatrix upper(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) upper(j, i) = lower(i, j);
  }
  return UpperTriangularFactor(std::move(upper));
}

Vector solve_upper(const UpperTriangularFactor& factor, std::span<const double> b) {
  const int n = factor.dim();
  require(static_cast<int>(b.size()) == n, "solve_upper: size mismatch");
  const DenseMatrix& u = factor.matrix();
  Vector x(b.begin(), b.end());
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    const std::span<const double> ui = u.row(i);
    for (int j = i + 1; j < n; ++j) s -= ui[j] * x[j];
    x[i] = s / ui[i];
  }
  return x;
}

Vector solve_upper_transposed(const UpperTriangularFactor& factor, std::span<const double> b) {
  const int n = factor.dim();
  require(static_cast<int>(b.size()) == n, "solve_upper_transposed: size mismatch");
  const DenseMatrix& u = factor.matrix();
  Vector x(b.begin(), b.end());
  // L^T is lower triangular; entry (i, j) of L^T is u(j, i).
  for (int i = 0; i < n; ++i) {
    double s = x[i];
    for (int j = 0; j < i; ++j) s -= u(j, i) * x[j];
    x[i] = s / u(i, i);
  }
  return x;
}

Vector solve_cholesky(const UpperTriangularFactor& factor, std::span<const double> b) {
  Vector y = solve_upper_transposed(factor, b);
  return solve_upper(factor, y);
}

Vector solve_spd(const DenseMatrix& m, std::span<const double> rhs) {
  require(m.rows() == static_cast<int>(rhs.size()), "solve_spd: size mismatch");
  UpperTriangularFactor factor = cholesky_upper(m);
  return solve_cholesky(factor, rhs);
}

Vector symmetric_eigenvalues(const DenseMatrix& m) {
  require(m.rows() == m.cols(), "symmetric_eigenvalues: matrix must be square");
  if (!all_finite(m)) throw NonFinite("symmetric_eigenvalues: non-finite entries");
  const int n = m.rows();
  DenseMatrix a = symmetrized(m);

  // Cyclic Jacobi. Each sweep annihilates every off-diagonal pair once;
  // convergence is quadratic once the off-diagonal mass is small.
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= 1e-30 * std::max(1.0, frobenius_norm(a) * frobenius_norm(a))) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }

  Vector eigenvalues(n);
  for (int i = 0; i < n; ++i) eigenvalues[i] = a(i, i);
  std::sort(eigenvalues.begin(), eigenvalues.end());
  return eigenvalues;
}

double min_eigenvalue(const DenseMatrix& m) { return symmetric_eigenvalues(m).front(); }

double max_eigenvalue(const DenseMatrix& m) { return symmetric_eigenvalues(m).back(); }

double spectral_norm(const DenseMatrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  const DenseMatrix g = a.rows() <= a.cols() ? outer_gram(a) : gram(a);
  const double lambda = max_eigenvalue(g);
  return std::sqrt(std::max(lambda, 0.0));
}

}  // namespace riemann::linalg
