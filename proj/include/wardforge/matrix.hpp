#pragma once

// Dense complex matrices, Hermitian projectors onto column spans and
// SU(n) diagnostics. Sizes here are tiny (n <= 8 typically), so everything
// is straightforward O(n^3) code without blocking.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "wardforge/errors.hpp"

namespace wardforge {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr Complex kI{0.0, 1.0};

class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, Complex{}) {}

  /// Row-major initializer: ComplexMatrix{{a, b}, {c, d}}.
  ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      assert(r.size() == cols_);
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static ComplexMatrix diagonal(std::span<const Complex> d) {
    ComplexMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  static ComplexMatrix column(std::span<const Complex> v) {
    ComplexMatrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }
  bool empty() const noexcept { return data_.empty(); }

  Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const Complex> values() const noexcept { return data_; }

  std::vector<Complex> col(std::size_t c) const {
    std::vector<Complex> v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
    return v;
  }

  ComplexMatrix adjoint() const {
    ComplexMatrix m(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) m(c, r) = std::conj((*this)(r, c));
    return m;
  }

  Complex trace() const {
    Complex s{};
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& v : data_) s += std::norm(v);
    return std::sqrt(s);
  }

  double max_abs() const {
    double s = 0.0;
    for (const auto& v : data_) s = std::max(s, std::abs(v));
    return s;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](const Complex& v) {
      return std::isfinite(v.real()) && std::isfinite(v.imag());
    });
  }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  ComplexMatrix& operator*=(Complex s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
  friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }
  friend ComplexMatrix operator-(ComplexMatrix a) { return a *= -1.0; }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    assert(a.cols_ == b.rows_);
    ComplexMatrix m(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const Complex aik = a(i, k);
        if (aik == Complex{}) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) m(i, j) += aik * b(k, j);
      }
    return m;
  }

  friend bool operator==(const ComplexMatrix& a, const ComplexMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a * b - b * a;
}

/// Orthogonal projection P = P* = P^2 onto a k-dimensional subspace of C^n.
struct Projector {
  ComplexMatrix matrix;
  std::size_t rank = 0;

  ComplexMatrix complement() const { return ComplexMatrix::identity(matrix.rows()) - matrix; }
};

namespace detail {

inline Complex inner(std::span<const Complex> a, std::span<const Complex> b) {
  Complex s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline double norm2(std::span<const Complex> a) {
  double s = 0.0;
  for (const auto& v : a) s += std::norm(v);
  return std::sqrt(s);
}

inline std::vector<std::vector<Complex>> split_columns(const ComplexMatrix& m) {
  std::vector<std::vector<Complex>> cols(m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) cols[c] = m.col(c);
  return cols;
}

inline void check_finite(const ComplexMatrix& m) {
  if (!m.all_finite()) throw Error(ErrorCode::NonFiniteEntry, "matrix has a non-finite entry");
}

}  // namespace detail

/// Singular values of an n x k matrix, descending, by one-sided Jacobi.
inline std::vector<double> singular_values(const ComplexMatrix& m) {
  auto cols = detail::split_columns(m);
  const std::size_t k = cols.size();
  constexpr double eps = 1e-15;
  for (int sweep = 0; sweep < 80; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        const double alpha = std::real(detail::inner(cols[p], cols[p]));
        const double beta = std::real(detail::inner(cols[q], cols[q]));
        const Complex gamma = detail::inner(cols[p], cols[q]);
        const double g = std::abs(gamma);
        if (g <= eps * std::sqrt(alpha * beta) || g == 0.0) continue;
        rotated = true;
        const Complex phase = std::conj(gamma) / g;  // makes <p, q*phase> = |gamma|
        const double zeta = (beta - alpha) / (2.0 * g);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < cols[p].size(); ++i) {
          const Complex up = cols[p][i];
          const Complex uq = cols[q][i] * phase;
          cols[p][i] = c * up - s * uq;
          cols[q][i] = s * up + c * uq;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(k);
  for (std::size_t c = 0; c < k; ++c) sv[c] = detail::norm2(cols[c]);
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

/// Numerical rank: singular values above rel_tol * sigma_max.
inline std::size_t numerical_rank(const ComplexMatrix& m, double rel_tol = 1e-10) {
  const auto sv = singular_values(m);
  if (sv.empty() || sv.front() == 0.0) return 0;
  return static_cast<std::size_t>(
      std::count_if(sv.begin(), sv.end(), [&](double s) { return s > rel_tol * sv.front(); }));
}

/// Orthonormal basis (n x rank) of the leading column directions, by modified
/// Gram-Schmidt with column pivoting and one reorthogonalization pass.
inline ComplexMatrix orthonormal_basis(const ComplexMatrix& columns, std::size_t rank) {
  auto work = detail::split_columns(columns);
  const std::size_t n = columns.rows();
  std::vector<bool> used(work.size(), false);
  std::vector<std::vector<Complex>> basis;
  basis.reserve(rank);
  while (basis.size() < rank) {
    std::size_t best = work.size();
    double best_norm = 0.0;
    for (std::size_t j = 0; j < work.size(); ++j) {
      if (used[j]) continue;
      const double nj = detail::norm2(work[j]);
      if (nj > best_norm) {
        best_norm = nj;
        best = j;
      }
    }
    if (best == work.size() || best_norm == 0.0) break;
    used[best] = true;
    std::vector<Complex> v = work[best];
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) {
        const Complex c = detail::inner(q, v);
        for (std::size_t i = 0; i < n; ++i) v[i] -= c * q[i];
      }
      const double nv = detail::norm2(v);
      if (nv == 0.0) break;
      for (auto& x : v) x /= nv;
    }
    for (std::size_t j = 0; j < work.size(); ++j) {
      if (used[j]) continue;
      for (int pass = 0; pass < 2; ++pass) {
        const Complex c = detail::inner(v, work[j]);
        for (std::size_t i = 0; i < n; ++i) work[j][i] -= c * v[i];
      }
    }
    basis.push_back(std::move(v));
  }
  ComplexMatrix q(n, basis.size());
  for (std::size_t c = 0; c < basis.size(); ++c)
    for (std::size_t r = 0; r < n; ++r) q(r, c) = basis[c][r];
  return q;
}

namespace detail {

inline Projector projector_from_basis(const ComplexMatrix& q) {
  Projector p{q * q.adjoint(), q.cols()};
#ifndef NDEBUG
  const double n = static_cast<double>(p.matrix.rows());
  assert((p.matrix * p.matrix - p.matrix).frobenius_norm() < 1e-12 * n);
  assert((p.matrix.adjoint() - p.matrix).frobenius_norm() < 1e-12 * n);
#endif
  return p;
}

}  // namespace detail

/// Hermitian projector onto the numerical column span. The rank counts
/// singular values above tol * sigma_max; columns are all considered zero
/// when no entry exceeds tol in magnitude.
inline Projector hermitian_projector(const ComplexMatrix& columns, double tol = 1e-10) {
  detail::check_finite(columns);
  if (columns.rows() == 0) throw Error(ErrorCode::InvalidArgument, "projector needs n >= 1");
  if (columns.max_abs() <= tol) throw Error(ErrorCode::AllZeroColumns, "every column is below tolerance");
  const std::size_t rank = numerical_rank(columns, tol);
  return detail::projector_from_basis(orthonormal_basis(columns, rank));
}

/// Projector of a prescribed rank onto the dominant column directions.
/// `rank_deficient` is set when the k-th singular value falls below
/// rel_tol * sigma_max.
inline Projector hermitian_projector_of_rank(const ComplexMatrix& columns, std::size_t rank,
                                             bool* rank_deficient = nullptr,
                                             double rel_tol = 1e-10) {
  detail::check_finite(columns);
  if (columns.max_abs() == 0.0) throw Error(ErrorCode::AllZeroColumns, "every column is zero");
  if (rank_deficient != nullptr) {
    const auto sv = singular_values(columns);
    *rank_deficient = rank > sv.size() || (rank > 0 && sv[rank - 1] <= rel_tol * sv.front());
  }
  return detail::projector_from_basis(orthonormal_basis(columns, rank));
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
inline ComplexMatrix inverse(const ComplexMatrix& m) {
  if (!m.square()) throw Error(ErrorCode::InvalidArgument, "inverse of a non-square matrix");
  detail::check_finite(m);
  const std::size_t n = m.rows();
  const double scale = m.frobenius_norm();
  ComplexMatrix a = m;
  ComplexMatrix inv = ComplexMatrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (std::abs(a(piv, col)) < 1e-14 * scale || scale == 0.0)
      throw Error(ErrorCode::SingularMatrix, "pivot below 1e-14 * |M|_F");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a(piv, c), a(col, c));
        std::swap(inv(piv, c), inv(col, c));
      }
    }
    const Complex d = 1.0 / a(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      a(col, c) *= d;
      inv(col, c) *= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const Complex f = a(r, col);
      if (f == Complex{}) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a(r, c) -= f * a(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  return inv;
}

inline Complex determinant(const ComplexMatrix& m) {
  if (!m.square()) throw Error(ErrorCode::InvalidArgument, "determinant of a non-square matrix");
  const std::size_t n = m.rows();
  ComplexMatrix a = m;
  Complex det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (a(piv, col) == Complex{}) return 0.0;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(piv, c), a(col, c));
      det = -det;
    }
    det *= a(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const Complex f = a(r, col) / a(col, col);
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
    }
  }
  return det;
}

struct UnitaryDefect {
  double unitarity = 0.0;    // |M*M - I|_F
  Complex determinant{};     // det(M) - 1
};

inline UnitaryDefect special_unitary_defect(const ComplexMatrix& m) {
  const auto id = ComplexMatrix::identity(m.rows());
  return {(m.adjoint() * m - id).frobenius_norm(), determinant(m) - 1.0};
}

}  // namespace wardforge
