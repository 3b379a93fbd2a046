#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "nsca/error.hpp"
#include "nsca/matrix.hpp"

namespace nsca {

enum class SortOrder { Ascending, Descending };

/// Eigenvalues with their eigenvectors; column i of `vectors` pairs with values[i].
struct EigPair {
  Vector values;
  Matrix vectors;
  SortOrder order = SortOrder::Ascending;
};

namespace detail {

/// Flip the sign of every column so that its leading dominant entry is
/// positive. "Leading dominant" is the first entry within a relative 1e-9 of
/// the column's max magnitude, which keeps the choice stable under rounding.
inline void normalize_column_signs(Matrix& v) {
  for (std::size_t j = 0; j < v.cols(); ++j) {
    double mx = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) mx = std::max(mx, std::abs(v(i, j)));
    if (mx == 0.0) continue;
    for (std::size_t i = 0; i < v.rows(); ++i) {
      if (std::abs(v(i, j)) >= (1.0 - 1e-9) * mx) {
        if (v(i, j) < 0.0)
          for (std::size_t r = 0; r < v.rows(); ++r) v(r, j) = -v(r, j);
        break;
      }
    }
  }
}

/// Stable permutation sorting `values` per `order` (ties keep input order).
inline std::vector<std::size_t> sort_permutation(std::span<const double> values, SortOrder order) {
  std::vector<std::size_t> perm(values.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (order == SortOrder::Ascending)
    std::stable_sort(perm.begin(), perm.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  else
    std::stable_sort(perm.begin(), perm.end(), [&](auto a, auto b) { return values[a] > values[b]; });
  return perm;
}

inline EigPair permuted(const Vector& values, const Matrix& vectors, SortOrder order) {
  const auto perm = sort_permutation(values, order);
  EigPair out{Vector(values.size()), Matrix(vectors.rows(), vectors.cols()), order};
  for (std::size_t j = 0; j < perm.size(); ++j) {
    out.values[j] = values[perm[j]];
    for (std::size_t i = 0; i < vectors.rows(); ++i) out.vectors(i, j) = vectors(i, perm[j]);
  }
  return out;
}

}  // namespace detail

/// Cholesky factor L (lower triangular) with S = L·Lᵀ.
///
/// Throws NotPositiveDefinite when a pivot falls to or below
/// 1e-12·trace(S)/n, the point at which the covariance is numerically rank
/// deficient. Callers that want to proceed regularize first (see gevd).
inline Matrix cholesky(const SymMatrix& s) {
  const std::size_t n = s.dim();
  const double floor = 1e-12 * s.trace() / static_cast<double>(n);
  if (!(floor > 0.0)) throw Error(ErrorCode::NotPositiveDefinite, "non-positive trace");
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = s(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > floor))
      throw Error(ErrorCode::NotPositiveDefinite, "pivot " + std::to_string(j) + " is " + std::to_string(pivot));
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / d;
    }
  }
  return l;
}

/// Inverse of a lower-triangular matrix by forward substitution.
inline Matrix lower_inverse(const Matrix& l) {
  const std::size_t n = l.rows();
  Matrix inv(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = col; i < n; ++i) {
      double v = (i == col) ? 1.0 : 0.0;
      for (std::size_t k = col; k < i; ++k) v -= l(i, k) * inv(k, col);
      inv(i, col) = v / l(i, i);
    }
  }
  return inv;
}

inline constexpr int kDefaultEigSweeps = 100;

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Values ascending,
/// ties in input order; each eigenvector's leading dominant entry is positive.
inline EigPair sym_eig(const SymMatrix& s, int max_sweeps = kDefaultEigSweeps) {
  const std::size_t n = s.dim();
  Matrix a = s.matrix();
  Matrix v = Matrix::identity(n);
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double guard = 100.0 * std::abs(apq);
        if (std::abs(app) + guard == std::abs(app) && std::abs(aqq) + guard == std::abs(aqq)) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        rotated = true;
        const double theta = (aqq - app) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = a(p, r) = c * arp - sn * arq;
          a(r, q) = a(q, r) = sn * arp + c * arq;
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - sn * vrq;
          v(r, q) = sn * vrp + c * vrq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) throw Error(ErrorCode::NoConvergence, "Jacobi eigensolver exceeded sweep cap");
  detail::normalize_column_signs(v);
  return detail::permuted(a.diag(), v, SortOrder::Ascending);
}

/// Adds eps·trace(B)/n·I. A zero eps returns B unchanged.
inline SymMatrix regularized(const SymMatrix& b, double eps) {
  if (eps <= 0.0) return b;
  Matrix m = b.matrix();
  const double shift = eps * b.trace() / static_cast<double>(b.dim());
  for (std::size_t i = 0; i < b.dim(); ++i) m(i, i) += shift;
  return SymMatrix(m);
}

/// Generalized eigendecomposition of the pair (A, B): returns W with
/// WᵀBW = I and WᵀAW = diag(values), values sorted per `order`.
///
/// B = LLᵀ, M = L⁻¹AL⁻ᵀ, M = UΛUᵀ, W = L⁻ᵀU. `reg_eps` > 0 regularizes B
/// as in `regularized` before factoring.
inline EigPair gevd(const SymMatrix& a, const SymMatrix& b, SortOrder order, double reg_eps = 0.0) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::ShapeMismatch, "gevd pair dimensions differ");
  const Matrix l = cholesky(regularized(b, reg_eps));
  const Matrix linv = lower_inverse(l);
  const SymMatrix m(linv * a.matrix() * linv.transpose());
  const EigPair e = sym_eig(m);
  const Matrix w = linv.transpose() * e.vectors;
  return detail::permuted(e.values, w, order);
}

/// Σ_i weights[i]·Σ_{p≠q} (WᵀC_iW)_{pq}²; zero iff every member is exactly
/// diagonalized by W.
inline double off_diag_residual(const Matrix& w, std::span<const SymMatrix> set, std::span<const double> weights) {
  if (set.size() != weights.size()) throw Error(ErrorCode::ShapeMismatch, "weights/set length");
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Matrix d = w.transpose() * set[i].matrix() * w;
    double off = 0.0;
    for (std::size_t p = 0; p < d.rows(); ++p)
      for (std::size_t q = 0; q < d.cols(); ++q)
        if (p != q) off += d(p, q) * d(p, q);
    total += weights[i] * off;
  }
  return total;
}

struct AjdOptions {
  double angle_tol = 1e-10;
  int max_sweeps = 200;
};

struct AjdResult {
  Matrix demixer;  // W, columns are the joint diagonalizing directions
  double residual = 0.0;
  int sweeps = 0;
};

/// Approximate joint diagonalization: whiten every matrix by the Cholesky
/// factor of `whitener`, then find the orthogonal Q minimizing the weighted
/// off-diagonal mass of {QᵀS_iQ} with Jacobi plane rotations (closed-form
/// angle per plane). Returns W = L⁻ᵀQ, so WᵀwhitenerW = I.
inline AjdResult ajd(std::span<const SymMatrix> set, std::span<const double> weights, const SymMatrix& whitener,
                     const AjdOptions& opts = {}) {
  if (set.empty()) throw Error(ErrorCode::ShapeMismatch, "ajd needs at least one matrix");
  if (weights.size() != set.size()) throw Error(ErrorCode::ShapeMismatch, "weights/set length");
  const std::size_t n = whitener.dim();
  for (const auto& c : set)
    if (c.dim() != n) throw Error(ErrorCode::ShapeMismatch, "ajd set dimension mismatch");
  for (double w : weights)
    if (!(w >= 0.0)) throw Error(ErrorCode::BadInput, "ajd weights must be nonnegative");

  const Matrix linv = lower_inverse(cholesky(whitener));
  std::vector<Matrix> s;
  s.reserve(set.size());
  for (const auto& c : set) s.push_back(SymMatrix(linv * c.matrix() * linv.transpose()).matrix());
  Matrix q = Matrix::identity(n);

  int sweep = 0;
  bool converged = n < 2;
  while (!converged) {
    if (sweep >= opts.max_sweeps) throw Error(ErrorCode::NoConvergence, "ajd exceeded sweep cap");
    ++sweep;
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t r = p + 1; r < n; ++r) {
        double g00 = 0.0, g01 = 0.0, g11 = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
          const double h0 = s[i](p, p) - s[i](r, r);
          const double h1 = s[i](p, r) + s[i](r, p);
          g00 += weights[i] * h0 * h0;
          g01 += weights[i] * h0 * h1;
          g11 += weights[i] * h1 * h1;
        }
        const double ton = g00 - g11;
        const double toff = 2.0 * g01;
        const double theta = 0.5 * std::atan2(toff, ton + std::hypot(ton, toff));
        if (!(std::abs(theta) > opts.angle_tol)) continue;
        converged = false;
        const double c = std::cos(theta);
        const double sn = std::sin(theta);
        for (auto& m : s) {
          for (std::size_t k = 0; k < n; ++k) {
            const double mp = m(p, k);
            const double mr = m(r, k);
            m(p, k) = c * mp + sn * mr;
            m(r, k) = -sn * mp + c * mr;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const double mp = m(k, p);
            const double mr = m(k, r);
            m(k, p) = c * mp + sn * mr;
            m(k, r) = -sn * mp + c * mr;
          }
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double qp = q(k, p);
          const double qr = q(k, r);
          q(k, p) = c * qp + sn * qr;
          q(k, r) = -sn * qp + c * qr;
        }
      }
    }
  }
  detail::normalize_column_signs(q);
  AjdResult out;
  out.demixer = linv.transpose() * q;
  out.residual = off_diag_residual(out.demixer, set, weights);
  out.sweeps = sweep;
  return out;
}

/// LU with partial pivoting; returns the inverse. Throws ShapeMismatch on
/// non-square input and BadInput when a pivot vanishes.
inline Matrix inverse(const Matrix& m) {
  if (!m.square()) throw Error(ErrorCode::ShapeMismatch, "inverse of non-square matrix");
  const std::size_t n = m.rows();
  Matrix a = m;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
    if (a(piv, col) == 0.0) throw Error(ErrorCode::BadInput, "singular matrix");
    if (piv != col)
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    const double d = a(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == col) continue;
      const double f = a(i, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a(i, j) -= f * a(col, j);
        inv(i, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

inline double determinant(const Matrix& m) {
  if (!m.square()) throw Error(ErrorCode::ShapeMismatch, "determinant of non-square matrix");
  const std::size_t n = m.rows();
  Matrix a = m;
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
    if (a(piv, col) == 0.0) return 0.0;
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
      det = -det;
    }
    det *= a(col, col);
    for (std::size_t i = col + 1; i < n; ++i) {
      const double f = a(i, col) / a(col, col);
      for (std::size_t j = col; j < n; ++j) a(i, j) -= f * a(col, j);
    }
  }
  return det;
}

/// Amari performance index of a global system matrix P (e.g. mixer times
/// demixer): 0 iff P is a scaled permutation, normalized to [0, 1].
inline double amari_index(const Matrix& p) {
  const std::size_t n = p.rows();
  if (n < 2) return 0.0;
  double rows = 0.0, cols = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = 0.0, sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      mx = std::max(mx, std::abs(p(i, j)));
      sum += std::abs(p(i, j));
    }
    rows += sum / mx - 1.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double mx = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx = std::max(mx, std::abs(p(i, j)));
      sum += std::abs(p(i, j));
    }
    cols += sum / mx - 1.0;
  }
  return (rows + cols) / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

/// Spectral condition number of an SPD matrix (max/min eigenvalue).
inline double condition_number(const SymMatrix& s) {
  const EigPair e = sym_eig(s);
  const double lo = e.values.front();
  return lo > 0.0 ? e.values.back() / lo : std::numeric_limits<double>::infinity();
}

}  // namespace nsca
