#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "nsca/linalg.hpp"
#include "nsca/random.hpp"

using namespace nsca;
using Catch::Matchers::WithinAbs;

namespace {

Matrix random_matrix(std::size_t n, Rng& rng) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = rng.normal();
  return m;
}

SymMatrix random_spd(std::size_t n, Rng& rng) {
  const Matrix g = random_matrix(n, rng);
  return SymMatrix(g * g.transpose() + Matrix::identity(n) * 0.1);
}

Matrix rotation(std::size_t n, std::size_t p, std::size_t q, double angle) {
  Matrix r = Matrix::identity(n);
  r(p, p) = std::cos(angle);
  r(q, q) = std::cos(angle);
  r(p, q) = -std::sin(angle);
  r(q, p) = std::sin(angle);
  return r;
}

double max_off_diag(const Matrix& m) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (i != j) v = std::max(v, std::abs(m(i, j)));
  return v;
}

// Columns of a and b agree up to order and sign.
bool same_columns_up_to_sign(const Matrix& a, const Matrix& b, double tol) {
  std::vector<bool> used(b.cols(), false);
  for (std::size_t j = 0; j < a.cols(); ++j) {
    bool found = false;
    for (std::size_t c = 0; c < b.cols() && !found; ++c) {
      if (used[c]) continue;
      double dp = 0.0, dm = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) {
        dp = std::max(dp, std::abs(a(i, j) - b(i, c)));
        dm = std::max(dm, std::abs(a(i, j) + b(i, c)));
      }
      if (std::min(dp, dm) <= tol) found = used[c] = true;
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("cholesky of identity is identity") {
  CHECK(cholesky(SymMatrix::identity(3)) == Matrix::identity(3));
}

TEST_CASE("cholesky of a 2x2 SPD matrix") {
  const Matrix l = cholesky(SymMatrix{{4.0, 2.0}, {2.0, 5.0}});
  CHECK_THAT(l(0, 0), WithinAbs(2.0, 1e-15));
  CHECK_THAT(l(0, 1), WithinAbs(0.0, 1e-15));
  CHECK_THAT(l(1, 0), WithinAbs(1.0, 1e-15));
  CHECK_THAT(l(1, 1), WithinAbs(2.0, 1e-15));
}

TEST_CASE("cholesky rejects an indefinite matrix") {
  try {
    (void)cholesky(SymMatrix{{1.0, 2.0}, {2.0, 1.0}});
    FAIL("expected NotPositiveDefinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotPositiveDefinite);
  }
}

TEST_CASE("cholesky recovers the factor of L*Lt") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed, 1);
    const std::size_t n = 2 + seed % 7;
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) l(i, j) = rng.normal();
      l(i, i) = rng.uniform(0.5, 2.0);
    }
    const Matrix back = cholesky(SymMatrix(l * l.transpose()));
    CHECK((back - l).max_abs() <= 1e-10);
  }
}

TEST_CASE("lower_inverse inverts the factor") {
  const Matrix l = cholesky(SymMatrix{{4.0, 2.0, 0.4}, {2.0, 5.0, 1.0}, {0.4, 1.0, 3.0}});
  CHECK((lower_inverse(l) * l - Matrix::identity(3)).max_abs() <= 1e-14);
}

TEST_CASE("sym_eig of a diagonal matrix") {
  const EigPair e = sym_eig(SymMatrix::diagonal({3.0, 1.0, 2.0}));
  CHECK(e.values == Vector{1.0, 2.0, 3.0});
  Matrix expected(3, 3);
  expected(1, 0) = 1.0;
  expected(2, 1) = 1.0;
  expected(0, 2) = 1.0;
  CHECK(e.vectors == expected);
}

TEST_CASE("sym_eig of [[2,1],[1,2]]") {
  const EigPair e = sym_eig(SymMatrix{{2.0, 1.0}, {1.0, 2.0}});
  CHECK_THAT(e.values[0], WithinAbs(1.0, 1e-14));
  CHECK_THAT(e.values[1], WithinAbs(3.0, 1e-14));
  const double h = 1.0 / std::numbers::sqrt2;
  // First entry within 1e-9 of the max magnitude is made positive.
  CHECK_THAT(e.vectors(0, 0), WithinAbs(h, 1e-14));
  CHECK_THAT(e.vectors(1, 0), WithinAbs(-h, 1e-14));
  CHECK_THAT(e.vectors(0, 1), WithinAbs(h, 1e-14));
  CHECK_THAT(e.vectors(1, 1), WithinAbs(h, 1e-14));
}

TEST_CASE("sym_eig of identity keeps unit eigenvalues") {
  const EigPair e = sym_eig(SymMatrix::identity(4));
  CHECK(e.values == Vector{1.0, 1.0, 1.0, 1.0});
  CHECK(e.vectors == Matrix::identity(4));
}

TEST_CASE("sym_eig reconstructs and is orthogonally invariant") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed, 2);
    const std::size_t n = 2 + seed % 7;
    const SymMatrix s(random_matrix(n, rng));
    const EigPair e = sym_eig(s);
    const Matrix back = e.vectors * Matrix::diagonal(e.values) * e.vectors.transpose();
    CHECK((back - s.matrix()).max_abs() <= 1e-10);
    CHECK((e.vectors.transpose() * e.vectors - Matrix::identity(n)).max_abs() <= 1e-12);
    CHECK(std::is_sorted(e.values.begin(), e.values.end()));

    Matrix q = Matrix::identity(n);
    for (std::size_t p = 0; p + 1 < n; ++p) q = q * rotation(n, p, p + 1, rng.uniform(0.0, 6.28));
    const EigPair r = sym_eig(SymMatrix(q * s.matrix() * q.transpose()));
    for (std::size_t i = 0; i < n; ++i) CHECK_THAT(r.values[i], WithinAbs(e.values[i], 1e-8));
  }
}

TEST_CASE("gevd of diagonal pair, descending") {
  const EigPair e = gevd(SymMatrix::diagonal({8.0, 1.0}), SymMatrix::diagonal({2.0, 1.0}), SortOrder::Descending);
  CHECK_THAT(e.values[0], WithinAbs(4.0, 1e-14));
  CHECK_THAT(e.values[1], WithinAbs(1.0, 1e-14));
  CHECK_THAT(e.vectors(0, 0), WithinAbs(1.0 / std::numbers::sqrt2, 1e-14));
  CHECK_THAT(e.vectors(1, 0), WithinAbs(0.0, 1e-14));
  CHECK_THAT(e.vectors(0, 1), WithinAbs(0.0, 1e-14));
  CHECK_THAT(e.vectors(1, 1), WithinAbs(1.0, 1e-14));
}

TEST_CASE("gevd of identity pair gives orthonormal W") {
  const EigPair e = gevd(SymMatrix::identity(3), SymMatrix::identity(3), SortOrder::Ascending);
  for (double v : e.values) CHECK_THAT(v, WithinAbs(1.0, 1e-14));
  CHECK((e.vectors.transpose() * e.vectors - Matrix::identity(3)).max_abs() <= 1e-14);
}

TEST_CASE("gevd contract on random SPD pairs") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed, 3);
    const std::size_t n = 2 + seed % 7;
    const SymMatrix a(random_matrix(n, rng));
    const SymMatrix b = random_spd(n, rng);
    const EigPair e = gevd(a, b, SortOrder::Descending);
    CHECK((congruence(e.vectors, b).matrix() - Matrix::identity(n)).max_abs() <= 1e-8);
    const Matrix waw = congruence(e.vectors, a).matrix();
    CHECK(max_off_diag(waw) <= 1e-8 * std::max(1.0, waw.max_abs()));
    CHECK(std::is_sorted(e.values.rbegin(), e.values.rend()));
  }
}

TEST_CASE("gevd ascending is descending reversed") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed, 4);
    const std::size_t n = 2 + seed % 7;
    const SymMatrix a = random_spd(n, rng);
    const SymMatrix b = random_spd(n, rng);
    const EigPair up = gevd(a, b, SortOrder::Ascending);
    const EigPair down = gevd(a, b, SortOrder::Descending);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(up.values[j] == down.values[n - 1 - j]);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(up.vectors(i, j)) == std::abs(down.vectors(i, n - 1 - j)));
    }
  }
}

TEST_CASE("gevd regularization and failure") {
  const SymMatrix singular{{1.0, 1.0}, {1.0, 1.0}};
  try {
    (void)gevd(SymMatrix::identity(2), singular, SortOrder::Descending);
    FAIL("expected NotPositiveDefinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotPositiveDefinite);
  }
  const EigPair e = gevd(SymMatrix::identity(2), singular, SortOrder::Descending, 1e-6);
  const SymMatrix reg = regularized(singular, 1e-6);
  CHECK_THAT(reg(0, 0), WithinAbs(1.0 + 1e-6, 1e-15));
  CHECK((congruence(e.vectors, reg).matrix() - Matrix::identity(2)).max_abs() <= 1e-6);
}

TEST_CASE("off_diag_residual examples") {
  const std::vector<double> one{1.0};
  const std::vector<SymMatrix> diag{SymMatrix::diagonal({1.0, 2.0})};
  CHECK(off_diag_residual(Matrix::identity(2), diag, one) == 0.0);
  const std::vector<SymMatrix> ones{SymMatrix{{1.0, 1.0}, {1.0, 1.0}}};
  CHECK(off_diag_residual(Matrix::identity(2), ones, one) == 2.0);

  const Matrix r = rotation(2, 0, 1, std::numbers::pi / 4);
  const std::vector<SymMatrix> rotated{SymMatrix(r * Matrix::diagonal({1.0, 2.0}) * r.transpose())};
  CHECK(off_diag_residual(Matrix::identity(2), rotated, one) > 0.1);
  CHECK(off_diag_residual(r, rotated, one) <= 1e-30);
}

TEST_CASE("ajd of an already diagonal set") {
  const std::vector<SymMatrix> set{SymMatrix::diagonal({1.0, 2.0}), SymMatrix::diagonal({3.0, 1.0})};
  const std::vector<double> w{1.0, 1.0};
  const AjdResult r = ajd(set, w, SymMatrix::identity(2));
  CHECK(r.residual <= 1e-16);
  CHECK(same_columns_up_to_sign(r.demixer, Matrix::identity(2), 1e-12));
}

TEST_CASE("ajd of one matrix is its eigendecomposition") {
  Rng rng(5, 5);
  const SymMatrix m(random_matrix(5, rng));
  const std::vector<SymMatrix> set{m};
  const std::vector<double> w{1.0};
  const AjdResult r = ajd(set, w, SymMatrix::identity(5));
  CHECK(same_columns_up_to_sign(r.demixer, sym_eig(m).vectors, 1e-8));
}

TEST_CASE("ajd recovers an exactly jointly diagonalizable set") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed, 6);
    const std::size_t n = 2 + seed % 7;
    const std::size_t k = 3 + seed % 4;
    const Matrix m = random_matrix(n, rng);
    std::vector<SymMatrix> set;
    Matrix sum(n, n);
    for (std::size_t i = 0; i < k; ++i) {
      Vector d(n);
      for (double& v : d) v = rng.uniform(0.1, 2.0);
      const Matrix c = m.transpose() * Matrix::diagonal(d) * m;
      set.emplace_back(c);
      sum += c;
    }
    const std::vector<double> w(k, 1.0);
    const AjdResult r = ajd(set, w, SymMatrix(sum));
    for (const auto& c : set) {
      const Matrix d = congruence(r.demixer, c).matrix();
      CHECK(max_off_diag(d) <= 1e-8 * d.diag()[0] + 1e-8 * d.max_abs());
    }
    CHECK(amari_index(m * r.demixer) < 1e-6);
  }
}

TEST_CASE("ajd rejects mismatched inputs") {
  const std::vector<SymMatrix> set{SymMatrix::identity(2), SymMatrix::identity(3)};
  const std::vector<double> w{1.0, 1.0};
  try {
    (void)ajd(set, w, SymMatrix::identity(2));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  const std::vector<SymMatrix> rotated{SymMatrix{{1.0, 0.3}, {0.3, 2.0}}, SymMatrix{{2.0, -0.5}, {-0.5, 1.0}}};
  try {
    (void)ajd(rotated, w, SymMatrix::identity(2), AjdOptions{1e-300, 0});
    FAIL("expected NoConvergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoConvergence);
  }
}

TEST_CASE("amari index is zero for scaled permutations") {
  Matrix p(3, 3);
  p(0, 2) = -2.0;
  p(1, 0) = 0.5;
  p(2, 1) = 7.0;
  CHECK(amari_index(p) == 0.0);
  const Matrix full(3, 3, 1.0);
  CHECK_THAT(amari_index(full), WithinAbs(1.0, 1e-15));
}

TEST_CASE("inverse and determinant") {
  const Matrix a{{4.0, 7.0}, {2.0, 6.0}};
  CHECK_THAT(determinant(a), WithinAbs(10.0, 1e-12));
  CHECK((inverse(a) * a - Matrix::identity(2)).max_abs() <= 1e-14);
  CHECK_THAT(condition_number(SymMatrix::diagonal({1.0, 4.0})), WithinAbs(4.0, 1e-14));
}
