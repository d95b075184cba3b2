#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "wardforge/matrix.hpp"

using namespace wardforge;

namespace {

ComplexMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ComplexMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = {g(rng), g(rng)};
  return m;
}

// Eigenvalues of a 2x2 Hermitian matrix in closed form.
std::pair<double, double> hermitian_eigs_2x2(const ComplexMatrix& h) {
  const double a = h(0, 0).real(), d = h(1, 1).real();
  const double disc = std::sqrt((a - d) * (a - d) / 4.0 + std::norm(h(0, 1)));
  return {(a + d) / 2.0 + disc, (a + d) / 2.0 - disc};
}

}  // namespace

TEST(Matrix, ProjectorIsHermitianIdempotentWithMatchingTrace) {
  std::mt19937_64 rng(7);
  for (std::size_t n : {2u, 3u, 5u}) {
    for (std::size_t k = 1; k < n; ++k) {
      const auto cols = random_matrix(n, k, rng);
      const auto p = hermitian_projector(cols);
      EXPECT_EQ(p.rank, k);
      EXPECT_LT((p.matrix - p.matrix.adjoint()).frobenius_norm(), 1e-13);
      EXPECT_LT((p.matrix * p.matrix - p.matrix).frobenius_norm(), 1e-13);
      EXPECT_NEAR(p.matrix.trace().real(), double(k), 1e-13);
      // Range contains the input columns.
      EXPECT_LT((p.matrix * cols - cols).frobenius_norm(), 1e-12 * cols.frobenius_norm());
    }
  }
}

TEST(Matrix, ProjectorDependsOnlyOnSpan) {
  std::mt19937_64 rng(11);
  const auto cols = random_matrix(4, 2, rng);
  const auto mix = random_matrix(2, 2, rng);
  const auto p1 = hermitian_projector(cols);
  const auto p2 = hermitian_projector(cols * mix);
  EXPECT_LT((p1.matrix - p2.matrix).frobenius_norm(), 1e-12);
}

TEST(Matrix, DependentColumnsReduceRank) {
  ComplexMatrix cols{{1.0, 2.0}, {Complex(0, 1), Complex(0, 2)}, {3.0, 6.0}};
  EXPECT_EQ(hermitian_projector(cols).rank, 1u);
  bool deficient = false;
  hermitian_projector_of_rank(cols, 2, &deficient);
  EXPECT_TRUE(deficient);
}

TEST(Matrix, ProjectorErrors) {
  ComplexMatrix zero(3, 1);
  EXPECT_THROW(hermitian_projector(zero), Error);
  ComplexMatrix bad{{1.0}, {Complex(std::nan(""), 0.0)}};
  try {
    hermitian_projector(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteEntry);
  }
}

TEST(Matrix, SingularValuesMatchClosedFormFor2x2) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_matrix(2, 2, rng);
    auto [l1, l2] = hermitian_eigs_2x2(m.adjoint() * m);
    const auto sv = singular_values(m);
    ASSERT_EQ(sv.size(), 2u);
    EXPECT_NEAR(sv[0], std::sqrt(l1), 1e-12);
    EXPECT_NEAR(sv[1], std::sqrt(std::max(l2, 0.0)), 1e-12);
  }
}

TEST(Matrix, InverseAndDeterminant) {
  std::mt19937_64 rng(5);
  for (std::size_t n : {1u, 2u, 4u}) {
    const auto m = random_matrix(n, n, rng);
    EXPECT_LT((inverse(m) * m - ComplexMatrix::identity(n)).frobenius_norm(), 1e-11);
    const auto b = random_matrix(n, n, rng);
    EXPECT_LT(std::abs(determinant(m * b) - determinant(m) * determinant(b)), 1e-10 * (1.0 + std::abs(determinant(m * b))));
  }
  ComplexMatrix two{{1.0, 2.0}, {3.0, Complex(4.0, 1.0)}};
  EXPECT_LT(std::abs(determinant(two) - (Complex(4.0, 1.0) - 6.0)), 1e-15);
  ComplexMatrix singular{{1.0, 2.0}, {2.0, 4.0}};
  try {
    inverse(singular);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularMatrix);
  }
}

TEST(Matrix, SpecialUnitaryDefectOfKnownMatrices) {
  const double c = std::cos(0.3), s = std::sin(0.3);
  ComplexMatrix rot{{c, -s}, {s, c}};
  const auto d = special_unitary_defect(rot);
  EXPECT_LT(d.unitarity, 1e-15);
  EXPECT_LT(std::abs(d.determinant), 1e-15);
  const auto d2 = special_unitary_defect(rot * Complex(0.0, 1.0));
  EXPECT_NEAR(std::abs(d2.determinant), 2.0, 1e-14);
}

TEST(Matrix, CommutatorAntisymmetry) {
  std::mt19937_64 rng(9);
  const auto a = random_matrix(3, 3, rng), b = random_matrix(3, 3, rng);
  EXPECT_LT((commutator(a, b) + commutator(b, a)).frobenius_norm(), 1e-14);
  EXPECT_LT(std::abs(commutator(a, b).trace()), 1e-13);
}
