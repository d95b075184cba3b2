#include <gtest/gtest.h>

#include "wardforge/backlund.hpp"

using namespace wardforge;

namespace {

BacklundStep step(Complex z, std::size_t n, std::size_t k, std::vector<std::string> entries) {
  return {SpectralPole::from_complex(z), MeromorphicColumnSpec::from_strings(n, k, entries)};
}

}  // namespace

TEST(Backlund, FullRankSeedLeavesWardMapUnchanged) {
  const auto base = VacuumBase::type_a(VacuumBase::block_diagonal(2, 1, 1.0));
  const auto dressed = stack(base, {step(Complex(0.3, 0.8), 2, 2, {"1", "w", "0", "1"})});
  EXPECT_EQ(dressed.factors().front().rank, 2u);
  const auto J0 = ward_map_of(ExtendedSolution(base)), J = ward_map_of(dressed);
  for (double x : {0.0, 1.0})
    for (double t : {-0.5, 0.5}) EXPECT_LT((J(x, 0.2, t) - J0(x, 0.2, t)).frobenius_norm(), 1e-13);
}

TEST(Backlund, SecondProjectorIsDressedByFirstFactor) {
  const Complex z1(0.4, 1.3), z2(0.7, 0.8);
  const auto psi = stack(VacuumBase::identity(2), {step(z1, 2, 1, {"1", "w"}), step(z2, 2, 1, {"w - 1", "w*w + 2"})});
  for (double x : {-0.3, 0.9}) {
    const double y = 0.4, t = 0.2;
    const auto s = psi.at(x, y, t);
    const Complex w1 = spectral_coordinate(z1, x, y, t), w2 = spectral_coordinate(z2, x, y, t);
    const auto pi1 = hermitian_projector(ComplexMatrix{{1.0}, {w1}}).matrix;
    const auto h1 = ComplexMatrix::identity(2) + ((std::conj(z1) - z1) / (z2 - std::conj(z1))) * pi1;
    const auto pi2 = hermitian_projector(h1 * ComplexMatrix{{w2 - 1.0}, {w2 * w2 + 2.0}}).matrix;
    EXPECT_LT((s.projectors()[0].matrix - pi1).frobenius_norm(), 1e-13);
    EXPECT_LT((s.projectors()[1].matrix - pi2).frobenius_norm(), 1e-12);
  }
}

TEST(Backlund, StepsCommute) {
  const auto a = step(Complex(0.4, 1.3), 2, 1, {"1", "w"});
  const auto b = step(Complex(-0.5, 0.9), 2, 1, {"w", "1 + 1/w"});
  const auto base = VacuumBase::type_a(VacuumBase::block_diagonal(2, 1, 1.0));
  const auto J1 = ward_map_of(stack(base, {a, b})), J2 = ward_map_of(stack(base, {b, a}));
  for (double x : {0.1, 2.3})
    for (double t : {-0.7, 0.4}) EXPECT_LT((J1(x, -0.6, t) - J2(x, -0.6, t)).frobenius_norm(), 1e-11);
}

TEST(Backlund, FourStepsStaySpecialUnitary) {
  const auto psi = stack(VacuumBase::type_b(VacuumBase::block_diagonal(3, 1, 1.0)),
                         {step(Complex(0.4, 1.3), 3, 1, {"1", "w", "w*w"}),
                          step(Complex(-0.5, 0.9), 3, 2, {"1", "0", "w", "1", "0", "exp(i*w)"}),
                          step(Complex(0.2, -1.1), 3, 1, {"w - 1", "2", "1/(w + 3)"}),
                          step(Complex(1.5, 0.6), 3, 1, {"1", "1", "w"})});
  for (double x = -1.0; x <= 1.0; x += 0.5)
    for (double t = -1.0; t <= 1.0; t += 0.5) {
      const auto s = psi.at(x, 0.3, t);
      const auto d = special_unitary_defect(s.ward());
      EXPECT_LT(d.unitarity, 1e-9);
      EXPECT_LT(std::abs(d.determinant), 1e-9);
      EXPECT_LT(reality_defect(psi, x, 0.3, t, Complex(0.3, 0.45)), 1e-9);
    }
}

TEST(Backlund, RankIsPinnedFromSeed) {
  const auto psi = stack(VacuumBase::identity(3), {step(Complex(0.4, 1.3), 3, 2, {"1", "w", "w", "w*w", "0", "1"})});
  EXPECT_EQ(psi.factors().front().rank, 2u);
  EXPECT_EQ(psi.at(0.1, 0.2, 0.3).projectors().front().rank, 2u);
}
