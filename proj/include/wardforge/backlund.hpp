#pragma once

// Algebraic Backlund transformation: h_{z,pi} * psi = h_{z,pi~} psi with
// Im pi~ = psi(z) Im pi, and folds of it over a list of steps.

#include <vector>

#include "wardforge/extended_solution.hpp"

namespace wardforge {

struct BacklundStep {
  SpectralPole pole;
  MeromorphicColumnSpec seed;
};

/// The generic rank of `seed` is evaluated at a fixed sample point and
/// pinned as the rank of every dressed projector.
inline ExtendedSolution backlund_step(const ExtendedSolution& psi, const BacklundStep& step) {
  step.seed.validate();
  const std::size_t rank = generic_rank(step.seed);
  return psi.with_factor({step.pole, step.seed, rank, ProjectorRule::Dressed});
}

inline ExtendedSolution stack(const VacuumBase& base, const std::vector<BacklundStep>& steps) {
  ExtendedSolution psi(base);
  for (const auto& s : steps) psi = backlund_step(psi, s);
  return psi;
}

}  // namespace wardforge
