#pragma once

#include "descentlab/problems.hpp"

namespace descentlab::detail {

struct AbsReferenceSolution {
  Vector x;
  double value = 0.0;
  double certificate_residual = 0.0;
};

/// Reference minimizer of an absolute-loss finite sum: projected subgradient
/// descent with averaging, then an exact solve on the identified face, then
/// an optimality certificate. Throws not_converged when no candidate certifies.
AbsReferenceSolution solve_abs_reference(const AbsLossProblem& problem, double ball_B);

/// Residual of the best multiplier vector certifying 0 in the subdifferential
/// of the absolute-loss objective at x.
double abs_optimality_residual(const AbsLossProblem& problem, const Vector& x);

}  // namespace descentlab::detail
