#pragma once

#include "descentlab/types.hpp"

#include <limits>
#include <string>

namespace descentlab {

/// Value returned by a regularizer outside its domain.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class RegularizerKind { zero, l1, ball_indicator };

/// Convex nonsmooth term g with a closed-form proximal operator.
struct Regularizer {
  RegularizerKind kind = RegularizerKind::zero;
  double lambda = 0.0;  // l1 weight
  double radius = 0.0;  // ball_indicator radius

  static Regularizer zero() { return {}; }
  static Regularizer l1(double lambda);
  static Regularizer ball(double radius);

  /// g(x); kInfinity outside the ball for the indicator.
  double value(const Vector& x) const;
  bool in_domain(const Vector& x) const;

  bool operator==(const Regularizer&) const = default;
};

std::string to_string(RegularizerKind kind);
RegularizerKind regularizer_kind_from_string(const std::string& name);

/// argmin_u g(u) + ||u - x||^2 / (2 gamma).
Vector prox(const Regularizer& reg, double gamma, const Vector& x);

/// Projection onto the closed ball of radius B centred at the origin.
Vector project_ball(const Vector& x, double radius);

/// One element of the subdifferential of g at x, using the minimum-norm
/// selection at kinks (0 for |x_j| = 0 under l1, 0 on the ball boundary).
Vector subgradient(const Regularizer& reg, const Vector& x);

struct ProxCertificate {
  Vector x;
  Vector p;
  double gamma = 0.0;
  double residual = 0.0;
  bool verdict = false;
  std::string diagnostic;
};

/// Checks that (x - p) / gamma lies in the subdifferential of g at p.
ProxCertificate prox_certificate(const Regularizer& reg, double gamma, const Vector& x, const Vector& p);

/// f_value + g(x) that never produces inf - inf.
inline double composite_value(double f_value, const Regularizer& reg, const Vector& x) {
  const double g = reg.value(x);
  if (g == kInfinity) return kInfinity;
  return f_value + g;
}

}  // namespace descentlab
