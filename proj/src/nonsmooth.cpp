#include "descentlab/nonsmooth.hpp"

#include <algorithm>
#include <cmath>

namespace descentlab {
namespace {

// Relative slack on the ball boundary; x * B / ||x|| can land an ulp outside.
constexpr double kBallSlack = 1e-12;

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_gamma(double gamma) {
  require(gamma > 0.0 && std::isfinite(gamma), "prox step gamma must be positive and finite");
}

}  // namespace

Regularizer Regularizer::l1(double lambda) {
  require(lambda >= 0.0 && std::isfinite(lambda), "l1 weight lambda must be >= 0");
  Regularizer r;
  r.kind = RegularizerKind::l1;
  r.lambda = lambda;
  return r;
}

Regularizer Regularizer::ball(double radius) {
  require(radius > 0.0 && std::isfinite(radius), "ball radius B must be > 0");
  Regularizer r;
  r.kind = RegularizerKind::ball_indicator;
  r.radius = radius;
  return r;
}

bool Regularizer::in_domain(const Vector& x) const {
  if (kind != RegularizerKind::ball_indicator) return true;
  return x.norm() <= radius * (1.0 + kBallSlack);
}

double Regularizer::value(const Vector& x) const {
  switch (kind) {
    case RegularizerKind::zero:
      return 0.0;
    case RegularizerKind::l1:
      return lambda * x.lpNorm<1>();
    case RegularizerKind::ball_indicator:
      return in_domain(x) ? 0.0 : kInfinity;
  }
  return 0.0;
}

std::string to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::zero:
      return "zero";
    case RegularizerKind::l1:
      return "l1";
    case RegularizerKind::ball_indicator:
      return "ball_indicator";
  }
  return "zero";
}

RegularizerKind regularizer_kind_from_string(const std::string& name) {
  if (name == "zero") return RegularizerKind::zero;
  if (name == "l1") return RegularizerKind::l1;
  if (name == "ball_indicator" || name == "ball") return RegularizerKind::ball_indicator;
  fail(ErrorCode::invalid_argument, "unknown regularizer kind '" + name + "'");
}

Vector project_ball(const Vector& x, double radius) {
  const double nx = x.norm();
  if (nx <= radius) return x;
  Vector y = x * (radius / nx);
  // rounding can leave the scaled point an ulp outside; shrink until feasible
  while (y.norm() > radius) y *= std::nextafter(1.0, 0.0);
  return y;
}

Vector prox(const Regularizer& reg, double gamma, const Vector& x) {
  check_gamma(gamma);
  switch (reg.kind) {
    case RegularizerKind::zero:
      return x;
    case RegularizerKind::l1: {
      const double t = gamma * reg.lambda;
      Vector out(x.size());
      for (Eigen::Index j = 0; j < x.size(); ++j) out[j] = sign0(x[j]) * std::max(std::abs(x[j]) - t, 0.0);
      return out;
    }
    case RegularizerKind::ball_indicator:
      return project_ball(x, reg.radius);
  }
  return x;
}

Vector subgradient(const Regularizer& reg, const Vector& x) {
  switch (reg.kind) {
    case RegularizerKind::zero:
      return Vector::Zero(x.size());
    case RegularizerKind::l1: {
      Vector out(x.size());
      for (Eigen::Index j = 0; j < x.size(); ++j) out[j] = reg.lambda * sign0(x[j]);
      return out;
    }
    case RegularizerKind::ball_indicator:
      if (!reg.in_domain(x))
        fail(ErrorCode::invalid_argument, "subgradient requested outside the ball (||x|| = " +
                                              std::to_string(x.norm()) + " > B = " + std::to_string(reg.radius) + ")");
      return Vector::Zero(x.size());
  }
  return Vector::Zero(x.size());
}

ProxCertificate prox_certificate(const Regularizer& reg, double gamma, const Vector& x, const Vector& p) {
  check_gamma(gamma);
  require(x.size() == p.size(), "prox_certificate: dimension mismatch");
  ProxCertificate cert;
  cert.x = x;
  cert.p = p;
  cert.gamma = gamma;
  const Vector u = (x - p) / gamma;
  double residual = 0.0;

  switch (reg.kind) {
    case RegularizerKind::zero:
      residual = u.size() ? u.cwiseAbs().maxCoeff() : 0.0;
      if (residual > 0.0) cert.diagnostic = "zero regularizer requires p = x";
      break;
    case RegularizerKind::l1:
      for (Eigen::Index j = 0; j < u.size(); ++j) {
        double viol = 0.0;
        if (p[j] != 0.0)
          viol = std::abs(u[j] - reg.lambda * sign0(p[j]));
        else
          viol = std::max(0.0, std::abs(u[j]) - reg.lambda);
        if (viol > residual) {
          residual = viol;
          cert.diagnostic = "coordinate " + std::to_string(j) + " violates the l1 optimality condition";
        }
      }
      break;
    case RegularizerKind::ball_indicator: {
      const double np = p.norm();
      const double band = 1e-9 * (1.0 + reg.radius);
      if (np > reg.radius + band) {
        residual = np - reg.radius;
        cert.diagnostic = "candidate lies outside the ball";
      } else if (np < reg.radius - band) {
        // interior point: normal cone is {0}
        residual = u.norm();
        if (residual > 0.0) cert.diagnostic = "interior candidate must equal x";
      } else {
        // boundary: x - p must be a nonnegative multiple of p
        const Vector dir = p / np;
        const double along = u.dot(dir);
        const double perp = (u - along * dir).norm();
        residual = std::max(perp, std::max(0.0, -along));
        if (residual > 0.0) cert.diagnostic = "x - p is not an outward normal at p";
      }
      break;
    }
  }
  cert.residual = residual;
  cert.verdict = residual <= 1e-9 * (1.0 + x.norm());
  if (cert.verdict) cert.diagnostic.clear();
  return cert;
}

}  // namespace descentlab
