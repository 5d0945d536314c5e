#include "abs_reference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace descentlab::detail {
namespace {

constexpr std::size_t kSubgradientIterations = 200000;
constexpr std::size_t kMaxPatterns = 600000;

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Matrix select_rows(const Matrix& a, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = a.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

Vector select(const Vector& v, const std::vector<std::size_t>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[static_cast<Eigen::Index>(idx[k])];
  return out;
}

// Minimizer of the objective restricted to one face of the arrangement:
// terms with sign 0 are active (<a_i, x> = b_i), the rest keep their sign.
std::optional<Vector> solve_face(const AbsLossProblem& p, const std::vector<int>& signs) {
  const Matrix& a = p.rows();
  const Vector& b = p.targets();
  const double mu = p.strong_mu();
  const auto n = static_cast<double>(p.n());
  const Eigen::Index d = a.cols();

  Vector c = Vector::Zero(d);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] == 0)
      active.push_back(i);
    else
      c += (signs[i] / n) * a.row(static_cast<Eigen::Index>(i)).transpose();
  }

  Vector x;
  if (active.empty()) {
    if (mu > 0.0) {
      x = -c / mu;
    } else {
      if (c.norm() > 1e-12) return std::nullopt;
      x = Vector::Zero(d);
    }
  } else {
    const Matrix ae = select_rows(a, active);
    const Vector be = select(b, active);
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(ae);
    if (mu > 0.0) {
      const Vector free = -c / mu;
      x = free - cod.solve(ae * free - be);
    } else {
      // objective must be constant on the affine set: c in the row space
      Eigen::CompleteOrthogonalDecomposition<Matrix> codt(Matrix(ae.transpose()));
      const Vector lam = codt.solve(c);
      if ((ae.transpose() * lam - c).norm() > 1e-10) return std::nullopt;
      x = cod.solve(be);
    }
    if ((ae * x - be).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + be.cwiseAbs().maxCoeff())) return std::nullopt;
  }

  const Vector r = a * x - b;
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] == 0) continue;
    if (signs[i] * r[static_cast<Eigen::Index>(i)] < -1e-12 * (1.0 + std::abs(b[static_cast<Eigen::Index>(i)])))
      return std::nullopt;
  }
  return x;
}

struct Candidate {
  Vector x;
  double value = kInfinity;
};

void consider(const AbsLossProblem& p, const Vector& x, Candidate& best) {
  const double v = p.value(x);
  const double tie = 1e-12 * (1.0 + std::abs(v));
  if (v < best.value - tie || (std::abs(v - best.value) <= tie && x.norm() < best.x.norm())) {
    best.x = x;
    best.value = v;
  }
}

// Enumerates sign patterns where `free` terms range over {-1, 0, +1}.
Candidate enumerate_faces(const AbsLossProblem& p, const std::vector<int>& base, const std::vector<std::size_t>& free) {
  Candidate best;
  std::size_t total = 1;
  for (std::size_t k = 0; k < free.size(); ++k) total *= 3;
  std::vector<int> signs = base;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t idx : free) {
      signs[idx] = static_cast<int>(c % 3) - 1;
      c /= 3;
    }
    if (auto x = solve_face(p, signs)) consider(p, *x, best);
  }
  return best;
}

}  // namespace

double abs_optimality_residual(const AbsLossProblem& p, const Vector& x) {
  const Matrix& a = p.rows();
  const Vector& b = p.targets();
  const double inv_n = 1.0 / static_cast<double>(p.n());
  const Vector r = a * x - b;

  Vector c = p.strong_mu() * x;
  std::vector<std::size_t> active;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (std::abs(r[i]) <= 1e-9 * (1.0 + std::abs(b[i])))
      active.push_back(static_cast<std::size_t>(i));
    else
      c += inv_n * sign0(r[i]) * a.row(i).transpose();
  }
  if (active.empty()) return c.norm();

  // min ||c + sum_k lam_k a_k|| with |lam_k| <= 1/n, projected coordinate descent
  std::vector<double> lam(active.size(), 0.0);
  Vector res = c;
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double moved = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const Vector ak = a.row(static_cast<Eigen::Index>(active[k])).transpose();
      const double q = ak.squaredNorm();
      if (q == 0.0) continue;
      const double target = std::clamp(lam[k] - res.dot(ak) / q, -inv_n, inv_n);
      const double delta = target - lam[k];
      if (delta != 0.0) {
        res += delta * ak;
        lam[k] = target;
        moved = std::max(moved, std::abs(delta));
      }
    }
    if (moved < 1e-16) break;
  }
  return res.norm();
}

AbsReferenceSolution solve_abs_reference(const AbsLossProblem& p, double ball_B) {
  const Matrix& a = p.rows();
  const Vector& b = p.targets();
  const Eigen::Index d = a.cols();
  const std::size_t n = p.n();

  // Stage 1: projected subgradient descent with uniform averaging on an enlarged ball.
  const double radius = 2.0 * ball_B;
  double g_bound = p.strong_mu() * radius;
  for (Eigen::Index i = 0; i < a.rows(); ++i) g_bound = std::max(g_bound, a.row(i).norm() + p.strong_mu() * radius);
  g_bound = std::max(g_bound, 1e-12);

  Vector x = Vector::Zero(d);
  Vector avg = Vector::Zero(d);
  Candidate best{x, p.value(x)};
  for (std::size_t t = 0; t < kSubgradientIterations; ++t) {
    const double step = radius / (g_bound * std::sqrt(static_cast<double>(t) + 1.0));
    x = project_ball(x - step * p.grad(x), radius);
    avg += (x - avg) / static_cast<double>(t + 1);
    if ((t & 1023) == 0) consider(p, x, best);
  }
  consider(p, avg, best);

  // Stage 2: exact solve on faces near the estimate.
  const Vector r = a * best.x - b;
  std::vector<int> base(n, 0);
  for (std::size_t i = 0; i < n; ++i) base[i] = static_cast<int>(sign0(r[static_cast<Eigen::Index>(i)]));

  double delta = 1e-2 * (1.0 + b.cwiseAbs().maxCoeff());
  std::vector<std::size_t> ambiguous;
  for (;;) {
    ambiguous.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(r[static_cast<Eigen::Index>(i)]) <= delta) ambiguous.push_back(i);
    if (ambiguous.size() <= 10) break;
    delta *= 0.5;
  }
  Candidate polished = enumerate_faces(p, base, ambiguous);
  double residual = polished.value < kInfinity ? abs_optimality_residual(p, polished.x) : kInfinity;

  if (residual > 1e-9) {
    std::size_t total = 1;
    bool small = true;
    for (std::size_t i = 0; i < n && small; ++i) {
      total *= 3;
      small = total <= kMaxPatterns;
    }
    if (small) {
      std::vector<std::size_t> all(n);
      for (std::size_t i = 0; i < n; ++i) all[i] = i;
      polished = enumerate_faces(p, base, all);
      residual = polished.value < kInfinity ? abs_optimality_residual(p, polished.x) : kInfinity;
    }
  }
  if (residual > 1e-9)
    fail(ErrorCode::not_converged, "absolute-loss reference solver did not certify a minimizer (best value " +
                                       std::to_string(best.value) + ", certificate residual " +
                                       std::to_string(residual) + ")");
  return {polished.x, polished.value, residual};
}

}  // namespace descentlab::detail
