#pragma once
// Independent reference computations for tests. Nothing here calls into the
// library: plain loops over std::vector in long double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

using Real = long double;
using Vec = std::vector<Real>;
using Rows = std::vector<Vec>;

inline Real dot(const Vec& a, const Vec& b) {
  Real s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Real sq(const Vec& a) { return dot(a, a); }

inline Vec axpy(Real a, const Vec& x, const Vec& y) {  // a x + y
  Vec out(y);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += a * x[i];
  return out;
}

// Least squares f(x) = (1/n) sum 0.5 (<phi_i, x> - y_i)^2 -----------------

struct LeastSquares {
  Rows phi;
  Vec y;

  std::size_t n() const { return phi.size(); }
  std::size_t d() const { return phi.front().size(); }

  Real value(const Vec& x) const {
    Real s = 0;
    for (std::size_t i = 0; i < n(); ++i) {
      const Real r = dot(phi[i], x) - y[i];
      s += 0.5L * r * r;
    }
    return s / static_cast<Real>(n());
  }
  Vec grad_i(std::size_t i, const Vec& x) const {
    const Real r = dot(phi[i], x) - y[i];
    Vec g(d());
    for (std::size_t j = 0; j < d(); ++j) g[j] = r * phi[i][j];
    return g;
  }
  Vec grad(const Vec& x) const {
    Vec g(d(), 0.0L);
    for (std::size_t i = 0; i < n(); ++i) g = axpy(1.0L, grad_i(i, x), g);
    for (auto& v : g) v /= static_cast<Real>(n());
    return g;
  }
  // (1/n) Phi^T Phi for d = 2
  void hessian2(Real& a, Real& b, Real& c) const {
    a = b = c = 0;
    for (const auto& r : phi) {
      a += r[0] * r[0];
      b += r[0] * r[1];
      c += r[1] * r[1];
    }
    a /= static_cast<Real>(n());
    b /= static_cast<Real>(n());
    c /= static_cast<Real>(n());
  }
  // Normal equations by Cramer's rule (d = 2, full rank).
  Vec solve2() const {
    Real a, b, c;
    hessian2(a, b, c);
    Real r0 = 0, r1 = 0;
    for (std::size_t i = 0; i < n(); ++i) {
      r0 += phi[i][0] * y[i];
      r1 += phi[i][1] * y[i];
    }
    r0 /= static_cast<Real>(n());
    r1 /= static_cast<Real>(n());
    const Real det = a * c - b * b;
    return {(c * r0 - b * r1) / det, (a * r1 - b * r0) / det};
  }
  // Eigenvalues of the 2x2 Hessian, ascending.
  std::pair<Real, Real> eig2() const {
    Real a, b, c;
    hessian2(a, b, c);
    const Real m = 0.5L * (a + c);
    const Real r = std::sqrt(0.25L * (a - c) * (a - c) + b * b);
    return {m - r, m + r};
  }
  // Literal (1/n) sum ||grad_i(x) - grad(x)||^2
  Real variance(const Vec& x) const {
    const Vec g = grad(x);
    Real s = 0;
    for (std::size_t i = 0; i < n(); ++i) s += sq(axpy(-1.0L, g, grad_i(i, x)));
    return s / static_cast<Real>(n());
  }
  Real L_max() const {
    Real m = 0;
    for (const auto& r : phi) m = std::max(m, sq(r));
    return m;
  }
};

inline LeastSquares ls_4x2() { return {{{1, 0}, {0, 1}, {1, 1}, {1, -1}}, {1, 1, 0, 0}}; }
inline LeastSquares ls_6x2() {
  return {{{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 1}, {0.5L, -1.5L}}, {1, 2, 0, -1, 1, 0.5L}};
}

// Minimizer of a convex 1-d function on [lo, hi] by ternary search.
inline Real argmin_1d(const std::function<Real(Real)>& f, Real lo, Real hi, int iters = 400) {
  for (int k = 0; k < iters; ++k) {
    const Real m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (f(m1) < f(m2))
      hi = m2;
    else
      lo = m1;
  }
  return 0.5L * (lo + hi);
}

// Grid scan followed by local refinement (no convexity assumed).
inline Real argmin_scan(const std::function<Real(Real)>& f, Real lo, Real hi, Real step) {
  Real best = lo, fb = f(lo);
  for (Real t = lo; t <= hi; t += step) {
    const Real v = f(t);
    if (v < fb) {
      fb = v;
      best = t;
    }
  }
  return argmin_1d(f, best - step, best + step);
}

// Minibatch constants straight from their definitions.
inline Real minibatch_Lb(Real L, Real Lmax, Real n, Real b) {
  if (n == 1) return Lmax;
  return n * (b - 1) / (b * (n - 1)) * L + (n - b) / (b * (n - 1)) * Lmax;
}
inline Real minibatch_sigma(Real sigma, Real n, Real b) {
  if (n == 1) return 0;
  return (n - b) / (b * (n - 1)) * sigma;
}

// Every size-b subset of {0..n-1} via bitmasks.
inline std::vector<std::vector<std::size_t>> subsets(std::size_t n, std::size_t b) {
  std::vector<std::vector<std::size_t>> out;
  for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountl(mask)) != b) continue;
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1UL << i)) s.push_back(i);
    out.push_back(s);
  }
  return out;
}

// Unrolls e_{k+1} = (1 - gamma mu) e_k + 2 gamma^2 sigma from e_0 = D2.
inline Real unroll_strongly(Real D2, Real gamma, Real mu, Real sigma, std::size_t t) {
  Real e = D2;
  for (std::size_t k = 0; k < t; ++k) e = (1 - gamma * mu) * e + 2 * gamma * gamma * sigma;
  return e;
}

// f(t) = t^2 + 3 sin^2 t
inline Real scalar_pl(Real t) { return t * t + 3 * std::sin(t) * std::sin(t); }
inline Real scalar_pl_grad(Real t) { return 2 * t + 3 * std::sin(2 * t); }

inline Real soft_threshold_grid(Real x, Real thresh) {
  return argmin_1d([&](Real u) { return thresh * std::fabs(u) + 0.5L * (u - x) * (u - x); }, x - 10 - thresh,
                   x + 10 + thresh);
}

}  // namespace oracle
