#include "descentlab/problems.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace descentlab;

namespace {

oracle::Vec to_o(const Vector& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

void check_least_squares(const std::string& name, const oracle::LeastSquares& o) {
  const Fixture fx = fixture(name);
  const ProblemInstance& p = fx.instance;
  const oracle::Vec xs = o.solve2();
  CHECK(p.truth.x_star[0] == doctest::Approx(static_cast<double>(xs[0])).epsilon(1e-13));
  CHECK(p.truth.x_star[1] == doctest::Approx(static_cast<double>(xs[1])).epsilon(1e-13));
  CHECK(p.truth.inf_f == doctest::Approx(static_cast<double>(o.value(xs))).epsilon(1e-12));
  const auto [lo, hi] = o.eig2();
  CHECK(*p.constants.L == doctest::Approx(static_cast<double>(hi)).epsilon(1e-13));
  CHECK(p.constants.mu == doctest::Approx(static_cast<double>(lo)).epsilon(1e-13));
  CHECK(*p.constants.L_max == doctest::Approx(static_cast<double>(o.L_max())).epsilon(1e-14));
  CHECK(*p.constants.sigma_star_f == doctest::Approx(static_cast<double>(o.variance(xs))).epsilon(1e-12));
  // each term 0.5 r^2 has infimum 0, so the function noise is inf f
  CHECK(*p.constants.delta_star_f == doctest::Approx(static_cast<double>(o.value(xs))).epsilon(1e-12));
}

}  // namespace

TEST_SUITE("problems") {
  TEST_CASE("ls_4x2 constants match an independent normal-equations solve") {
    check_least_squares("ls_4x2", oracle::ls_4x2());
    const Fixture fx = fixture("ls_4x2");
    // hand values: H = diag(3/4, 3/4), x* = (1/3, 1/3), sigma = 4/9
    CHECK(*fx.instance.constants.L == doctest::Approx(0.75));
    CHECK(fx.instance.constants.mu == doctest::Approx(0.75));
    CHECK(*fx.instance.constants.sigma_star_f == doctest::Approx(4.0 / 9.0));
    CHECK(*fx.instance.constants.L_max == 2.0);
  }

  TEST_CASE("ls_6x2 constants match an independent normal-equations solve") {
    check_least_squares("ls_6x2", oracle::ls_6x2());
  }

  TEST_CASE("identity features with zero targets interpolate at the origin") {
    const ProblemInstance p = build_least_squares(Matrix::Identity(3, 3), Vector::Zero(3));
    CHECK(p.truth.x_star.norm() == 0.0);
    CHECK(p.truth.inf_f == 0.0);
    CHECK(*p.constants.sigma_star_f == 0.0);
    CHECK(*p.constants.delta_star_f == 0.0);
  }

  TEST_CASE("targets in the range of the features give zero noise") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N;
    for (int rep = 0; rep < 20; ++rep) {
      Matrix phi(5, 3);
      for (Eigen::Index i = 0; i < phi.size(); ++i) phi.data()[i] = N(rng);
      Vector w(3);
      for (int j = 0; j < 3; ++j) w[j] = N(rng);
      const ProblemInstance p = build_least_squares(phi, phi * w);
      CHECK(*p.constants.sigma_star_f < 1e-20);
      CHECK(*p.constants.delta_star_f < 1e-20);
      CHECK((p.truth.x_star - w).norm() < 1e-10);
    }
  }

  TEST_CASE("ls_interp interpolates") {
    const Fixture fx = fixture("ls_interp");
    CHECK((fx.instance.truth.x_star - vec({1, -0.5})).norm() < 1e-12);
    CHECK(fx.instance.truth.inf_f < 1e-25);
    CHECK(*fx.instance.constants.sigma_star_f < 1e-25);
  }

  TEST_CASE("ls_rankdef picks the minimum-norm minimizer") {
    // rows are multiples of (1,1): f depends on u = x1 + x2, optimum u = 0.5
    const Fixture fx = fixture("ls_rankdef");
    CHECK((fx.instance.truth.x_star - vec({0.25, 0.25})).norm() < 1e-12);
    CHECK(fx.instance.constants.mu == 0.0);
    const oracle::LeastSquares o{{{1, 1}, {2, 2}, {1, 1}}, {1, 0, 2}};
    CHECK(fx.instance.truth.inf_f == doctest::Approx(static_cast<double>(o.value({0.25L, 0.25L}))).epsilon(1e-12));
  }

  TEST_CASE("gradients agree with the literal finite sum") {
    const oracle::LeastSquares o = oracle::ls_6x2();
    const Fixture fx = fixture("ls_6x2");
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-5, 5);
    for (int rep = 0; rep < 100; ++rep) {
      const Vector x = vec({U(rng), U(rng)});
      const oracle::Vec g = o.grad(to_o(x));
      const Vector gl = fx.instance.problem->grad(x);
      CHECK(gl[0] == doctest::Approx(static_cast<double>(g[0])).epsilon(1e-12));
      CHECK(gl[1] == doctest::Approx(static_cast<double>(g[1])).epsilon(1e-12));
      CHECK(fx.instance.problem->value(x) == doctest::Approx(static_cast<double>(o.value(to_o(x)))).epsilon(1e-12));
      CHECK(gradient_variance(*fx.instance.problem, x) ==
            doctest::Approx(static_cast<double>(o.variance(to_o(x)))).epsilon(1e-10));
    }
  }

  TEST_CASE("scalar_pl: value, derivative, minimizer and PL modulus") {
    const ProblemInstance p = build_scalar_pl();
    CHECK(p.problem->value(vec({0.0})) == 0.0);
    CHECK(p.problem->grad(vec({0.0}))[0] == 0.0);
    CHECK(p.truth.inf_f == 0.0);
    CHECK(*p.constants.L == 8.0);
    CHECK(p.constants.mu_pl == doctest::Approx(1.0 / 40.0));
    CHECK(!p.problem->convex());
    for (double t = -20; t <= 20; t += 0.01) {
      CHECK(p.problem->value(vec({t})) == doctest::Approx(static_cast<double>(oracle::scalar_pl(t))).epsilon(1e-14));
      const double g = static_cast<double>(oracle::scalar_pl_grad(t));
      CHECK(p.problem->grad(vec({t}))[0] == doctest::Approx(g).epsilon(1e-13).scale(1.0));
      // 0.5 f'(t)^2 >= mu f(t) on a fine grid
      CHECK(0.5 * g * g + 1e-12 >= static_cast<double>(oracle::scalar_pl(t)) / 40.0);
    }
  }

  TEST_CASE("abs loss catalogue examples") {
    const ProblemInstance single = build_abs_loss(Matrix::Ones(1, 1), Vector::Zero(1), 0.0, 2.0);
    CHECK(std::abs(single.truth.x_star[0]) < 1e-6);
    CHECK(single.truth.inf_f < 1e-6);
    CHECK(*single.constants.G == 1.0);

    const Fixture two = fixture("abs_2x1");
    const auto f = [](oracle::Real x) { return 0.5L * (std::fabs(x - 1) + std::fabs(x + 1)); };
    const oracle::Real xs = oracle::argmin_scan(f, -5, 5, 1e-3);
    CHECK(two.instance.truth.inf_f == doctest::Approx(static_cast<double>(f(xs))).epsilon(1e-9));
    CHECK(two.instance.truth.inf_f == doctest::Approx(1.0));
    CHECK(std::abs(two.instance.truth.x_star[0]) <= 1.0 + 1e-9);

    const ProblemInstance reg = build_abs_loss(Matrix::Ones(1, 1), Vector::Zero(1), 0.5, 2.0);
    CHECK(*reg.constants.G == doctest::Approx(2.0));
  }

  TEST_CASE("abs_4x2 and abs_reg_4x2 infima match a nested 1-d search") {
    for (const double smu : {0.0, 0.5}) {
      const oracle::Rows a{{1, 0}, {0, 1}, {1, 1}, {1, -1}};
      const oracle::Vec b{1, 1, 0, 0};
      const auto F = [&](oracle::Real x1, oracle::Real x2) {
        oracle::Real s = 0;
        for (std::size_t i = 0; i < 4; ++i) s += std::fabs(a[i][0] * x1 + a[i][1] * x2 - b[i]);
        return s / 4 + smu / 2 * (x1 * x1 + x2 * x2);
      };
      const auto inner = [&](oracle::Real x1) {
        const oracle::Real x2 = oracle::argmin_1d([&](oracle::Real u) { return F(x1, u); }, -5, 5, 200);
        return F(x1, x2);
      };
      const oracle::Real x1 = oracle::argmin_1d(inner, -5, 5, 200);
      const Fixture fx = fixture(smu == 0.0 ? "abs_4x2" : "abs_reg_4x2");
      CHECK(fx.instance.truth.inf_f == doctest::Approx(static_cast<double>(inner(x1))).epsilon(1e-7));
      CHECK(fx.instance.truth.provenance == Provenance::reference_solver);
    }
  }

  TEST_CASE("abs loss minimizer outside the ball is rejected") {
    // minimizer at 3, ball of radius 1
    CHECK_THROWS_AS(build_abs_loss(Matrix::Ones(1, 1), Vector::Constant(1, 3.0), 0.0, 1.0), Error);
  }

  TEST_CASE("invalid problems are rejected") {
    CHECK_THROWS_AS(build_least_squares(Matrix(0, 2), Vector(0)), Error);
    Matrix bad = Matrix::Ones(2, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(build_least_squares(bad, Vector::Ones(2)), Error);
    CHECK_THROWS_AS(fixture("no_such_fixture"), Error);
  }

  TEST_CASE("minibatch constants") {
    const MinibatchConstants ex = minibatch_constants(1.0, 4.0, 10.0, 6, 2);
    CHECK(ex.L_b == doctest::Approx(2.2).epsilon(1e-15));
    CHECK(ex.sigma_b == doctest::Approx(4.0).epsilon(1e-15));
    const MinibatchConstants one = minibatch_constants(1.0, 4.0, 10.0, 6, 1);
    CHECK(one.L_b == doctest::Approx(4.0));
    CHECK(one.sigma_b == doctest::Approx(10.0));
    const MinibatchConstants all = minibatch_constants(1.0, 4.0, 10.0, 6, 6);
    CHECK(all.L_b == doctest::Approx(1.0));
    CHECK(all.sigma_b == 0.0);
    for (std::size_t n = 2; n <= 8; ++n)
      for (std::size_t b = 1; b <= n; ++b) {
        const MinibatchConstants m = minibatch_constants(1.3, 5.1, 2.7, n, b);
        CHECK(m.L_b == doctest::Approx(static_cast<double>(oracle::minibatch_Lb(1.3L, 5.1L, n, b))).epsilon(1e-14));
        CHECK(m.sigma_b ==
              doctest::Approx(static_cast<double>(oracle::minibatch_sigma(2.7L, n, b))).epsilon(1e-14));
      }
    CHECK_THROWS_AS(minibatch_constants(1.0, 4.0, 10.0, 6, 0), Error);
    CHECK_THROWS_AS(minibatch_constants(1.0, 4.0, 10.0, 6, 7), Error);
  }

  TEST_CASE("composite noise reduces correctly") {
    const Fixture ls = fixture("ls_4x2");
    const CompositeProblem zero = build_composite(ls.instance, Regularizer::zero());
    CHECK(zero.sigma_star_F == doctest::Approx(*ls.instance.constants.sigma_star_f).epsilon(1e-12));
    const Fixture ball = fixture("ball_interp");
    CHECK(ball.composite->sigma_star_F < 1e-20);
    CHECK((ball.composite->x_star_F - vec({1, -0.5})).norm() < 1e-10);
  }

  TEST_CASE("lasso_4x2 minimizer and noise match a nested 1-d search") {
    const oracle::LeastSquares o = oracle::ls_4x2();
    const auto F = [&](oracle::Real a, oracle::Real b) {
      return o.value({a, b}) + 0.1L * (std::fabs(a) + std::fabs(b));
    };
    const auto inner_arg = [&](oracle::Real a) {
      return oracle::argmin_1d([&](oracle::Real u) { return F(a, u); }, -5, 5, 300);
    };
    const oracle::Real a = oracle::argmin_1d([&](oracle::Real t) { return F(t, inner_arg(t)); }, -5, 5, 300);
    const oracle::Real b = inner_arg(a);
    const Fixture fx = fixture("lasso_4x2");
    const CompositeProblem& c = *fx.composite;
    CHECK(c.x_star_F[0] == doctest::Approx(static_cast<double>(a)).epsilon(1e-8));
    CHECK(c.x_star_F[1] == doctest::Approx(static_cast<double>(b)).epsilon(1e-8));
    CHECK(c.inf_F == doctest::Approx(static_cast<double>(F(a, b))).epsilon(1e-12));
    CHECK(c.sigma_star_F == doctest::Approx(static_cast<double>(o.variance({a, b}))).epsilon(1e-7));
    CHECK(c.solver_residual <= 1e-12);
  }

  TEST_CASE("Bregman divergence of a quadratic is half the Hessian norm") {
    const Fixture fx = fixture("ls_4x2");
    const Vector x = vec({1.0, 2.0}), y = vec({-1.0, 0.5});
    // H = 0.75 I
    CHECK(bregman(*fx.instance.problem, x, y) == doctest::Approx(0.5 * 0.75 * (x - y).squaredNorm()));
  }
}
