#include "descentlab/harness.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace descentlab;

namespace {

RunConfig config(Algorithm a, StepSchedule s, std::size_t T, std::size_t M, std::uint64_t seed = 0) {
  RunConfig cfg;
  cfg.algorithm = a;
  cfg.schedule = std::move(s);
  cfg.iterations = T;
  cfg.trials = M;
  cfg.seed = seed;
  return cfg;
}

const PropertyCheck& find_check(const PropertyReport& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return c;
  FAIL("missing check " << name);
  return r.checks.front();
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("default checkpoints are geometric and include T") {
    CHECK(default_checkpoints(100) == std::vector<std::size_t>{1, 3, 10, 31, 100});
    CHECK(default_checkpoints(500) == std::vector<std::size_t>{1, 3, 10, 31, 100, 316, 500});
    CHECK(default_checkpoints(1) == std::vector<std::size_t>{1});
  }

  TEST_CASE("deterministic estimates short-circuit to one trial") {
    const Fixture fx = fixture("ls_4x2");
    const ExpectationEstimate e = estimate(Target::of(fx.instance),
                                           config(Algorithm::gd, StepSchedule::constant(0.5), 50, 5),
                                           EstimateMetric::f_gap, {1, 10, 50});
    CHECK(e.M == 1);
    for (double s : e.stderr_) CHECK(s == 0.0);
  }

  TEST_CASE("stochastic estimates need two trials") {
    const Fixture fx = fixture("ls_4x2");
    CHECK_THROWS_AS(estimate(Target::of(fx.instance), config(Algorithm::sgd, StepSchedule::constant(0.1), 10, 1),
                             EstimateMetric::f_gap, {10}),
                    Error);
  }

  TEST_CASE("interpolating SGD drives the mean gap and its spread to zero") {
    const Fixture fx = fixture("ls_interp");
    const ExpectationEstimate e =
        estimate(Target::of(fx.instance), config(Algorithm::sgd, StepSchedule::constant(0.2), 2000, 50, 3),
                 EstimateMetric::f_gap, {10, 100, 2000}, 4);
    CHECK(e.mean[1] < e.mean[0]);
    CHECK(e.mean[2] < 1e-20);
    CHECK(e.stderr_[2] < 1e-20);
  }

  TEST_CASE("estimates do not depend on the number of jobs") {
    const Fixture fx = fixture("ls_6x2");
    const RunConfig cfg = config(Algorithm::sgd, StepSchedule::constant(0.05), 100, 40, 11);
    const auto a = estimate(Target::of(fx.instance), cfg, EstimateMetric::dist_sq, {10, 100}, 1);
    const auto b = estimate(Target::of(fx.instance), cfg, EstimateMetric::dist_sq, {10, 100}, 5);
    CHECK(a.mean == b.mean);
    CHECK(a.stderr_ == b.stderr_);
  }

  TEST_CASE("re-seeded estimates agree within four combined standard errors") {
    const Fixture fx = fixture("ls_4x2");
    const double gamma = 0.9 / (2.0 * *fx.instance.constants.L_max);
    const std::vector<std::size_t> cps{10, 100, 500};
    const auto a = estimate(Target::of(fx.instance), config(Algorithm::sgd, StepSchedule::constant(gamma), 500, 1000, 0),
                            EstimateMetric::dist_sq, cps, 4);
    const auto b = estimate(Target::of(fx.instance),
                            config(Algorithm::sgd, StepSchedule::constant(gamma), 500, 1000, 1000000),
                            EstimateMetric::dist_sq, cps, 4);
    for (std::size_t k = 0; k < cps.size(); ++k)
      CHECK(std::abs(a.mean[k] - b.mean[k]) <= 4 * std::hypot(a.stderr_[k], b.stderr_[k]));
  }

  TEST_CASE("diverging trials are listed") {
    const Fixture fx = fixture("ls_4x2");
    try {
      estimate(Target::of(fx.instance), config(Algorithm::sgd, StepSchedule::constant(5.0), 400, 3),
               EstimateMetric::f_gap, {400});
      FAIL("expected divergence");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::divergence);
      CHECK(std::string(e.what()).find("trials diverged") != std::string::npos);
    }
  }

  TEST_CASE("GD against the strongly convex curve passes without slack") {
    const Fixture fx = fixture("ls_6x2");
    const TheoryInputs in = TheoryInputs::of(fx.instance, fx.instance.x0);
    const SettingCheck c = check_setting(Setting::gd_strongly_convex, Target::of(fx.instance), in,
                                         config(Algorithm::gd, StepSchedule::constant(1.0 / *in.constants.L), 200, 1),
                                         default_checkpoints(200));
    CHECK(c.verdict.pass);
    CHECK(c.verdict.worst_ratio <= 1.0);
    CHECK(c.verdict.policy == MarginPolicy::deterministic);
  }

  TEST_CASE("a curve scaled by 0.01 is caught") {
    const Fixture fx = fixture("ls_6x2");
    const TheoryInputs in = TheoryInputs::of(fx.instance, fx.instance.x0);
    const StepSchedule s = StepSchedule::constant(0.5 / *in.constants.L);
    const BoundCurve curve = bound_curve(Setting::gd_convex, in, s).scaled(0.01);
    const auto e = estimate(Target::of(fx.instance), config(Algorithm::gd, s, 100, 1), EstimateMetric::f_gap, {1, 10, 100});
    const Verdict v = verify_bound(e, curve, MarginPolicy::deterministic);
    CHECK(!v.pass);
    CHECK(v.worst_ratio > 1.0);
    CHECK(v.json().find("\"worst_ratio\"") != std::string::npos);
  }

  TEST_CASE("checkpoints outside the validity window are rejected") {
    const Fixture fx = fixture("ls_4x2");
    const TheoryInputs in = TheoryInputs::of(fx.instance, fx.instance.x0);
    const StepSchedule s = StepSchedule::inv_sqrt(0.1);
    const BoundCurve curve = bound_curve(Setting::sgd_convex_invsqrt, in, s);
    ExpectationEstimate e;
    e.checkpoints = {10, 100};
    e.mean = {0, 0};
    e.stderr_ = {0, 0};
    e.M = 2;
    try {
      verify_bound(e, curve, MarginPolicy::three_sigma);
      FAIL("expected rejection");
    } catch (const Error& err) {
      CHECK(std::string(err.what()).find("49") != std::string::npos);
    }
  }

  TEST_CASE("SGD strongly convex envelope at M = 1000") {
    const Fixture fx = fixture("ls_4x2");
    const TheoryInputs in = TheoryInputs::of(fx.instance, fx.instance.x0);
    const double gamma = 0.9 / (2.0 * *in.constants.L_max);
    const SettingCheck c = check_setting(Setting::sgd_strongly_convex, Target::of(fx.instance), in,
                                         config(Algorithm::sgd, StepSchedule::constant(gamma), 500, 1000, 2024),
                                         {10, 100, 500}, 4);
    CHECK(c.verdict.pass);
    CHECK(c.verdict.policy == MarginPolicy::three_sigma);
    CHECK(c.verdict.M == 1000);
  }

  TEST_CASE("minibatch enumeration") {
    const Fixture fx = fixture("ls_6x2");
    const auto& f = *fx.instance.problem;
    const Vector xs = fx.instance.truth.x_star;
    const MinibatchConstants mb = minibatch_constants(fx.instance.constants, 2);
    const MinibatchOracle o = enumerate_minibatch_oracle(f, 2, xs);
    CHECK(o.subsets == 15);
    CHECK(o.exact_variance == doctest::Approx(mb.sigma_b).epsilon(1e-12));
    CHECK(enumerate_minibatch_oracle(f, 6, xs).exact_variance < 1e-24);

    // independent enumeration of the variance at an arbitrary point
    const oracle::LeastSquares lo = oracle::ls_6x2();
    const oracle::Vec x{0.3L, -1.7L};
    const oracle::Vec g = lo.grad(x);
    for (std::size_t b = 1; b <= 6; ++b) {
      long double var = 0;
      const auto subs = oracle::subsets(6, b);
      for (const auto& s : subs) {
        oracle::Vec gb(2, 0.0L);
        for (std::size_t i : s) gb = oracle::axpy(1.0L / b, lo.grad_i(i, x), gb);
        var += oracle::sq(oracle::axpy(-1.0L, g, gb));
      }
      var /= subs.size();
      const MinibatchOracle m = enumerate_minibatch_oracle(f, b, Vector{{0.3, -1.7}});
      CHECK(m.exact_variance == doctest::Approx(static_cast<double>(var)).epsilon(1e-12));
      CHECK(m.exact_mean[0] == doctest::Approx(static_cast<double>(g[0])).epsilon(1e-12));
      CHECK(m.exact_mean[1] == doctest::Approx(static_cast<double>(g[1])).epsilon(1e-12));
    }

    const ProblemInstance big = build_least_squares(Matrix::Ones(30, 2), Vector::Ones(30));
    try {
      enumerate_minibatch_oracle(*big.problem, 15, Vector::Zero(2));
      FAIL("expected rejection");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("155117520") != std::string::npos);
    }
  }

  TEST_CASE("Lyapunov energy") {
    const Fixture ls = fixture("ls_4x2");
    const double L = *ls.instance.constants.L;
    RunConfig cfg = config(Algorithm::gd, StepSchedule::constant(0.5 / L), 300, 1);
    cfg.keep_iterates = true;
    const Target tgt = Target::of(ls.instance);
    CHECK(lyapunov_check(run(tgt, cfg), LyapunovKind::gd_energy, 0.5 / L, L, tgt).pass);

    const Fixture lasso = fixture("lasso_4x2");
    RunConfig pcfg = config(Algorithm::prox_gd, StepSchedule::constant(1.0 / L), 300, 1);
    pcfg.keep_iterates = true;
    const Target ptgt = Target::of(*lasso.composite);
    CHECK(lyapunov_check(run(ptgt, pcfg), LyapunovKind::pgd_energy, 1.0 / L, L, ptgt).pass);

    try {
      lyapunov_check(run(tgt, cfg), LyapunovKind::gd_energy, 10.0 / L, L, tgt);
      FAIL("expected rejection");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::hypothesis_violation);
      CHECK(std::string(e.what()).find("gamma <= 1/L") != std::string::npos);
    }
    cfg.keep_iterates = false;
    CHECK_THROWS_AS(lyapunov_check(run(tgt, cfg), LyapunovKind::gd_energy, 0.5 / L, L, tgt), Error);
  }

  TEST_CASE("property suite on the catalogue") {
    const SamplerConfig sampler{2000, 7};
    for (const std::string& name : fixture_names()) {
      CAPTURE(name);
      const PropertyReport r = property_suite(fixture(name), sampler);
      CHECK(r.green());
      for (const auto& c : r.checks) {
        CAPTURE(c.name);
        const bool expected = name == "scalar_pl" && c.name == "convexity";
        CHECK(c.status == (expected ? CheckStatus::expected_fail : CheckStatus::pass));
      }
    }
    const PropertyReport pl = property_suite(fixture("scalar_pl"), sampler);
    CHECK(find_check(pl, "pl").status == CheckStatus::pass);
    CHECK(pl.json().find("\"expected-fail\"") != std::string::npos);
    const PropertyReport lasso = property_suite(fixture("lasso_4x2"), sampler);
    CHECK(find_check(lasso, "bregman_composite_bound").status == CheckStatus::pass);
    CHECK(find_check(lasso, "prox_optimality").status == CheckStatus::pass);
    const PropertyReport ls = property_suite(fixture("ls_4x2"), sampler);
    for (const char* name : {"convexity", "strong_convexity", "smoothness_upper", "cocoercivity", "pl",
                             "expected_smoothness", "variance_transfer_gradient_noise"})
      CHECK(find_check(ls, name).status == CheckStatus::pass);
  }

  TEST_CASE("a broken smoothness constant is detected") {
    Fixture fx = fixture("ls_4x2");
    fx.instance.constants.L = 0.1;  // true L is 0.75
    const PropertyReport r = property_suite(fx, {2000, 3});
    CHECK(!r.green());
    CHECK(find_check(r, "smoothness_upper").status == CheckStatus::fail);
  }
}
