#include "descentlab/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <thread>

namespace descentlab {

using nlohmann::json;

std::string to_string(EstimateMetric m) {
  switch (m) {
    case EstimateMetric::f_gap:
      return "f_gap";
    case EstimateMetric::dist_sq:
      return "dist_sq";
    case EstimateMetric::avg_f_gap:
      return "avg_f_gap";
    case EstimateMetric::avg_F_gap:
      return "avg_F_gap";
  }
  return "f_gap";
}

EstimateMetric estimate_metric_from_string(const std::string& name) {
  for (auto m : {EstimateMetric::f_gap, EstimateMetric::dist_sq, EstimateMetric::avg_f_gap, EstimateMetric::avg_F_gap})
    if (to_string(m) == name) return m;
  fail(ErrorCode::invalid_argument, "unknown metric '" + name + "'");
}

std::string to_string(MarginPolicy p) { return p == MarginPolicy::deterministic ? "deterministic" : "three_sigma"; }

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass:
      return "pass";
    case CheckStatus::fail:
      return "fail";
    case CheckStatus::expected_fail:
      return "expected-fail";
  }
  return "fail";
}

std::vector<std::size_t> default_checkpoints(std::size_t T) {
  std::vector<std::size_t> out;
  for (int k = 0;; ++k) {
    const auto c = static_cast<std::size_t>(std::floor(std::pow(10.0, k / 2.0) + 1e-9));
    if (c >= T) break;
    out.push_back(c);
  }
  if (T >= 1) out.push_back(T);
  return out;
}

// --- estimation ------------------------------------------------------------

namespace {

double metric_value(const TraceRow& row, EstimateMetric m) {
  switch (m) {
    case EstimateMetric::f_gap:
      return row.f_gap;
    case EstimateMetric::dist_sq:
      return row.dist_sq;
    case EstimateMetric::avg_f_gap:
    case EstimateMetric::avg_F_gap:
      return row.avg_gap;
  }
  return row.f_gap;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

ExpectationEstimate estimate(const Target& target, const RunConfig& cfg_in, EstimateMetric metric,
                             const std::vector<std::size_t>& checkpoints, std::size_t jobs) {
  RunConfig cfg = cfg_in;
  require(!checkpoints.empty(), "estimate needs at least one checkpoint");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    require(checkpoints[i] <= cfg.iterations, "checkpoint " + std::to_string(checkpoints[i]) + " exceeds T = " +
                                                  std::to_string(cfg.iterations));
    require(i == 0 || checkpoints[i] > checkpoints[i - 1], "checkpoints must be strictly increasing");
  }
  const bool composite = target.reg.kind != RegularizerKind::zero || cfg.reg.kind != RegularizerKind::zero;
  if (metric == EstimateMetric::avg_f_gap || metric == EstimateMetric::avg_F_gap)
    require(cfg.averaging != Averaging::none, "metric " + to_string(metric) + " needs an averaging scheme");
  if (metric == EstimateMetric::avg_F_gap) require(composite, "metric avg_F_gap requires a composite problem");
  if (metric == EstimateMetric::avg_f_gap) require(!composite, "metric avg_f_gap on a composite problem (use avg_F_gap)");

  const bool stochastic = is_stochastic(cfg.algorithm);
  if (!stochastic) cfg.trials = 1;
  if (stochastic && cfg.trials < 2) fail(ErrorCode::invalid_argument, "M must be >= 2 for stochastic algorithms");
  const std::size_t M = cfg.trials;

  std::vector<std::vector<double>> values(M);
  std::vector<std::exception_ptr> errors(M);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t m = next++; m < M; m = next++) {
      try {
        const Trace tr = run(target, cfg, m);
        std::vector<double> v;
        v.reserve(checkpoints.size());
        for (auto t : checkpoints) v.push_back(metric_value(tr.rows[t], metric));
        values[m] = std::move(v);
      } catch (...) {
        errors[m] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, M));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < threads; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<std::size_t> diverged;
  for (std::size_t m = 0; m < M; ++m) {
    if (!errors[m]) continue;
    try {
      std::rethrow_exception(errors[m]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::divergence) throw;
      diverged.push_back(m);
    }
  }
  if (!diverged.empty())
    fail(ErrorCode::divergence, "trials diverged: " + join(diverged) + " (of M = " + std::to_string(M) + ")");

  ExpectationEstimate est;
  est.checkpoints = checkpoints;
  est.M = M;
  est.metric = metric;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    double sum = 0.0;
    for (std::size_t m = 0; m < M; ++m) sum += values[m][c];
    const double mean = sum / static_cast<double>(M);
    double ss = 0.0;
    for (std::size_t m = 0; m < M; ++m) ss += (values[m][c] - mean) * (values[m][c] - mean);
    const double se = M > 1 ? std::sqrt(ss / static_cast<double>(M - 1)) / std::sqrt(static_cast<double>(M)) : 0.0;
    est.mean.push_back(mean);
    est.stderr_.push_back(se);
  }
  return est;
}

// --- verdicts --------------------------------------------------------------

namespace {

double ratio(double measured, double slack, double bound) {
  const double excess = measured - slack;
  if (bound > 0.0) return excess / bound;
  return excess <= 0.0 ? 0.0 : kInfinity;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Verdict verify_bound(const ExpectationEstimate& est, const BoundCurve& curve, MarginPolicy policy) {
  Verdict v;
  v.setting = curve.setting();
  v.policy = policy;
  v.M = est.M;
  v.checkpoints = est.checkpoints;
  v.pass = true;
  v.worst_ratio = -kInfinity;
  for (std::size_t c = 0; c < est.checkpoints.size(); ++c) {
    const std::size_t t = est.checkpoints[c];
    if (!curve.valid_at(t))
      fail(ErrorCode::invalid_argument, "checkpoint t = " + std::to_string(t) + " outside the validity window " +
                                            curve.validity() + " of " + to_string(curve.setting()));
    const double b = curve.eval(t);
    double slack = 1e-9 * (1.0 + b);
    if (policy == MarginPolicy::three_sigma) slack += 3.0 * est.stderr_[c];
    const double m = est.mean[c];
    v.measured.push_back(m);
    v.bound.push_back(b);
    v.slack.push_back(slack);
    if (!(m <= b + slack)) v.pass = false;
    v.worst_ratio = std::max(v.worst_ratio, ratio(m, slack, b));
  }
  return v;
}

std::string Verdict::json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t c = 0; c < checkpoints.size(); ++c)
    rows.push_back({{"t", checkpoints[c]},
                    {"measured", number(measured[c])},
                    {"bound", number(bound[c])},
                    {"slack", number(slack[c])}});
  nlohmann::json j = {{"setting", to_string(setting)},
                      {"policy", to_string(policy)},
                      {"M", M},
                      {"pass", pass},
                      {"worst_ratio", number(worst_ratio)},
                      {"checkpoints", rows}};
  if (policy == MarginPolicy::three_sigma)
    j["policy_note"] = "one-sided: mean <= bound + 3 stderr + 1e-9 (1 + bound); M and the 3-SE margin are harness choices";
  return j.dump(2);
}

EstimateMetric setting_metric(Setting setting) {
  const SettingProfile p = profile(setting);
  switch (p.metric) {
    case Metric::f_gap:
      return EstimateMetric::f_gap;
    case Metric::dist_sq:
      return EstimateMetric::dist_sq;
    case Metric::avg_gap:
      return p.composite ? EstimateMetric::avg_F_gap : EstimateMetric::avg_f_gap;
  }
  return EstimateMetric::f_gap;
}

RunConfig setting_run_config(Setting setting, const BoundCurve& curve, RunConfig cfg) {
  const SettingProfile p = profile(setting);
  cfg.algorithm = p.algorithm;
  cfg.schedule = curve.schedule();
  cfg.averaging = p.metric == Metric::avg_gap ? p.averaging : Averaging::none;
  cfg.L_ref = curve.averaging_L();
  if (p.uses_batches) cfg.batch_size = curve.inputs().batch_size;
  if (p.algorithm == Algorithm::pssd && !cfg.ball_radius) cfg.ball_radius = need(curve.inputs().constants.B, "B");
  return cfg;
}

SettingCheck check_setting(Setting setting, const Target& target, const TheoryInputs& inputs, RunConfig base,
                           const std::vector<std::size_t>& checkpoints, std::size_t jobs) {
  require(!checkpoints.empty(), "check needs at least one checkpoint");
  const SettingProfile p = profile(setting);
  if (p.composite && target.reg.kind == RegularizerKind::zero && base.reg.kind == RegularizerKind::zero)
    fail(ErrorCode::invalid_argument, "setting " + to_string(setting) + " needs a composite problem (regularizer)");
  BoundCurve curve = bound_curve(setting, inputs, base.schedule);
  for (auto t : checkpoints)
    if (!curve.valid_at(t))
      fail(ErrorCode::invalid_argument, "checkpoint t = " + std::to_string(t) + " outside the validity window " +
                                            curve.validity() + " of " + to_string(setting));
  RunConfig cfg = setting_run_config(setting, curve, std::move(base));
  cfg.iterations = std::max(cfg.iterations, checkpoints.back());
  ExpectationEstimate est = estimate(target, cfg, setting_metric(setting), checkpoints, jobs);
  Verdict verdict = verify_bound(est, curve, p.deterministic ? MarginPolicy::deterministic : MarginPolicy::three_sigma);
  return {std::move(curve), std::move(est), std::move(verdict)};
}

// --- property suite --------------------------------------------------------

std::vector<std::string> expected_failures(const std::string& fixture) {
  static const std::map<std::string, std::vector<std::string>> registry = {
      {"scalar_pl", {"convexity"}},
  };
  auto it = registry.find(fixture);
  return it == registry.end() ? std::vector<std::string>{} : it->second;
}

namespace {

class Sampler {
 public:
  Sampler(std::size_t d, std::uint64_t seed) : d_(d), rng_(seed) {}

  Vector in_ball(double radius) {
    Vector v(d_);
    for (std::size_t j = 0; j < d_; ++j) v[j] = normal_(rng_);
    const double nv = v.norm();
    if (nv == 0.0) return Vector::Zero(d_);
    const double r = radius * std::pow(unit_(rng_), 1.0 / static_cast<double>(d_));
    return v * (r / nv);
  }
  double uniform(double a, double b) { return a + (b - a) * unit_(rng_); }

 private:
  std::size_t d_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

// Accumulates (lhs - rhs) / scale against a tolerance.
struct Inequality {
  std::string name;
  double tolerance;
  double worst = -kInfinity;

  void add(double lhs, double rhs, double scale) { worst = std::max(worst, (lhs - rhs) / scale); }
};

double mean_sq_grad(const FiniteSumProblem& f, const Vector& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.n(); ++i) s += f.grad_i(i, x).squaredNorm();
  return s / static_cast<double>(f.n());
}

double mean_sq_diff(const FiniteSumProblem& f, const Vector& x, const Vector& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.n(); ++i) s += (f.grad_i(i, x) - f.grad_i(i, y)).squaredNorm();
  return s / static_cast<double>(f.n());
}

}  // namespace

bool PropertyReport::green() const {
  return std::none_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.status == CheckStatus::fail; });
}

std::string PropertyReport::json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name},
                   {"max_violation", number(c.max_violation)},
                   {"tolerance", c.tolerance},
                   {"status", to_string(c.status)}});
  nlohmann::json j = {{"suite", suite}, {"fixture", fixture}, {"samples", samples}, {"checks", arr}};
  return j.dump(2);
}

PropertyReport property_suite(const Fixture& fx, const SamplerConfig& sc) {
  require(sc.samples >= 1, "property suite needs at least one sample");
  const ProblemInstance& inst = fx.instance;
  const FiniteSumProblem& f = *inst.problem;
  const ProblemConstants& k = inst.constants;
  const double inf_f = inst.truth.inf_f;
  const std::size_t N = sc.samples;
  const double R = 10.0 * (1.0 + inst.truth.x_star.norm());
  Sampler s(f.dim(), sc.seed);

  std::vector<Inequality> ineq;
  auto check = [&](const std::string& name, double tol) -> Inequality& {
    ineq.push_back({name, tol});
    return ineq.back();
  };
  const bool smooth = f.differentiable();
  const bool convex = f.convex();

  // Pairs shared by the f-level inequalities.
  std::vector<Vector> xs(N), ys(N);
  for (std::size_t i = 0; i < N; ++i) {
    xs[i] = s.in_ball(R);
    ys[i] = s.in_ball(R);
  }

  {
    Inequality& unbiased = check("unbiasedness", 1e-12);
    Inequality& conv = check("convexity", 1e-9);
    for (std::size_t i = 0; i < N; ++i) {
      const Vector& x = xs[i];
      const Vector& y = ys[i];
      Vector avg = Vector::Zero(f.dim());
      for (std::size_t j = 0; j < f.n(); ++j) avg += f.grad_i(j, x);
      avg /= static_cast<double>(f.n());
      const Vector g = f.grad(x);
      unbiased.add((avg - g).norm(), 0.0, 1.0 + g.norm());
      const double fx_ = f.value(x), fy = f.value(y);
      const double lin = f.grad(y).dot(x - y);
      conv.add(fy + lin, fx_, 1.0 + std::abs(fx_) + std::abs(fy) + std::abs(lin));
    }
  }

  if (k.mu > 0.0) {
    Inequality& sc_ = check("strong_convexity", 1e-9);
    Inequality& cpn = check("convex_plus_norm", 1e-9);
    const double mu = k.mu;
    auto h = [&](const Vector& x) { return f.value(x) - 0.5 * mu * x.squaredNorm(); };
    for (std::size_t i = 0; i < N; ++i) {
      const Vector& x = xs[i];
      const Vector& y = ys[i];
      const double fx_ = f.value(x), fy = f.value(y);
      const double lin = f.grad(x).dot(y - x);
      const double quad = 0.5 * mu * (y - x).squaredNorm();
      sc_.add(fx_ + lin + quad, fy, 1.0 + std::abs(fx_) + std::abs(fy) + std::abs(lin) + quad);
      const double th = s.uniform(0.0, 1.0);
      const Vector m = th * x + (1.0 - th) * y;
      const double hx = h(x), hy = h(y), hm = h(m);
      cpn.add(hm, th * hx + (1.0 - th) * hy, 1.0 + std::abs(hx) + std::abs(hy) + std::abs(hm));
    }
  }

  if (smooth && k.L) {
    const double L = *k.L;
    Inequality& up = check("smoothness_upper", 1e-9);
    Inequality& descent = check("descent_lemma", 1e-9);
    Inequality& ipl = check("inverse_pl", 1e-9);
    for (std::size_t i = 0; i < N; ++i) {
      const Vector& x = xs[i];
      const Vector& y = ys[i];
      const double fx_ = f.value(x), fy = f.value(y);
      const Vector gx = f.grad(x);
      const double lin = gx.dot(y - x);
      const double quad = 0.5 * L * (y - x).squaredNorm();
      up.add(fy, fx_ + lin + quad, 1.0 + std::abs(fx_) + std::abs(fy) + std::abs(lin) + quad);
      const double g2 = gx.squaredNorm();
      for (double lam : {1.0 / (2.0 * L), 1.0 / L}) {
        const double fn = f.value(x - lam * gx);
        descent.add(fn - fx_, -lam * (1.0 - lam * L / 2.0) * g2, 1.0 + std::abs(fn) + std::abs(fx_) + lam * g2);
      }
      ipl.add(g2 / (2.0 * L), fx_ - inf_f, 1.0 + std::abs(fx_) + std::abs(inf_f));
    }
    if (convex) {
      Inequality& coco = check("cocoercivity", 1e-9);
      for (std::size_t i = 0; i < N; ++i) {
        const Vector gd = f.grad(ys[i]) - f.grad(xs[i]);
        const double ip = gd.dot(ys[i] - xs[i]);
        coco.add(gd.squaredNorm() / L, ip, 1.0 + std::abs(ip) + gd.squaredNorm() / L);
      }
    }
  }

  if (smooth && k.L_max) {
    const double Lmax = *k.L_max;
    if (convex) {
      Inequality& es = check("expected_smoothness", 1e-9);
      Inequality& bt = check("bregman_transfer", 1e-9);
      for (std::size_t i = 0; i < N; ++i) {
        const Vector& x = xs[i];
        const Vector& y = ys[i];
        const double lhs = mean_sq_diff(f, y, x) / (2.0 * Lmax);
        const double br = bregman(f, y, x);
        es.add(lhs, br, 1.0 + std::abs(f.value(y)) + std::abs(f.value(x)) + lhs);
        const double vx = gradient_variance(f, x);
        const double brxy = bregman(f, x, y);
        const double vy = gradient_variance(f, y);
        bt.add(vx, 4.0 * Lmax * brxy + 2.0 * vy,
               1.0 + vx + 4.0 * Lmax * (std::abs(f.value(x)) + std::abs(f.value(y))) + 2.0 * vy);
      }
      if (k.sigma_star_f) {
        Inequality& vt = check("variance_transfer_gradient_noise", 1e-9);
        for (std::size_t i = 0; i < N; ++i) {
          const double lhs = mean_sq_grad(f, xs[i]);
          const double fx_ = f.value(xs[i]);
          vt.add(lhs, 4.0 * Lmax * (fx_ - inf_f) + 2.0 * *k.sigma_star_f,
                 1.0 + lhs + 4.0 * Lmax * (std::abs(fx_) + std::abs(inf_f)));
        }
      }
    }
    if (k.delta_star_f) {
      Inequality& vf = check("variance_transfer_function_noise", 1e-9);
      for (std::size_t i = 0; i < N; ++i) {
        const double lhs = mean_sq_grad(f, xs[i]);
        const double fx_ = f.value(xs[i]);
        vf.add(lhs, 2.0 * Lmax * (fx_ - inf_f) + 2.0 * Lmax * *k.delta_star_f,
               1.0 + lhs + 2.0 * Lmax * (std::abs(fx_) + std::abs(inf_f)));
      }
    }
  }

  if (smooth && (k.mu_pl > 0.0 || k.mu > 0.0)) {
    auto pl_check = [&](const std::string& name, double mu) {
      Inequality& pl = check(name, 1e-9);
      for (std::size_t i = 0; i < N; ++i) {
        const double fx_ = f.value(xs[i]);
        const double rhs = f.grad(xs[i]).squaredNorm() / (2.0 * mu);
        pl.add(fx_ - inf_f, rhs, 1.0 + std::abs(fx_) + std::abs(inf_f) + rhs);
      }
    };
    if (k.mu_pl > 0.0) pl_check("pl", k.mu_pl);
    if (k.mu > 0.0) pl_check("strong_convexity_implies_pl", k.mu);
  }

  if (!smooth && k.G && k.B) {
    Inequality& lip = check("lipschitz_on_ball", 1e-9);
    for (std::size_t i = 0; i < N; ++i) {
      const Vector x = s.in_ball(*k.B);
      const Vector y = s.in_ball(*k.B);
      const double fx_ = f.value(x), fy = f.value(y);
      lip.add(std::abs(fx_ - fy), *k.G * (x - y).norm(), 1.0 + std::abs(fx_) + std::abs(fy));
    }
  }

  if (fx.composite) {
    const CompositeProblem& cp = *fx.composite;
    const Regularizer& reg = cp.reg;
    const double Rc = reg.kind == RegularizerKind::ball_indicator ? reg.radius : R;
    Inequality& bnn = check("bregman_nonnegative", 1e-9);
    Inequality& bub = check("bregman_composite_bound", 1e-9);
    for (std::size_t i = 0; i < N; ++i) {
      const Vector x = s.in_ball(Rc);
      const double br = bregman(f, x, cp.x_star_F);
      const double Fx = cp.F(x);
      const double scale = 1.0 + std::abs(f.value(x)) + std::abs(cp.inf_F) + std::abs(Fx);
      bnn.add(0.0, br, scale);
      bub.add(br, Fx - cp.inf_F, scale);
    }

    Inequality& nonexp = check("prox_nonexpansive", 1e-12);
    Inequality& firm = check("prox_firm", 1e-12);
    Inequality& subg = check("subgradient_inequality", 1e-9);
    for (std::size_t i = 0; i < N; ++i) {
      const double gamma = s.uniform(0.01, 2.0);
      const Vector x = s.in_ball(R);
      const Vector y = s.in_ball(R);
      const Vector px = prox(reg, gamma, x), py = prox(reg, gamma, y);
      nonexp.add((px - py).norm(), (x - y).norm(), 1.0);
      const double ip = (x - y).dot(px - py);
      firm.add((px - py).squaredNorm(), ip, 1.0 + std::abs(ip));
      // pairs inside the domain
      const Vector u = s.in_ball(Rc), v = s.in_ball(Rc);
      const double gu = reg.value(u), gv = reg.value(v);
      const double lin = subgradient(reg, u).dot(v - u);
      subg.add(gu + lin, gv, 1.0 + std::abs(gu) + std::abs(gv) + std::abs(lin));
    }

    Inequality& popt = check("prox_optimality", 1e-9);
    const std::size_t bases = std::max<std::size_t>(1, N / 1000);
    for (std::size_t i = 0; i < bases; ++i) {
      const double gamma = s.uniform(0.01, 2.0);
      const Vector x = s.in_ball(R);
      const Vector p = prox(reg, gamma, x);
      const double obj_p = reg.value(p) + 0.5 / gamma * (p - x).squaredNorm();
      for (std::size_t c = 0; c < 1000; ++c) {
        const Vector u = s.in_ball(Rc);
        const double obj_u = reg.value(u) + 0.5 / gamma * (u - x).squaredNorm();
        popt.add(obj_p, obj_u, 1.0 + std::abs(obj_p) + std::abs(obj_u));
      }
    }
  }

  PropertyReport rep;
  rep.suite = "properties";
  rep.fixture = inst.name;
  rep.samples = N;
  const auto expected = expected_failures(inst.name);
  for (const auto& q : ineq) {
    PropertyCheck c;
    c.name = q.name;
    c.tolerance = q.tolerance;
    c.max_violation = std::max(0.0, q.worst);
    const bool violated = q.worst > q.tolerance;
    const bool must_fail = std::find(expected.begin(), expected.end(), q.name) != expected.end();
    if (must_fail)
      c.status = violated ? CheckStatus::expected_fail : CheckStatus::fail;
    else
      c.status = violated ? CheckStatus::fail : CheckStatus::pass;
    rep.checks.push_back(c);
  }
  return rep;
}

// --- minibatch enumeration -------------------------------------------------

MinibatchOracle enumerate_minibatch_oracle(const FiniteSumProblem& problem, std::size_t b, const Vector& x) {
  const std::size_t n = problem.n();
  if (b < 1 || b > n)
    fail(ErrorCode::invalid_argument, "b must satisfy 1 <= b <= n (b = " + std::to_string(b) + ", n = " +
                                          std::to_string(n) + ")");
  double count = 1.0;
  for (std::size_t j = 1; j <= b; ++j) count = count * static_cast<double>(n - b + j) / static_cast<double>(j);
  count = std::round(count);
  if (count > 1e6)
    fail(ErrorCode::invalid_argument, "C(n, b) = " + format_double(count) + " subsets exceeds the 1e6 limit");

  std::vector<Vector> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = problem.grad_i(i, x);

  std::vector<std::size_t> idx(b);
  for (std::size_t j = 0; j < b; ++j) idx[j] = j;
  std::vector<Vector> batch_grads;
  batch_grads.reserve(static_cast<std::size_t>(count));
  for (;;) {
    Vector gb = Vector::Zero(x.size());
    for (auto i : idx) gb += g[i];
    batch_grads.push_back(gb / static_cast<double>(b));
    // next combination in lexicographic order
    std::size_t j = b;
    while (j > 0 && idx[j - 1] == n - b + j - 1) --j;
    if (j == 0) break;
    ++idx[j - 1];
    for (std::size_t k = j; k < b; ++k) idx[k] = idx[k - 1] + 1;
  }

  MinibatchOracle out;
  out.subsets = batch_grads.size();
  out.exact_mean = Vector::Zero(x.size());
  for (const auto& gb : batch_grads) out.exact_mean += gb;
  out.exact_mean /= static_cast<double>(out.subsets);
  double var = 0.0;
  for (const auto& gb : batch_grads) var += (gb - out.exact_mean).squaredNorm();
  out.exact_variance = var / static_cast<double>(out.subsets);
  return out;
}

// --- Lyapunov energy -------------------------------------------------------

Verdict lyapunov_check(const Trace& trace, LyapunovKind kind, double gamma, double L, const Target& target) {
  if (trace.iterates.size() != trace.rows.size() || trace.iterates.empty())
    fail(ErrorCode::invalid_argument, "lyapunov check needs the iterate history (run with keep_iterates)");
  require(gamma > 0.0 && L > 0.0, "gamma and L must be > 0");
  if (gamma > 1.0 / L)
    fail(ErrorCode::hypothesis_violation, "hypothesis violated: gamma <= 1/L (gamma = " + format_double(gamma) +
                                              ", 1/L = " + format_double(1.0 / L) + ")");
  if (kind == LyapunovKind::gd_energy)
    require(target.reg.kind == RegularizerKind::zero, "gd_energy applies to smooth objectives (use pgd_energy)");
  require(target.problem->convex(), "lyapunov check requires a convex problem");

  Verdict v;
  v.setting = kind == LyapunovKind::gd_energy ? Setting::gd_convex : Setting::pgd_convex;
  v.policy = MarginPolicy::deterministic;
  v.pass = true;
  v.worst_ratio = -kInfinity;
  auto energy = [&](std::size_t t) {
    const Vector& x = trace.iterates[t];
    return (x - target.x_star).squaredNorm() / (2.0 * gamma) +
           static_cast<double>(t) * (target.objective(x) - target.inf_value);
  };
  double prev = energy(0);
  for (std::size_t t = 1; t < trace.iterates.size(); ++t) {
    const double e = energy(t);
    const double slack = 1e-9 * (1.0 + std::abs(prev));
    v.checkpoints.push_back(t);
    v.measured.push_back(e);
    v.bound.push_back(prev);
    v.slack.push_back(slack);
    if (!(e <= prev + slack)) v.pass = false;
    v.worst_ratio = std::max(v.worst_ratio, ratio(e, slack, prev));
    prev = e;
  }
  return v;
}

}  // namespace descentlab
