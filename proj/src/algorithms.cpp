#include "descentlab/algorithms.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace descentlab {

// --- schedules -------------------------------------------------------------

StepSchedule StepSchedule::constant(double gamma) {
  require(gamma > 0.0 && std::isfinite(gamma), "constant step gamma must be > 0");
  StepSchedule s;
  s.kind = ScheduleKind::constant;
  s.gamma = gamma;
  return s;
}

StepSchedule StepSchedule::inv_sqrt(double gamma0) {
  require(gamma0 > 0.0 && std::isfinite(gamma0), "inv_sqrt gamma0 must be > 0");
  StepSchedule s;
  s.kind = ScheduleKind::inv_sqrt;
  s.gamma = gamma0;
  return s;
}

StepSchedule StepSchedule::momentum_pair(double eta) {
  require(eta > 0.0 && std::isfinite(eta), "momentum eta must be > 0");
  StepSchedule s;
  s.kind = ScheduleKind::momentum_pair;
  s.gamma = eta;
  return s;
}

StepSchedule StepSchedule::horizon_constant(double scale, double offset) {
  require(scale > 0.0 && std::isfinite(scale), "horizon_constant scale must be > 0");
  require(std::isfinite(offset), "horizon_constant offset must be finite");
  StepSchedule s;
  s.kind = ScheduleKind::horizon_constant;
  s.gamma = scale;
  s.offset = offset;
  return s;
}

StepSchedule StepSchedule::custom(std::function<double(std::size_t)> gamma_fn,
                                  std::function<double(std::size_t)> beta_fn) {
  require(static_cast<bool>(gamma_fn), "custom schedule needs a gamma function");
  StepSchedule s;
  s.kind = ScheduleKind::custom;
  s.gamma_fn = std::move(gamma_fn);
  s.beta_fn = std::move(beta_fn);
  return s;
}

double StepSchedule::gamma_at(std::size_t t, std::size_t horizon) const {
  const double td = static_cast<double>(t);
  switch (kind) {
    case ScheduleKind::constant:
      return gamma;
    case ScheduleKind::inv_sqrt:
      return gamma / std::sqrt(td + 1.0);
    case ScheduleKind::momentum_pair:
      return 2.0 * gamma / (td + 3.0);
    case ScheduleKind::horizon_constant: {
      const double base = static_cast<double>(horizon) + offset;
      require(base > 0.0, "horizon_constant needs T + offset > 0");
      return gamma / std::sqrt(base);
    }
    case ScheduleKind::custom:
      return gamma_fn(t);
  }
  return gamma;
}

bool StepSchedule::has_beta() const {
  return kind == ScheduleKind::momentum_pair || (kind == ScheduleKind::custom && static_cast<bool>(beta_fn));
}

double StepSchedule::beta_at(std::size_t t) const {
  if (kind == ScheduleKind::momentum_pair) return static_cast<double>(t) / (static_cast<double>(t) + 2.0);
  if (kind == ScheduleKind::custom && beta_fn) return beta_fn(t);
  fail(ErrorCode::invalid_argument, "schedule '" + to_string(kind) + "' has no momentum weights beta_t");
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::constant:
      return "constant";
    case ScheduleKind::inv_sqrt:
      return "inv_sqrt";
    case ScheduleKind::momentum_pair:
      return "momentum_pair";
    case ScheduleKind::horizon_constant:
      return "horizon_constant";
    case ScheduleKind::custom:
      return "custom";
  }
  return "custom";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  for (auto k : {ScheduleKind::constant, ScheduleKind::inv_sqrt, ScheduleKind::momentum_pair,
                 ScheduleKind::horizon_constant})
    if (to_string(k) == name) return k;
  fail(ErrorCode::invalid_argument, "unknown schedule kind '" + name + "'");
}

// --- enums -----------------------------------------------------------------

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::gd:
      return "gd";
    case Algorithm::sgd:
      return "sgd";
    case Algorithm::minibatch_sgd:
      return "minibatch_sgd";
    case Algorithm::momentum:
      return "momentum";
    case Algorithm::ssd:
      return "ssd";
    case Algorithm::pssd:
      return "pssd";
    case Algorithm::prox_gd:
      return "prox_gd";
    case Algorithm::prox_sgd:
      return "prox_sgd";
  }
  return "gd";
}

std::string to_string(MomentumForm f) {
  switch (f) {
    case MomentumForm::buffer:
      return "buffer";
    case MomentumForm::heavy_ball:
      return "heavy_ball";
    case MomentumForm::ima:
      return "ima";
  }
  return "buffer";
}

std::string to_string(Averaging a) {
  switch (a) {
    case Averaging::none:
      return "none";
    case Averaging::uniform:
      return "uniform";
    case Averaging::gamma_weighted:
      return "gamma_weighted";
    case Averaging::p_tk:
      return "p_tk";
  }
  return "none";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (auto a : {Algorithm::gd, Algorithm::sgd, Algorithm::minibatch_sgd, Algorithm::momentum, Algorithm::ssd,
                 Algorithm::pssd, Algorithm::prox_gd, Algorithm::prox_sgd})
    if (to_string(a) == name) return a;
  fail(ErrorCode::invalid_argument, "unknown algorithm '" + name + "'");
}

MomentumForm momentum_form_from_string(const std::string& name) {
  for (auto f : {MomentumForm::buffer, MomentumForm::heavy_ball, MomentumForm::ima})
    if (to_string(f) == name) return f;
  fail(ErrorCode::invalid_argument, "unknown momentum form '" + name + "'");
}

Averaging averaging_from_string(const std::string& name) {
  for (auto a : {Averaging::none, Averaging::uniform, Averaging::gamma_weighted, Averaging::p_tk})
    if (to_string(a) == name) return a;
  fail(ErrorCode::invalid_argument, "unknown averaging '" + name + "'");
}

bool is_stochastic(Algorithm a) { return a != Algorithm::gd && a != Algorithm::prox_gd; }

// --- targets ---------------------------------------------------------------

Target Target::of(const ProblemInstance& instance) {
  Target t;
  t.problem = instance.problem;
  t.x_star = instance.truth.x_star;
  t.inf_value = instance.truth.inf_f;
  t.x0 = instance.x0;
  t.truth_tolerance = instance.truth_tolerance();
  return t;
}

Target Target::of(const CompositeProblem& composite) {
  Target t;
  t.problem = composite.smooth.problem;
  t.reg = composite.reg;
  t.x_star = composite.x_star_F;
  t.inf_value = composite.inf_F;
  t.x0 = composite.smooth.x0;
  t.truth_tolerance = 1e-6;
  return t;
}

// --- averaging -------------------------------------------------------------

namespace {

double average_weight(Averaging weighting, double gamma, double L_ref, std::size_t k) {
  switch (weighting) {
    case Averaging::none:
    case Averaging::uniform:
      return 1.0;
    case Averaging::gamma_weighted:
      return gamma;
    case Averaging::p_tk: {
      const double w = gamma * (1.0 - 2.0 * gamma * L_ref);
      if (!(w > 0.0))
        fail(ErrorCode::invalid_argument, "p_tk weight at k = " + std::to_string(k) +
                                              " is not positive (requires gamma_k < 1/(2 L_ref))");
      return w;
    }
  }
  return 1.0;
}

}  // namespace

Vector averaged_iterate(const std::vector<Vector>& iterates, const std::vector<double>& gammas, Averaging weighting,
                        double L_ref) {
  require(!iterates.empty(), "averaged_iterate needs at least one iterate");
  require(weighting == Averaging::uniform || gammas.size() >= iterates.size(),
          "averaged_iterate needs one step size per iterate");
  Vector sum = Vector::Zero(iterates.front().size());
  double total = 0.0;
  for (std::size_t k = 0; k < iterates.size(); ++k) {
    const double w = average_weight(weighting, gammas.empty() ? 1.0 : gammas[k], L_ref, k);
    sum += w * iterates[k];
    total += w;
  }
  return sum / total;
}

Vector averaged_iterate(const Trace& trace, Averaging weighting, double L_ref) {
  if (trace.iterates.size() < 2)
    fail(ErrorCode::invalid_argument, "trace has no iterate history (run with keep_iterates)");
  const std::vector<Vector> head(trace.iterates.begin(), trace.iterates.end() - 1);
  return averaged_iterate(head, trace.gammas, weighting, L_ref);
}

std::vector<double> ima_lambdas(const StepSchedule& schedule, std::size_t horizon) {
  std::vector<double> lam(horizon + 1, 0.0);
  if (schedule.kind == ScheduleKind::momentum_pair) {
    for (std::size_t t = 0; t <= horizon; ++t) lam[t] = static_cast<double>(t) / 2.0;
    return lam;
  }
  // lambda_t = beta_hat_t (1 + lambda_{t+1}), terminal lambda_T = 0
  for (std::size_t t = horizon; t-- > 0;) {
    double bhat = 0.0;
    if (t > 0) bhat = schedule.gamma_at(t, horizon) * schedule.beta_at(t) / schedule.gamma_at(t - 1, horizon);
    lam[t] = bhat * (1.0 + lam[t + 1]);
  }
  return lam;
}

// --- runner ----------------------------------------------------------------

namespace {

class Recorder {
 public:
  Recorder(const Target& target, const RunConfig& cfg, Trace& trace)
      : target_(target), cfg_(cfg), trace_(trace) {}

  void start(const Vector& x0) {
    gap0_ = gap(x0);
    if (!std::isfinite(gap0_))
      fail(ErrorCode::invalid_argument, "objective is not finite at x0 (start outside the domain?)");
    limit_ = 1e12 * std::max(gap0_, 1.0);
    trace_.rows.reserve(cfg_.iterations + 1);
    trace_.gammas.reserve(cfg_.iterations);
    if (cfg_.keep_iterates) trace_.iterates.reserve(cfg_.iterations + 1);
    if (cfg_.averaging != Averaging::none) sum_ = Vector::Zero(x0.size());
    push(0, x0, gap0_);
  }

  // x is the iterate after step t (i.e. x_{t+1}); prev is x_t and gamma the step used.
  void step(std::size_t t, const Vector& prev, double gamma, const Vector& x) {
    trace_.gammas.push_back(gamma);
    trace_.rows.back().gamma_t = gamma;
    if (cfg_.averaging != Averaging::none) {
      const double w = average_weight(cfg_.averaging, gamma, cfg_.L_ref, t);
      sum_ += w * prev;
      weight_ += w;
    }
    if (!x.allFinite()) fail(ErrorCode::divergence, "non-finite iterate at t = " + std::to_string(t + 1));
    const double g = gap(x);
    if (!std::isfinite(g) || g > limit_)
      fail(ErrorCode::divergence, "diverged at t = " + std::to_string(t + 1) + " (gap " + format_double(g) + ")");
    push(t + 1, x, g);
  }

  void finish(const Vector& x) {
    trace_.last = x;
    trace_.rows.back().gamma_t = cfg_.schedule.gamma_at(cfg_.iterations, cfg_.iterations);
    if (cfg_.averaging != Averaging::none) trace_.average = sum_ / weight_;
  }

 private:
  double gap(const Vector& x) const { return target_.objective(x) - target_.inf_value; }

  void push(std::size_t t, const Vector& x, double g) {
    TraceRow row;
    row.t = t;
    row.f_gap = g;
    row.dist_sq = (x - target_.x_star).squaredNorm();
    if (cfg_.averaging == Averaging::none)
      row.avg_gap = std::numeric_limits<double>::quiet_NaN();
    else
      row.avg_gap = t == 0 ? g : gap(sum_ / weight_);
    trace_.rows.push_back(row);
    if (cfg_.keep_iterates) trace_.iterates.push_back(x);
  }

  const Target& target_;
  const RunConfig& cfg_;
  Trace& trace_;
  double gap0_ = 0.0;
  double limit_ = 0.0;
  Vector sum_;
  double weight_ = 0.0;
};

void validate(const Target& target, const RunConfig& cfg) {
  require(target.problem != nullptr, "run target has no problem");
  require(cfg.iterations >= 1, "iterations T must be >= 1");
  require(cfg.trials >= 1, "trials M must be >= 1");
  const auto n = target.problem->n();
  const bool needs_grad = cfg.algorithm != Algorithm::ssd && cfg.algorithm != Algorithm::pssd;
  if (needs_grad && !target.problem->differentiable())
    fail(ErrorCode::invalid_argument, "algorithm '" + to_string(cfg.algorithm) + "' needs a differentiable problem");
  if (cfg.algorithm == Algorithm::minibatch_sgd && (cfg.batch_size < 1 || cfg.batch_size > n))
    fail(ErrorCode::invalid_argument, "b must satisfy 1 <= b <= n (b = " + std::to_string(cfg.batch_size) +
                                          ", n = " + std::to_string(n) + ")");
  if ((cfg.algorithm == Algorithm::gd || cfg.algorithm == Algorithm::prox_gd) && !cfg.schedule.is_constant())
    fail(ErrorCode::invalid_argument, to_string(cfg.algorithm) + " requires a constant step schedule");
  if (cfg.algorithm == Algorithm::momentum && !cfg.schedule.has_beta())
    fail(ErrorCode::invalid_argument, "momentum requires a schedule with beta_t (momentum_pair or custom)");
  if (cfg.algorithm == Algorithm::pssd) {
    if (!cfg.ball_radius) fail(ErrorCode::invalid_argument, "pssd requires the projection ball radius B");
    require(*cfg.ball_radius > 0.0, "ball radius B must be > 0");
  }
  const bool prox_method = cfg.algorithm == Algorithm::prox_gd || cfg.algorithm == Algorithm::prox_sgd;
  if (!prox_method && target.reg.kind != RegularizerKind::zero)
    fail(ErrorCode::invalid_argument, to_string(cfg.algorithm) + " cannot handle a nonsmooth regularizer");
}

}  // namespace

Trace run(const Target& target, const RunConfig& cfg_in, std::size_t trial) {
  RunConfig cfg = cfg_in;
  Target tgt = target;
  if (cfg.algorithm == Algorithm::prox_gd || cfg.algorithm == Algorithm::prox_sgd) {
    if (cfg.reg.kind != RegularizerKind::zero) tgt.reg = cfg.reg;
  }
  validate(tgt, cfg);

  const FiniteSumProblem& f = *tgt.problem;
  const std::size_t n = f.n();
  const std::size_t T = cfg.iterations;
  Vector x = cfg.x0 ? *cfg.x0 : tgt.x0;
  require(x.size() == static_cast<Eigen::Index>(f.dim()), "x0 dimension does not match the problem");
  require(x.allFinite(), "x0 must be finite");
  if (cfg.algorithm == Algorithm::pssd && x.norm() > *cfg.ball_radius * (1.0 + 1e-12))
    fail(ErrorCode::invalid_argument, "pssd start x0 lies outside the ball of radius B");

  Trace trace;
  trace.algorithm = cfg.algorithm;
  trace.seed = cfg.seed;
  trace.trial = trial;

  Recorder rec(tgt, cfg, trace);
  rec.start(x);

  std::mt19937_64 rng(cfg.seed + trial);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> perm(n);
  std::vector<std::size_t> batch(cfg.batch_size);

  // momentum state
  Vector buffer = Vector::Zero(x.size());
  Vector prev_x = x;  // x_{t-1}, with x_{-1} = x_0
  Vector z = x;       // IMA z_{t-1}, with z_{-1} = x_0
  std::vector<double> lambda;
  if (cfg.algorithm == Algorithm::momentum && cfg.momentum_form == MomentumForm::ima)
    lambda = ima_lambdas(cfg.schedule, T);

  for (std::size_t t = 0; t < T; ++t) {
    const double gamma = cfg.schedule.gamma_at(t, T);
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      fail(ErrorCode::invalid_argument, "step size at t = " + std::to_string(t) + " is not positive");
    Vector next;
    switch (cfg.algorithm) {
      case Algorithm::gd:
        next = x - gamma * f.grad(x);
        break;
      case Algorithm::prox_gd:
        next = prox(tgt.reg, gamma, x - gamma * f.grad(x));
        break;
      case Algorithm::sgd:
      case Algorithm::ssd:
        next = x - gamma * f.grad_i(pick(rng), x);
        break;
      case Algorithm::pssd:
        next = project_ball(x - gamma * f.grad_i(pick(rng), x), *cfg.ball_radius);
        break;
      case Algorithm::prox_sgd:
        next = prox(tgt.reg, gamma, x - gamma * f.grad_i(pick(rng), x));
        break;
      case Algorithm::minibatch_sgd: {
        // partial Fisher-Yates over a fresh identity permutation; b = 1 draws exactly like sgd
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t k = 0; k < cfg.batch_size; ++k) {
          std::uniform_int_distribution<std::size_t> pos(k, n - 1);
          std::swap(perm[k], perm[pos(rng)]);
          batch[k] = perm[k];
        }
        next = x - gamma * f.batch_grad(batch, x);
        break;
      }
      case Algorithm::momentum: {
        const Vector g = f.grad_i(pick(rng), x);
        switch (cfg.momentum_form) {
          case MomentumForm::buffer:
            buffer = cfg.schedule.beta_at(t) * buffer + g;
            next = x - gamma * buffer;
            break;
          case MomentumForm::heavy_ball: {
            const double bhat =
                t == 0 ? 0.0 : gamma * cfg.schedule.beta_at(t) / cfg.schedule.gamma_at(t - 1, T);
            next = x - gamma * g + bhat * (x - prev_x);
            break;
          }
          case MomentumForm::ima: {
            const double eta = (1.0 + lambda[t + 1]) * gamma;
            z = z - eta * g;
            next = (lambda[t + 1] * x + z) / (1.0 + lambda[t + 1]);
            break;
          }
        }
        break;
      }
    }
    prev_x = x;
    rec.step(t, x, gamma, next);
    x = std::move(next);
  }
  rec.finish(x);
  return trace;
}

namespace {
Trace run_as(const Target& target, RunConfig cfg, Algorithm a, std::size_t trial) {
  cfg.algorithm = a;
  return run(target, cfg, trial);
}
}  // namespace

Trace run_gd(const Target& target, RunConfig cfg) { return run_as(target, std::move(cfg), Algorithm::gd, 0); }
Trace run_sgd(const Target& target, RunConfig cfg, std::size_t trial) {
  return run_as(target, std::move(cfg), Algorithm::sgd, trial);
}
Trace run_minibatch_sgd(const Target& target, RunConfig cfg, std::size_t trial) {
  return run_as(target, std::move(cfg), Algorithm::minibatch_sgd, trial);
}
Trace run_momentum(const Target& target, RunConfig cfg, MomentumForm form, std::size_t trial) {
  cfg.momentum_form = form;
  return run_as(target, std::move(cfg), Algorithm::momentum, trial);
}
Trace run_subgradient(const Target& target, RunConfig cfg, bool projected, std::size_t trial) {
  return run_as(target, std::move(cfg), projected ? Algorithm::pssd : Algorithm::ssd, trial);
}
Trace run_prox_gd(const Target& target, RunConfig cfg) { return run_as(target, std::move(cfg), Algorithm::prox_gd, 0); }
Trace run_prox_sgd(const Target& target, RunConfig cfg, std::size_t trial) {
  return run_as(target, std::move(cfg), Algorithm::prox_sgd, trial);
}

// --- CSV -------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_trace_csv_header(std::ostream& os) { os << "trial,t,gamma_t,f_gap,dist_sq,avg_gap\n"; }

void write_trace_csv(std::ostream& os, const Trace& trace) {
  for (const auto& r : trace.rows)
    os << trace.trial << ',' << r.t << ',' << format_double(r.gamma_t) << ',' << format_double(r.f_gap) << ','
       << format_double(r.dist_sq) << ',' << (std::isnan(r.avg_gap) ? std::string() : format_double(r.avg_gap))
       << '\n';
}

}  // namespace descentlab
