#pragma once

#include "descentlab/nonsmooth.hpp"
#include "descentlab/problems.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace descentlab {

enum class ScheduleKind { constant, inv_sqrt, momentum_pair, horizon_constant, custom };

/// Step sizes gamma_t (and momentum weights beta_t where defined).
///
///   constant(g)              gamma_t = g
///   inv_sqrt(g0)             gamma_t = g0 / sqrt(t + 1)
///   momentum_pair(eta)       gamma_t = 2 eta / (t + 3),  beta_t = t / (t + 2)
///   horizon_constant(c, o)   gamma_t = c / sqrt(T + o) for a run of length T
///   custom(g, b)             arbitrary callables
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  double gamma = 0.0;   // g, g0, eta or c
  double offset = 0.0;  // horizon_constant only
  std::function<double(std::size_t)> gamma_fn;
  std::function<double(std::size_t)> beta_fn;

  static StepSchedule constant(double gamma);
  static StepSchedule inv_sqrt(double gamma0);
  static StepSchedule momentum_pair(double eta);
  static StepSchedule horizon_constant(double scale, double offset);
  static StepSchedule custom(std::function<double(std::size_t)> gamma_fn,
                             std::function<double(std::size_t)> beta_fn = {});

  double gamma_at(std::size_t t, std::size_t horizon) const;
  bool has_beta() const;
  double beta_at(std::size_t t) const;
  /// Same step at every t (for a fixed horizon).
  bool is_constant() const { return kind == ScheduleKind::constant || kind == ScheduleKind::horizon_constant; }
};

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

enum class Algorithm { gd, sgd, minibatch_sgd, momentum, ssd, pssd, prox_gd, prox_sgd };
enum class MomentumForm { buffer, heavy_ball, ima };
enum class Averaging { none, uniform, gamma_weighted, p_tk };

std::string to_string(Algorithm a);
std::string to_string(MomentumForm f);
std::string to_string(Averaging a);
Algorithm algorithm_from_string(const std::string& name);
MomentumForm momentum_form_from_string(const std::string& name);
Averaging averaging_from_string(const std::string& name);

/// Whether the method draws random samples.
bool is_stochastic(Algorithm a);

struct RunConfig {
  Algorithm algorithm = Algorithm::gd;
  MomentumForm momentum_form = MomentumForm::buffer;
  StepSchedule schedule;
  std::size_t iterations = 1;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::optional<double> ball_radius;  // pssd
  Regularizer reg;                    // prox methods
  std::optional<Vector> x0;           // defaults to the problem's x0
  Averaging averaging = Averaging::none;
  double L_ref = 0.0;  // p_tk weights gamma_k (1 - 2 gamma_k L_ref)
  bool keep_iterates = false;
};

/// What a run is measured against: f (or F = f + g), a minimizer and the infimum.
struct Target {
  std::shared_ptr<const FiniteSumProblem> problem;
  Regularizer reg;
  Vector x_star;
  double inf_value = 0.0;
  Vector x0;
  double truth_tolerance = 0.0;

  static Target of(const ProblemInstance& instance);
  static Target of(const CompositeProblem& composite);

  double objective(const Vector& x) const { return composite_value(problem->value(x), reg, x); }
};

struct TraceRow {
  std::size_t t = 0;
  double gamma_t = 0.0;
  double f_gap = 0.0;
  double dist_sq = 0.0;
  double avg_gap = 0.0;  // gap at the running average of x_0..x_{t-1}; equals f_gap at t = 0
};

struct Trace {
  Algorithm algorithm = Algorithm::gd;
  std::uint64_t seed = 0;
  std::size_t trial = 0;
  std::vector<TraceRow> rows;
  std::vector<Vector> iterates;  // x_0..x_T when keep_iterates
  std::vector<double> gammas;    // gamma_0..gamma_{T-1}
  Vector last;
  Vector average;  // running average after T steps (empty when averaging = none)
};

Trace run(const Target& target, const RunConfig& cfg, std::size_t trial = 0);

Trace run_gd(const Target& target, RunConfig cfg);
Trace run_sgd(const Target& target, RunConfig cfg, std::size_t trial = 0);
Trace run_minibatch_sgd(const Target& target, RunConfig cfg, std::size_t trial = 0);
Trace run_momentum(const Target& target, RunConfig cfg, MomentumForm form, std::size_t trial = 0);
Trace run_subgradient(const Target& target, RunConfig cfg, bool projected, std::size_t trial = 0);
Trace run_prox_gd(const Target& target, RunConfig cfg);
Trace run_prox_sgd(const Target& target, RunConfig cfg, std::size_t trial = 0);

/// sum_k p_k x_k over the given iterates with normalized weights.
Vector averaged_iterate(const std::vector<Vector>& iterates, const std::vector<double>& gammas, Averaging weighting,
                        double L_ref = 0.0);
/// Average of x_0..x_{T-1} of a trace recorded with keep_iterates.
Vector averaged_iterate(const Trace& trace, Averaging weighting, double L_ref = 0.0);

/// Momentum weights of the iterate-moving-average form: lambda_0..lambda_T.
std::vector<double> ima_lambdas(const StepSchedule& schedule, std::size_t horizon);

/// CSV with columns trial,t,gamma_t,f_gap,dist_sq,avg_gap (empty without averaging); 17 significant digits.
void write_trace_csv_header(std::ostream& os);
void write_trace_csv(std::ostream& os, const Trace& trace);
std::string format_double(double v);

}  // namespace descentlab
