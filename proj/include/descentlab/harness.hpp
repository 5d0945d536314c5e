#pragma once

#include "descentlab/algorithms.hpp"
#include "descentlab/theory.hpp"

#include <string>
#include <vector>

namespace descentlab {

enum class EstimateMetric { f_gap, dist_sq, avg_f_gap, avg_F_gap };
std::string to_string(EstimateMetric m);
EstimateMetric estimate_metric_from_string(const std::string& name);

struct ExpectationEstimate {
  std::vector<std::size_t> checkpoints;
  std::vector<double> mean;
  std::vector<double> stderr_;  // sample std / sqrt(M)
  std::size_t M = 0;
  EstimateMetric metric = EstimateMetric::f_gap;
};

/// Geometric checkpoints floor(10^(k/2)) = 1, 3, 10, 31, 100, ... capped at T (T included).
std::vector<std::size_t> default_checkpoints(std::size_t T);

/// Runs cfg.trials independent trials (seeds cfg.seed + m) on up to `jobs`
/// threads and aggregates in trial order. Deterministic algorithms run once.
ExpectationEstimate estimate(const Target& target, const RunConfig& cfg, EstimateMetric metric,
                             const std::vector<std::size_t>& checkpoints, std::size_t jobs = 1);

enum class MarginPolicy { deterministic, three_sigma };
std::string to_string(MarginPolicy p);

struct Verdict {
  Setting setting = Setting::gd_convex;
  std::vector<std::size_t> checkpoints;
  std::vector<double> measured;
  std::vector<double> bound;
  std::vector<double> slack;
  MarginPolicy policy = MarginPolicy::deterministic;
  std::size_t M = 1;
  bool pass = false;
  double worst_ratio = 0.0;

  std::string json() const;
};

/// measured <= bound + slack at every checkpoint, slack = [3 stderr] + 1e-9 (1 + bound).
Verdict verify_bound(const ExpectationEstimate& est, const BoundCurve& curve, MarginPolicy policy);

/// Builds the run configuration a setting is checked with (algorithm,
/// averaging, p_tk reference constant, projection radius).
RunConfig setting_run_config(Setting setting, const BoundCurve& curve, RunConfig base);

EstimateMetric setting_metric(Setting setting);

struct SettingCheck {
  BoundCurve curve;
  ExpectationEstimate estimate;
  Verdict verdict;
};

/// End to end: curve from (target inputs, schedule), estimate, verdict.
SettingCheck check_setting(Setting setting, const Target& target, const TheoryInputs& inputs, RunConfig base,
                           const std::vector<std::size_t>& checkpoints, std::size_t jobs = 1);

// Property suite ------------------------------------------------------------

enum class CheckStatus { pass, fail, expected_fail };
std::string to_string(CheckStatus s);

struct PropertyCheck {
  std::string name;
  double max_violation = 0.0;  // max over samples of (lhs - rhs) / scale, floored at 0
  double tolerance = 0.0;
  CheckStatus status = CheckStatus::pass;
};

struct PropertyReport {
  std::string suite;
  std::string fixture;
  std::size_t samples = 0;
  std::vector<PropertyCheck> checks;

  bool green() const;  // no check in status fail
  std::string json() const;
};

struct SamplerConfig {
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
};

/// Checks listed as must-fail for a fixture.
std::vector<std::string> expected_failures(const std::string& fixture);

PropertyReport property_suite(const Fixture& fixture, const SamplerConfig& sampler = {});

struct MinibatchOracle {
  Vector exact_mean;
  double exact_variance = 0.0;
  std::size_t subsets = 0;
};

/// Exact mean and variance of the batch gradient over all size-b subsets.
MinibatchOracle enumerate_minibatch_oracle(const FiniteSumProblem& problem, std::size_t b, const Vector& x);

enum class LyapunovKind { gd_energy, pgd_energy };

/// E_t = ||x_t - x*||^2 / (2 gamma) + t (objective(x_t) - inf) must be non-increasing.
Verdict lyapunov_check(const Trace& trace, LyapunovKind kind, double gamma, double L, const Target& target);

}  // namespace descentlab
