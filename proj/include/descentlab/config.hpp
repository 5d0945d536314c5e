#pragma once

#include "descentlab/algorithms.hpp"
#include "descentlab/harness.hpp"
#include "descentlab/theory.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace descentlab {

/// Step size given either as a number or as factor * reference, where the
/// reference is one of 1/L, 1/L_max, 1/(2L_max), 1/(4L_max), 1/(2L_b),
/// 1/mu, mu/(L*L_max).
struct GammaSpec {
  double factor = 0.0;
  std::string of;  // empty: factor is the step itself

  double resolve(const ProblemConstants& constants, std::size_t batch_size) const;
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::constant;
  GammaSpec gamma;
  double offset = 0.0;  // horizon_constant
};

/// A fixture name, or inline data for least_squares / abs_loss / scalar_pl.
struct ProblemSpec {
  std::string fixture;
  std::string kind;
  Matrix data;  // features (least_squares) or rows (abs_loss)
  Vector targets;
  double strong_mu = 0.0;
  double ball_B = 0.0;
};

/// A table input: a fixture name or explicit constants.
struct TableSource {
  std::string fixture;
  std::optional<TheoryInputs> inputs;
};

struct TableSpec {
  std::optional<TableSource> smooth;
  std::optional<TableSource> lipschitz;
  std::optional<TableSource> composite;
  std::size_t b = 2;
};

struct OutputSpec {
  std::string trace = "trace.csv";
  std::string manifest = "manifest.json";
  std::string verdict;    // optional file for cmd_verify
  std::string table_csv;  // optional file for cmd_table
  std::string report;     // optional file for cmd_suite
};

struct ExperimentConfig {
  std::optional<ProblemSpec> problem;
  std::optional<Regularizer> regularizer;
  std::optional<Algorithm> algorithm;
  MomentumForm momentum_form = MomentumForm::buffer;
  std::optional<ScheduleSpec> schedule;
  std::size_t T = 100;
  std::size_t M = 1;
  std::size_t b = 1;
  std::uint64_t seed = 0;
  std::optional<double> ball_B;  // pssd projection radius
  std::optional<Vector> x0;
  std::optional<Averaging> averaging;
  std::vector<std::size_t> checkpoints;
  std::optional<Setting> setting;
  std::optional<double> epsilon;
  bool expect_fail = false;
  double bound_scale = 1.0;
  std::size_t samples = 10000;
  std::optional<TableSpec> table;
  OutputSpec outputs;
};

/// Parses JSON text; errors (ErrorCode::config) name the field and line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string emit_config(const ExperimentConfig& cfg);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// Everything needed to execute a config.
struct Experiment {
  ExperimentConfig config;
  Fixture fixture;
  bool composite = false;
  Target target;
  TheoryInputs inputs;
  RunConfig run;
};

/// Loads the problem and enforces the cross-field constraints.
Experiment resolve(const ExperimentConfig& cfg);
/// Same, against an already loaded problem (cfg.problem is ignored).
Experiment resolve_on(const ExperimentConfig& cfg, Fixture fixture);

/// Looks the name up in the catalogue, then in $DESCENTLAB_FIXTURES/<name>.json.
Fixture load_fixture(const std::string& name);

}  // namespace descentlab
