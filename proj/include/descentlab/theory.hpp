#pragma once

#include "descentlab/algorithms.hpp"
#include "descentlab/problems.hpp"

#include <optional>
#include <string>
#include <vector>

namespace descentlab {

enum class Setting {
  gd_convex,
  gd_strongly_convex,
  gd_pl,
  sgd_convex_general,
  sgd_convex_const,
  sgd_convex_invsqrt,
  sgd_strongly_convex,
  sgd_pl,
  mini_convex_general,
  mini_convex_const,
  mini_strongly_convex,
  momentum_convex,
  ssd_convex_general,
  ssd_convex_invsqrt,
  pssd_convex,
  ssd_strongly_convex,
  pgd_convex,
  pgd_strongly_convex,
  spgd_convex_general,
  spgd_convex_const,
  spgd_convex_invsqrt,
  spgd_strongly_convex,
};

std::string to_string(Setting s);
Setting setting_from_string(const std::string& name);
std::vector<Setting> all_settings();

/// Which measured quantity a bound controls.
enum class Metric { f_gap, dist_sq, avg_gap };
std::string to_string(Metric m);

/// How a setting is exercised empirically.
struct SettingProfile {
  Algorithm algorithm;
  Metric metric;
  Averaging averaging;  // for avg_gap
  bool deterministic;
  bool composite;
  bool uses_batches;
};
SettingProfile profile(Setting s);

/// Everything a bound or a complexity formula may consume.
struct TheoryInputs {
  ProblemConstants constants;
  double D2 = 0.0;      // ||x0 - x*||^2
  double f0_gap = 0.0;  // f(x0) - inf f
  double F0_gap = 0.0;  // F(x0) - inf F
  std::optional<double> sigma_star_F;
  std::size_t batch_size = 1;

  static TheoryInputs of(const ProblemInstance& instance, const Vector& x0);
  static TheoryInputs of(const CompositeProblem& composite, const Vector& x0);
};

/// Right-hand side of a convergence theorem, t -> bound(t).
class BoundCurve {
 public:
  Setting setting() const { return setting_; }
  std::size_t min_t() const { return min_t_; }
  /// Smoothness constant for p_tk averaging weights (L_max, L_b), 0 otherwise.
  double averaging_L() const { return averaging_L_; }
  const StepSchedule& schedule() const { return schedule_; }
  const TheoryInputs& inputs() const { return inputs_; }

  /// Throws when t is outside the validity window.
  double eval(std::size_t t) const;
  bool valid_at(std::size_t t) const { return t >= min_t_; }
  std::string validity() const;

  /// Multiplies every value by `factor` (used to build adversarial curves).
  BoundCurve scaled(double factor) const;

 private:
  friend BoundCurve bound_curve(Setting, const TheoryInputs&, const StepSchedule&);
  Setting setting_ = Setting::gd_convex;
  TheoryInputs inputs_;
  StepSchedule schedule_;
  std::size_t min_t_ = 0;
  double averaging_L_ = 0.0;
  double scale_ = 1.0;
  // resolved constants
  double L_ = 0, Lmax_ = 0, mu_ = 0, sigma_ = 0, delta_ = 0, G_ = 0, B_ = 0;
};

/// Validates the theorem's hypotheses (hypothesis_violation naming the
/// constraint) and returns its bound.
BoundCurve bound_curve(Setting setting, const TheoryInputs& inputs, const StepSchedule& schedule);

struct ComplexityAnswer {
  Setting setting = Setting::gd_convex;
  double epsilon = 0.0;
  std::optional<double> recommended_gamma;  // eta for momentum; evaluated at t_min when it depends on t
  std::size_t t_min = 0;
  std::string formula;
  /// Level the bound is guaranteed to reach: epsilon, or epsilon * alpha_0 for relative targets.
  double target = 0.0;
  bool relative = false;
};

ComplexityAnswer complexity_iterations(Setting setting, const TheoryInputs& inputs, double epsilon);
bool has_complexity(Setting setting);

/// Schedule that runs the recommended step of a complexity answer.
StepSchedule recommended_schedule(const ComplexityAnswer& answer);

/// k >= log(1/eps) / (1 - rho) guarantees alpha_k <= eps alpha_0.
double itercomplex_iterations(double rho, double epsilon);

struct LinearPlusConst {
  double gamma = 0.0;
  double t = 0.0;  // real-valued lower bound on t
};
/// alpha_t <= (1 - gamma mu)^t alpha_0 + A gamma with gamma in (0, 1/C].
LinearPlusConst linear_plus_const(double A, double C, double mu, double alpha0, double epsilon);

/// ceil() that snaps values within 1e-9 (relative) of an integer.
std::size_t ceil_snap(double x);

// Complexity table ----------------------------------------------------------

struct TableInputs {
  std::optional<TheoryInputs> smooth;     // convex / strongly convex / PL columns
  std::optional<TheoryInputs> lipschitz;  // G-Lipschitz column
  std::optional<TheoryInputs> composite;  // prox rows
  std::size_t batch_size = 2;

  /// Companion fixtures: ls_4x2, abs_2x1 and lasso_4x2.
  static TableInputs from_fixtures();
};

struct TableCell {
  std::string method;
  std::string column;
  bool covered = false;
  std::optional<Setting> setting;
  std::size_t t_min = 0;
  std::string note;  // set when the corollary does not apply at this epsilon

  std::string render() const;
};

struct ComplexityTable {
  double epsilon = 0.0;
  std::vector<std::string> methods;
  std::vector<std::string> columns;
  std::vector<TableCell> cells;  // row-major

  std::string text() const;
  std::string csv() const;
};

ComplexityTable complexity_table(const TableInputs& inputs, double epsilon);

}  // namespace descentlab
