#pragma once

#include "descentlab/nonsmooth.hpp"
#include "descentlab/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace descentlab {

enum class ProblemKind { least_squares, abs_loss, scalar_pl, custom };
enum class Provenance { closed_form, reference_solver };

std::string to_string(ProblemKind kind);
std::string to_string(Provenance provenance);

/// f(x) = (1/n) sum_i f_i(x) with per-term oracles.
///
/// For nondifferentiable terms grad_i returns a subgradient selection.
/// Instances are immutable and may be shared across threads.
class FiniteSumProblem {
 public:
  virtual ~FiniteSumProblem() = default;

  std::size_t n() const { return n_; }
  std::size_t dim() const { return d_; }
  ProblemKind kind() const { return kind_; }
  bool differentiable() const { return differentiable_; }
  bool convex() const { return convex_; }

  virtual double value_i(std::size_t i, const Vector& x) const = 0;
  virtual Vector grad_i(std::size_t i, const Vector& x) const = 0;

  virtual double value(const Vector& x) const;
  virtual Vector grad(const Vector& x) const;

  /// (1/|batch|) sum_{i in batch} grad_i(x)
  Vector batch_grad(const std::vector<std::size_t>& batch, const Vector& x) const;

 protected:
  FiniteSumProblem(std::size_t n, std::size_t d, ProblemKind kind, bool differentiable, bool convex);

 private:
  std::size_t n_;
  std::size_t d_;
  ProblemKind kind_;
  bool differentiable_;
  bool convex_;
};

/// f_i(x) = 0.5 (<phi_i, x> - y_i)^2
class LeastSquaresProblem final : public FiniteSumProblem {
 public:
  LeastSquaresProblem(Matrix features, Vector targets);
  double value_i(std::size_t i, const Vector& x) const override;
  Vector grad_i(std::size_t i, const Vector& x) const override;
  const Matrix& features() const { return features_; }
  const Vector& targets() const { return targets_; }

 private:
  Matrix features_;
  Vector targets_;
};

/// f_i(x) = |<a_i, x> - b_i| + (strong_mu / 2) ||x||^2
class AbsLossProblem final : public FiniteSumProblem {
 public:
  AbsLossProblem(Matrix rows, Vector targets, double strong_mu);
  double value_i(std::size_t i, const Vector& x) const override;
  Vector grad_i(std::size_t i, const Vector& x) const override;
  const Matrix& rows() const { return rows_; }
  const Vector& targets() const { return targets_; }
  double strong_mu() const { return strong_mu_; }

 private:
  Matrix rows_;
  Vector targets_;
  double strong_mu_;
};

/// f(t) = t^2 + 3 sin(t)^2 on the real line, n = 1.
class ScalarPlProblem final : public FiniteSumProblem {
 public:
  ScalarPlProblem();
  double value_i(std::size_t i, const Vector& x) const override;
  Vector grad_i(std::size_t i, const Vector& x) const override;
};

class CustomProblem final : public FiniteSumProblem {
 public:
  using ValueFn = std::function<double(std::size_t, const Vector&)>;
  using GradFn = std::function<Vector(std::size_t, const Vector&)>;
  CustomProblem(std::size_t n, std::size_t d, ValueFn value, GradFn grad, bool differentiable = true,
                bool convex = true);
  double value_i(std::size_t i, const Vector& x) const override;
  Vector grad_i(std::size_t i, const Vector& x) const override;

 private:
  ValueFn value_;
  GradFn grad_;
};

struct GroundTruth {
  Vector x_star;
  double inf_f = 0.0;
  std::vector<double> inf_f_i;
  Provenance provenance = Provenance::closed_form;
};

/// Constants consumed by the convergence bounds. Absent values are
/// not defined for the problem (e.g. L for absolute loss).
struct ProblemConstants {
  std::size_t n = 0;
  std::optional<double> L;
  std::vector<double> L_i;
  std::optional<double> L_max;
  std::optional<double> L_avg;
  double mu = 0.0;     // 0 when not strongly convex
  double mu_pl = 0.0;  // 0 when unknown
  std::optional<double> sigma_star_f;
  std::optional<double> delta_star_f;
  std::optional<double> G;
  std::optional<double> B;
};

/// A problem together with its minimizer, constants and default start point.
struct ProblemInstance {
  std::string name;
  std::shared_ptr<const FiniteSumProblem> problem;
  GroundTruth truth;
  ProblemConstants constants;
  Vector x0;

  /// Absolute tolerance floor that accounts for ground-truth provenance.
  double truth_tolerance() const { return truth.provenance == Provenance::reference_solver ? 1e-6 : 0.0; }
};

/// F = f + g with a reference minimizer of F.
struct CompositeProblem {
  ProblemInstance smooth;
  Regularizer reg;
  Vector x_star_F;
  double inf_F = 0.0;
  double sigma_star_F = 0.0;
  double solver_residual = 0.0;
  Provenance provenance = Provenance::reference_solver;

  double F(const Vector& x) const { return composite_value(smooth.problem->value(x), reg, x); }
};

ProblemInstance build_least_squares(const Matrix& features, const Vector& targets);
ProblemInstance build_scalar_pl();
ProblemInstance build_abs_loss(const Matrix& rows, const Vector& targets, double strong_mu, double ball_B);

/// Attaches a regularizer and solves for the composite minimizer with
/// proximal gradient descent (fixed-point residual <= 1e-12, budget 1e6).
CompositeProblem build_composite(const ProblemInstance& smooth, const Regularizer& reg);

struct MinibatchConstants {
  double L_b = 0.0;
  double sigma_b = 0.0;
};

MinibatchConstants minibatch_constants(double L, double L_max, double sigma_star_f, std::size_t n, std::size_t b);
MinibatchConstants minibatch_constants(const ProblemConstants& constants, std::size_t b);

/// (1/n) sum_i ||grad f_i(x) - grad f(x)||^2
double gradient_variance(const FiniteSumProblem& problem, const Vector& x);

/// Composite gradient noise at the stored reference minimizer.
double composite_noise(const CompositeProblem& problem);

/// Bregman divergence D_f(x; y) = f(x) - f(y) - <grad f(y), x - y>.
double bregman(const FiniteSumProblem& problem, const Vector& x, const Vector& y);

// Fixture catalogue ---------------------------------------------------------

struct Fixture {
  ProblemInstance instance;
  std::optional<CompositeProblem> composite;
};

/// Named fixtures: ls_4x2, ls_6x2, ls_rankdef, ls_interp, scalar_pl,
/// abs_2x1, abs_4x2, abs_reg_4x2, lasso_4x2, ball_interp.
Fixture fixture(const std::string& name);
std::vector<std::string> fixture_names();

/// Minimum-norm solution of (1/n) Phi^T Phi x = (1/n) Phi^T y with the
/// eigenvalue cutoff lambda > 1e-10 lambda_max.
Vector min_norm_least_squares(const Matrix& features, const Vector& targets);

}  // namespace descentlab
