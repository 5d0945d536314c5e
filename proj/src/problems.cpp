#include "descentlab/problems.hpp"

#include "abs_reference.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace descentlab {

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::least_squares:
      return "least_squares";
    case ProblemKind::abs_loss:
      return "abs_loss";
    case ProblemKind::scalar_pl:
      return "scalar_pl";
    case ProblemKind::custom:
      return "custom";
  }
  return "custom";
}

std::string to_string(Provenance provenance) {
  return provenance == Provenance::closed_form ? "closed_form" : "reference_solver";
}

FiniteSumProblem::FiniteSumProblem(std::size_t n, std::size_t d, ProblemKind kind, bool differentiable, bool convex)
    : n_(n), d_(d), kind_(kind), differentiable_(differentiable), convex_(convex) {
  require(n >= 1, "problem needs at least one term (n >= 1)");
  require(d >= 1, "problem dimension must be >= 1");
}

double FiniteSumProblem::value(const Vector& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) s += value_i(i, x);
  return s / static_cast<double>(n_);
}

Vector FiniteSumProblem::grad(const Vector& x) const {
  Vector g = Vector::Zero(static_cast<Eigen::Index>(d_));
  for (std::size_t i = 0; i < n_; ++i) g += grad_i(i, x);
  return g / static_cast<double>(n_);
}

Vector FiniteSumProblem::batch_grad(const std::vector<std::size_t>& batch, const Vector& x) const {
  require(!batch.empty(), "batch must be nonempty");
  Vector g = Vector::Zero(static_cast<Eigen::Index>(d_));
  for (std::size_t i : batch) g += grad_i(i, x);
  return g / static_cast<double>(batch.size());
}

// --- least squares ---------------------------------------------------------

LeastSquaresProblem::LeastSquaresProblem(Matrix features, Vector targets)
    : FiniteSumProblem(static_cast<std::size_t>(features.rows()), static_cast<std::size_t>(features.cols()),
                       ProblemKind::least_squares, true, true),
      features_(std::move(features)),
      targets_(std::move(targets)) {
  require(targets_.size() == features_.rows(), "targets length must equal the number of feature rows");
  require(features_.allFinite() && targets_.allFinite(), "least-squares data must be finite");
}

double LeastSquaresProblem::value_i(std::size_t i, const Vector& x) const {
  const double r = features_.row(static_cast<Eigen::Index>(i)).dot(x) - targets_[static_cast<Eigen::Index>(i)];
  return 0.5 * r * r;
}

Vector LeastSquaresProblem::grad_i(std::size_t i, const Vector& x) const {
  const auto row = features_.row(static_cast<Eigen::Index>(i));
  const double r = row.dot(x) - targets_[static_cast<Eigen::Index>(i)];
  return r * row.transpose();
}

// --- absolute loss ---------------------------------------------------------

AbsLossProblem::AbsLossProblem(Matrix rows, Vector targets, double strong_mu)
    : FiniteSumProblem(static_cast<std::size_t>(rows.rows()), static_cast<std::size_t>(rows.cols()),
                       ProblemKind::abs_loss, false, true),
      rows_(std::move(rows)),
      targets_(std::move(targets)),
      strong_mu_(strong_mu) {
  require(targets_.size() == rows_.rows(), "targets length must equal the number of rows");
  require(rows_.allFinite() && targets_.allFinite(), "absolute-loss data must be finite");
  require(strong_mu >= 0.0 && std::isfinite(strong_mu), "strong_mu must be >= 0");
}

double AbsLossProblem::value_i(std::size_t i, const Vector& x) const {
  const double r = rows_.row(static_cast<Eigen::Index>(i)).dot(x) - targets_[static_cast<Eigen::Index>(i)];
  return std::abs(r) + 0.5 * strong_mu_ * x.squaredNorm();
}

Vector AbsLossProblem::grad_i(std::size_t i, const Vector& x) const {
  const auto row = rows_.row(static_cast<Eigen::Index>(i));
  const double r = row.dot(x) - targets_[static_cast<Eigen::Index>(i)];
  const double s = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
  return s * row.transpose() + strong_mu_ * x;
}

// --- scalar PL -------------------------------------------------------------

ScalarPlProblem::ScalarPlProblem() : FiniteSumProblem(1, 1, ProblemKind::scalar_pl, true, false) {}

double ScalarPlProblem::value_i(std::size_t, const Vector& x) const {
  const double t = x[0];
  const double s = std::sin(t);
  return t * t + 3.0 * s * s;
}

Vector ScalarPlProblem::grad_i(std::size_t, const Vector& x) const {
  const double t = x[0];
  Vector g(1);
  g[0] = 2.0 * t + 3.0 * std::sin(2.0 * t);
  return g;
}

// --- custom ----------------------------------------------------------------

CustomProblem::CustomProblem(std::size_t n, std::size_t d, ValueFn value, GradFn grad, bool differentiable,
                             bool convex)
    : FiniteSumProblem(n, d, ProblemKind::custom, differentiable, convex),
      value_(std::move(value)),
      grad_(std::move(grad)) {
  require(static_cast<bool>(value_) && static_cast<bool>(grad_), "custom problem needs value and gradient oracles");
}

double CustomProblem::value_i(std::size_t i, const Vector& x) const { return value_(i, x); }
Vector CustomProblem::grad_i(std::size_t i, const Vector& x) const { return grad_(i, x); }

// --- builders --------------------------------------------------------------

namespace {

struct Spectrum {
  Vector values;
  Matrix vectors;
  double cutoff = 0.0;
};

Spectrum hessian_spectrum(const Matrix& features) {
  const double n = static_cast<double>(features.rows());
  const Matrix h = features.transpose() * features / n;
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  require(es.info() == Eigen::Success, "eigen-decomposition of the least-squares Hessian failed");
  Spectrum s{es.eigenvalues(), es.eigenvectors(), 0.0};
  s.cutoff = 1e-10 * std::max(s.values.maxCoeff(), 0.0);
  return s;
}

Vector pseudo_solve(const Spectrum& s, const Vector& rhs) {
  Vector out = Vector::Zero(rhs.size());
  for (Eigen::Index k = 0; k < s.values.size(); ++k) {
    if (s.values[k] <= s.cutoff || s.values[k] <= 0.0) continue;
    const auto v = s.vectors.col(k);
    out += v * (v.dot(rhs) / s.values[k]);
  }
  return out;
}

}  // namespace

Vector min_norm_least_squares(const Matrix& features, const Vector& targets) {
  require(features.rows() >= 1 && features.cols() >= 1, "least squares needs n >= 1 and d >= 1");
  const double n = static_cast<double>(features.rows());
  const Spectrum s = hessian_spectrum(features);
  Vector x = pseudo_solve(s, features.transpose() * targets / n);
  // one step of iterative refinement
  x += pseudo_solve(s, features.transpose() * (targets - features * x) / n);
  return x;
}

double gradient_variance(const FiniteSumProblem& problem, const Vector& x) {
  const Vector g = problem.grad(x);
  double s = 0.0;
  for (std::size_t i = 0; i < problem.n(); ++i) s += (problem.grad_i(i, x) - g).squaredNorm();
  return s / static_cast<double>(problem.n());
}

double bregman(const FiniteSumProblem& problem, const Vector& x, const Vector& y) {
  return problem.value(x) - problem.value(y) - problem.grad(y).dot(x - y);
}

ProblemInstance build_least_squares(const Matrix& features, const Vector& targets) {
  require(features.rows() >= 1, "least squares needs n >= 1");
  require(features.cols() >= 1, "least squares needs d >= 1");
  require(features.allFinite() && targets.allFinite(), "least-squares data must be finite");
  require(targets.size() == features.rows(), "targets length must equal the number of feature rows");

  auto problem = std::make_shared<LeastSquaresProblem>(features, targets);
  const std::size_t n = problem->n();

  ProblemInstance inst;
  inst.name = "least_squares";
  inst.problem = problem;
  inst.x0 = Vector::Zero(features.cols());

  const Spectrum s = hessian_spectrum(features);
  ProblemConstants& c = inst.constants;
  c.n = n;
  c.L = s.values.maxCoeff();
  c.mu = s.values.minCoeff() > s.cutoff ? s.values.minCoeff() : 0.0;
  c.mu_pl = 0.0;
  for (Eigen::Index k = 0; k < s.values.size(); ++k) {
    if (s.values[k] > s.cutoff && s.values[k] > 0.0) {
      c.mu_pl = s.values[k];  // ascending order: first nonzero is the smallest
      break;
    }
  }
  c.L_i.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.L_i[i] = features.row(static_cast<Eigen::Index>(i)).squaredNorm();
  c.L_max = *std::max_element(c.L_i.begin(), c.L_i.end());
  c.L_avg = std::accumulate(c.L_i.begin(), c.L_i.end(), 0.0) / static_cast<double>(n);

  GroundTruth& t = inst.truth;
  t.x_star = min_norm_least_squares(features, targets);
  t.inf_f = problem->value(t.x_star);
  t.inf_f_i.assign(n, 0.0);
  t.provenance = Provenance::closed_form;

  c.sigma_star_f = gradient_variance(*problem, t.x_star);
  c.delta_star_f = t.inf_f;  // every term attains 0
  return inst;
}

ProblemInstance build_scalar_pl() {
  ProblemInstance inst;
  inst.name = "scalar_pl";
  inst.problem = std::make_shared<ScalarPlProblem>();
  inst.x0 = Vector::Constant(1, 3.0);
  inst.truth.x_star = Vector::Zero(1);
  inst.truth.inf_f = 0.0;
  inst.truth.inf_f_i = {0.0};
  inst.truth.provenance = Provenance::closed_form;

  ProblemConstants& c = inst.constants;
  c.n = 1;
  c.L = 8.0;
  c.L_i = {8.0};
  c.L_max = 8.0;
  c.L_avg = 8.0;
  c.mu = 0.0;
  c.mu_pl = 1.0 / 40.0;
  c.sigma_star_f = 0.0;
  c.delta_star_f = 0.0;
  return inst;
}

ProblemInstance build_abs_loss(const Matrix& rows, const Vector& targets, double strong_mu, double ball_B) {
  require(rows.rows() >= 1 && rows.cols() >= 1, "absolute loss needs n >= 1 and d >= 1");
  require(ball_B > 0.0 && std::isfinite(ball_B), "ball_B must be > 0");
  auto problem = std::make_shared<AbsLossProblem>(rows, targets, strong_mu);
  const std::size_t n = problem->n();

  ProblemInstance inst;
  inst.name = "abs_loss";
  inst.problem = problem;
  inst.x0 = Vector::Zero(rows.cols());

  const detail::AbsReferenceSolution sol = detail::solve_abs_reference(*problem, ball_B);
  if (sol.x.norm() > ball_B)
    fail(ErrorCode::invalid_argument, "reference minimizer has norm " + std::to_string(sol.x.norm()) +
                                          " > ball_B = " + std::to_string(ball_B) + "; increase ball_B");

  GroundTruth& t = inst.truth;
  t.x_star = sol.x;
  t.inf_f = sol.value;
  t.provenance = Provenance::reference_solver;
  t.inf_f_i.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // 1-d reduction: along a_i, h(u) = |u - b| + strong_mu u^2 / (2 ||a_i||^2)
    const double q = rows.row(static_cast<Eigen::Index>(i)).squaredNorm();
    const double b = targets[static_cast<Eigen::Index>(i)];
    if (q == 0.0)
      t.inf_f_i[i] = std::abs(b);
    else if (strong_mu == 0.0)
      t.inf_f_i[i] = 0.0;
    else if (std::abs(b) <= q / strong_mu)
      t.inf_f_i[i] = strong_mu * b * b / (2.0 * q);
    else
      t.inf_f_i[i] = std::abs(b) - q / (2.0 * strong_mu);
  }

  ProblemConstants& c = inst.constants;
  c.n = n;
  c.mu = strong_mu;
  double amax = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) amax = std::max(amax, rows.row(i).norm());
  c.G = amax + strong_mu * ball_B;
  c.B = ball_B;
  const double mean_inf_i = std::accumulate(t.inf_f_i.begin(), t.inf_f_i.end(), 0.0) / static_cast<double>(n);
  c.delta_star_f = std::max(0.0, t.inf_f - mean_inf_i);
  return inst;
}

CompositeProblem build_composite(const ProblemInstance& smooth, const Regularizer& reg) {
  require(smooth.problem->differentiable(), "composite problems need a differentiable smooth part");
  const double L = need(smooth.constants.L, "L");
  require(L > 0.0, "composite solver needs L > 0");
  const FiniteSumProblem& f = *smooth.problem;
  const double gamma = 1.0 / L;

  Vector x = prox(reg, gamma, smooth.truth.x_star);
  double step = kInfinity;
  constexpr std::size_t kBudget = 1000000;
  std::size_t it = 0;
  for (; it < kBudget; ++it) {
    const Vector next = prox(reg, gamma, x - gamma * f.grad(x));
    step = (next - x).norm();
    x = next;
    if (step <= 1e-12) break;
  }
  if (step > 1e-12)
    fail(ErrorCode::not_converged, "composite reference solver did not reach fixed-point residual 1e-12 (residual " +
                                       std::to_string(step) + " after " + std::to_string(kBudget) + " iterations)");

  CompositeProblem cp;
  cp.smooth = smooth;
  cp.reg = reg;
  cp.x_star_F = x;
  cp.inf_F = cp.F(x);
  cp.solver_residual = step;
  cp.provenance = Provenance::reference_solver;
  cp.sigma_star_F = gradient_variance(f, x);
  return cp;
}

double composite_noise(const CompositeProblem& problem) {
  if (!(problem.solver_residual <= 1e-12))
    fail(ErrorCode::not_converged,
         "composite reference solver not converged (residual " + std::to_string(problem.solver_residual) + ")");
  return gradient_variance(*problem.smooth.problem, problem.x_star_F);
}

MinibatchConstants minibatch_constants(double L, double L_max, double sigma_star_f, std::size_t n, std::size_t b) {
  if (b < 1 || b > n)
    fail(ErrorCode::invalid_argument, "b must satisfy 1 <= b <= n (b = " + std::to_string(b) +
                                          ", n = " + std::to_string(n) + ")");
  if (n == 1) return {L_max, 0.0};
  const double nd = static_cast<double>(n);
  const double bd = static_cast<double>(b);
  const double denom = bd * (nd - 1.0);
  return {nd * (bd - 1.0) / denom * L + (nd - bd) / denom * L_max, (nd - bd) / denom * sigma_star_f};
}

MinibatchConstants minibatch_constants(const ProblemConstants& c, std::size_t b) {
  return minibatch_constants(need(c.L, "L"), need(c.L_max, "L_max"), need(c.sigma_star_f, "sigma_star_f"), c.n, b);
}

// --- fixtures --------------------------------------------------------------

namespace {

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.begin()->size());
  Matrix m(n, d);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Matrix phi_4x2() { return rows_of({{1, 0}, {0, 1}, {1, 1}, {1, -1}}); }

ProblemInstance named(ProblemInstance inst, const std::string& name, const Vector& x0) {
  inst.name = name;
  inst.x0 = x0;
  return inst;
}

}  // namespace

std::vector<std::string> fixture_names() {
  return {"ls_4x2",  "ls_6x2",      "ls_rankdef", "ls_interp", "scalar_pl",
          "abs_2x1", "abs_4x2",     "abs_reg_4x2", "lasso_4x2", "ball_interp"};
}

Fixture fixture(const std::string& name) {
  if (name == "ls_4x2") return {named(build_least_squares(phi_4x2(), vec({1, 1, 0, 0})), name, vec({2, -1})), {}};
  if (name == "ls_6x2")
    return {named(build_least_squares(rows_of({{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 1}, {0.5, -1.5}}),
                                      vec({1, 2, 0, -1, 1, 0.5})),
                  name, vec({2, -1})),
            {}};
  if (name == "ls_rankdef")
    return {named(build_least_squares(rows_of({{1, 1}, {2, 2}, {1, 1}}), vec({1, 0, 2})), name, vec({2, -1})), {}};
  if (name == "ls_interp")
    return {named(build_least_squares(phi_4x2(), phi_4x2() * vec({1, -0.5})), name, vec({2, -1})), {}};
  if (name == "scalar_pl") return {build_scalar_pl(), {}};
  if (name == "abs_2x1")
    return {named(build_abs_loss(rows_of({{1}, {1}}), vec({1, -1}), 0.0, 2.0), name, vec({1.5})), {}};
  if (name == "abs_4x2")
    return {named(build_abs_loss(phi_4x2(), vec({1, 1, 0, 0}), 0.0, 2.0), name, vec({1, -1})), {}};
  if (name == "abs_reg_4x2")
    return {named(build_abs_loss(phi_4x2(), vec({1, 1, 0, 0}), 0.5, 2.0), name, vec({1, -1})), {}};
  if (name == "lasso_4x2") {
    Fixture fx{named(build_least_squares(phi_4x2(), vec({1, 1, 0, 0})), name, vec({2, -1})), {}};
    fx.composite = build_composite(fx.instance, Regularizer::l1(0.1));
    return fx;
  }
  if (name == "ball_interp") {
    Fixture fx{named(build_least_squares(phi_4x2(), phi_4x2() * vec({1, -0.5})), name, vec({1, 1})), {}};
    fx.composite = build_composite(fx.instance, Regularizer::ball(2.0));
    return fx;
  }
  fail(ErrorCode::invalid_argument, "unknown fixture '" + name + "'");
}

}  // namespace descentlab
