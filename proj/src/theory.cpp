#include "descentlab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace descentlab {

namespace {

struct SettingName {
  Setting setting;
  const char* name;
};

constexpr SettingName kNames[] = {
    {Setting::gd_convex, "gd_convex"},
    {Setting::gd_strongly_convex, "gd_strongly_convex"},
    {Setting::gd_pl, "gd_pl"},
    {Setting::sgd_convex_general, "sgd_convex_general"},
    {Setting::sgd_convex_const, "sgd_convex_const"},
    {Setting::sgd_convex_invsqrt, "sgd_convex_invsqrt"},
    {Setting::sgd_strongly_convex, "sgd_strongly_convex"},
    {Setting::sgd_pl, "sgd_pl"},
    {Setting::mini_convex_general, "mini_convex_general"},
    {Setting::mini_convex_const, "mini_convex_const"},
    {Setting::mini_strongly_convex, "mini_strongly_convex"},
    {Setting::momentum_convex, "momentum_convex"},
    {Setting::ssd_convex_general, "ssd_convex_general"},
    {Setting::ssd_convex_invsqrt, "ssd_convex_invsqrt"},
    {Setting::pssd_convex, "pssd_convex"},
    {Setting::ssd_strongly_convex, "ssd_strongly_convex"},
    {Setting::pgd_convex, "pgd_convex"},
    {Setting::pgd_strongly_convex, "pgd_strongly_convex"},
    {Setting::spgd_convex_general, "spgd_convex_general"},
    {Setting::spgd_convex_const, "spgd_convex_const"},
    {Setting::spgd_convex_invsqrt, "spgd_convex_invsqrt"},
    {Setting::spgd_strongly_convex, "spgd_strongly_convex"},
};

[[noreturn]] void violated(const std::string& constraint, double lhs, double rhs) {
  std::ostringstream os;
  os << std::setprecision(17) << "hypothesis violated: " << constraint << " (" << lhs << " vs " << rhs << ")";
  fail(ErrorCode::hypothesis_violation, os.str());
}

double positive(double v, const char* name) {
  if (!(v > 0.0)) fail(ErrorCode::invalid_argument, std::string("missing constant: ") + name + " (must be > 0)");
  return v;
}

double pl_modulus(const ProblemConstants& c) {
  if (c.mu_pl > 0.0) return c.mu_pl;
  return positive(c.mu, "mu_pl");
}

bool is_mini(Setting s) {
  return s == Setting::mini_convex_general || s == Setting::mini_convex_const || s == Setting::mini_strongly_convex;
}

}  // namespace

std::string to_string(Setting s) {
  for (const auto& e : kNames)
    if (e.setting == s) return e.name;
  return "unknown";
}

Setting setting_from_string(const std::string& name) {
  for (const auto& e : kNames)
    if (name == e.name) return e.setting;
  fail(ErrorCode::invalid_argument, "unknown setting '" + name + "'");
}

std::vector<Setting> all_settings() {
  std::vector<Setting> out;
  for (const auto& e : kNames) out.push_back(e.setting);
  return out;
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::f_gap:
      return "f_gap";
    case Metric::dist_sq:
      return "dist_sq";
    case Metric::avg_gap:
      return "avg_gap";
  }
  return "f_gap";
}

SettingProfile profile(Setting s) {
  using A = Algorithm;
  using M = Metric;
  using W = Averaging;
  switch (s) {
    case Setting::gd_convex:
      return {A::gd, M::f_gap, W::none, true, false, false};
    case Setting::gd_strongly_convex:
      return {A::gd, M::dist_sq, W::none, true, false, false};
    case Setting::gd_pl:
      return {A::gd, M::f_gap, W::none, true, false, false};
    case Setting::sgd_convex_general:
      return {A::sgd, M::avg_gap, W::p_tk, false, false, false};
    case Setting::sgd_convex_const:
      return {A::sgd, M::avg_gap, W::uniform, false, false, false};
    case Setting::sgd_convex_invsqrt:
      return {A::sgd, M::avg_gap, W::p_tk, false, false, false};
    case Setting::sgd_strongly_convex:
      return {A::sgd, M::dist_sq, W::none, false, false, false};
    case Setting::sgd_pl:
      return {A::sgd, M::f_gap, W::none, false, false, false};
    case Setting::mini_convex_general:
      return {A::minibatch_sgd, M::avg_gap, W::p_tk, false, false, true};
    case Setting::mini_convex_const:
      return {A::minibatch_sgd, M::avg_gap, W::uniform, false, false, true};
    case Setting::mini_strongly_convex:
      return {A::minibatch_sgd, M::dist_sq, W::none, false, false, true};
    case Setting::momentum_convex:
      return {A::momentum, M::f_gap, W::none, false, false, false};
    case Setting::ssd_convex_general:
      return {A::ssd, M::avg_gap, W::gamma_weighted, false, false, false};
    case Setting::ssd_convex_invsqrt:
      return {A::ssd, M::avg_gap, W::gamma_weighted, false, false, false};
    case Setting::pssd_convex:
      return {A::pssd, M::avg_gap, W::uniform, false, false, false};
    case Setting::ssd_strongly_convex:
      return {A::pssd, M::dist_sq, W::none, false, false, false};
    case Setting::pgd_convex:
      return {A::prox_gd, M::f_gap, W::none, true, true, false};
    case Setting::pgd_strongly_convex:
      return {A::prox_gd, M::dist_sq, W::none, true, true, false};
    case Setting::spgd_convex_general:
      return {A::prox_sgd, M::avg_gap, W::gamma_weighted, false, true, false};
    case Setting::spgd_convex_const:
      return {A::prox_sgd, M::avg_gap, W::uniform, false, true, false};
    case Setting::spgd_convex_invsqrt:
      return {A::prox_sgd, M::avg_gap, W::gamma_weighted, false, true, false};
    case Setting::spgd_strongly_convex:
      return {A::prox_sgd, M::dist_sq, W::none, false, true, false};
  }
  return {A::gd, M::f_gap, W::none, true, false, false};
}

TheoryInputs TheoryInputs::of(const ProblemInstance& instance, const Vector& x0) {
  TheoryInputs in;
  in.constants = instance.constants;
  in.D2 = (x0 - instance.truth.x_star).squaredNorm();
  in.f0_gap = instance.problem->value(x0) - instance.truth.inf_f;
  in.F0_gap = in.f0_gap;
  return in;
}

TheoryInputs TheoryInputs::of(const CompositeProblem& composite, const Vector& x0) {
  TheoryInputs in;
  in.constants = composite.smooth.constants;
  in.D2 = (x0 - composite.x_star_F).squaredNorm();
  in.f0_gap = composite.smooth.problem->value(x0) - composite.smooth.truth.inf_f;
  in.F0_gap = composite.F(x0) - composite.inf_F;
  in.sigma_star_F = composite.sigma_star_F;
  return in;
}

// --- bound curves ----------------------------------------------------------

namespace {

struct StepSums {
  double s1 = 0.0;  // sum gamma_k
  double s2 = 0.0;  // sum gamma_k^2
  double sw = 0.0;  // sum gamma_k (1 - 2 gamma_k Lw)
};

}  // namespace

BoundCurve bound_curve(Setting setting, const TheoryInputs& in, const StepSchedule& schedule) {
  BoundCurve c;
  c.setting_ = setting;
  c.inputs_ = in;
  c.schedule_ = schedule;
  const ProblemConstants& k = in.constants;
  require(in.D2 >= 0.0 && std::isfinite(in.D2), "D^2 must be finite and >= 0");

  auto need_constant = [&](const char* what) {
    if (!schedule.is_constant())
      fail(ErrorCode::hypothesis_violation,
           std::string("hypothesis violated: ") + what + " requires a constant step schedule");
  };
  auto need_kind = [&](ScheduleKind kind) {
    if (schedule.kind != kind)
      fail(ErrorCode::hypothesis_violation, "hypothesis violated: setting " + to_string(setting) + " requires a " +
                                                to_string(kind) + " schedule");
  };
  const double g0 = schedule.kind == ScheduleKind::momentum_pair ? schedule.gamma : schedule.gamma_at(0, 1);

  switch (setting) {
    case Setting::gd_convex:
    case Setting::pgd_convex:
      need_constant("gamma");
      c.L_ = need(k.L, "L");
      if (g0 > 1.0 / c.L_) violated("gamma <= 1/L", g0, 1.0 / c.L_);
      c.min_t_ = 1;
      break;
    case Setting::gd_strongly_convex:
    case Setting::pgd_strongly_convex:
      need_constant("gamma");
      c.L_ = need(k.L, "L");
      c.mu_ = positive(k.mu, "mu");
      if (g0 > 1.0 / c.L_) violated("gamma <= 1/L", g0, 1.0 / c.L_);
      break;
    case Setting::gd_pl:
      need_constant("gamma");
      c.L_ = need(k.L, "L");
      c.mu_ = pl_modulus(k);
      if (g0 > 1.0 / c.L_) violated("gamma <= 1/L", g0, 1.0 / c.L_);
      break;
    case Setting::sgd_convex_general:
    case Setting::sgd_convex_const:
    case Setting::sgd_convex_invsqrt:
    case Setting::sgd_strongly_convex:
    case Setting::mini_convex_general:
    case Setting::mini_convex_const:
    case Setting::mini_strongly_convex: {
      const bool mini = is_mini(setting);
      const char* lname = mini ? "L_b" : "L_max";
      if (mini) {
        const MinibatchConstants mb = minibatch_constants(k, in.batch_size);
        c.Lmax_ = mb.L_b;
        c.sigma_ = mb.sigma_b;
      } else {
        c.Lmax_ = need(k.L_max, "L_max");
        c.sigma_ = need(k.sigma_star_f, "sigma_star_f");
      }
      const double cap = 1.0 / (2.0 * c.Lmax_);
      const std::string cap_name = std::string("1/(2") + lname + ")";
      if (setting == Setting::sgd_convex_general || setting == Setting::mini_convex_general) {
        if (!(g0 < cap)) violated("gamma_t < " + cap_name, g0, cap);
        c.averaging_L_ = c.Lmax_;
        c.min_t_ = 1;
      } else if (setting == Setting::sgd_convex_const || setting == Setting::mini_convex_const) {
        need_constant("gamma");
        if (!(g0 < cap)) violated("gamma < " + cap_name, g0, cap);
        c.min_t_ = 1;
      } else if (setting == Setting::sgd_convex_invsqrt) {
        need_kind(ScheduleKind::inv_sqrt);
        if (g0 > cap) violated("gamma <= " + cap_name, g0, cap);
        c.averaging_L_ = c.Lmax_;
        c.min_t_ = 49;
      } else {
        need_constant("gamma");
        c.mu_ = positive(k.mu, "mu");
        if (g0 > cap) violated("gamma <= " + cap_name, g0, cap);
      }
      break;
    }
    case Setting::sgd_pl: {
      need_constant("gamma");
      c.L_ = need(k.L, "L");
      c.Lmax_ = need(k.L_max, "L_max");
      c.delta_ = need(k.delta_star_f, "delta_star_f");
      c.mu_ = pl_modulus(k);
      const double cap = c.mu_ / (c.L_ * c.Lmax_);
      if (g0 > cap) violated("gamma <= mu/(L*L_max)", g0, cap);
      break;
    }
    case Setting::momentum_convex: {
      need_kind(ScheduleKind::momentum_pair);
      c.Lmax_ = need(k.L_max, "L_max");
      c.sigma_ = need(k.sigma_star_f, "sigma_star_f");
      const double cap = 1.0 / (4.0 * c.Lmax_);
      if (schedule.gamma > cap) violated("eta <= 1/(4L_max)", schedule.gamma, cap);
      break;
    }
    case Setting::ssd_convex_general:
      c.G_ = need(k.G, "G");
      c.min_t_ = 1;
      break;
    case Setting::ssd_convex_invsqrt:
      need_kind(ScheduleKind::inv_sqrt);
      c.G_ = need(k.G, "G");
      c.min_t_ = 2;
      break;
    case Setting::pssd_convex:
      need_kind(ScheduleKind::inv_sqrt);
      c.G_ = need(k.G, "G");
      c.B_ = need(k.B, "B");
      c.min_t_ = 2;
      break;
    case Setting::ssd_strongly_convex:
      need_constant("gamma");
      c.G_ = need(k.G, "G");
      c.mu_ = positive(k.mu, "mu");
      if (g0 > 1.0 / c.mu_) violated("gamma <= 1/mu", g0, 1.0 / c.mu_);
      break;
    case Setting::spgd_convex_general:
    case Setting::spgd_convex_const:
    case Setting::spgd_convex_invsqrt: {
      c.Lmax_ = need(k.L_max, "L_max");
      c.sigma_ = need(in.sigma_star_F, "sigma_star_F");
      const double cap = 1.0 / (4.0 * c.Lmax_);
      if (setting == Setting::spgd_convex_const) {
        need_constant("gamma");
        if (!(g0 < cap)) violated("gamma < 1/(4L_max)", g0, cap);
      } else {
        if (setting == Setting::spgd_convex_invsqrt) need_kind(ScheduleKind::inv_sqrt);
        if (!(g0 < cap)) violated("gamma_0 < 1/(4L_max)", g0, cap);
      }
      c.min_t_ = setting == Setting::spgd_convex_invsqrt ? 3 : 1;
      break;
    }
    case Setting::spgd_strongly_convex: {
      need_constant("gamma");
      c.Lmax_ = need(k.L_max, "L_max");
      c.sigma_ = need(in.sigma_star_F, "sigma_star_F");
      c.mu_ = positive(k.mu, "mu");
      const double cap = 1.0 / (2.0 * c.Lmax_);
      if (g0 > cap) violated("gamma <= 1/(2L_max)", g0, cap);
      break;
    }
  }
  return c;
}

std::string BoundCurve::validity() const { return "t >= " + std::to_string(min_t_); }

BoundCurve BoundCurve::scaled(double factor) const {
  BoundCurve c = *this;
  c.scale_ *= factor;
  return c;
}

double BoundCurve::eval(std::size_t t) const {
  if (t < min_t_)
    fail(ErrorCode::invalid_argument, "t = " + std::to_string(t) + " is outside the validity window " + validity() +
                                          " of " + to_string(setting_));
  const double td = static_cast<double>(t);
  const double D2 = inputs_.D2;
  const double gamma = schedule_.kind == ScheduleKind::momentum_pair ? schedule_.gamma : schedule_.gamma_at(0, t);

  auto sums = [&](double Lw, const char* constraint, double cap, bool strict, bool nonincreasing) {
    StepSums s;
    double prev = kInfinity;
    for (std::size_t j = 0; j < t; ++j) {
      const double g = schedule_.gamma_at(j, t);
      if (!(g > 0.0)) violated("gamma_t > 0", g, 0.0);
      if (cap > 0.0 && (strict ? !(g < cap) : g > cap)) violated(constraint, g, cap);
      if (nonincreasing && g > prev) violated("nonincreasing step sizes", g, prev);
      prev = g;
      s.s1 += g;
      s.s2 += g * g;
      s.sw += g * (1.0 - 2.0 * g * Lw);
    }
    return s;
  };
  auto contraction = [&](double g, double mu) { return std::pow(std::max(0.0, 1.0 - g * mu), td); };

  double v = 0.0;
  switch (setting_) {
    case Setting::gd_convex:
    case Setting::pgd_convex:
      if (gamma > 1.0 / L_) violated("gamma <= 1/L", gamma, 1.0 / L_);
      v = D2 / (2.0 * gamma * td);
      break;
    case Setting::gd_strongly_convex:
    case Setting::pgd_strongly_convex:
      v = contraction(gamma, mu_) * D2;
      break;
    case Setting::gd_pl:
      v = contraction(gamma, mu_) * inputs_.f0_gap;
      break;
    case Setting::sgd_convex_general:
    case Setting::mini_convex_general: {
      const StepSums s = sums(Lmax_, is_mini(setting_) ? "gamma_t < 1/(2L_b)" : "gamma_t < 1/(2L_max)",
                              1.0 / (2.0 * Lmax_), true, false);
      v = D2 / (2.0 * s.sw) + s.s2 / s.sw * sigma_;
      break;
    }
    case Setting::sgd_convex_const:
    case Setting::mini_convex_const: {
      const double cap = 1.0 / (2.0 * Lmax_);
      if (!(gamma < cap)) violated(is_mini(setting_) ? "gamma < 1/(2L_b)" : "gamma < 1/(2L_max)", gamma, cap);
      const double shrink = 1.0 - 2.0 * gamma * Lmax_;
      v = D2 / (2.0 * gamma * shrink * td) + gamma * sigma_ / shrink;
      break;
    }
    case Setting::sgd_convex_invsqrt:
      v = D2 / (2.0 * gamma * std::sqrt(td)) + gamma * std::log(td) / std::sqrt(td) * sigma_;
      break;
    case Setting::sgd_strongly_convex:
    case Setting::mini_strongly_convex:
    case Setting::spgd_strongly_convex:
      v = contraction(gamma, mu_) * D2 + 2.0 * gamma * sigma_ / mu_;
      break;
    case Setting::sgd_pl:
      v = contraction(gamma, mu_) * inputs_.f0_gap + gamma * L_ * Lmax_ * delta_ / mu_;
      break;
    case Setting::momentum_convex:
      v = D2 / (gamma * (td + 1.0)) + 2.0 * gamma * sigma_;
      break;
    case Setting::ssd_convex_general: {
      const StepSums s = sums(0.0, "", 0.0, false, false);
      v = D2 / (2.0 * s.s1) + s.s2 * G_ * G_ / (2.0 * s.s1);
      break;
    }
    case Setting::ssd_convex_invsqrt: {
      const double root = std::sqrt(td) - 1.0;
      v = D2 / (4.0 * gamma * root) + gamma * G_ * G_ * std::log(td) / (4.0 * root);
      break;
    }
    case Setting::pssd_convex:
      v = (3.0 * B_ * B_ / gamma + gamma * G_ * G_) / std::sqrt(td);
      break;
    case Setting::ssd_strongly_convex:
      v = contraction(gamma, mu_) * D2 + gamma * G_ * G_ / mu_;
      break;
    case Setting::spgd_convex_general: {
      const double g0 = schedule_.gamma_at(0, t);
      const StepSums s = sums(0.0, "gamma_0 < 1/(4L_max)", 0.0, false, true);
      const double shrink = 1.0 - 4.0 * g0 * Lmax_;
      v = (D2 + 2.0 * g0 * inputs_.F0_gap) / (2.0 * shrink * s.s1) + 2.0 * sigma_ / shrink * s.s2 / s.s1;
      break;
    }
    case Setting::spgd_convex_const: {
      const double shrink = 1.0 - 4.0 * gamma * Lmax_;
      if (!(shrink > 0.0)) violated("gamma < 1/(4L_max)", gamma, 1.0 / (4.0 * Lmax_));
      v = (D2 + 2.0 * gamma * inputs_.F0_gap) / (2.0 * shrink * gamma * td) + 2.0 * sigma_ * gamma / shrink;
      break;
    }
    case Setting::spgd_convex_invsqrt: {
      // sum gamma_s >= 2 gamma_0 (sqrt t - sqrt 2), sum gamma_s^2 <= gamma_0^2 ln t
      const double shrink = 1.0 - 4.0 * gamma * Lmax_;
      const double s1 = 2.0 * gamma * (std::sqrt(td) - std::sqrt(2.0));
      v = (D2 + 2.0 * gamma * inputs_.F0_gap) / (2.0 * shrink * s1) +
          2.0 * sigma_ / shrink * gamma * gamma * std::log(td) / s1;
      break;
    }
  }
  return scale_ * std::max(v, 0.0);
}

// --- complexity ------------------------------------------------------------

std::size_t ceil_snap(double x) {
  if (!(x > 0.0)) return 0;
  if (!std::isfinite(x)) fail(ErrorCode::invalid_argument, "iteration count is not finite");
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

double itercomplex_iterations(double rho, double epsilon) {
  require(rho >= 0.0 && rho < 1.0, "contraction factor rho must lie in [0, 1)");
  require(epsilon > 0.0, "epsilon must be > 0");
  return std::max(0.0, std::log(1.0 / epsilon)) / (1.0 - rho);
}

LinearPlusConst linear_plus_const(double A, double C, double mu, double alpha0, double epsilon) {
  require(epsilon > 0.0, "epsilon must be > 0");
  require(mu > 0.0, "mu must be > 0");
  require(A >= 0.0 && C >= 0.0, "A and C must be >= 0");
  LinearPlusConst out;
  const double g_noise = A > 0.0 ? epsilon / (2.0 * A) : kInfinity;
  const double g_cap = C > 0.0 ? 1.0 / C : kInfinity;
  out.gamma = std::min(g_noise, g_cap);
  const double factor = std::max(A > 0.0 ? 2.0 * A / (epsilon * mu) : 0.0, C / mu);
  const double lg = alpha0 > 0.0 ? std::log(2.0 * alpha0 / epsilon) : 0.0;
  out.t = factor * std::max(0.0, lg);
  return out;
}

bool has_complexity(Setting s) {
  switch (s) {
    case Setting::gd_convex:
    case Setting::gd_strongly_convex:
    case Setting::gd_pl:
    case Setting::sgd_convex_const:
    case Setting::sgd_strongly_convex:
    case Setting::sgd_pl:
    case Setting::mini_convex_const:
    case Setting::mini_strongly_convex:
    case Setting::momentum_convex:
    case Setting::ssd_convex_general:
    case Setting::ssd_strongly_convex:
    case Setting::pgd_convex:
    case Setting::pgd_strongly_convex:
    case Setting::spgd_convex_const:
    case Setting::spgd_strongly_convex:
      return true;
    default:
      return false;
  }
}

ComplexityAnswer complexity_iterations(Setting setting, const TheoryInputs& in, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    fail(ErrorCode::invalid_argument, "epsilon must be > 0 (got " + std::to_string(epsilon) + ")");
  if (!has_complexity(setting))
    fail(ErrorCode::invalid_argument, "no complexity result for setting " + to_string(setting));
  const ProblemConstants& k = in.constants;
  ComplexityAnswer a;
  a.setting = setting;
  a.epsilon = epsilon;
  a.target = epsilon;
  const double D2 = in.D2;
  const double log_inv = std::max(0.0, std::log(1.0 / epsilon));

  auto sublinear = [](double t) { return std::max<std::size_t>(1, ceil_snap(t)); };

  switch (setting) {
    case Setting::gd_convex:
    case Setting::pgd_convex: {
      const double L = need(k.L, "L");
      a.recommended_gamma = 1.0 / L;
      a.t_min = sublinear(L * D2 / (2.0 * epsilon));
      a.formula = "L*D^2/(2*eps)";
      break;
    }
    case Setting::gd_strongly_convex:
    case Setting::pgd_strongly_convex:
    case Setting::gd_pl: {
      const double L = need(k.L, "L");
      const double mu = setting == Setting::gd_pl ? pl_modulus(k) : positive(k.mu, "mu");
      a.recommended_gamma = 1.0 / L;
      a.t_min = ceil_snap(L / mu * log_inv);
      a.formula = "(L/mu)*log(1/eps)";
      a.relative = true;
      a.target = epsilon * (setting == Setting::gd_pl ? in.f0_gap : D2);
      break;
    }
    case Setting::sgd_convex_const:
    case Setting::mini_convex_const: {
      double Lw = 0.0, sigma = 0.0;
      if (setting == Setting::mini_convex_const) {
        const MinibatchConstants mb = minibatch_constants(k, in.batch_size);
        Lw = mb.L_b;
        sigma = mb.sigma_b;
      } else {
        Lw = need(k.L_max, "L_max");
        sigma = need(k.sigma_star_f, "sigma_star_f");
      }
      const double root = 2.0 * Lw * D2 + sigma / Lw;
      a.t_min = std::max<std::size_t>(4, ceil_snap(root * root / (epsilon * epsilon)));
      a.recommended_gamma = 1.0 / (2.0 * Lw * std::sqrt(static_cast<double>(a.t_min)));
      a.formula = setting == Setting::mini_convex_const ? "max(4, (2*L_b*D^2 + sigma_b/L_b)^2/eps^2)"
                                                        : "max(4, (2*L_max*D^2 + sigma/L_max)^2/eps^2)";
      break;
    }
    case Setting::sgd_strongly_convex:
    case Setting::mini_strongly_convex: {
      double Lw = 0.0, sigma = 0.0;
      if (setting == Setting::mini_strongly_convex) {
        const MinibatchConstants mb = minibatch_constants(k, in.batch_size);
        Lw = mb.L_b;
        sigma = mb.sigma_b;
      } else {
        Lw = need(k.L_max, "L_max");
        sigma = need(k.sigma_star_f, "sigma_star_f");
      }
      const double mu = positive(k.mu, "mu");
      const LinearPlusConst r = linear_plus_const(2.0 * sigma / mu, 2.0 * Lw, mu, D2, epsilon);
      a.recommended_gamma = r.gamma;
      a.t_min = ceil_snap(r.t);
      a.formula = "max(4*sigma/(eps*mu^2), 2*L/mu)*log(2*D^2/eps)";
      break;
    }
    case Setting::sgd_pl: {
      const double L = need(k.L, "L");
      const double Lmax = need(k.L_max, "L_max");
      const double delta = need(k.delta_star_f, "delta_star_f");
      const double mu = pl_modulus(k);
      const LinearPlusConst r = linear_plus_const(L * Lmax * delta / mu, L * Lmax / mu, mu, in.f0_gap, epsilon);
      a.recommended_gamma = r.gamma;
      a.t_min = ceil_snap(r.t);
      a.formula = "(L*L_max/mu^2)*max(2*delta/eps, 1)*log(2*f0/eps)";
      break;
    }
    case Setting::momentum_convex: {
      const double Lmax = need(k.L_max, "L_max");
      const double sigma = need(k.sigma_star_f, "sigma_star_f");
      // eta = 1/(4 L_max sqrt(T+1)) in D^2/(eta (T+1)) + 2 eta sigma gives (8 L_max^2 D^2 + sigma)/(2 L_max sqrt(T+1))
      const double inner = 8.0 * Lmax * Lmax * D2 + sigma;
      a.t_min = ceil_snap(std::max(inner * inner / (4.0 * Lmax * Lmax * epsilon * epsilon) - 1.0, 0.0));
      a.recommended_gamma = 1.0 / (4.0 * Lmax * std::sqrt(static_cast<double>(a.t_min) + 1.0));
      a.formula = "(8*L_max^2*D^2 + sigma)^2/(4*L_max^2*eps^2) - 1";
      break;
    }
    case Setting::ssd_convex_general: {
      const double G = positive(need(k.G, "G"), "G");
      const double D = std::sqrt(D2);
      if (D > 0.0) {
        a.t_min = sublinear(D2 * G * G / (epsilon * epsilon));
        a.recommended_gamma = D / (G * std::sqrt(static_cast<double>(a.t_min)));
      } else {
        a.t_min = 1;
        a.recommended_gamma = epsilon / (G * G);
      }
      a.formula = "D^2*G^2/eps^2";
      break;
    }
    case Setting::ssd_strongly_convex: {
      const double G = need(k.G, "G");
      const double B = need(k.B, "B");
      const double mu = positive(k.mu, "mu");
      a.recommended_gamma = std::min(epsilon * mu / (2.0 * G * G), 1.0 / mu);
      a.t_min = ceil_snap(std::max(2.0 * G * G / (epsilon * mu * mu), 1.0) *
                          std::max(0.0, std::log(8.0 * B * B / epsilon)));
      a.formula = "max(2*G^2/(eps*mu^2), 1)*log(8*B^2/eps)";
      break;
    }
    case Setting::spgd_convex_const: {
      const double Lmax = need(k.L_max, "L_max");
      const double sigma = need(in.sigma_star_F, "sigma_star_F");
      if (epsilon > sigma / Lmax) violated("eps <= sigma_star_F/L_max", epsilon, sigma / Lmax);
      a.recommended_gamma = epsilon / (8.0 * sigma);
      const double C0 = 16.0 * (D2 + in.F0_gap / (4.0 * Lmax));
      a.t_min = sublinear(C0 * sigma / (epsilon * epsilon));
      a.formula = "16*(D^2 + F0/(4*L_max))*sigma_F/eps^2";
      break;
    }
    case Setting::spgd_strongly_convex: {
      const double Lmax = need(k.L_max, "L_max");
      const double sigma = need(in.sigma_star_F, "sigma_star_F");
      const double mu = positive(k.mu, "mu");
      const LinearPlusConst r = linear_plus_const(2.0 * sigma / mu, 2.0 * Lmax, mu, D2, epsilon);
      a.recommended_gamma = r.gamma;
      a.t_min = ceil_snap(r.t);
      a.formula = "max(4*sigma_F/(eps*mu^2), 2*L_max/mu)*log(2*D^2/eps)";
      break;
    }
    default:
      break;
  }
  return a;
}

StepSchedule recommended_schedule(const ComplexityAnswer& answer) {
  require(answer.recommended_gamma.has_value(), "complexity answer has no recommended step size");
  if (answer.setting == Setting::momentum_convex) return StepSchedule::momentum_pair(*answer.recommended_gamma);
  return StepSchedule::constant(*answer.recommended_gamma);
}

// --- table -----------------------------------------------------------------

TableInputs TableInputs::from_fixtures() {
  TableInputs in;
  const Fixture ls = fixture("ls_4x2");
  in.smooth = TheoryInputs::of(ls.instance, ls.instance.x0);
  const Fixture abs = fixture("abs_2x1");
  in.lipschitz = TheoryInputs::of(abs.instance, abs.instance.x0);
  const Fixture lasso = fixture("lasso_4x2");
  in.composite = TheoryInputs::of(*lasso.composite, lasso.composite->smooth.x0);
  in.batch_size = 2;
  return in;
}

ComplexityTable complexity_table(const TableInputs& in, double epsilon) {
  ComplexityTable table;
  table.epsilon = epsilon;
  table.methods = {"GD", "SGD", "mini-SGD", "momentum", "prox-GD", "prox-SGD"};
  table.columns = {"convex L-smooth", "convex G-Lipschitz", "strongly convex", "PL"};

  struct Spec {
    std::optional<Setting> setting;
    const std::optional<TheoryInputs>* source;
    const char* source_name;
  };
  const auto* smooth = &in.smooth;
  const auto* lip = &in.lipschitz;
  const auto* comp = &in.composite;
  const Spec none{std::nullopt, nullptr, ""};
  const Spec grid[6][4] = {
      {{Setting::gd_convex, smooth, "smooth"}, {Setting::ssd_convex_general, lip, "lipschitz"},
       {Setting::gd_strongly_convex, smooth, "smooth"}, {Setting::gd_pl, smooth, "smooth"}},
      {{Setting::sgd_convex_const, smooth, "smooth"}, {Setting::ssd_convex_general, lip, "lipschitz"},
       {Setting::sgd_strongly_convex, smooth, "smooth"}, {Setting::sgd_pl, smooth, "smooth"}},
      {{Setting::mini_convex_const, smooth, "smooth"}, none, {Setting::mini_strongly_convex, smooth, "smooth"}, none},
      {{Setting::momentum_convex, smooth, "smooth"}, none, none, none},
      {{Setting::pgd_convex, comp, "composite"}, none, {Setting::pgd_strongly_convex, comp, "composite"}, none},
      {{Setting::spgd_convex_const, comp, "composite"}, none, {Setting::spgd_strongly_convex, comp, "composite"},
       none},
  };

  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      const Spec& s = grid[r][c];
      TableCell cell;
      cell.method = table.methods[r];
      cell.column = table.columns[c];
      if (s.setting) {
        if (!s.source->has_value())
          fail(ErrorCode::invalid_argument, std::string("missing table inputs: ") + s.source_name);
        TheoryInputs ti = **s.source;
        ti.batch_size = in.batch_size;
        cell.covered = true;
        cell.setting = s.setting;
        try {
          cell.t_min = complexity_iterations(*s.setting, ti, epsilon).t_min;
        } catch (const Error& e) {
          // the corollary exists but does not apply at this epsilon
          if (e.code() != ErrorCode::hypothesis_violation) throw;
          const std::string what = e.what();
          const auto open = what.find(": "), paren = what.find(" (");
          cell.note = "n/a (" + what.substr(open + 2, paren - open - 2) + ")";
        }
      }
      table.cells.push_back(cell);
    }
  }
  return table;
}

std::string TableCell::render() const {
  if (!covered) return "not covered";
  if (!note.empty()) return note;
  return std::to_string(t_min);
}

std::string ComplexityTable::text() const {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"method"});
  for (const auto& c : columns) grid.back().push_back(c);
  for (std::size_t r = 0; r < methods.size(); ++r) {
    grid.push_back({methods[r]});
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const TableCell& cell = cells[r * columns.size() + c];
      grid.back().push_back(cell.render());
    }
  }
  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& row : grid)
    for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
  std::ostringstream os;
  os << "iteration complexity, eps = " << format_double(epsilon) << "\n";
  for (const auto& row : grid) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) os << "  ";
      os << std::left << std::setw(static_cast<int>(width[j])) << row[j];
    }
    os << "\n";
  }
  return os.str();
}

std::string ComplexityTable::csv() const {
  std::ostringstream os;
  os << "method,column,setting,t_min\n";
  for (const auto& cell : cells) {
    os << cell.method << ',' << cell.column << ',' << (cell.setting ? to_string(*cell.setting) : "") << ','
       << cell.render() << '\n';
  }
  return os.str();
}

}  // namespace descentlab
