#include "descentlab/descentlab.h"

#include "descentlab/commands.hpp"

#include <cmath>
#include <cstring>
#include <exception>
#include <sstream>
#include <string>

using namespace descentlab;

struct dl_problem {
  Fixture fixture;
};

struct dl_trace {
  Trace trace;
};

namespace {

thread_local std::string g_last_error;

dl_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
      return DL_ERR_INVALID_ARGUMENT;
    case ErrorCode::hypothesis_violation:
      return DL_ERR_HYPOTHESIS;
    case ErrorCode::divergence:
      return DL_ERR_DIVERGENCE;
    case ErrorCode::not_converged:
      return DL_ERR_NOT_CONVERGED;
    case ErrorCode::config:
      return DL_ERR_CONFIG;
    case ErrorCode::io:
      return DL_ERR_IO;
    case ErrorCode::verdict_failed:
      return DL_ERR_VERDICT_FAILED;
  }
  return DL_ERR_INTERNAL;
}

template <class F>
dl_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return DL_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return DL_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal error";
    return DL_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void not_null(const void* p, const char* name) {
  if (!p) fail(ErrorCode::invalid_argument, std::string(name) + " must not be NULL");
}

void copy_out(const Vector& v, double* out, size_t len) {
  not_null(out, "out");
  if (len != static_cast<size_t>(v.size()))
    fail(ErrorCode::invalid_argument, "buffer length " + std::to_string(len) + " does not match dimension " +
                                          std::to_string(v.size()));
  for (size_t i = 0; i < len; ++i) out[i] = v[static_cast<Eigen::Index>(i)];
}

Vector copy_in(const double* x, size_t len, size_t d) {
  not_null(x, "x");
  if (len != d)
    fail(ErrorCode::invalid_argument, "vector length " + std::to_string(len) + " does not match dimension " +
                                          std::to_string(d));
  Vector v(static_cast<Eigen::Index>(len));
  for (size_t i = 0; i < len; ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return v;
}

ExperimentConfig fragment(const char* json_text) {
  return parse_config(json_text && *json_text ? json_text : "{}");
}

CommandOptions options_of(const dl_command_options* o) {
  CommandOptions opts;
  if (!o) return opts;
  if (o->out_dir) opts.out_dir = o->out_dir;
  opts.jobs = o->jobs == 0 ? 1 : o->jobs;
  if (o->has_seed_override) opts.seed_override = o->seed_override;
  return opts;
}

dl_status command(CommandOutput (*fn)(const std::string&, const CommandOptions&), const char* path,
                  const dl_command_options* options, char** output) {
  if (output) *output = nullptr;
  bool ok = true;
  const dl_status st = guarded([&] {
    not_null(path, "config_path");
    const CommandOutput r = fn(path, options_of(options));
    ok = r.ok;
    if (output) *output = dup_string(r.text);
    if (!ok) g_last_error = "verdict failed";
  });
  if (st == DL_OK && !ok) {
    g_last_error = "verdict failed";
    return DL_ERR_VERDICT_FAILED;
  }
  return st;
}

}  // namespace

extern "C" {

const char* dl_version(void) {
  static const std::string v = version();
  return v.c_str();
}

const char* dl_status_name(dl_status status) {
  switch (status) {
    case DL_OK:
      return "ok";
    case DL_ERR_INVALID_ARGUMENT:
      return "invalid_argument";
    case DL_ERR_HYPOTHESIS:
      return "hypothesis_violation";
    case DL_ERR_DIVERGENCE:
      return "divergence";
    case DL_ERR_NOT_CONVERGED:
      return "not_converged";
    case DL_ERR_CONFIG:
      return "config";
    case DL_ERR_IO:
      return "io";
    case DL_ERR_VERDICT_FAILED:
      return "verdict_failed";
    case DL_ERR_INTERNAL:
      return "internal";
  }
  return "unknown";
}

const char* dl_last_error(void) { return g_last_error.c_str(); }

void dl_string_free(char* s) { std::free(s); }

dl_status dl_problem_fixture(const char* name, dl_problem** out) {
  return guarded([&] {
    not_null(name, "name");
    not_null(out, "out");
    *out = new dl_problem{load_fixture(name)};
  });
}

dl_status dl_problem_least_squares(const double* features, const double* targets, size_t n, size_t d,
                                   dl_problem** out) {
  return guarded([&] {
    not_null(features, "features");
    not_null(targets, "targets");
    not_null(out, "out");
    require(n >= 1 && d >= 1, "n and d must be >= 1");
    Matrix phi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    Vector y(static_cast<Eigen::Index>(n));
    for (size_t i = 0; i < n; ++i) {
      y[static_cast<Eigen::Index>(i)] = targets[i];
      for (size_t j = 0; j < d; ++j)
        phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features[i * d + j];
    }
    Fixture fx{build_least_squares(phi, y), {}};
    fx.instance.name = "inline";
    *out = new dl_problem{std::move(fx)};
  });
}

dl_status dl_problem_set_regularizer(dl_problem* problem, const char* kind, double param) {
  return guarded([&] {
    not_null(problem, "problem");
    not_null(kind, "kind");
    const std::string k = kind;
    Regularizer reg;
    if (k == "l1")
      reg = Regularizer::l1(param);
    else if (k == "ball")
      reg = Regularizer::ball(param);
    else if (k == "zero") {
      problem->fixture.composite.reset();
      return;
    } else
      fail(ErrorCode::invalid_argument, "unknown regularizer '" + k + "' (l1, ball, zero)");
    problem->fixture.composite = build_composite(problem->fixture.instance, reg);
  });
}

void dl_problem_free(dl_problem* problem) { delete problem; }

dl_status dl_problem_size(const dl_problem* problem, size_t* n, size_t* d) {
  return guarded([&] {
    not_null(problem, "problem");
    if (n) *n = problem->fixture.instance.problem->n();
    if (d) *d = problem->fixture.instance.problem->dim();
  });
}

dl_status dl_problem_constant(const dl_problem* problem, const char* name, double* out) {
  return guarded([&] {
    not_null(problem, "problem");
    not_null(name, "name");
    not_null(out, "out");
    const ProblemInstance& inst = problem->fixture.instance;
    const ProblemConstants& k = inst.constants;
    const std::string s = name;
    const auto& comp = problem->fixture.composite;
    if (s == "L") *out = need(k.L, "L");
    else if (s == "L_max") *out = need(k.L_max, "L_max");
    else if (s == "L_avg") *out = need(k.L_avg, "L_avg");
    else if (s == "mu") *out = k.mu;
    else if (s == "mu_pl") *out = k.mu_pl;
    else if (s == "sigma_star_f") *out = need(k.sigma_star_f, "sigma_star_f");
    else if (s == "delta_star_f") *out = need(k.delta_star_f, "delta_star_f");
    else if (s == "G") *out = need(k.G, "G");
    else if (s == "B") *out = need(k.B, "B");
    else if (s == "inf_f") *out = inst.truth.inf_f;
    else if (s == "inf_F" || s == "sigma_star_F") {
      if (!comp) fail(ErrorCode::invalid_argument, std::string("missing constant: ") + s + " (no regularizer)");
      *out = s == "inf_F" ? comp->inf_F : comp->sigma_star_F;
    } else
      fail(ErrorCode::invalid_argument, "unknown constant '" + s + "'");
  });
}

dl_status dl_problem_minimizer(const dl_problem* problem, double* out, size_t len) {
  return guarded([&] {
    not_null(problem, "problem");
    const auto& fx = problem->fixture;
    copy_out(fx.composite ? fx.composite->x_star_F : fx.instance.truth.x_star, out, len);
  });
}

dl_status dl_problem_start(const dl_problem* problem, double* out, size_t len) {
  return guarded([&] {
    not_null(problem, "problem");
    copy_out(problem->fixture.instance.x0, out, len);
  });
}

dl_status dl_problem_objective(const dl_problem* problem, const double* x, size_t len, double* out) {
  return guarded([&] {
    not_null(problem, "problem");
    not_null(out, "out");
    const auto& fx = problem->fixture;
    const Vector v = copy_in(x, len, fx.instance.problem->dim());
    *out = fx.composite ? fx.composite->F(v) : fx.instance.problem->value(v);
  });
}

dl_status dl_run(const dl_problem* problem, const char* run_json, size_t trial, dl_trace** out) {
  return guarded([&] {
    not_null(problem, "problem");
    not_null(out, "out");
    const ExperimentConfig cfg = fragment(run_json);
    if (!cfg.schedule) fail(ErrorCode::config, "field 'schedule': missing");
    const Experiment ex = resolve_on(cfg, problem->fixture);
    RunConfig rc = ex.run;
    rc.keep_iterates = false;
    *out = new dl_trace{run(ex.target, rc, trial)};
  });
}

void dl_trace_free(dl_trace* trace) { delete trace; }

size_t dl_trace_length(const dl_trace* trace) { return trace ? trace->trace.rows.size() : 0; }

dl_status dl_trace_row_at(const dl_trace* trace, size_t i, dl_trace_row* out) {
  return guarded([&] {
    not_null(trace, "trace");
    not_null(out, "out");
    require(i < trace->trace.rows.size(), "row index out of range");
    const TraceRow& r = trace->trace.rows[i];
    *out = dl_trace_row{r.t, r.gamma_t, r.f_gap, r.dist_sq, r.avg_gap};
  });
}

dl_status dl_trace_last(const dl_trace* trace, double* out, size_t len) {
  return guarded([&] {
    not_null(trace, "trace");
    copy_out(trace->trace.last, out, len);
  });
}

dl_status dl_trace_csv(const dl_trace* trace, char** out) {
  return guarded([&] {
    not_null(trace, "trace");
    not_null(out, "out");
    std::ostringstream os;
    write_trace_csv_header(os);
    write_trace_csv(os, trace->trace);
    *out = dup_string(os.str());
  });
}

dl_status dl_bound_eval(const char* setting, const dl_problem* problem, const char* schedule_json, size_t batch_size,
                        size_t t, double* out) {
  return guarded([&] {
    not_null(setting, "setting");
    not_null(problem, "problem");
    not_null(schedule_json, "schedule_json");
    not_null(out, "out");
    ExperimentConfig cfg = parse_config(std::string("{\"schedule\": ") + schedule_json + "}");
    cfg.setting = setting_from_string(setting);
    cfg.b = batch_size == 0 ? 1 : batch_size;
    const Experiment ex = resolve_on(cfg, problem->fixture);
    *out = bound_curve(*cfg.setting, ex.inputs, ex.run.schedule).eval(t);
  });
}

dl_status dl_complexity(const char* setting, const dl_problem* problem, double epsilon, size_t batch_size,
                        size_t* t_min, double* gamma) {
  return guarded([&] {
    not_null(setting, "setting");
    not_null(problem, "problem");
    const Setting s = setting_from_string(setting);
    const auto& fx = problem->fixture;
    TheoryInputs in;
    if (profile(s).composite) {
      if (!fx.composite) fail(ErrorCode::invalid_argument, "setting " + to_string(s) + " needs a regularizer");
      in = TheoryInputs::of(*fx.composite, fx.instance.x0);
    } else {
      in = TheoryInputs::of(fx.instance, fx.instance.x0);
    }
    in.batch_size = batch_size == 0 ? 1 : batch_size;
    const ComplexityAnswer a = complexity_iterations(s, in, epsilon);
    if (t_min) *t_min = a.t_min;
    if (gamma) *gamma = a.recommended_gamma.value_or(std::nan(""));
  });
}

dl_status dl_table_text(double epsilon, char** out) {
  return guarded([&] {
    not_null(out, "out");
    *out = dup_string(complexity_table(TableInputs::from_fixtures(), epsilon).text());
  });
}

dl_status dl_property_suite(const dl_problem* problem, size_t samples, uint64_t seed, char** report_json,
                            int* green) {
  return guarded([&] {
    not_null(problem, "problem");
    SamplerConfig sc;
    sc.samples = samples == 0 ? 10000 : samples;
    sc.seed = seed;
    const PropertyReport r = property_suite(problem->fixture, sc);
    if (green) *green = r.green() ? 1 : 0;
    if (report_json) *report_json = dup_string(r.json());
  });
}

dl_status dl_cmd_run(const char* config_path, const dl_command_options* options, char** output) {
  return command(&cmd_run, config_path, options, output);
}

dl_status dl_cmd_verify(const char* config_path, const dl_command_options* options, char** output) {
  return command(&cmd_verify, config_path, options, output);
}

dl_status dl_cmd_table(const char* config_path, const dl_command_options* options, char** output) {
  return command(&cmd_table, config_path, options, output);
}

dl_status dl_cmd_suite(const char* config_path, const dl_command_options* options, char** output) {
  return command(&cmd_suite, config_path, options, output);
}

}  // extern "C"
