#include "descentlab/commands.hpp"

#include <json.hpp>

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#ifndef DESCENTLAB_VERSION
#define DESCENTLAB_VERSION "0.0.0"
#endif

namespace descentlab {

using nlohmann::json;
namespace fs = std::filesystem;

std::string version() { return DESCENTLAB_VERSION; }

namespace {

Experiment load(const std::string& config_path, const CommandOptions& opts) {
  ExperimentConfig cfg = load_config(config_path);
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  return resolve(cfg);
}

fs::path output_path(const CommandOptions& opts, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : fs::path(opts.out_dir) / p;
}

void write_file(const fs::path& p, const std::string& content) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write '" + p.string() + "'");
  out << content;
  out.flush();
  if (!out) fail(ErrorCode::io, "write to '" + p.string() + "' failed");
}

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

void require_schedule(const ExperimentConfig& cfg) {
  if (!cfg.schedule) fail(ErrorCode::config, "field 'schedule': missing");
}

}  // namespace

CommandOutput cmd_run(const std::string& config_path, const CommandOptions& opts) {
  const Experiment ex = load(config_path, opts);
  require_schedule(ex.config);
  const RunConfig& rc = ex.run;
  const std::size_t trials = is_stochastic(rc.algorithm) ? rc.trials : 1;

  // manifest first so a partial run can be diagnosed
  json manifest = {{"command", "run"},
                   {"config", json::parse(emit_config(ex.config))},
                   {"seed", rc.seed},
                   {"trials_run", trials},
                   {"trace", ex.config.outputs.trace},
                   {"versions", {{"descentlab", version()}, {"eigen", eigen_version()}}}};
  write_file(output_path(opts, ex.config.outputs.manifest), manifest.dump(2) + "\n");

  std::vector<std::string> chunks(trials);
  std::vector<std::exception_ptr> errors(trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t m = next++; m < trials; m = next++) {
      try {
        std::ostringstream os;
        write_trace_csv(os, run(ex.target, rc, m));
        chunks[m] = os.str();
      } catch (...) {
        errors[m] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(opts.jobs, trials));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < threads; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t m = 0; m < trials; ++m) {
    if (!errors[m]) continue;
    try {
      std::rethrow_exception(errors[m]);
    } catch (const Error& e) {
      fail(e.code(), "trial " + std::to_string(m) + ": " + e.what());
    }
  }

  std::ostringstream csv;
  write_trace_csv_header(csv);
  for (const auto& c : chunks) csv << c;
  const fs::path trace_path = output_path(opts, ex.config.outputs.trace);
  write_file(trace_path, csv.str());

  std::ostringstream text;
  text << "run " << to_string(rc.algorithm) << " on " << ex.fixture.instance.name << ": " << trials << " trial(s) x "
       << rc.iterations + 1 << " rows -> " << trace_path.string() << "\n";
  return {text.str(), true};
}

CommandOutput cmd_verify(const std::string& config_path, const CommandOptions& opts) {
  const Experiment ex = load(config_path, opts);
  const ExperimentConfig& cfg = ex.config;
  if (!cfg.setting) fail(ErrorCode::config, "field 'setting': missing (verify needs a theorem setting)");
  require_schedule(cfg);
  const Setting s = *cfg.setting;
  const SettingProfile p = profile(s);

  const BoundCurve curve = bound_curve(s, ex.inputs, ex.run.schedule).scaled(cfg.bound_scale);
  std::vector<std::size_t> checkpoints = cfg.checkpoints;
  if (checkpoints.empty()) {
    for (auto t : default_checkpoints(cfg.T))
      if (curve.valid_at(t)) checkpoints.push_back(t);
    if (checkpoints.empty())
      fail(ErrorCode::config, "field 'T': no default checkpoint inside the validity window " + curve.validity());
  }
  for (auto t : checkpoints)
    if (!curve.valid_at(t))
      fail(ErrorCode::config, "field 'checkpoints': t = " + std::to_string(t) + " is outside the validity window " +
                                  curve.validity() + " of " + to_string(s));
  if (!p.deterministic && cfg.M < 2) fail(ErrorCode::config, "field 'M': stochastic settings need M >= 2");

  RunConfig rc = setting_run_config(s, curve, ex.run);
  const ExpectationEstimate est = estimate(ex.target, rc, setting_metric(s), checkpoints, opts.jobs);
  const Verdict v =
      verify_bound(est, curve, p.deterministic ? MarginPolicy::deterministic : MarginPolicy::three_sigma);

  json j = json::parse(v.json());
  j["fixture"] = ex.fixture.instance.name;
  j["metric"] = to_string(est.metric);
  j["seed"] = cfg.seed;
  j["expect_fail"] = cfg.expect_fail;
  if (cfg.bound_scale != 1.0) j["bound_scale"] = cfg.bound_scale;
  const std::string out = j.dump(2) + "\n";
  if (!cfg.outputs.verdict.empty()) write_file(output_path(opts, cfg.outputs.verdict), out);
  return {out, v.pass != cfg.expect_fail};
}

CommandOutput cmd_table(const std::string& config_path, const CommandOptions& opts) {
  ExperimentConfig cfg = load_config(config_path);
  if (!cfg.epsilon) fail(ErrorCode::config, "field 'epsilon': missing");

  TableInputs in;
  if (cfg.table) {
    auto source = [&](const std::optional<TableSource>& src, bool want_composite) -> std::optional<TheoryInputs> {
      if (!src) return std::nullopt;
      if (src->inputs) return src->inputs;
      const Fixture fx = load_fixture(src->fixture);
      if (want_composite) {
        if (!fx.composite) fail(ErrorCode::config, "field 'table.composite': fixture '" + src->fixture +
                                                       "' has no regularizer");
        return TheoryInputs::of(*fx.composite, fx.composite->smooth.x0);
      }
      return TheoryInputs::of(fx.instance, fx.instance.x0);
    };
    in.smooth = source(cfg.table->smooth, false);
    in.lipschitz = source(cfg.table->lipschitz, false);
    in.composite = source(cfg.table->composite, true);
    in.batch_size = cfg.table->b;
  } else {
    in = TableInputs::from_fixtures();
    if (cfg.problem) {
      const Experiment ex = resolve(cfg);
      const ProblemInstance& inst = ex.fixture.instance;
      const Vector x0 = cfg.x0 ? *cfg.x0 : inst.x0;
      if (inst.problem->differentiable())
        in.smooth = TheoryInputs::of(inst, x0);
      else
        in.lipschitz = TheoryInputs::of(inst, x0);
      if (ex.fixture.composite) in.composite = TheoryInputs::of(*ex.fixture.composite, x0);
      in.batch_size = cfg.b > 1 ? cfg.b : in.batch_size;
    }
  }

  const ComplexityTable table = complexity_table(in, *cfg.epsilon);
  if (!cfg.outputs.table_csv.empty()) write_file(output_path(opts, cfg.outputs.table_csv), table.csv());
  return {table.text(), true};
}

CommandOutput cmd_suite(const std::string& config_path, const CommandOptions& opts) {
  const ExperimentConfig cfg = load_config(config_path);
  SamplerConfig sc;
  sc.samples = cfg.samples;
  sc.seed = opts.seed_override.value_or(cfg.seed);

  std::vector<Fixture> fixtures;
  if (cfg.problem)
    fixtures.push_back(resolve(cfg).fixture);
  else
    for (const auto& name : fixture_names()) fixtures.push_back(fixture(name));

  std::vector<PropertyReport> reports(fixtures.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(fixtures.size());
  auto worker = [&]() {
    for (std::size_t i = next++; i < fixtures.size(); i = next++) {
      try {
        reports[i] = property_suite(fixtures[i], sc);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(opts.jobs, fixtures.size()));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < threads; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  bool green = true;
  json out = json::array();
  for (const auto& r : reports) {
    green = green && r.green();
    out.push_back(json::parse(r.json()));
  }
  const std::string text = (reports.size() == 1 ? out[0] : out).dump(2) + "\n";
  if (!cfg.outputs.report.empty()) write_file(output_path(opts, cfg.outputs.report), text);
  return {text, green};
}

}  // namespace descentlab
