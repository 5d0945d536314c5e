#include "descentlab/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace descentlab {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  fail(ErrorCode::config, "field '" + field + "': " + msg);
}

// 1-based line of the first `"key":` in the text, 0 if absent.
std::size_t line_of_key(const std::string& text, const std::string& key) {
  const std::string needle = "\"" + key + "\"";
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    std::size_t after = pos + needle.size();
    while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
    if (after < text.size() && text[after] == ':')
      return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
    pos = after;
  }
  return 0;
}

// Adds a line number to "field 'a.b': ..." messages when the key can be found.
Error with_line(const std::string& text, const Error& e) {
  static const std::regex field_re("^field '([^']+)'");
  const std::string msg = e.what();
  std::smatch m;
  if (e.code() != ErrorCode::config || !std::regex_search(msg, m, field_re)) return e;
  std::string key = m[1].str();
  const auto dot = key.find_last_of('.');
  if (dot != std::string::npos) key = key.substr(dot + 1);
  const auto bracket = key.find('[');
  if (bracket != std::string::npos) key = key.substr(0, bracket);
  const std::size_t line = line_of_key(text, key);
  if (line == 0) return e;
  return Error(ErrorCode::config, "line " + std::to_string(line) + ": " + msg);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) field_error(where.empty() ? "<root>" : where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) field_error(where.empty() ? it.key() : where + "." + it.key(), "unknown field");
}

std::string path(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) field_error(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) field_error(field, "must be finite");
  return v;
}

std::uint64_t get_count(const json& j, const std::string& field) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) field_error(field, "must be >= 0");
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  if (j.is_number_float()) {
    // accept scientific notation such as 1e3 when it is integral
    const double v = j.get<double>();
    if (v >= 0.0 && v == std::floor(v) && v < 1.8e19) return static_cast<std::uint64_t>(v);
  }
  field_error(field, "expected a non-negative integer");
}

std::string get_string(const json& j, const std::string& field) {
  if (!j.is_string()) field_error(field, "expected a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& field) {
  if (!j.is_boolean()) field_error(field, "expected true or false");
  return j.get<bool>();
}

Vector get_vector(const json& j, const std::string& field) {
  if (j.is_number()) return Vector::Constant(1, get_number(j, field));
  if (!j.is_array() || j.empty()) field_error(field, "expected a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = get_number(j[i], field + "[" + std::to_string(i) + "]");
  return v;
}

Matrix get_matrix(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) field_error(field, "expected a non-empty array of rows");
  std::size_t cols = 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].empty()) field_error(field, "row " + std::to_string(i) + " is not an array");
    if (i == 0) cols = j[i].size();
    if (j[i].size() != cols) field_error(field, "rows have different lengths");
  }
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          get_number(j[i][c], field + "[" + std::to_string(i) + "][" + std::to_string(c) + "]");
  return m;
}

template <class F>
auto named_enum(const json& j, const std::string& field, F parse) {
  const std::string s = get_string(j, field);
  try {
    return parse(s);
  } catch (const Error& e) {
    field_error(field, e.what());
  }
}

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

// --- sections --------------------------------------------------------------

ProblemSpec parse_problem(const json& j, const std::string& where) {
  ProblemSpec p;
  if (j.is_string()) {
    p.fixture = j.get<std::string>();
    return p;
  }
  only_keys(j, where, {"fixture", "kind", "features", "rows", "targets", "strong_mu", "ball_B"});
  if (j.contains("fixture")) {
    if (j.size() != 1) field_error(where + ".fixture", "a fixture problem takes no other fields");
    p.fixture = get_string(j["fixture"], where + ".fixture");
    return p;
  }
  if (!j.contains("kind")) field_error(where + ".kind", "missing (or give 'fixture')");
  p.kind = get_string(j["kind"], where + ".kind");
  if (p.kind == "scalar_pl") return p;
  if (p.kind == "least_squares") {
    if (!j.contains("features")) field_error(where + ".features", "missing");
    p.data = get_matrix(j["features"], where + ".features");
  } else if (p.kind == "abs_loss") {
    if (!j.contains("rows")) field_error(where + ".rows", "missing");
    p.data = get_matrix(j["rows"], where + ".rows");
    if (j.contains("strong_mu")) p.strong_mu = get_number(j["strong_mu"], where + ".strong_mu");
    if (!j.contains("ball_B")) field_error(where + ".ball_B", "missing (radius of the ball holding the minimizer)");
    p.ball_B = get_number(j["ball_B"], where + ".ball_B");
  } else {
    field_error(where + ".kind", "unknown problem kind '" + p.kind + "' (least_squares, abs_loss, scalar_pl)");
  }
  if (!j.contains("targets")) field_error(where + ".targets", "missing");
  p.targets = get_vector(j["targets"], where + ".targets");
  if (p.targets.size() != p.data.rows())
    field_error(where + ".targets", "length " + std::to_string(p.targets.size()) + " does not match " +
                                        std::to_string(p.data.rows()) + " rows");
  return p;
}

json emit_problem(const ProblemSpec& p) {
  if (!p.fixture.empty()) return json{{"fixture", p.fixture}};
  json j = {{"kind", p.kind}};
  if (p.kind == "least_squares") {
    j["features"] = to_json(p.data);
    j["targets"] = to_json(p.targets);
  } else if (p.kind == "abs_loss") {
    j["rows"] = to_json(p.data);
    j["targets"] = to_json(p.targets);
    j["strong_mu"] = p.strong_mu;
    j["ball_B"] = p.ball_B;
  }
  return j;
}

Regularizer parse_regularizer(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() == "zero") return Regularizer::zero();
    field_error(where, "expected an object such as {\"kind\": \"l1\", \"lambda\": 0.1}");
  }
  only_keys(j, where, {"kind", "lambda", "radius"});
  if (!j.contains("kind")) field_error(where + ".kind", "missing");
  const RegularizerKind kind = named_enum(j["kind"], where + ".kind", regularizer_kind_from_string);
  try {
    switch (kind) {
      case RegularizerKind::zero:
        return Regularizer::zero();
      case RegularizerKind::l1:
        if (!j.contains("lambda")) field_error(where + ".lambda", "missing");
        return Regularizer::l1(get_number(j["lambda"], where + ".lambda"));
      case RegularizerKind::ball_indicator:
        if (!j.contains("radius")) field_error(where + ".radius", "missing");
        return Regularizer::ball(get_number(j["radius"], where + ".radius"));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    field_error(where, e.what());
  }
  return Regularizer::zero();
}

json emit_regularizer(const Regularizer& r) {
  json j = {{"kind", to_string(r.kind)}};
  if (r.kind == RegularizerKind::l1) j["lambda"] = r.lambda;
  if (r.kind == RegularizerKind::ball_indicator) j["radius"] = r.radius;
  return j;
}

const std::vector<std::string>& gamma_references() {
  static const std::vector<std::string> refs = {"1/L", "1/L_max", "1/(2L_max)", "1/(4L_max)",
                                                "1/(2L_b)", "1/mu", "mu/(L*L_max)"};
  return refs;
}

GammaSpec parse_gamma(const json& j, const std::string& field) {
  GammaSpec g;
  if (j.is_number()) {
    g.factor = get_number(j, field);
    if (!(g.factor > 0.0)) field_error(field, "step size must be > 0");
    return g;
  }
  only_keys(j, field, {"factor", "of"});
  if (!j.contains("factor") || !j.contains("of")) field_error(field, "expected a number or {\"factor\", \"of\"}");
  g.factor = get_number(j["factor"], field + ".factor");
  if (!(g.factor > 0.0)) field_error(field + ".factor", "must be > 0");
  g.of = get_string(j["of"], field + ".of");
  const auto& refs = gamma_references();
  if (std::find(refs.begin(), refs.end(), g.of) == refs.end()) {
    std::string list;
    for (const auto& r : refs) list += (list.empty() ? "" : ", ") + r;
    field_error(field + ".of", "unknown reference '" + g.of + "' (" + list + ")");
  }
  return g;
}

json emit_gamma(const GammaSpec& g) {
  if (g.of.empty()) return g.factor;
  return json{{"factor", g.factor}, {"of", g.of}};
}

ScheduleSpec parse_schedule(const json& j, const std::string& where) {
  only_keys(j, where, {"kind", "gamma", "eta", "offset"});
  ScheduleSpec s;
  if (j.contains("kind")) s.kind = named_enum(j["kind"], where + ".kind", schedule_kind_from_string);
  if (s.kind == ScheduleKind::custom) field_error(where + ".kind", "custom schedules are only available from code");
  const char* key = j.contains("eta") ? "eta" : "gamma";
  if (!j.contains(key)) field_error(where + ".gamma", "missing step size");
  if (j.contains("eta") && j.contains("gamma")) field_error(where + ".eta", "give either gamma or eta");
  s.gamma = parse_gamma(j[key], path(where, key));
  if (j.contains("offset")) {
    s.offset = get_number(j["offset"], where + ".offset");
    if (s.kind != ScheduleKind::horizon_constant) field_error(where + ".offset", "only used by horizon_constant");
  }
  return s;
}

json emit_schedule(const ScheduleSpec& s) {
  json j = {{"kind", to_string(s.kind)}, {"gamma", emit_gamma(s.gamma)}};
  if (s.kind == ScheduleKind::horizon_constant) j["offset"] = s.offset;
  return j;
}

TheoryInputs parse_inputs(const json& j, const std::string& where) {
  only_keys(j, where, {"constants", "D2", "f0_gap", "F0_gap", "sigma_star_F"});
  TheoryInputs in;
  if (j.contains("constants")) {
    const std::string w = where + ".constants";
    const json& c = j["constants"];
    only_keys(c, w, {"n", "L", "L_max", "L_avg", "mu", "mu_pl", "sigma_star_f", "delta_star_f", "G", "B"});
    ProblemConstants& k = in.constants;
    auto opt = [&](const char* name, std::optional<double>& slot) {
      if (c.contains(name)) slot = get_number(c[name], w + "." + name);
    };
    if (c.contains("n")) k.n = get_count(c["n"], w + ".n");
    opt("L", k.L);
    opt("L_max", k.L_max);
    opt("L_avg", k.L_avg);
    opt("sigma_star_f", k.sigma_star_f);
    opt("delta_star_f", k.delta_star_f);
    opt("G", k.G);
    opt("B", k.B);
    if (c.contains("mu")) k.mu = get_number(c["mu"], w + ".mu");
    if (c.contains("mu_pl")) k.mu_pl = get_number(c["mu_pl"], w + ".mu_pl");
  }
  if (j.contains("D2")) in.D2 = get_number(j["D2"], where + ".D2");
  if (j.contains("f0_gap")) in.f0_gap = get_number(j["f0_gap"], where + ".f0_gap");
  in.F0_gap = in.f0_gap;
  if (j.contains("F0_gap")) in.F0_gap = get_number(j["F0_gap"], where + ".F0_gap");
  if (j.contains("sigma_star_F")) in.sigma_star_F = get_number(j["sigma_star_F"], where + ".sigma_star_F");
  return in;
}

json emit_inputs(const TheoryInputs& in) {
  const ProblemConstants& k = in.constants;
  json c = json::object();
  if (k.n) c["n"] = k.n;
  auto opt = [&](const char* name, const std::optional<double>& v) {
    if (v) c[name] = *v;
  };
  opt("L", k.L);
  opt("L_max", k.L_max);
  opt("L_avg", k.L_avg);
  opt("sigma_star_f", k.sigma_star_f);
  opt("delta_star_f", k.delta_star_f);
  opt("G", k.G);
  opt("B", k.B);
  c["mu"] = k.mu;
  c["mu_pl"] = k.mu_pl;
  json j = {{"constants", c}, {"D2", in.D2}, {"f0_gap", in.f0_gap}, {"F0_gap", in.F0_gap}};
  if (in.sigma_star_F) j["sigma_star_F"] = *in.sigma_star_F;
  return j;
}

TableSource parse_source(const json& j, const std::string& where) {
  TableSource s;
  if (j.is_string()) {
    s.fixture = j.get<std::string>();
    return s;
  }
  s.inputs = parse_inputs(j, where);
  return s;
}

json emit_source(const TableSource& s) {
  if (s.inputs) return emit_inputs(*s.inputs);
  return s.fixture;
}

TableSpec parse_table(const json& j, const std::string& where) {
  only_keys(j, where, {"smooth", "lipschitz", "composite", "b"});
  TableSpec t;
  if (j.contains("smooth")) t.smooth = parse_source(j["smooth"], where + ".smooth");
  if (j.contains("lipschitz")) t.lipschitz = parse_source(j["lipschitz"], where + ".lipschitz");
  if (j.contains("composite")) t.composite = parse_source(j["composite"], where + ".composite");
  if (j.contains("b")) t.b = get_count(j["b"], where + ".b");
  if (t.b < 1) field_error(where + ".b", "must be >= 1");
  return t;
}

json emit_table(const TableSpec& t) {
  json j = {{"b", t.b}};
  if (t.smooth) j["smooth"] = emit_source(*t.smooth);
  if (t.lipschitz) j["lipschitz"] = emit_source(*t.lipschitz);
  if (t.composite) j["composite"] = emit_source(*t.composite);
  return j;
}

ExperimentConfig parse_root(const json& j) {
  only_keys(j, "",
            {"problem", "regularizer", "algorithm", "momentum_form", "schedule", "T", "M", "b", "seed", "ball_B", "x0",
             "averaging", "checkpoints", "setting", "epsilon", "expect_fail", "bound_scale", "samples", "table",
             "outputs"});
  ExperimentConfig c;
  if (j.contains("problem")) c.problem = parse_problem(j["problem"], "problem");
  if (j.contains("regularizer")) c.regularizer = parse_regularizer(j["regularizer"], "regularizer");
  if (j.contains("algorithm")) c.algorithm = named_enum(j["algorithm"], "algorithm", algorithm_from_string);
  if (j.contains("momentum_form"))
    c.momentum_form = named_enum(j["momentum_form"], "momentum_form", momentum_form_from_string);
  if (j.contains("schedule")) c.schedule = parse_schedule(j["schedule"], "schedule");
  if (j.contains("T")) c.T = get_count(j["T"], "T");
  if (j.contains("M")) c.M = get_count(j["M"], "M");
  if (j.contains("b")) c.b = get_count(j["b"], "b");
  if (j.contains("seed")) c.seed = get_count(j["seed"], "seed");
  if (j.contains("ball_B")) c.ball_B = get_number(j["ball_B"], "ball_B");
  if (j.contains("x0")) c.x0 = get_vector(j["x0"], "x0");
  if (j.contains("averaging")) c.averaging = named_enum(j["averaging"], "averaging", averaging_from_string);
  if (j.contains("checkpoints")) {
    const json& cp = j["checkpoints"];
    if (!cp.is_array()) field_error("checkpoints", "expected an array of iteration counts");
    for (std::size_t i = 0; i < cp.size(); ++i)
      c.checkpoints.push_back(get_count(cp[i], "checkpoints[" + std::to_string(i) + "]"));
  }
  if (j.contains("setting")) c.setting = named_enum(j["setting"], "setting", setting_from_string);
  if (j.contains("epsilon")) c.epsilon = get_number(j["epsilon"], "epsilon");
  if (j.contains("expect_fail")) c.expect_fail = get_bool(j["expect_fail"], "expect_fail");
  if (j.contains("bound_scale")) c.bound_scale = get_number(j["bound_scale"], "bound_scale");
  if (j.contains("samples")) c.samples = get_count(j["samples"], "samples");
  if (j.contains("table")) c.table = parse_table(j["table"], "table");
  if (j.contains("outputs")) {
    const json& o = j["outputs"];
    only_keys(o, "outputs", {"trace", "manifest", "verdict", "table_csv", "report"});
    auto str = [&](const char* key, std::string& slot) {
      if (o.contains(key)) slot = get_string(o[key], std::string("outputs.") + key);
    };
    str("trace", c.outputs.trace);
    str("manifest", c.outputs.manifest);
    str("verdict", c.outputs.verdict);
    str("table_csv", c.outputs.table_csv);
    str("report", c.outputs.report);
  }

  // single-field checks
  if (c.T < 1) field_error("T", "must be >= 1");
  if (c.M < 1) field_error("M", "must be >= 1");
  if (c.b < 1) field_error("b", "must be >= 1");
  if (c.ball_B && !(*c.ball_B > 0.0)) field_error("ball_B", "must be > 0");
  if (c.epsilon && !(*c.epsilon > 0.0)) field_error("epsilon", "must be > 0");
  if (!(c.bound_scale > 0.0)) field_error("bound_scale", "must be > 0");
  if (c.samples < 1) field_error("samples", "must be >= 1");
  for (std::size_t i = 0; i < c.checkpoints.size(); ++i) {
    if (c.checkpoints[i] > c.T)
      field_error("checkpoints", "checkpoint " + std::to_string(c.checkpoints[i]) + " exceeds T = " +
                                     std::to_string(c.T));
    if (i > 0 && c.checkpoints[i] <= c.checkpoints[i - 1]) field_error("checkpoints", "must be strictly increasing");
  }
  return c;
}

}  // namespace

double GammaSpec::resolve(const ProblemConstants& k, std::size_t b) const {
  if (of.empty()) return factor;
  const std::string field = "schedule.gamma";
  auto get = [&](const std::optional<double>& v, const char* name) {
    if (!v) field_error(field, std::string("missing constant: ") + name + " (needed by '" + of + "')");
    return *v;
  };
  auto mu = [&]() {
    if (!(k.mu > 0.0)) field_error(field, "missing constant: mu (needed by '" + of + "')");
    return k.mu;
  };
  if (of == "1/L") return factor / get(k.L, "L");
  if (of == "1/L_max") return factor / get(k.L_max, "L_max");
  if (of == "1/(2L_max)") return factor / (2.0 * get(k.L_max, "L_max"));
  if (of == "1/(4L_max)") return factor / (4.0 * get(k.L_max, "L_max"));
  if (of == "1/(2L_b)") {
    MinibatchConstants mb;
    try {
      mb = minibatch_constants(k, b);
    } catch (const Error& e) {
      field_error(field, e.what());
    }
    return factor / (2.0 * mb.L_b);
  }
  if (of == "1/mu") return factor / mu();
  if (of == "mu/(L*L_max)") {
    const double m = k.mu_pl > 0.0 ? k.mu_pl : mu();
    return factor * m / (get(k.L, "L") * get(k.L_max, "L_max"));
  }
  field_error(field + ".of", "unknown reference '" + of + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line =
        1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
    fail(ErrorCode::config, "line " + std::to_string(line) + ": invalid JSON: " + e.what());
  } catch (const json::exception& e) {
    // e.g. number overflow; the message quotes the offending token
    const std::string what = e.what();
    std::string where;
    const auto open = what.find('\''), close = what.rfind('\'');
    if (open != std::string::npos && close > open) {
      const auto at = text.find(what.substr(open + 1, close - open - 1));
      if (at != std::string::npos)
        where = "line " + std::to_string(1 + std::count(text.begin(), text.begin() + static_cast<long>(at), '\n')) +
                ": ";
    }
    fail(ErrorCode::config, where + "invalid JSON: " + what);
  }
  try {
    return parse_root(j);
  } catch (const Error& e) {
    throw with_line(text, e);
  }
}

ExperimentConfig load_config(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read config file '" + file + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  ExperimentConfig cfg = parse_config(text);
  try {
    if (cfg.problem) resolve(cfg);  // cross-field constraints are part of parsing
  } catch (const Error& e) {
    throw with_line(text, e);
  }
  return cfg;
}

std::string emit_config(const ExperimentConfig& c) {
  json j = json::object();
  if (c.problem) j["problem"] = emit_problem(*c.problem);
  if (c.regularizer) j["regularizer"] = emit_regularizer(*c.regularizer);
  if (c.algorithm) j["algorithm"] = to_string(*c.algorithm);
  j["momentum_form"] = to_string(c.momentum_form);
  if (c.schedule) j["schedule"] = emit_schedule(*c.schedule);
  j["T"] = c.T;
  j["M"] = c.M;
  j["b"] = c.b;
  j["seed"] = c.seed;
  if (c.ball_B) j["ball_B"] = *c.ball_B;
  if (c.x0) j["x0"] = to_json(*c.x0);
  if (c.averaging) j["averaging"] = to_string(*c.averaging);
  if (!c.checkpoints.empty()) j["checkpoints"] = c.checkpoints;
  if (c.setting) j["setting"] = to_string(*c.setting);
  if (c.epsilon) j["epsilon"] = *c.epsilon;
  j["expect_fail"] = c.expect_fail;
  j["bound_scale"] = c.bound_scale;
  j["samples"] = c.samples;
  if (c.table) j["table"] = emit_table(*c.table);
  json o = {{"trace", c.outputs.trace}, {"manifest", c.outputs.manifest}};
  if (!c.outputs.verdict.empty()) o["verdict"] = c.outputs.verdict;
  if (!c.outputs.table_csv.empty()) o["table_csv"] = c.outputs.table_csv;
  if (!c.outputs.report.empty()) o["report"] = c.outputs.report;
  j["outputs"] = o;
  return j.dump(2) + "\n";
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return json::parse(emit_config(a)) == json::parse(emit_config(b));
}

// --- fixtures --------------------------------------------------------------

namespace {

ProblemInstance build_inline(const ProblemSpec& p) {
  try {
    if (p.kind == "scalar_pl") return build_scalar_pl();
    if (p.kind == "least_squares") return build_least_squares(p.data, p.targets);
    if (p.kind == "abs_loss") return build_abs_loss(p.data, p.targets, p.strong_mu, p.ball_B);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::invalid_argument) field_error("problem", e.what());
    throw;
  }
  field_error("problem.kind", "unknown problem kind '" + p.kind + "'");
}

}  // namespace

Fixture load_fixture(const std::string& name) {
  const auto names = fixture_names();
  if (std::find(names.begin(), names.end(), name) != names.end()) return fixture(name);
  const char* dir = std::getenv("DESCENTLAB_FIXTURES");
  if (dir && *dir) {
    const std::filesystem::path file = std::filesystem::path(dir) / (name + ".json");
    std::ifstream in(file);
    if (in) {
      std::ostringstream ss;
      ss << in.rdbuf();
      json j;
      try {
        j = json::parse(ss.str());
      } catch (const json::parse_error& e) {
        fail(ErrorCode::config, "fixture file " + file.string() + ": invalid JSON: " + e.what());
      }
      try {
        if (!j.is_object()) field_error("problem", "fixture file must hold an object");
        json prob = j;
        prob.erase("x0");
        prob.erase("regularizer");
        Fixture fx{build_inline(parse_problem(prob, "problem")), {}};
        fx.instance.name = name;
        if (j.contains("x0")) {
          fx.instance.x0 = get_vector(j["x0"], "x0");
          if (fx.instance.x0.size() != static_cast<Eigen::Index>(fx.instance.problem->dim()))
            field_error("x0", "dimension does not match the problem");
        }
        if (j.contains("regularizer")) {
          const Regularizer reg = parse_regularizer(j["regularizer"], "regularizer");
          if (reg.kind != RegularizerKind::zero) fx.composite = build_composite(fx.instance, reg);
        }
        return fx;
      } catch (const Error& e) {
        fail(e.code(), "fixture file " + file.string() + ": " + e.what());
      }
    }
  }
  std::string list;
  for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
  field_error("problem.fixture", "unknown fixture '" + name + "' (catalogue: " + list +
                                     (dir && *dir ? std::string("; also searched ") + dir : std::string()) + ")");
}

// --- resolution ------------------------------------------------------------

Experiment resolve(const ExperimentConfig& cfg) {
  if (!cfg.problem) field_error("problem", "missing");
  const ProblemSpec& ps = *cfg.problem;
  Fixture fx;
  if (!ps.fixture.empty()) {
    fx = load_fixture(ps.fixture);
  } else {
    fx.instance = build_inline(ps);
    fx.instance.name = "inline";
  }
  return resolve_on(cfg, std::move(fx));
}

Experiment resolve_on(const ExperimentConfig& cfg, Fixture fixture) {
  Experiment ex;
  ex.config = cfg;
  ex.fixture = std::move(fixture);
  const ProblemInstance& inst = ex.fixture.instance;
  const std::size_t n = inst.problem->n();
  const std::size_t d = inst.problem->dim();

  Algorithm algo = Algorithm::gd;
  if (cfg.setting) {
    algo = profile(*cfg.setting).algorithm;
    if (cfg.algorithm && *cfg.algorithm != algo)
      field_error("algorithm", "setting " + to_string(*cfg.setting) + " runs '" + to_string(algo) + "', not '" +
                                   to_string(*cfg.algorithm) + "'");
  } else if (cfg.algorithm) {
    algo = *cfg.algorithm;
  }
  const bool prox_method = algo == Algorithm::prox_gd || algo == Algorithm::prox_sgd;

  // composite objective
  if (cfg.regularizer && cfg.regularizer->kind != RegularizerKind::zero) {
    if (!prox_method && (cfg.algorithm || cfg.setting))
      field_error("regularizer", "algorithm '" + to_string(algo) + "' cannot handle a nonsmooth regularizer");
    if (ex.fixture.composite && ex.fixture.composite->reg == *cfg.regularizer) {
      ex.composite = true;
    } else {
      try {
        ex.fixture.composite = build_composite(inst, *cfg.regularizer);
      } catch (const Error& e) {
        field_error("regularizer", e.what());
      }
      ex.composite = true;
    }
  } else if (!cfg.regularizer && ex.fixture.composite && prox_method) {
    ex.composite = true;
  }
  if (cfg.setting && profile(*cfg.setting).composite && !ex.composite)
    field_error("regularizer", "setting " + to_string(*cfg.setting) + " needs a composite problem");

  ex.target = ex.composite ? Target::of(*ex.fixture.composite) : Target::of(inst);

  // start point
  Vector x0 = ex.target.x0;
  if (cfg.x0) {
    if (cfg.x0->size() != static_cast<Eigen::Index>(d))
      field_error("x0", "has dimension " + std::to_string(cfg.x0->size()) + " but the problem has d = " +
                            std::to_string(d));
    x0 = *cfg.x0;
  }
  if (!std::isfinite(ex.target.objective(x0))) field_error("x0", "lies outside the domain of the regularizer");

  if (cfg.b > n)
    field_error("b", "b = " + std::to_string(cfg.b) + " exceeds n = " + std::to_string(n) + " (need 1 <= b <= n)");

  ex.inputs = ex.composite ? TheoryInputs::of(*ex.fixture.composite, x0) : TheoryInputs::of(inst, x0);
  ex.inputs.batch_size = cfg.b;

  RunConfig& rc = ex.run;
  rc.algorithm = algo;
  rc.momentum_form = cfg.momentum_form;
  rc.iterations = cfg.T;
  rc.trials = cfg.M;
  rc.batch_size = algo == Algorithm::minibatch_sgd ? cfg.b : 1;
  rc.seed = cfg.seed;
  rc.x0 = x0;
  if (ex.composite) rc.reg = ex.fixture.composite->reg;
  rc.averaging = cfg.averaging.value_or(Averaging::none);

  if (algo != Algorithm::ssd && algo != Algorithm::pssd && !inst.problem->differentiable())
    field_error(cfg.setting ? "setting" : "algorithm",
                "'" + to_string(algo) + "' needs a differentiable problem (abs-loss problems need ssd or pssd)");

  if (cfg.schedule) {
    const ScheduleSpec& s = *cfg.schedule;
    const double g = s.gamma.resolve(inst.constants, cfg.b);
    switch (s.kind) {
      case ScheduleKind::constant:
        rc.schedule = StepSchedule::constant(g);
        break;
      case ScheduleKind::inv_sqrt:
        rc.schedule = StepSchedule::inv_sqrt(g);
        break;
      case ScheduleKind::momentum_pair:
        rc.schedule = StepSchedule::momentum_pair(g);
        break;
      case ScheduleKind::horizon_constant:
        if (!(cfg.T + s.offset > 0.0)) field_error("schedule.offset", "T + offset must be > 0");
        rc.schedule = StepSchedule::horizon_constant(g, s.offset);
        break;
      case ScheduleKind::custom:
        field_error("schedule.kind", "custom schedules are only available from code");
    }
    if ((algo == Algorithm::gd || algo == Algorithm::prox_gd) && !rc.schedule.is_constant())
      field_error("schedule.kind", "'" + to_string(algo) + "' requires a constant step schedule");
    if (algo == Algorithm::momentum && !rc.schedule.has_beta())
      field_error("schedule.kind", "momentum requires the momentum_pair schedule");
  }

  if (rc.averaging == Averaging::p_tk) {
    if (algo == Algorithm::minibatch_sgd)
      rc.L_ref = minibatch_constants(inst.constants, cfg.b).L_b;
    else if (inst.constants.L_max)
      rc.L_ref = *inst.constants.L_max;
    else
      field_error("averaging", "p_tk weights need L_max");
  }

  if (algo == Algorithm::pssd) {
    if (cfg.ball_B)
      rc.ball_radius = *cfg.ball_B;
    else if (inst.constants.B)
      rc.ball_radius = *inst.constants.B;
    else
      field_error("ball_B", "pssd needs the projection radius");
    if (x0.norm() > *rc.ball_radius * (1.0 + 1e-12))
      field_error("x0", "pssd start lies outside the ball of radius " + format_double(*rc.ball_radius));
  }
  return ex;
}

}  // namespace descentlab
