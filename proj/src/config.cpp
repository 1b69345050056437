#include "rgwalk/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "rgwalk/error.hpp"

namespace rgwalk {

namespace {

[[noreturn]] void schema_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::SchemaError, "config key '" + key + "': " + what);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const std::string t = trim(text);
  const char* end = t.data() + t.size();
  const auto res = std::from_chars(t.data(), end, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != end) schema_error(key, "cannot parse '" + text + "'");
  return v;
}

template <>
double parse_number<double>(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    schema_error(key, "cannot parse '" + text + "'");
  }
  if (used != t.size()) schema_error(key, "cannot parse '" + text + "'");
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  if (out.empty()) schema_error(key, "empty list");
  return out;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_same_v<T, double>)
      s += format_double(v[i]);
    else
      s += std::to_string(v[i]);
  }
  return s;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field number(const std::string& key, T ExperimentConfig::*member) {
  return {key, [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_same_v<T, double>)
              return format_double(c.*member);
            else
              return std::to_string(c.*member);
          }};
}

Field text(const std::string& key, std::string ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const std::string& v) { c.*member = trim(v); },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

Field flag(const std::string& key, bool ExperimentConfig::*member) {
  return {key,
          [key, member](ExperimentConfig& c, const std::string& v) {
            const std::string t = trim(v);
            if (t == "true" || t == "1")
              c.*member = true;
            else if (t == "false" || t == "0")
              c.*member = false;
            else
              schema_error(key, "expected true or false, got '" + v + "'");
          },
          [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

template <class T>
Field list(const std::string& key, std::vector<T> ExperimentConfig::*member) {
  return {key, [key, member](ExperimentConfig& c, const std::string& v) { c.*member = parse_list<T>(key, v); },
          [member](const ExperimentConfig& c) { return join(c.*member); }};
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields{
      number("schema_version", &ExperimentConfig::schema_version),
      text("preset", &ExperimentConfig::preset),
      number("dim", &ExperimentConfig::dim),
      number("hold", &ExperimentConfig::hold),
      text("custom_kernel", &ExperimentConfig::custom_kernel),
      number("grid", &ExperimentConfig::grid),
      number("tail_tol", &ExperimentConfig::tail_tol),
      text("model", &ExperimentConfig::model),
      number("epsilon", &ExperimentConfig::epsilon),
      number("lambda", &ExperimentConfig::lambda),
      number("coupling", &ExperimentConfig::coupling),
      number("cml_gamma", &ExperimentConfig::cml_gamma),
      number("cml_nonlinearity", &ExperimentConfig::cml_nonlinearity),
      number("burn_in", &ExperimentConfig::burn_in),
      number("time_extent", &ExperimentConfig::time_extent),
      number("box_radius", &ExperimentConfig::box_radius),
      number("L", &ExperimentConfig::L),
      number("levels", &ExperimentConfig::levels),
      number("replicas", &ExperimentConfig::replicas),
      number("sources", &ExperimentConfig::sources),
      number("blocks", &ExperimentConfig::blocks),
      flag("antithetic", &ExperimentConfig::antithetic),
      number("zeta_kmax", &ExperimentConfig::zeta_kmax),
      number("n0", &ExperimentConfig::n0),
      list("orders", &ExperimentConfig::orders),
      number("max_sep", &ExperimentConfig::max_sep),
      number("cumulant_replicas", &ExperimentConfig::cumulant_replicas),
      number("level", &ExperimentConfig::level),
      number("anchors", &ExperimentConfig::anchors),
      number("T", &ExperimentConfig::T),
      number("paths", &ExperimentConfig::paths),
      number("dump_paths", &ExperimentConfig::dump_paths),
      number("env_seeds", &ExperimentConfig::env_seeds),
      list("times", &ExperimentConfig::times),
      number("alpha", &ExperimentConfig::alpha),
      number("seed", &ExperimentConfig::seed),
      number("threads", &ExperimentConfig::threads),
      text("out_dir", &ExperimentConfig::out_dir),
  };
  return fields;
}

void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) schema_error(key, what);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : schema()) keys.push_back(f.key);
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& s = schema();
  const auto it = std::find_if(s.begin(), s.end(), [&](const Field& f) { return f.key == key; });
  if (it == s.end()) schema_error(key, "unknown key");
  it->set(cfg, value);
}

void validate_config(const ExperimentConfig& c) {
  check(c.schema_version == kSchemaVersion, "schema_version", "unsupported version " + std::to_string(c.schema_version));
  check(c.preset == "two_step_nn" || c.preset == "lazy_nn" || c.preset == "custom", "preset", "unknown preset '" + c.preset + "'");
  check(c.preset != "custom" || !c.custom_kernel.empty(), "custom_kernel", "required for preset = custom");
  check(c.dim == 1 || c.dim == 2, "dim", "must be 1 or 2");
  check(c.hold >= 0.0 && c.hold < 1.0, "hold", "must lie in [0, 1)");
  check(c.grid >= 0, "grid", "must be >= 0");
  check(c.tail_tol >= 0.0 && c.tail_tol < 1e-3, "tail_tol", "must lie in [0, 1e-3)");
  check(c.model == "iid" || c.model == "markov_field" || c.model == "cml", "model", "unknown model '" + c.model + "'");
  check(c.epsilon >= 0.0 && c.epsilon < 1.0, "epsilon", "must lie in [0, 1)");
  check(c.lambda > 0.0, "lambda", "must be positive");
  check(c.coupling >= 0.0, "coupling", "must be >= 0");
  check(c.cml_gamma >= 0.0 && c.cml_gamma <= 0.05, "cml_gamma", "must lie in [0, 0.05]");
  check(c.burn_in >= 0, "burn_in", "must be >= 0");
  check(c.time_extent >= 1, "time_extent", "must be >= 1");
  check(c.box_radius >= 1, "box_radius", "must be >= 1");
  check(c.L >= 2, "L", "must be >= 2");
  check(c.levels >= 1, "levels", "must be >= 1");
  check(c.replicas >= 2, "replicas", "must be >= 2");
  check(!c.antithetic || c.replicas % 2 == 0, "replicas", "must be even with antithetic pairs");
  check(c.sources >= 1, "sources", "must be >= 1");
  check(c.blocks >= 1, "blocks", "must be >= 1");
  check(c.zeta_kmax > 0.0, "zeta_kmax", "must be positive");
  check(c.n0 >= 1 && c.n0 <= 4, "n0", "must lie in 1..4");
  for (int m : c.orders) check(m >= 1 && m <= 6, "orders", "orders must lie in 1..6");
  check(c.max_sep >= 0, "max_sep", "must be >= 0");
  check(c.cumulant_replicas >= 2, "cumulant_replicas", "must be >= 2");
  check(c.level >= 0, "level", "must be >= 0");
  check(c.anchors >= 1, "anchors", "must be >= 1");
  check(c.T >= 1, "T", "must be >= 1");
  check(c.paths >= 1, "paths", "must be >= 1");
  check(c.dump_paths >= 0, "dump_paths", "must be >= 0");
  check(c.env_seeds >= 1, "env_seeds", "must be >= 1");
  check(!c.times.empty() && c.times.size() <= 4, "times", "between 1 and 4 times");
  for (std::size_t i = 0; i < c.times.size(); ++i)
    check(c.times[i] > 0.0 && c.times[i] <= 1.0 && (i == 0 || c.times[i] > c.times[i - 1]), "times",
          "must be sorted within (0, 1]");
  check(c.alpha > 0.0 && c.alpha < 1.0, "alpha", "must lie in (0, 1)");
  check(c.threads >= 0, "threads", "must be >= 0");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) schema_error(line, "line " + std::to_string(lineno) + " is not key = value");
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : schema()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace rgwalk
