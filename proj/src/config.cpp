#include "advreg/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace advreg {

namespace {

struct Value {
  enum class Kind { Number, String, Bool, List } kind = Kind::Number;
  double number = 0.0;
  std::string text;
  bool flag = false;
  std::vector<Value> items;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool to_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

Value parse_scalar(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  Value v;
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    v.kind = Value::Kind::String;
    v.text = s.substr(1, s.size() - 2);
  } else if (s == "true" || s == "false") {
    v.kind = Value::Kind::Bool;
    v.flag = s == "true";
  } else if (to_number(s, v.number)) {
    v.kind = Value::Kind::Number;
  } else {
    throw ConfigError(where + ": cannot parse value '" + s + "'");
  }
  return v;
}

Value parse_value(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError(where + ": unterminated list");
    Value v;
    v.kind = Value::Kind::List;
    const std::string body = trim(s.substr(1, s.size() - 2));
    if (body.empty()) return v;
    std::string item;
    bool quoted = false;
    for (char c : body) {
      if (c == '"') quoted = !quoted;
      if (c == ',' && !quoted) {
        v.items.push_back(parse_scalar(item, where));
        item.clear();
      } else {
        item += c;
      }
    }
    if (!trim(item).empty()) v.items.push_back(parse_scalar(item, where));
    return v;
  }
  return parse_scalar(s, where);
}

class Reader {
 public:
  Reader(const std::string& key, const Value& v, const std::string& where)
      : key_(key), v_(v), where_(where) {}

  double number() const {
    if (v_.kind != Value::Kind::Number) fail("a number");
    return v_.number;
  }
  int integer() const {
    const double d = number();
    if (d != std::floor(d)) fail("an integer");
    return static_cast<int>(d);
  }
  std::string string() const {
    if (v_.kind != Value::Kind::String) fail("a quoted string");
    return v_.text;
  }
  bool boolean() const {
    if (v_.kind != Value::Kind::Bool) fail("true or false");
    return v_.flag;
  }
  // A lone number counts as a one-element list.
  std::vector<double> numbers() const {
    if (v_.kind == Value::Kind::Number) return {v_.number};
    if (v_.kind != Value::Kind::List) fail("a list of numbers");
    std::vector<double> out;
    for (const auto& item : v_.items) {
      if (item.kind != Value::Kind::Number) fail("a list of numbers");
      out.push_back(item.number);
    }
    return out;
  }
  std::vector<std::string> strings() const {
    if (v_.kind != Value::Kind::List) fail("a list of strings");
    std::vector<std::string> out;
    for (const auto& item : v_.items) {
      if (item.kind != Value::Kind::String) fail("a list of strings");
      out.push_back(item.text);
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& expected) const {
    throw ConfigError(where_ + ": '" + key_ + "' must be " + expected);
  }
  const std::string& key_;
  const Value& v_;
  std::string where_;
};

std::vector<std::size_t> to_sizes(const std::vector<double>& v, const std::string& what) {
  std::vector<std::size_t> out;
  for (double d : v) {
    if (d < 1 || d != std::floor(d)) throw ConfigError(what + " must hold positive integers");
    out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

std::vector<std::uint64_t> to_seeds(const std::vector<double>& v, const std::string& what) {
  std::vector<std::uint64_t> out;
  for (double d : v) {
    if (d < 0 || d != std::floor(d)) throw ConfigError(what + " must hold nonnegative integers");
    out.push_back(static_cast<std::uint64_t>(d));
  }
  return out;
}

void assign(ExperimentConfig& cfg, const std::string& full, const Value& value,
            const std::string& where) {
  const Reader r(full, value, where);
  if (full == "name") cfg.name = r.string();
  else if (full == "jobs") cfg.jobs = r.integer();
  else if (full == "dataset.path") cfg.dataset_path = r.string();
  else if (full == "dataset.label_column") cfg.schema.label_column = r.string();
  else if (full == "dataset.feature_columns") cfg.schema.feature_columns = r.strings();
  else if (full == "dataset.exclude_columns") cfg.schema.exclude_columns = r.strings();
  else if (full == "split.ratio") cfg.split_ratio = r.number();
  else if (full == "grid.m") cfg.m_grid = to_sizes(r.numbers(), where + ": grid.m");
  else if (full == "grid.delta") cfg.delta_grid = r.numbers();
  else if (full == "grid.seeds") cfg.seeds = to_seeds(r.numbers(), where + ": grid.seeds");
  else if (full == "attack.fraction") cfg.attacked_fraction = r.number();
  else if (full == "model.ridge") cfg.ridge = r.number();
  else if (full == "model.ridge_enabled") {
    if (!r.boolean()) cfg.ridge.reset();
    else if (!cfg.ridge) cfg.ridge = 100.0;
  }
  else if (full == "model.nu") cfg.nu = r.number();
  else if (full == "model.bs_proximal") cfg.bs.proximal = r.number();
  else if (full == "model.bs_gradient_tol") cfg.bs.gradient_tol = r.number();
  else if (full == "model.bs_max_iter") cfg.bs.max_iter = r.integer();
  else if (full == "solver.eps") cfg.solver.eps = r.number();
  else if (full == "solver.kappa") cfg.solver.kappa = r.number();
  else if (full == "solver.sigma") cfg.solver.sigma = r.number();
  else if (full == "solver.step_beta") cfg.solver.step_beta = r.number();
  else if (full == "solver.gamma1") cfg.solver.gamma1 = r.number();
  else if (full == "solver.gamma2") cfg.solver.gamma2 = r.number();
  else if (full == "solver.angle_rho") cfg.solver.angle_rho = r.number();
  else if (full == "solver.min_step") cfg.solver.min_step = r.number();
  else if (full == "solver.eta") cfg.solver.eta = r.number();
  else if (full == "solver.stall_window") cfg.solver.stall_window = r.integer();
  else if (full == "solver.max_iter") cfg.solver.max_iter = r.integer();
  else if (full == "solver.refine_steps") cfg.solver.refine_steps = r.integer();
  else throw ConfigError(where + ": unknown key '" + full + "'");
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    if (!to_number(trim(item), v)) throw ConfigError("cannot parse number '" + trim(item) + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

ExperimentConfig parse_config(std::istream& in, const std::string& source,
                              const std::string& base_directory) {
  ExperimentConfig cfg;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      static const std::vector<std::string> known = {"dataset", "split", "grid",
                                                     "attack",  "model", "solver"};
      if (std::find(known.begin(), known.end(), section) == known.end()) {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const Value value = parse_value(s.substr(eq + 1), where);
    assign(cfg, section.empty() ? key : section + "." + key, value, where);
  }
  if (!cfg.dataset_path.empty() && !base_directory.empty() &&
      std::filesystem::path(cfg.dataset_path).is_relative()) {
    cfg.dataset_path = (std::filesystem::path(base_directory) / cfg.dataset_path).lexically_normal().string();
  }
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  const auto base = std::filesystem::path(path).parent_path().string();
  return parse_config(in, path, base);
}

void apply_setting(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string where = "--set " + key;
  // Command-line friendly forms: bare strings and unbracketed lists.
  std::string raw = trim(assignment.substr(eq + 1));
  if (!raw.empty() && raw.front() != '[' && raw.front() != '"' && raw.find(',') != std::string::npos) {
    raw = "[" + raw + "]";
  }
  Value value;
  try {
    value = parse_value(raw, where);
  } catch (const ConfigError&) {
    if (raw.empty() || raw.front() == '[' || raw.front() == '"') throw;
    value.kind = Value::Kind::String;
    value.text = raw;
  }
  assign(cfg, key, value, where);
}

}  // namespace advreg
