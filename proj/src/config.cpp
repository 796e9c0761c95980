#include "pergo/config.hpp"
#include "pergo/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pergo {

namespace {

std::string
join(const std::vector<std::string>& v)
{
  std::string out;
  for (const auto& s : v)
    out += (out.empty() ? "" : "\n") + s;
  return out;
}

std::string
trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string
at_line(std::size_t line, const std::string& msg)
{
  return "line " + std::to_string(line) + ": " + msg;
}

// Strips a trailing "# comment" outside quotes and unquotes the value.
bool
parse_value(const std::string& raw, std::string& out, std::string& err)
{
  std::string v = trim(raw);
  if (!v.empty() && v.front() == '"') {
    const auto close = v.find('"', 1);
    if (close == std::string::npos) {
      err = "unterminated string";
      return false;
    }
    const std::string rest = trim(v.substr(close + 1));
    if (!rest.empty() && rest.front() != '#') {
      err = "unexpected text after closing quote: '" + rest + "'";
      return false;
    }
    out = v.substr(1, close - 1);
    return true;
  }
  const auto hash = v.find('#');
  out = trim(v.substr(0, hash));
  return true;
}

const std::map<std::string, std::vector<std::string>>&
section_keys()
{
  static const std::map<std::string, std::vector<std::string>> keys{
    { "plan", { "h", "K", "N", "seed", "scheme", "x0", "record_stride", "burn_in", "thin" } },
    { "check",
      { "r_min", "r_max", "n_radial", "n_angular", "n_time", "epsilon", "delta_lambda", "refine_passes", "box",
        "bound_cap", "c0_grid", "aronson", "veretennikov_M", "veretennikov_r", "degenerate", "levy",
        "levy_stable_alpha", "periodicity", "periodicity_s", "periodicity_delta", "periodicity_N" } },
    { "functional", { "F", "density", "atoms" } },
    { "output", { "directory", "formats" } },
  };
  return keys;
}

class Reader
{
public:
  Reader(const ConfigSection& sec, std::vector<std::string>& errors)
    : sec_(sec)
    , errors_(errors)
  {
  }

  template<class T>
  void integer(const std::string& key, T& out, T min_value)
  {
    const auto* e = find(key);
    if (!e)
      return;
    unsigned long long v = 0;
    const auto& s = e->value;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
      fail(*e, key + " must be a non-negative integer, got '" + s + "'");
    else if (static_cast<T>(v) < min_value)
      fail(*e, key + " must be >= " + std::to_string(min_value));
    else
      out = static_cast<T>(v);
  }

  void real(const std::string& key, double& out, bool positive)
  {
    const auto* e = find(key);
    if (!e)
      return;
    double v = 0.0;
    if (!to_double(e->value, v))
      fail(*e, key + " must be a number, got '" + e->value + "'");
    else if (positive && !(v > 0.0))
      fail(*e, key + " must be > 0");
    else
      out = v;
  }

  void optional_real(const std::string& key, std::optional<double>& out, bool positive)
  {
    if (!find(key))
      return;
    double v = 0.0;
    const std::size_t before = errors_.size();
    real(key, v, positive);
    if (errors_.size() == before)
      out = v;
  }

  void boolean(const std::string& key, bool& out)
  {
    const auto* e = find(key);
    if (!e)
      return;
    std::string s = e->value;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "yes" || s == "on" || s == "1")
      out = true;
    else if (s == "false" || s == "no" || s == "off" || s == "0")
      out = false;
    else
      fail(*e, key + " must be true or false, got '" + e->value + "'");
  }

  const ConfigEntry* find(const std::string& key) const
  {
    const auto it = sec_.find(key);
    return it == sec_.end() ? nullptr : &it->second;
  }

  void fail(const ConfigEntry& e, const std::string& msg) { errors_.push_back(at_line(e.line, msg)); }

  static bool to_double(const std::string& s, double& v)
  {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(v);
  }

private:
  const ConfigSection& sec_;
  std::vector<std::string>& errors_;
};

std::vector<std::string>
split_list(const std::string& s)
{
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(trim(item));
  return out;
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> messages)
  : std::runtime_error(join(messages))
  , messages_(std::move(messages))
{
}

namespace {

std::map<std::string, ConfigSection>
parse_ini_into(const std::string& text, std::vector<std::string>& errors)
{
  std::map<std::string, ConfigSection> out;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s.front() == '#' || s.front() == ';')
      continue;
    if (s.front() == '[') {
      const auto close = s.find(']');
      const std::string rest = close == std::string::npos ? "" : trim(s.substr(close + 1));
      if (close == std::string::npos || (!rest.empty() && rest.front() != '#')) {
        errors.push_back(at_line(line, "malformed section header '" + s + "'"));
        continue;
      }
      section = trim(s.substr(1, close - 1));
      if (section != "model" && !section_keys().count(section))
        errors.push_back(at_line(line, "unknown section [" + section + "]"));
      out[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      errors.push_back(at_line(line, "expected 'key = value', got '" + s + "'"));
      continue;
    }
    if (section.empty()) {
      errors.push_back(at_line(line, "key outside of any section"));
      continue;
    }
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) {
      errors.push_back(at_line(line, "empty key"));
      continue;
    }
    std::string value, err;
    if (!parse_value(s.substr(eq + 1), value, err)) {
      errors.push_back(at_line(line, key + ": " + err));
      continue;
    }
    auto& sec = out[section];
    if (sec.count(key)) {
      errors.push_back(at_line(line, "duplicate key '" + key + "' (first set on line " +
                                       std::to_string(sec[key].line) + ")"));
      continue;
    }
    sec[key] = ConfigEntry{ value, line };
  }
  return out;
}

} // namespace

std::map<std::string, ConfigSection>
parse_ini(const std::string& text)
{
  std::vector<std::string> errors;
  auto out = parse_ini_into(text, errors);
  if (!errors.empty())
    throw ConfigError(std::move(errors));
  return out;
}

std::uint64_t
fnv1a(const std::string& text)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SimulationPlan
RunConfig::simulation_plan() const
{
  SimulationPlan p;
  p.step = plan.step;
  p.horizon_periods = plan.horizon_periods;
  p.n_paths = plan.n_paths;
  p.seed = plan.seed;
  p.scheme = plan.scheme;
  p.record_stride = plan.record_stride;
  p.initial_state = plan.initial_state.empty() ? std::vector<double>(model->d(), 0.0) : plan.initial_state;
  return p;
}

PeriodicFunctional
RunConfig::make_functional() const
{
  return PeriodicFunctional::from_expressions(functional.F, functional.density, functional.atoms, model->period(),
                                              model->d(), model->parameters());
}

RunConfig
load_config_text(const std::string& text)
{
  // Syntax errors are collected together with the semantic ones below.
  std::vector<std::string> errors;
  const auto ini = parse_ini_into(text, errors);
  RunConfig cfg;
  cfg.source = text;

  for (const auto& [name, sec] : ini) {
    if (name == "model")
      continue;
    const auto known = section_keys().find(name);
    if (known == section_keys().end())
      continue;
    const auto& allowed = known->second;
    for (const auto& [k, e] : sec)
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
        errors.push_back(at_line(e.line, "unknown key '" + k + "' in [" + name + "]"));
  }

  // [model]
  const auto model_it = ini.find("model");
  if (model_it == ini.end() || !model_it->second.count("name")) {
    errors.push_back("line 0: [model] needs 'name = <catalog model>'");
  } else {
    const ConfigSection& sec = model_it->second;
    cfg.model_name = sec.at("name").value;
    for (const auto& [k, e] : sec)
      if (k != "name")
        cfg.model_params[k] = e.value;
    const auto& names = catalog_names();
    if (std::find(names.begin(), names.end(), cfg.model_name) == names.end()) {
      std::string list;
      for (const auto& n : names)
        list += (list.empty() ? "" : ", ") + n;
      errors.push_back(at_line(sec.at("name").line, "unknown model '" + cfg.model_name + "' (known: " + list + ")"));
    } else {
      ParamMap known = cfg.model_params;
      if (cfg.model_name != "custom") {
        const auto allowed = catalog_keys(cfg.model_name);
        for (const auto& [k, e] : sec)
          if (k != "name" && std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            errors.push_back(at_line(e.line, "unknown key '" + k + "' for model " + cfg.model_name));
            known.erase(k);
          }
      }
      // built from the recognised keys so that further problems surface too
      try {
        cfg.model = std::make_shared<const PeriodicSDEModel>(catalog_model(cfg.model_name, known));
      } catch (const ValidationError& err) {
        const auto it = sec.find(err.parameter());
        errors.push_back(at_line(it == sec.end() ? sec.at("name").line : it->second.line, err.what()));
      } catch (const std::exception& err) {
        errors.push_back(at_line(sec.at("name").line, err.what()));
      }
    }
  }

  static const ConfigSection empty;
  auto section = [&](const std::string& name) -> const ConfigSection& {
    const auto it = ini.find(name);
    return it == ini.end() ? empty : it->second;
  };

  // [plan]
  {
    Reader r(section("plan"), errors);
    r.real("h", cfg.plan.step, true);
    r.integer<std::size_t>("K", cfg.plan.horizon_periods, 1);
    r.integer<std::size_t>("N", cfg.plan.n_paths, 1);
    r.integer<std::uint64_t>("seed", cfg.plan.seed, 0);
    r.integer<std::size_t>("record_stride", cfg.plan.record_stride, 1);
    r.integer<std::size_t>("burn_in", cfg.plan.burn_in, 0);
    r.integer<std::size_t>("thin", cfg.plan.thin, 1);
    if (const auto* e = r.find("scheme")) {
      try {
        cfg.plan.scheme = parse_scheme(e->value);
      } catch (const std::exception& err) {
        r.fail(*e, err.what());
      }
    }
    if (const auto* e = r.find("x0")) {
      for (const auto& item : split_list(e->value)) {
        double v = 0.0;
        if (!Reader::to_double(item, v)) {
          r.fail(*e, "x0 entries must be numbers, got '" + item + "'");
          break;
        }
        cfg.plan.initial_state.push_back(v);
      }
      if (cfg.model && cfg.plan.initial_state.size() != cfg.model->d())
        r.fail(*e, "x0 has " + std::to_string(cfg.plan.initial_state.size()) + " entries, model dimension is " +
                     std::to_string(cfg.model->d()));
    }
    if (cfg.model) {
      try {
        const std::size_t n_per = steps_per_period(cfg.model->period(), cfg.plan.step);
        if (n_per % cfg.plan.record_stride != 0)
          r.fail(r.find("record_stride") ? *r.find("record_stride") : *r.find("h"),
                 "record_stride must divide T/h = " + std::to_string(n_per));
      } catch (const std::exception& err) {
        const auto* e = r.find("h");
        errors.push_back(at_line(e ? e->line : 0, err.what()));
      }
    }
  }

  // [check]
  {
    Reader r(section("check"), errors);
    auto& g = cfg.check.grid;
    r.real("r_min", g.r_min, true);
    r.real("r_max", g.r_max, true);
    r.integer<std::size_t>("n_radial", g.n_radial, 2);
    r.integer<std::size_t>("n_angular", g.n_angular, 1);
    r.integer<std::size_t>("n_time", g.n_time, 1);
    r.optional_real("epsilon", g.epsilon, true);
    r.real("delta_lambda", g.delta_lambda, false);
    r.integer<std::size_t>("refine_passes", g.refine_passes, 0);
    r.real("box", g.box, true);
    r.real("bound_cap", g.bound_cap, true);
    r.integer<std::size_t>("c0_grid", g.c0_grid, 3);
    r.boolean("aronson", cfg.check.aronson);
    r.optional_real("veretennikov_M", cfg.check.veretennikov_M, true);
    r.real("veretennikov_r", cfg.check.veretennikov_r, false);
    r.boolean("degenerate", cfg.check.degenerate);
    r.boolean("levy", cfg.check.levy);
    r.optional_real("levy_stable_alpha", cfg.check.levy_stable_alpha, false);
    r.boolean("periodicity", cfg.check.periodicity);
    r.real("periodicity_s", cfg.check.periodicity_s, false);
    r.real("periodicity_delta", cfg.check.periodicity_delta, true);
    r.integer<std::size_t>("periodicity_N", cfg.check.periodicity_n, 10);
    try {
      g.validate();
    } catch (const std::exception& err) {
      errors.push_back(at_line(0, std::string("[check]: ") + err.what()));
    }
  }

  // [functional]
  {
    const auto& sec = section("functional");
    Reader r(sec, errors);
    if (const auto* e = r.find("F"))
      cfg.functional.F = e->value;
    if (const auto* e = r.find("density"))
      cfg.functional.density = e->value;
    if (const auto* e = r.find("atoms")) {
      for (const auto& item : split_list(e->value)) {
        if (item.empty())
          continue;
        const auto colon = item.find(':');
        double s = 0.0, w = 0.0;
        if (colon == std::string::npos || !Reader::to_double(trim(item.substr(0, colon)), s) ||
            !Reader::to_double(trim(item.substr(colon + 1)), w)) {
          r.fail(*e, "atoms entries must be s:w, got '" + item + "'");
          break;
        }
        cfg.functional.atoms.push_back(Atom{ s, w });
      }
    }
    if (cfg.model) {
      try {
        (void)cfg.make_functional();
      } catch (const std::exception& err) {
        const auto* e = r.find("F");
        errors.push_back(at_line(e ? e->line : 0, std::string("[functional]: ") + err.what()));
      }
    }
  }

  // [output]
  {
    Reader r(section("output"), errors);
    if (const auto* e = r.find("directory"))
      cfg.output.directory = e->value;
    if (const auto* e = r.find("formats")) {
      cfg.output.csv = cfg.output.json = false;
      for (const auto& f : split_list(e->value)) {
        if (f == "csv")
          cfg.output.csv = true;
        else if (f == "json")
          cfg.output.json = true;
        else
          r.fail(*e, "unknown output format '" + f + "' (csv, json)");
      }
    }
  }

  if (!errors.empty()) {
    std::stable_sort(errors.begin(), errors.end(), [](const std::string& a, const std::string& b) {
      auto num = [](const std::string& s) { return std::stoul(s.substr(5, s.find(':') - 5)); };
      return num(a) < num(b);
    });
    throw ConfigError(std::move(errors));
  }
  return cfg;
}

RunConfig
load_config(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config_text(ss.str());
}

} // namespace pergo
