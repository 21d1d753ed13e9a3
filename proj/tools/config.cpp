#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cutoff/error.hpp"

namespace cutoff::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

std::int64_t parse_int(const std::string& where, const std::string& s) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) bad(where, "expected an integer, got '" + s + "'");
  return v;
}

double parse_real(const std::string& where, const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
    bad(where, "expected a finite number, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& where, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad(where, "expected a boolean, got '" + s + "'");
}

std::vector<double> parse_reals(const std::string& where, const std::string& s) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_real(where, part));
  return out;
}

std::vector<std::size_t> parse_counts(const std::string& where, const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& part : split(s, ',')) {
    const auto v = parse_int(where, part);
    if (v < 0) bad(where, "negative entry " + part);
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<double> parse_grid(const std::string& where, const std::string& s) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    const auto parts = split(s, ':');
    if (parts.size() != 3) bad(where, "grid must be start:stop:step");
    const double a = parse_real(where, parts[0]);
    const double b = parse_real(where, parts[1]);
    const double h = parse_real(where, parts[2]);
    if (h <= 0.0 || b < a) bad(where, "grid needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9));
    if (n > 1000000) bad(where, "grid has too many points");
    for (std::size_t k = 0; k <= n; ++k) out.push_back(a + static_cast<double>(k) * h);
  } else {
    out = parse_reals(where, s);
  }
  if (out.front() < 0.0) bad(where, "grid times must be nonnegative");
  if (!std::is_sorted(out.begin(), out.end())) bad(where, "grid times must be increasing");
  return out;
}

void validate(const std::string& where, Kind kind, const std::string& value) {
  switch (kind) {
    case Kind::integer: parse_int(where, value); break;
    case Kind::real: parse_real(where, value); break;
    case Kind::boolean: parse_bool(where, value); break;
    case Kind::text: break;
    case Kind::real_list: parse_reals(where, value); break;
    case Kind::size_list: parse_counts(where, value); break;
    case Kind::grid: parse_grid(where, value); break;
  }
}

SectionSpec run_section(bool with_seed) {
  SectionSpec s{"run",
                {{"threads", Kind::integer, "0"},
                 {"output", Kind::text, ""},
                 {"execution", Kind::text, "parallel"}}};
  if (with_seed) s.keys.push_back({"seed", Kind::integer, "1"});
  return s;
}

SectionSpec model_section() {
  return {"model",
          {{"family", Kind::text, "ising_ferro"},
           {"beta", Kind::real, "0.4"},
           {"h", Kind::real, "0"},
           {"rule", Kind::text, "heat_bath"}}};
}

SectionSpec geometry_section() {
  return {"geometry", {{"dimension", Kind::integer, "1"}, {"sides", Kind::size_list, "8"}}};
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> list{"oracle", "support", "mixing", "gap", "verify"};
  return list;
}

Schema schema_for(const std::string& command) {
  if (command == "oracle") {
    return {run_section(true), model_section(), geometry_section(),
            {"oracle",
             {{"times", Kind::grid, "0:6:0.5"},
              {"eigenvalues", Kind::integer, "16"},
              {"log_sobolev", Kind::boolean, "false"},
              {"restarts", Kind::integer, "8"},
              {"box", Kind::size_list, ""}}}};
  }
  if (command == "support") {
    return {run_section(true), model_section(), geometry_section(),
            {"support",
             {{"times", Kind::grid, "0:4:1"},
              {"block_side", Kind::integer, "0"},
              {"halo", Kind::integer, "0"},
              {"realizations", Kind::integer, "1"},
              {"max_diameter", Kind::integer, "0"},
              {"min_separation", Kind::integer, "0"},
              {"max_components", Kind::integer, "0"},
              {"maps_per_time", Kind::boolean, "true"},
              {"exact_check", Kind::boolean, "false"}}}};
  }
  if (command == "mixing") {
    return {run_section(true), model_section(),
            {"mixing",
             {{"dimension", Kind::integer, "1"},
              {"sides", Kind::size_list, std::nullopt},
              {"epsilons", Kind::real_list, std::nullopt},
              {"times", Kind::grid, ""},
              {"time_step", Kind::real, "0.25"},
              {"upper_replicas", Kind::integer, "1000"},
              {"lower_replicas", Kind::integer, "2000"},
              {"reference_gap", Kind::real, ""}}}};
  }
  if (command == "gap") {
    return {run_section(true), model_section(),
            {"gap",
             {{"dimension", Kind::integer, "1"},
              {"sides", Kind::size_list, "16,32,64"},
              {"times", Kind::grid, "0:20:0.5"},
              {"replicas", Kind::integer, "20000"},
              {"window_low", Kind::real, ""},
              {"window_high", Kind::real, ""},
              {"synthetic", Kind::boolean, "false"},
              {"synthetic_lambda", Kind::real, "0.5"}}}};
  }
  if (command == "verify") {
    return {run_section(false),
            {"verify",
             {{"quick", Kind::boolean, "false"},
              {"inject_failure", Kind::integer, "0"},
              {"seed", Kind::integer, "20240601"}}}};
  }
  throw ConfigError("unknown command '" + command + "'");
}

RunConfig RunConfig::load(const std::string& command, const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides) {
  const Schema schema = schema_for(command);
  auto find_key = [&](const std::string& section, const std::string& key) -> const KeySpec& {
    const auto s = std::find_if(schema.begin(), schema.end(), [&](const SectionSpec& x) { return x.name == section; });
    if (s == schema.end()) throw ConfigError("unknown section [" + section + "] for command " + command);
    const auto k = std::find_if(s->keys.begin(), s->keys.end(), [&](const KeySpec& x) { return x.key == key; });
    if (k == s->keys.end()) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
    return *k;
  };

  RunConfig cfg;
  cfg.command_ = command;
  std::map<std::string, std::map<std::string, std::string>> given;

  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + path->string());
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(path->string() + ": " + e.message() + " at line " + std::to_string(e.line()));
    }
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
      if (std::none_of(schema.begin(), schema.end(), [&](const SectionSpec& x) { return x.name == section; })) {
        throw ConfigError("unknown section [" + section + "] for command " + command);
      }
      for (const auto& [key, value] : body) {
        find_key(section, key);
        given[section][key] = trim(value.get_value<std::string>());
      }
    }
  }

  static const std::regex pattern(R"(--([a-z_][a-z0-9_]*)\.([a-z_][a-z0-9_]*)=(.*))");
  for (const auto& o : overrides) {
    std::smatch m;
    if (!std::regex_match(o, m, pattern)) throw ConfigError("malformed override '" + o + "'");
    find_key(m[1], m[2]);
    given[m[1]][m[2]] = trim(m[3]);
  }

  for (const auto& section : schema) {
    for (const auto& spec : section.keys) {
      const std::string where = "[" + section.name + "] " + spec.key;
      std::string value;
      if (auto s = given.find(section.name); s != given.end() && s->second.count(spec.key)) {
        value = s->second.at(spec.key);
        if (value.empty() && !spec.fallback) throw ConfigError(where + ": required value is empty");
      } else if (spec.fallback) {
        value = *spec.fallback;
      } else {
        throw ConfigError(where + ": required key is missing");
      }
      if (!value.empty()) validate(where, spec.kind, value);
      cfg.values_[section.name][spec.key] = value;
    }
  }
  return cfg;
}

const std::string& RunConfig::raw(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  if (s == values_.end() || !s->second.count(key)) {
    throw ConfigError("no key '" + key + "' in section [" + section + "]");
  }
  return s->second.at(key);
}

bool RunConfig::is_set(const std::string& section, const std::string& key) const {
  return !raw(section, key).empty();
}

std::int64_t RunConfig::integer(const std::string& section, const std::string& key) const {
  return parse_int("[" + section + "] " + key, raw(section, key));
}

std::size_t RunConfig::count(const std::string& section, const std::string& key) const {
  const auto v = integer(section, key);
  if (v < 0) bad("[" + section + "] " + key, "must be nonnegative");
  return static_cast<std::size_t>(v);
}

double RunConfig::real(const std::string& section, const std::string& key) const {
  return parse_real("[" + section + "] " + key, raw(section, key));
}

std::optional<double> RunConfig::optional_real(const std::string& section, const std::string& key) const {
  if (!is_set(section, key)) return std::nullopt;
  return real(section, key);
}

bool RunConfig::flag(const std::string& section, const std::string& key) const {
  return parse_bool("[" + section + "] " + key, raw(section, key));
}

const std::string& RunConfig::text(const std::string& section, const std::string& key) const {
  return raw(section, key);
}

std::vector<double> RunConfig::reals(const std::string& section, const std::string& key) const {
  if (!is_set(section, key)) return {};
  return parse_reals("[" + section + "] " + key, raw(section, key));
}

std::vector<std::size_t> RunConfig::counts(const std::string& section, const std::string& key) const {
  if (!is_set(section, key)) return {};
  return parse_counts("[" + section + "] " + key, raw(section, key));
}

std::vector<double> RunConfig::grid(const std::string& section, const std::string& key) const {
  if (!is_set(section, key)) return {};
  return parse_grid("[" + section + "] " + key, raw(section, key));
}

std::vector<std::string> extract_overrides(std::vector<std::string>& args) {
  std::vector<std::string> overrides, rest;
  for (auto& a : args) {
    const auto eq = a.find('=');
    const auto dot = a.find('.');
    if (a.rfind("--", 0) == 0 && dot != std::string::npos && eq != std::string::npos && dot < eq) {
      overrides.push_back(std::move(a));
    } else {
      rest.push_back(std::move(a));
    }
  }
  args = std::move(rest);
  return overrides;
}

}  // namespace cutoff::cli
