#include "scanflow_app/config.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace scanflow::app {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"scan", {"input", "spacing", "threshold", "sidecar"}},
      {"spline", {"degree", "cells", "max_level_jump"}},
      {"segmentation", {"preserve_topology", "window", "max_depth", "lattice"}},
      {"tessellation", {"depth"}},
      {"quadrature", {"strategy", "criterion", "budget", "target", "radius", "center", "max_iterations", "order_cap"}},
      {"stokes", {"problem", "mu", "beta", "gamma_g", "gamma_s", "boundary", "levels", "center", "radius", "corner"}},
      {"adaptivity", {"theta", "steps", "tol", "mask", "mode", "max_level", "vtk_steps"}},
      {"bench", {"degrees", "depths", "adaptive_steps", "uniform_steps", "fit_points", "localize_step"}},
      {"output", {"directory", "formats"}},
  };
  return s;
}

double to_double(const std::string& s, bool& ok) {
  const std::string t = boost::algorithm::trim_copy(s);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  ok = r.ec == std::errc() && r.ptr == t.data() + t.size() && !t.empty();
  return v;
}

}  // namespace

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    bool ok = false;
    out.push_back(to_double(item, ok));
    if (!ok) throw ConfigError("not a number list: '" + text + "'");
  }
  return out;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

RunConfig RunConfig::parse(std::string_view text, const std::string& source) {
  RunConfig cfg;
  cfg.source_ = source;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, cfg.tree_);
  } catch (const pt::ini_parser_error& ex) {
    throw ConfigError(source + ":" + std::to_string(ex.line()) + ": " + ex.message());
  }
  // ptree drops line numbers; recover them for error messages.
  std::istringstream lines{std::string(text)};
  std::string line, section;
  for (int n = 1; std::getline(lines, line); ++n) {
    boost::algorithm::trim(line);
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      cfg.lines_[section] = n;
    } else if (auto eq = line.find('='); eq != std::string::npos) {
      cfg.lines_[section + "." + boost::algorithm::trim_copy(line.substr(0, eq))] = n;
    }
  }
  for (const auto& [section_name, keys] : cfg.tree_) {
    auto it = schema().find(section_name);
    if (it == schema().end() || keys.empty())
      throw ConfigError(cfg.where(section_name, "") + ": unknown section [" + section_name + "]");
    for (const auto& kv : keys)
      if (!it->second.contains(kv.first))
        throw ConfigError(cfg.where(section_name, kv.first) + ": unknown key '" + kv.first + "' in [" + section_name +
                          "]");
  }
  return cfg;
}

std::string RunConfig::where(const std::string& section, const std::string& key) const {
  auto it = lines_.find(key.empty() ? section : section + "." + key);
  return it == lines_.end() ? source_ : source_ + ":" + std::to_string(it->second);
}

void RunConfig::bad_value(const std::string& section, const std::string& key, const std::string& why) const {
  throw ConfigError(where(section, key) + ": [" + section + "] " + key + ": " + why);
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
  return static_cast<bool>(tree_.get_optional<std::string>(pt::ptree::path_type(section + "." + key, '.')));
}

std::string RunConfig::get_string(const std::string& section, const std::string& key) const {
  auto v = tree_.get_optional<std::string>(pt::ptree::path_type(section + "." + key, '.'));
  if (!v) throw ConfigError(source_ + ": missing key '" + key + "' in [" + section + "]");
  return boost::algorithm::trim_copy(*v);
}

std::string RunConfig::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

double RunConfig::get_double(const std::string& section, const std::string& key, std::optional<double> fallback) const {
  if (!has(section, key) && fallback) return *fallback;
  bool ok = false;
  const double v = to_double(get_string(section, key), ok);
  if (!ok) bad_value(section, key, "expected a number");
  return v;
}

int RunConfig::get_int(const std::string& section, const std::string& key, std::optional<int> fallback) const {
  if (!has(section, key) && fallback) return *fallback;
  const std::string s = get_string(section, key);
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad_value(section, key, "expected an integer");
  return v;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key, std::optional<bool> fallback) const {
  if (!has(section, key) && fallback) return *fallback;
  const std::string s = get_string(section, key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(section, key, "expected a boolean");
}

std::vector<double> RunConfig::get_list(const std::string& section, const std::string& key,
                                        std::optional<std::vector<double>> fallback) const {
  if (!has(section, key) && fallback) return *fallback;
  try {
    return parse_list(get_string(section, key));
  } catch (const ConfigError& ex) {
    bad_value(section, key, ex.what());
  }
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  auto it = schema().find(section);
  if (it == schema().end() || !it->second.contains(key))
    throw ConfigError("unknown override [" + section + "] " + key);
  tree_.put(pt::ptree::path_type(section + "." + key, '.'), value);
}

void RunConfig::require(const std::vector<std::string>& keys) const {
  for (const auto& k : keys) {
    const auto dot = k.find('.');
    if (!has(k.substr(0, dot), k.substr(dot + 1)))
      throw ConfigError(source_ + ": missing key '" + k.substr(dot + 1) + "' in [" + k.substr(0, dot) + "]");
  }
}

std::filesystem::path RunConfig::base_dir() const {
  if (source_.empty() || source_.front() == '<') return std::filesystem::current_path();
  return std::filesystem::absolute(std::filesystem::path(source_)).parent_path();
}

}  // namespace scanflow::app
