#pragma once

#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scanflow::app {

/// Bad or missing configuration. what() carries file:line when known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// INI run configuration with a fixed set of sections and keys.
class RunConfig {
 public:
  RunConfig() = default;
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(std::string_view text, const std::string& source = "<memory>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, std::optional<double> fallback = {}) const;
  int get_int(const std::string& section, const std::string& key, std::optional<int> fallback = {}) const;
  bool get_bool(const std::string& section, const std::string& key, std::optional<bool> fallback = {}) const;
  /// Comma separated numbers, e.g. "0.1,-0.1".
  std::vector<double> get_list(const std::string& section, const std::string& key,
                               std::optional<std::vector<double>> fallback = {}) const;

  /// Overrides coming from command-line flags.
  void set(const std::string& section, const std::string& key, const std::string& value);
  /// Throws unless every listed "section.key" is present.
  void require(const std::vector<std::string>& keys) const;

  const std::string& source() const { return source_; }
  /// Directory of the config file, used to resolve relative paths.
  std::filesystem::path base_dir() const;

 private:
  std::string where(const std::string& section, const std::string& key) const;
  [[noreturn]] void bad_value(const std::string& section, const std::string& key, const std::string& why) const;

  std::string source_ = "<memory>";
  boost::property_tree::ptree tree_;
  std::map<std::string, int> lines_;  // "section.key" -> 1-based line
};

std::vector<double> parse_list(const std::string& text);

}  // namespace scanflow::app
