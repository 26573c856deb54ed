#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "signsgd/simulation.hpp"

namespace signsgd {

/// Sectioned key = value text, e.g.
///
///   [optimizer]
///   rule = signum
///   eta = 1e-4
///
/// Lines starting with '#' or ';' are comments. Keys are addressed with
/// dotted names ("optimizer.eta") when overriding.
class KeyValueConfig {
 public:
  using Section = std::map<std::string, std::string>;

  static KeyValueConfig parse(std::string_view text);
  /// Reads an INI-style file, or the "config" object of a summary.json.
  /// Throws kConfigNotFound if the file does not exist.
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& section, const std::string& key, std::string value);
  /// "section.key=value"
  void apply_override(std::string_view assignment);

  const std::map<std::string, Section>& sections() const noexcept { return sections_; }
  const std::string* find(const std::string& section, const std::string& key) const;

  std::string to_text() const;

 private:
  std::map<std::string, Section> sections_;
};

ExperimentConfig to_experiment(const KeyValueConfig& kv);
KeyValueConfig from_experiment(const ExperimentConfig& cfg);

/// Shortest decimal string that parses back to the same double; "nan",
/// "inf" and "-inf" for non-finite values.
std::string format_double(double v);
double parse_double(std::string_view text);
std::uint64_t parse_unsigned(std::string_view text);

}  // namespace signsgd
