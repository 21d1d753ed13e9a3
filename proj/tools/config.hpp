#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cutoff::cli {

enum class Kind { integer, real, boolean, text, real_list, size_list, grid };

struct KeySpec {
  std::string key;
  Kind kind;
  std::optional<std::string> fallback;  // nullopt: the key is required
};

struct SectionSpec {
  std::string name;
  std::vector<KeySpec> keys;
};

using Schema = std::vector<SectionSpec>;

const std::vector<std::string>& commands();
Schema schema_for(const std::string& command);

// Resolved, validated configuration of one run. Values are kept as their
// canonical strings; typed getters re-parse on demand.
class RunConfig {
 public:
  // Throws ConfigError on unreadable files, unknown sections or keys,
  // malformed values and missing required keys.
  static RunConfig load(const std::string& command, const std::optional<std::filesystem::path>& path,
                        const std::vector<std::string>& overrides);

  const std::string& command() const noexcept { return command_; }
  const std::map<std::string, std::map<std::string, std::string>>& resolved() const noexcept { return values_; }

  bool is_set(const std::string& section, const std::string& key) const;
  std::int64_t integer(const std::string& section, const std::string& key) const;
  std::size_t count(const std::string& section, const std::string& key) const;  // nonnegative integer
  double real(const std::string& section, const std::string& key) const;
  std::optional<double> optional_real(const std::string& section, const std::string& key) const;
  bool flag(const std::string& section, const std::string& key) const;
  const std::string& text(const std::string& section, const std::string& key) const;
  std::vector<double> reals(const std::string& section, const std::string& key) const;
  std::vector<std::size_t> counts(const std::string& section, const std::string& key) const;
  // "start:stop:step" (inclusive) or a comma list; sorted and nonnegative.
  std::vector<double> grid(const std::string& section, const std::string& key) const;

 private:
  const std::string& raw(const std::string& section, const std::string& key) const;

  std::string command_;
  std::map<std::string, std::map<std::string, std::string>> values_;
};

// Removes `--section.key=value` arguments from `args` and returns them in order.
std::vector<std::string> extract_overrides(std::vector<std::string>& args);

}  // namespace cutoff::cli
