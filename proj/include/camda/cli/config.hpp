#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace camda::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class KeyKind { Value, Flag, List };

struct KeySpec {
  std::string name;  // dashed, e.g. "epochs-const"
  std::string default_value;
  std::string help;
  KeyKind kind = KeyKind::Value;
};

using KeyValues = std::map<std::string, std::string>;

/// Lowercases and maps '_' to '-' so `lambda_c` and `lambda-c` name the same key.
std::string normalize_key(const std::string& key);

/// Line-oriented `key = value`. Blank lines and lines starting with '#' are
/// skipped; a repeated key or a line without '=' raises ConfigError with
/// the line number.
KeyValues parse_config_text(const std::string& text);
KeyValues load_config_file(const std::filesystem::path& path);

/// Settings of one command: defaults, overridden by a config file, overridden
/// by flags. Only declared keys are accepted.
class RunConfig {
 public:
  RunConfig(std::string command, std::vector<KeySpec> keys);

  void merge(const KeyValues& values);
  void set(const std::string& key, const std::string& value);

  bool declared(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  /// True when the key holds a non-empty value.
  bool has(const std::string& key) const { return !get(key).empty(); }
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  /// Throws ConfigError naming the key when it is empty.
  const std::string& require(const std::string& key) const;

  const std::string& command() const { return command_; }
  const std::vector<KeySpec>& keys() const { return keys_; }
  const KeyValues& values() const { return values_; }

  /// `key = value` lines in declaration order, loadable with --config.
  std::string snapshot() const;
  std::string hash() const;

 private:
  std::string command_;
  std::vector<KeySpec> keys_;
  KeyValues values_;
};

}  // namespace camda::cli
