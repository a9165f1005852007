#include "camda/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "camda/harness/scenarios.hpp"

namespace camda::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || p != end) {
    throw ConfigError("key '" + key + "': '" + text + "' is not a valid number");
  }
  return v;
}

}  // namespace

std::string normalize_key(const std::string& key) {
  std::string k = trim(key);
  for (char& c : k) {
    c = c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return k;
}

KeyValues parse_config_text(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = normalize_key(t.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
    if (!out.emplace(key, trim(t.substr(eq + 1))).second) {
      throw ConfigError("config line " + std::to_string(number) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

KeyValues load_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  try {
    return parse_config_text(s.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunConfig::RunConfig(std::string command, std::vector<KeySpec> keys)
    : command_(std::move(command)), keys_(std::move(keys)) {
  for (const auto& k : keys_) values_[k.name] = k.default_value;
}

bool RunConfig::declared(const std::string& key) const { return values_.count(key) != 0; }

void RunConfig::merge(const KeyValues& values) {
  for (const auto& [k, v] : values) set(k, v);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string k = normalize_key(key);
  auto it = values_.find(k);
  if (it == values_.end()) throw ConfigError("unknown key '" + k + "' for command " + command_);
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::logic_error("undeclared key '" + key + "'");
  return it->second;
}

const std::string& RunConfig::require(const std::string& key) const {
  const std::string& v = get(key);
  if (v.empty()) throw ConfigError("missing required setting '" + key + "'");
  return v;
}

int RunConfig::get_int(const std::string& key) const { return parse_number<int>(key, require(key)); }

double RunConfig::get_double(const std::string& key) const { return parse_number<double>(key, require(key)); }

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(key, require(key));
}

bool RunConfig::get_bool(const std::string& key) const {
  std::string v = get(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off" || v.empty()) return false;
  throw ConfigError("key '" + key + "': '" + get(key) + "' is not a boolean");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string RunConfig::snapshot() const {
  std::ostringstream s;
  s << "# resolved settings for '" << command_ << "'\n";
  for (const auto& k : keys_) {
    const std::string& v = values_.at(k.name);
    s << k.name << " =";
    if (!v.empty()) s << ' ' << v;
    s << '\n';
  }
  return s.str();
}

std::string RunConfig::hash() const { return harness::fnv1a_hex(command_ + '\n' + snapshot()); }

}  // namespace camda::cli
