#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "camda/cli/config.hpp"

namespace camda::cli {

std::string version_string();

/// Provenance record written next to every command's outputs.
struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  std::string config_hash;
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<std::filesystem::path> outputs;  // hashed at write time

  void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
  std::string text() const;
};

void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Writes `<stem>config.txt` (the resolved snapshot) and `<stem>manifest.txt`
/// into `dir`.
void write_run_record(const std::filesystem::path& dir, const std::string& stem, const RunConfig& config,
                      Manifest manifest);

/// FNV-1a 64-bit of a file's bytes, 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace camda::cli
