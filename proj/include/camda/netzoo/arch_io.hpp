#pragma once

#include <filesystem>
#include <string>

#include "camda/netzoo/arch.hpp"

namespace camda::netzoo {

/// Malformed architecture text; carries the 1-based offending line.
class ArchitectureParseError : public ArchitectureError {
 public:
  ArchitectureParseError(int line, const std::string& message)
      : ArchitectureError("line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Plain-text architecture format, one layer per line:
//
//   arch name=sd in=3
//   conv c=64 k=4 s=2 pad=1 norm=none act=lrelu
//   resblock c=256 norm=instance
//   convt c=128 k=3 s=2 pad=1 outpad=1 norm=instance act=relu
//
// '#' starts a comment. The optional `arch` line sets name and input channels.
std::string to_text(const ArchitectureSpec& spec);
ArchitectureSpec parse_architecture(const std::string& text, const std::string& default_name = "custom");
ArchitectureSpec load_architecture(const std::filesystem::path& path);
void save_architecture(const ArchitectureSpec& spec, const std::filesystem::path& path);

}  // namespace camda::netzoo
