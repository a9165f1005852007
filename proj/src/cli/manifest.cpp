#include "camda/cli/manifest.hpp"

#include <Eigen/Core>
#include <fstream>
#include <sstream>

#include "camda/distortion/jpeg.hpp"
#include "camda/harness/scenarios.hpp"

namespace camda::cli {

namespace fs = std::filesystem;

#ifndef CAMDA_VERSION
#define CAMDA_VERSION "0.0.0"
#endif

std::string version_string() {
  std::ostringstream s;
  s << "camda " << CAMDA_VERSION << "; eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
    << EIGEN_MINOR_VERSION;
#if defined(__clang__)
  s << "; clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
  s << "; gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#endif
  return s.str();
}

std::string file_digest(const fs::path& path) {
  const auto bytes = distortion::read_bytes(path);
  return harness::fnv1a_hex(std::string(bytes.begin(), bytes.end()));
}

std::string Manifest::text() const {
  std::ostringstream s;
  s << "command = " << command << '\n';
  s << "argv =";
  for (const auto& a : argv) s << ' ' << a;
  s << '\n';
  s << "config-hash = " << config_hash << '\n';
  s << "version = " << version_string() << '\n';
  for (const auto& [k, v] : entries) s << k << " = " << v << '\n';
  for (const auto& p : outputs) {
    s << "output = " << p.string();
    if (fs::is_regular_file(p)) s << " fnv1a:" << file_digest(p);
    s << '\n';
  }
  return s.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

void write_run_record(const fs::path& dir, const std::string& stem, const RunConfig& config, Manifest manifest) {
  manifest.command = config.command();
  manifest.config_hash = config.hash();
  write_text_file(dir / (stem + "config.txt"), config.snapshot());
  write_text_file(dir / (stem + "manifest.txt"), manifest.text());
}

}  // namespace camda::cli
